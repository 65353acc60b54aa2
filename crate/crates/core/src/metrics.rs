//! Mission record keeping and the on-disk output formats.
//!
//! Deterministic outputs: `timeline.csv` (t, explored fraction),
//! `events.csv` (t, tick, kind, uav, detail) and `summary.json`. Wall-clock
//! measurements go to `timings.csv` only, which is the one file two
//! identical runs are allowed to differ in.

use crate::allocator::{Assignment, GoalChoice, Strategy};
use crate::collision_guard::{GuardEvent, SafetyZone};
use crate::error::Result;
use crate::geom::Vec3;
use crate::occupancy_map::UavId;
use serde::Serialize;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

#[derive(Debug, Clone)]
pub struct Event {
    pub t: f64,
    pub tick: u64,
    pub kind: &'static str,
    pub uav: Option<UavId>,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct TimingRow {
    pub module: &'static str,
    pub tick: u64,
    pub micros: u64,
}

/// Per-step snapshot used by safety analyses; kept in memory, not exported.
#[derive(Debug, Clone, Copy)]
pub struct TrajectorySample {
    pub t: f64,
    pub p_pos: Vec3,
    pub s_pos: Vec3,
    /// Primary displacement during this step.
    pub p_moved: f64,
    /// Zone of the end-of-step separation.
    pub zone: SafetyZone,
    /// Whether the collision guard ran at the end of this step.
    pub guard_ran: bool,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Interventions {
    pub halts: u64,
    pub escape_dispatches: u64,
    pub safety_stalls: u64,
    pub resumes: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub scenario: String,
    pub strategy: Strategy,
    pub seed: u64,
    pub completed: bool,
    pub t_final: f64,
    pub t_95: Option<f64>,
    pub explored_fraction: f64,
    pub total_pois: u64,
    pub allocations: u64,
    pub min_inter_uav_distance: f64,
    pub interventions: Interventions,
}

#[derive(Debug, Clone)]
pub struct MetricsRecord {
    pub timeline: Vec<(f64, f64)>,
    pub events: Vec<Event>,
    pub timings: Vec<TimingRow>,
    pub trajectory: Vec<TrajectorySample>,
    /// Escape dispatches as (x_p, x_s, goal) for exact-geometry checks.
    pub escapes: Vec<(Vec3, Vec3, Vec3)>,
    pub summary: Summary,
}

impl MetricsRecord {
    pub fn new(scenario: String, strategy: Strategy, seed: u64) -> MetricsRecord {
        MetricsRecord {
            timeline: Vec::new(),
            events: Vec::new(),
            timings: Vec::new(),
            trajectory: Vec::new(),
            escapes: Vec::new(),
            summary: Summary {
                scenario,
                strategy,
                seed,
                completed: false,
                t_final: 0.0,
                t_95: None,
                explored_fraction: 0.0,
                total_pois: 0,
                allocations: 0,
                min_inter_uav_distance: f64::INFINITY,
                interventions: Interventions::default(),
            },
        }
    }

    pub fn push_event(&mut self, t: f64, tick: u64, kind: &'static str, uav: Option<UavId>, detail: String) {
        self.events.push(Event { t, tick, kind, uav, detail });
    }

    pub fn log_frontier_tick(&mut self, t: f64, tick: u64, cells: usize, clusters: usize, pois: usize) {
        self.push_event(
            t,
            tick,
            "frontiers",
            None,
            format!("cells={cells} clusters={clusters} pois={pois}"),
        );
    }

    pub fn log_allocation(
        &mut self,
        t: f64,
        tick: u64,
        strategy: Strategy,
        n_pois: usize,
        n_arcs: usize,
        a: &Assignment,
    ) {
        self.summary.allocations += 1;
        let goal = |g: &GoalChoice| match g {
            GoalChoice::Stay => "stay".to_string(),
            GoalChoice::Goal(p) => format!("({:.3}|{:.3}|{:.3})", p.position.x, p.position.y, p.position.z),
        };
        self.push_event(
            t,
            tick,
            "alloc",
            None,
            format!(
                "strategy={} n_pois={} n_arcs={} goal_p={} goal_s={} total_cost={:.3}",
                strategy.name(),
                n_pois,
                n_arcs,
                goal(&a.goal_p),
                goal(&a.goal_s),
                a.total_cost
            ),
        );
    }

    pub fn log_guard_event(&mut self, t: f64, tick: u64, ev: &GuardEvent) {
        match ev {
            GuardEvent::ZoneChange { from, to, distance } => {
                let from = from.map(|z| z.name()).unwrap_or("none");
                self.push_event(
                    t,
                    tick,
                    "zone",
                    None,
                    format!("from={from} to={} d={distance:.3}", to.name()),
                );
            }
            GuardEvent::PrimaryHalt => {
                self.summary.interventions.halts += 1;
                self.push_event(t, tick, "halt", Some(UavId::Primary), String::new());
            }
            GuardEvent::PrimaryResume => {
                self.summary.interventions.resumes += 1;
                self.push_event(t, tick, "resume", Some(UavId::Primary), String::new());
            }
            GuardEvent::EscapeDispatch { x_p, x_s, goal, waypoint_count } => {
                self.summary.interventions.escape_dispatches += 1;
                self.escapes.push((*x_p, *x_s, *goal));
                self.push_event(
                    t,
                    tick,
                    "escape_dispatch",
                    Some(UavId::Secondary),
                    format!(
                        "goal=({:.3}|{:.3}|{:.3}) waypoints={waypoint_count}",
                        goal.x, goal.y, goal.z
                    ),
                );
            }
            GuardEvent::SafetyStall => {
                self.summary.interventions.safety_stalls += 1;
                self.push_event(t, tick, "safety_stall", Some(UavId::Secondary), String::new());
            }
            GuardEvent::SecondaryRequeued => {
                self.push_event(t, tick, "requeue", Some(UavId::Secondary), String::new());
            }
        }
    }

    /// First time the explored fraction reaches 0.95, linearly interpolated
    /// between the samples that bracket the crossing.
    pub fn t95_from_timeline(timeline: &[(f64, f64)]) -> Option<f64> {
        const TARGET: f64 = 0.95;
        let mut prev: Option<(f64, f64)> = None;
        for &(t, f) in timeline {
            if f >= TARGET {
                return Some(match prev {
                    Some((t0, f0)) if f > f0 => t0 + (t - t0) * (TARGET - f0) / (f - f0),
                    _ => t,
                });
            }
            prev = Some((t, f));
        }
        None
    }

    pub fn finalize(&mut self, t_final: f64, fraction: f64, completed: bool) {
        self.summary.t_final = t_final;
        self.summary.explored_fraction = fraction;
        self.summary.completed = completed;
        self.summary.t_95 = Self::t95_from_timeline(&self.timeline);
    }
}

/// Write `timeline.csv`, `events.csv`, `timings.csv` and `summary.json`.
pub fn write_outputs(record: &MetricsRecord, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;

    let mut timeline = String::from("t,explored_fraction\n");
    for (t, f) in &record.timeline {
        writeln!(timeline, "{t:.6},{f:.9}").expect("string write");
    }
    std::fs::write(dir.join("timeline.csv"), timeline)?;

    let mut events = String::from("t,tick,kind,uav,detail\n");
    for e in &record.events {
        let uav = e.uav.map(|u| u.name()).unwrap_or("");
        writeln!(events, "{:.6},{},{},{},{}", e.t, e.tick, e.kind, uav, e.detail)
            .expect("string write");
    }
    std::fs::write(dir.join("events.csv"), events)?;

    let mut timings = String::from("module,tick,micros\n");
    for row in &record.timings {
        writeln!(timings, "{},{},{}", row.module, row.tick, row.micros).expect("string write");
    }
    std::fs::write(dir.join("timings.csv"), timings)?;

    let mut file = std::fs::File::create(dir.join("summary.json"))?;
    let json = serde_json::to_string_pretty(&record.summary).expect("summary serializes");
    file.write_all(json.as_bytes())?;
    file.write_all(b"\n")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_record_writes_headers_only() {
        let rec = MetricsRecord::new("x".into(), Strategy::Greedy, 0);
        let dir = tempfile::tempdir().unwrap();
        write_outputs(&rec, dir.path()).unwrap();
        let timeline = std::fs::read_to_string(dir.path().join("timeline.csv")).unwrap();
        assert_eq!(timeline, "t,explored_fraction\n");
        let events = std::fs::read_to_string(dir.path().join("events.csv")).unwrap();
        assert_eq!(events, "t,tick,kind,uav,detail\n");
        assert!(dir.path().join("summary.json").exists());
    }

    #[test]
    fn t95_interpolates_between_samples() {
        let timeline = vec![(0.0, 0.0), (1.0, 0.9), (2.0, 1.0)];
        let t95 = MetricsRecord::t95_from_timeline(&timeline).unwrap();
        assert!((t95 - 1.5).abs() < 1e-12, "{t95}");
        assert_eq!(MetricsRecord::t95_from_timeline(&[(0.0, 0.5)]), None);
        // already above the target at the first sample
        assert_eq!(MetricsRecord::t95_from_timeline(&[(3.0, 0.97)]), Some(3.0));
    }
}
