//! Deterministic fixed-timestep mission runner.
//!
//! Each step advances in a fixed order: (1) move every non-halted UAV along
//! its path, (2) at the sensor cadence, scan and integrate, (3) at the
//! frontier rate, regenerate candidates and rebuild the sphere graph, (4) at
//! the planning rate, run the monitoring/planning loop, (5) at the avoidance
//! rate, run the collision guard. Everything downstream of (1) consumes the
//! state produced earlier in the same step, so a mission is a pure function
//! of (scenario, config, seed).

use crate::allocator::AllocParams;
use crate::collision_guard::{self, GuardConfig, GuardState};
use crate::config::MissionConfig;
use crate::error::{Error, Result};
use crate::frontier_finder::{self, Poi};
use crate::geom::{splitmix64, wrap_angle, Vec3};
use crate::metrics::{MetricsRecord, TimingRow, TrajectorySample};
use crate::mission_planner::{self, PlannerConfig, PlannerMode, PlannerState};
use crate::occupancy_map::{ExploredMap, UavId};
use crate::scenario::{Scenario, UavSpec};
use crate::sphere_map::{self, SphereGraph, SphereParams};
use crate::voxel_world::{self, CellState, SensorModel, VoxelGrid};
use serde::Serialize;
use std::collections::{BTreeSet, VecDeque};
use std::path::Path;
use std::time::Instant;

#[derive(Debug, Clone)]
pub struct UavState {
    pub id: UavId,
    pub position: Vec3,
    pub heading: f64,
    pub radius: f64,
    pub speed: f64,
    pub sensor: SensorModel,
    pub goal: Option<Poi>,
    pub active_path: VecDeque<Vec3>,
    /// Set by the collision guard; a halted UAV does not move.
    pub halted: bool,
    /// While set, the guard owns this UAV and the planner leaves it alone.
    pub guard_controlled: bool,
}

impl UavState {
    pub fn from_spec(spec: &UavSpec) -> UavState {
        UavState {
            id: match spec.id.as_str() {
                "puav" => UavId::Primary,
                _ => UavId::Secondary,
            },
            position: spec.start,
            heading: spec.heading,
            radius: spec.radius,
            speed: spec.speed,
            sensor: spec.sensor.to_model(),
            goal: None,
            active_path: VecDeque::new(),
            halted: false,
            guard_controlled: false,
        }
    }
}

struct Periods {
    sensor: u64,
    front: u64,
    path: u64,
    coll: u64,
}

pub struct Simulation {
    world: VoxelGrid,
    scenario: Scenario,
    config: MissionConfig,
    map: ExploredMap,
    graph: SphereGraph,
    pois: Vec<Poi>,
    poi_cells: BTreeSet<crate::voxel_world::CellIndex>,
    planner: PlannerState,
    guard: GuardState,
    uavs: Vec<UavState>,
    record: MetricsRecord,
    step_index: u64,
    periods: Periods,
    planner_cfg: PlannerConfig,
    guard_cfg: GuardConfig,
    sphere_params: SphereParams,
    alloc_params: AllocParams,
}

impl Simulation {
    pub fn new(scenario: Scenario, config: MissionConfig) -> Result<Simulation> {
        scenario.validate()?;
        config.validate(scenario.resolution)?;
        let world = voxel_world::load_world(&scenario)?;
        for (k, u) in scenario.uavs.iter().enumerate() {
            let cell = world
                .world_to_cell(u.start)
                .ok_or_else(|| Error::schema(format!("uavs[{k}].start"), "outside world"))?;
            if world.state(cell) == CellState::Occupied {
                return Err(Error::schema(
                    format!("uavs[{k}].start"),
                    "start position inside an obstacle",
                ));
            }
        }
        let map = ExploredMap::new(&world, scenario.explore_bounds)?;
        let sphere_params = SphereParams {
            r_sph: config.r_sph,
            r_max: config.r_max,
            stride: config.sphere_stride,
        };
        let periods = Periods {
            sensor: config.period_steps("f_sensor", config.f_sensor)?,
            front: config.period_steps("f_front", config.f_front)?,
            path: config.period_steps("f_path", config.f_path)?,
            coll: config.period_steps("f_coll", config.f_coll)?,
        };
        let planner_cfg = PlannerConfig {
            goal_tolerance: config.goal_tolerance,
            goal_snap: config.goal_snap,
            lambda: config.lambda,
            d_c: config.d_c,
        };
        let guard_cfg = GuardConfig {
            d_c: config.d_c,
            d_s: config.d_s,
            escape_relax: config.escape_relax,
        };
        let alloc_params = AllocParams {
            alpha: config.alpha,
            beta: config.beta,
            n_arcs: config.n_arcs,
            c_x: config.c_x,
            lambda: config.lambda,
            goal_snap: config.goal_snap,
        };
        let uavs = vec![
            UavState::from_spec(scenario.uav(UavId::Primary)),
            UavState::from_spec(scenario.uav(UavId::Secondary)),
        ];
        let record = MetricsRecord::new(scenario.name.clone(), config.allocator, config.seed);
        // takeoff sweep: each UAV yaws through a full turn while sampling,
        // so the mission starts from a locally dense map at every start pose
        let mut map = map;
        for id in UavId::BOTH {
            let spec = scenario.uav(id);
            let sensor = spec.sensor.to_model();
            for k in 0..8u32 {
                let heading = spec.heading + std::f64::consts::TAU * k as f64 / 8.0;
                let phase = k as f64 / 8.0;
                let scan = voxel_world::sample_scan(&world, &sensor, spec.start, heading, phase)?;
                map.integrate_scan(&scan, id)?;
            }
        }
        let graph = sphere_map::update(&map, sphere_params)?;
        let mut sim = Simulation {
            world,
            scenario,
            config,
            map,
            graph,
            pois: Vec::new(),
            poi_cells: BTreeSet::new(),
            planner: PlannerState::default(),
            guard: GuardState::default(),
            uavs,
            record,
            step_index: 0,
            periods,
            planner_cfg,
            guard_cfg,
            sphere_params,
            alloc_params,
        };
        sim.record
            .timeline
            .push((0.0, sim.map.explored_fraction()));
        Ok(sim)
    }

    pub fn time(&self) -> f64 {
        self.step_index as f64 * self.config.dt
    }

    pub fn map(&self) -> &ExploredMap {
        &self.map
    }

    pub fn graph(&self) -> &SphereGraph {
        &self.graph
    }

    pub fn world(&self) -> &VoxelGrid {
        &self.world
    }

    pub fn uav(&self, id: UavId) -> &UavState {
        &self.uavs[id.index()]
    }

    pub fn pois(&self) -> &[Poi] {
        &self.pois
    }

    pub fn record(&self) -> &MetricsRecord {
        &self.record
    }

    pub fn config(&self) -> &MissionConfig {
        &self.config
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }

    pub fn planner(&self) -> &PlannerState {
        &self.planner
    }

    /// Scripting hook: hand a UAV an explicit path, bypassing the planner.
    pub fn override_path(&mut self, id: UavId, waypoints: Vec<Vec3>) {
        let uav = &mut self.uavs[id.index()];
        uav.active_path = waypoints.into();
        uav.goal = None;
        self.planner.waiting.remove(&id);
    }

    fn move_uav(&mut self, id: UavId) -> Result<f64> {
        let dt = self.config.dt;
        let heading_rate = self.config.heading_rate;
        let uav = &mut self.uavs[id.index()];
        if uav.halted || uav.active_path.is_empty() {
            // an idle secondary yaws in place so its forward cone eventually
            // covers all bearings; omni sensing makes this moot for the
            // primary
            if uav.id == UavId::Secondary && uav.active_path.is_empty() && !uav.halted {
                uav.heading = wrap_angle(uav.heading + heading_rate * dt);
            }
            return Ok(0.0);
        }
        // the secondary turns toward its next waypoint (cone sensor); during
        // an escape the commanded heading stays fixed
        if uav.id == UavId::Secondary && !uav.guard_controlled {
            if let Some(&wp) = uav.active_path.front() {
                let d = wp - uav.position;
                if d.horizontal_norm() > 1e-9 {
                    let err = wrap_angle(d.azimuth() - uav.heading);
                    let turn = err.clamp(-heading_rate * dt, heading_rate * dt);
                    uav.heading = wrap_angle(uav.heading + turn);
                }
            }
        }
        let start = uav.position;
        let mut remaining = uav.speed * dt;
        while remaining > 1e-12 {
            let Some(&wp) = uav.active_path.front() else {
                break;
            };
            let d = uav.position.dist(wp);
            if d <= remaining {
                uav.position = wp;
                uav.active_path.pop_front();
                remaining -= d;
            } else {
                uav.position += (wp - uav.position) * (remaining / d);
                remaining = 0.0;
            }
        }
        let moved = start.dist(uav.position);
        let pos = uav.position;
        let cell = self.world.world_to_cell(pos);
        let hit = match cell {
            Some(c) => self.world.state(c) == CellState::Occupied,
            None => true,
        };
        if hit {
            return Err(Error::CollisionFault {
                uav: id.name(),
                x: pos.x,
                y: pos.y,
                z: pos.z,
                t: self.time(),
            });
        }
        Ok(moved)
    }

    /// Advance one timestep. Errors only on a collision fault, which aborts
    /// the mission.
    pub fn step(&mut self) -> Result<()> {
        let k = self.step_index;
        let t = self.time();

        // 1. movement
        let p_moved = self.move_uav(UavId::Primary)?;
        let _s_moved = self.move_uav(UavId::Secondary)?;

        // 2. sensing; the lattice phase advances by the golden ratio each
        // tick so a stationary sensor still densifies its surroundings
        if k % self.periods.sensor == 0 {
            let scan_tick = k / self.periods.sensor;
            let phase = (scan_tick as f64 * 0.618_033_988_749_895).rem_euclid(1.0);
            for id in UavId::BOTH {
                let (pos, heading, sensor) = {
                    let u = &self.uavs[id.index()];
                    (u.position, u.heading, u.sensor)
                };
                let scan = voxel_world::sample_scan(&self.world, &sensor, pos, heading, phase)?;
                self.map.integrate_scan(&scan, id)?;
            }
        }

        // 3. frontier candidates and sphere graph
        if k % self.periods.front == 0 {
            let started = Instant::now();
            let cells = frontier_finder::detect_frontiers(&self.map);
            let eps = self.config.eps_or_default(self.scenario.resolution);
            let clusters = frontier_finder::cluster_frontiers(&cells, eps);
            let tick_seed = splitmix64(self.config.seed ^ splitmix64(k));
            self.pois = frontier_finder::generate_pois(
                &clusters,
                &self.map,
                self.config.samples_per_cluster,
                self.config.min_cluster_for_sampling,
                tick_seed,
            );
            for p in &self.pois {
                self.poi_cells.insert(p.cell);
            }
            self.record
                .log_frontier_tick(t, k, cells.len(), clusters.len(), self.pois.len());
            self.record.timings.push(TimingRow {
                module: "frontiers",
                tick: k,
                micros: started.elapsed().as_micros() as u64,
            });
            let started = Instant::now();
            self.graph = sphere_map::update(&self.map, self.sphere_params)?;
            self.record.timings.push(TimingRow {
                module: "sphere_map",
                tick: k,
                micros: started.elapsed().as_micros() as u64,
            });
        }

        // 4. monitoring / planning
        if k % self.periods.path == 0 {
            mission_planner::tick_monitoring(&mut self.planner, &mut self.uavs, &self.planner_cfg);
            if self.planner.mode == PlannerMode::Planning {
                let started = Instant::now();
                let outcome = mission_planner::tick_planning(
                    &mut self.planner,
                    &self.map,
                    &self.pois,
                    self.config.allocator,
                    &self.alloc_params,
                    &self.graph,
                    &mut self.uavs,
                    &self.planner_cfg,
                )?;
                if outcome.ran {
                    self.record.timings.push(TimingRow {
                        module: "planning",
                        tick: k,
                        micros: started.elapsed().as_micros() as u64,
                    });
                    if let Some(a) = &outcome.assignment {
                        self.record.log_allocation(
                            t,
                            k,
                            self.config.allocator,
                            outcome.n_pois,
                            outcome.n_arcs,
                            a,
                        );
                    }
                    for d in &outcome.dispatched {
                        self.record.push_event(
                            t,
                            k,
                            "dispatch",
                            Some(d.uav),
                            format!(
                                "goal=({:.3}|{:.3}|{:.3}) waypoints={} length={:.3}",
                                d.goal.position.x,
                                d.goal.position.y,
                                d.goal.position.z,
                                d.waypoint_count,
                                d.length_m
                            ),
                        );
                    }
                    if let Some(id) = outcome.yielded {
                        self.record.push_event(t, k, "yield", Some(id), String::new());
                    }
                }
            }
        }

        // 5. collision guard
        let mut guard_ran = false;
        if k % self.periods.coll == 0 {
            guard_ran = true;
            let events = collision_guard::tick_avoidance(
                &mut self.guard,
                &mut self.planner,
                &mut self.uavs,
                &self.map,
                self.graph.distance_field(),
                &self.guard_cfg,
            );
            for ev in &events {
                self.record.log_guard_event(t, k, ev);
            }
        }

        self.step_index += 1;
        let t_end = self.time();
        self.record
            .timeline
            .push((t_end, self.map.explored_fraction()));
        let p_pos = self.uavs[UavId::Primary.index()].position;
        let s_pos = self.uavs[UavId::Secondary.index()].position;
        let d = p_pos.dist(s_pos);
        if d < self.record.summary.min_inter_uav_distance {
            self.record.summary.min_inter_uav_distance = d;
        }
        self.record.trajectory.push(TrajectorySample {
            t: t_end,
            p_pos,
            s_pos,
            p_moved,
            zone: collision_guard::classify(p_pos, s_pos, self.guard_cfg.d_c, self.guard_cfg.d_s),
            guard_ran,
        });
        Ok(())
    }

    /// Step until the completion target or the time cap. Returns whether the
    /// mission completed.
    pub fn run(&mut self) -> Result<bool> {
        loop {
            if self.map.explored_fraction() >= self.config.completion_target {
                self.finish(true);
                return Ok(true);
            }
            if self.time() >= self.config.t_max {
                self.finish(false);
                return Ok(false);
            }
            self.step()?;
        }
    }

    fn finish(&mut self, completed: bool) {
        self.record.summary.total_pois = self.poi_cells.len() as u64;
        let t = self.time();
        let f = self.map.explored_fraction();
        self.record.finalize(t, f, completed);
    }

    /// Consume the simulation and keep the record.
    pub fn into_record(self) -> MetricsRecord {
        self.record
    }
}

/// Run one mission to completion (or the time cap) and return its record.
pub fn run_mission(scenario: &Scenario, config: &MissionConfig) -> Result<MetricsRecord> {
    let mut sim = Simulation::new(scenario.clone(), config.clone())?;
    sim.run()?;
    Ok(sim.into_record())
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareRun {
    pub seed: u64,
    pub completed_greedy: bool,
    pub completed_mcf: bool,
    pub t95_greedy: Option<f64>,
    pub t95_mcf: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompareReport {
    pub scenario: String,
    pub seeds: Vec<u64>,
    pub runs: Vec<CompareRun>,
    pub median_t95_greedy: Option<f64>,
    pub median_t95_mcf: Option<f64>,
}

fn median(mut xs: Vec<f64>) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    Some(if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    })
}

/// Paired greedy-vs-flow comparison over seeds 1..=n with otherwise
/// identical parameters and starts.
pub fn compare_runs(
    scenario: &Scenario,
    base: &MissionConfig,
    n_seeds: u64,
    mut per_run: Option<&mut dyn FnMut(&MetricsRecord)>,
) -> Result<CompareReport> {
    use crate::allocator::Strategy;
    let mut runs = Vec::new();
    let seeds: Vec<u64> = (1..=n_seeds).collect();
    for &seed in &seeds {
        let mut one = |strategy: Strategy| -> Result<MetricsRecord> {
            let mut cfg = base.clone();
            cfg.seed = seed;
            cfg.allocator = strategy;
            let rec = run_mission(scenario, &cfg)?;
            if let Some(cb) = per_run.as_mut() {
                cb(&rec);
            }
            Ok(rec)
        };
        let greedy = one(Strategy::Greedy)?;
        let mcf = one(Strategy::Mcf)?;
        runs.push(CompareRun {
            seed,
            completed_greedy: greedy.summary.completed,
            completed_mcf: mcf.summary.completed,
            t95_greedy: greedy.summary.t_95,
            t95_mcf: mcf.summary.t_95,
        });
    }
    let median_t95_greedy = median(runs.iter().filter_map(|r| r.t95_greedy).collect());
    let median_t95_mcf = median(runs.iter().filter_map(|r| r.t95_mcf).collect());
    Ok(CompareReport {
        scenario: scenario.name.clone(),
        seeds,
        runs,
        median_t95_greedy,
        median_t95_mcf,
    })
}

/// Write the per-mission outputs plus the final map dump.
pub fn write_run_outputs(record: &MetricsRecord, map: &ExploredMap, dir: &Path) -> Result<()> {
    crate::metrics::write_outputs(record, dir)?;
    let mut buf = Vec::new();
    map.write_dump(&mut buf)?;
    std::fs::write(dir.join("map.txt"), buf)?;
    Ok(())
}
