//! Three-zone inter-UAV safety protocol and the secondary's escape maneuver.
//!
//! Zones by inter-UAV distance d: Critical (d < d_C), Caution (d_C <= d <
//! d_S), Safe (d >= d_S). In Caution the primary halts and waits; in
//! Critical the secondary is preempted and repeatedly sent one meter
//! directly away from the primary (altitude held) until the separation is
//! restored. The primary resumes and the secondary is returned to the
//! planner's waiting set once the zone is Safe again; exiting at the safety
//! distance rather than the critical one adds hysteresis, otherwise a halted
//! pair parked between the two thresholds would never move again.

use crate::geom::Vec3;
use crate::mission_planner::{grid_astar, smooth_dispatch_path, PlannerState};
use crate::occupancy_map::{ExploredMap, UavId};
use crate::sim_harness::UavState;
use crate::sphere_map::DistanceField;
use crate::voxel_world::CellState;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SafetyZone {
    Critical,
    Caution,
    Safe,
}

impl SafetyZone {
    pub fn name(self) -> &'static str {
        match self {
            SafetyZone::Critical => "critical",
            SafetyZone::Caution => "caution",
            SafetyZone::Safe => "safe",
        }
    }
}

/// Zone of the current separation; boundaries belong to the milder zone.
pub fn classify(x_p: Vec3, x_s: Vec3, d_c: f64, d_s: f64) -> SafetyZone {
    assert!(0.0 < d_c && d_c < d_s, "thresholds must satisfy 0 < d_C < d_S");
    let d = x_p.dist(x_s);
    if d < d_c {
        SafetyZone::Critical
    } else if d < d_s {
        SafetyZone::Caution
    } else {
        SafetyZone::Safe
    }
}

/// Escape goal: one meter from the secondary straight away from the primary,
/// altitude unchanged, heading unchanged. With no horizontal separation the
/// retreat direction falls back to the secondary's current heading.
pub fn escape_goal(x_p: Vec3, x_s: Vec3, phi_s: f64) -> (Vec3, f64) {
    let delta = x_s - x_p;
    let u = if delta.horizontal_norm() < 1e-9 {
        Vec3::new(phi_s.cos(), phi_s.sin(), 0.0)
    } else {
        delta.normalized().expect("nonzero displacement")
    };
    let mut g = x_s + u;
    g.z = x_s.z;
    (g, phi_s)
}

#[derive(Debug, Clone, Copy)]
pub struct GuardConfig {
    pub d_c: f64,
    pub d_s: f64,
    /// Goal relaxation radius for escape planning.
    pub escape_relax: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GuardEvent {
    ZoneChange {
        from: Option<SafetyZone>,
        to: SafetyZone,
        distance: f64,
    },
    PrimaryHalt,
    PrimaryResume,
    EscapeDispatch {
        x_p: Vec3,
        x_s: Vec3,
        goal: Vec3,
        waypoint_count: usize,
    },
    /// Escape planning failed; the secondary holds and the primary stays
    /// halted.
    SafetyStall,
    SecondaryRequeued,
}

#[derive(Debug, Clone, Default)]
pub struct GuardState {
    pub last_zone: Option<SafetyZone>,
    pub escape_mode: bool,
}

/// One collision-avoidance tick. Runs after movement and planning in the
/// step order, so its halts take effect before anyone moves again.
pub fn tick_avoidance(
    gs: &mut GuardState,
    planner: &mut PlannerState,
    uavs: &mut [UavState],
    map: &ExploredMap,
    df: &DistanceField,
    cfg: &GuardConfig,
) -> Vec<GuardEvent> {
    let mut events = Vec::new();
    let x_p = uavs[UavId::Primary.index()].position;
    let x_s = uavs[UavId::Secondary.index()].position;
    let zone = classify(x_p, x_s, cfg.d_c, cfg.d_s);
    if gs.last_zone != Some(zone) {
        events.push(GuardEvent::ZoneChange {
            from: gs.last_zone,
            to: zone,
            distance: x_p.dist(x_s),
        });
    }
    gs.last_zone = Some(zone);
    match zone {
        SafetyZone::Safe => {
            if gs.escape_mode {
                gs.escape_mode = false;
                let s = &mut uavs[UavId::Secondary.index()];
                s.guard_controlled = false;
                s.active_path.clear();
                s.goal = None;
                planner.waiting.insert(UavId::Secondary);
                events.push(GuardEvent::SecondaryRequeued);
            }
            if uavs[UavId::Primary.index()].halted {
                uavs[UavId::Primary.index()].halted = false;
                events.push(GuardEvent::PrimaryResume);
            }
        }
        SafetyZone::Caution => {
            if !uavs[UavId::Primary.index()].halted {
                uavs[UavId::Primary.index()].halted = true;
                events.push(GuardEvent::PrimaryHalt);
            }
            // after a critical episode keep retreating until fully safe
            if gs.escape_mode && uavs[UavId::Secondary.index()].active_path.is_empty() {
                dispatch_escape(&mut events, uavs, map, df, cfg);
            }
        }
        SafetyZone::Critical => {
            if !uavs[UavId::Primary.index()].halted {
                uavs[UavId::Primary.index()].halted = true;
                events.push(GuardEvent::PrimaryHalt);
            }
            if !gs.escape_mode {
                gs.escape_mode = true;
                let s = &mut uavs[UavId::Secondary.index()];
                s.guard_controlled = true;
                s.goal = None; // preempted goal comes back through replanning
                s.active_path.clear();
                planner.waiting.remove(&UavId::Secondary);
            }
            if uavs[UavId::Secondary.index()].active_path.is_empty() {
                dispatch_escape(&mut events, uavs, map, df, cfg);
            }
        }
    }
    events
}

/// Farthest point along the straight retreat whose cells are all known
/// free; `None` when the immediate surroundings are blocked or unexplored.
fn straight_retreat(map: &ExploredMap, from: Vec3, to: Vec3) -> Option<Vec3> {
    let grid = map.grid();
    let len = from.dist(to);
    let dir = (to - from).normalized()?;
    let mut blocked_at: Option<f64> = None;
    grid.traverse_segment(from, dir, len, |c, t| {
        if grid.state(c) != CellState::Free {
            blocked_at = Some(t);
            false
        } else {
            true
        }
    });
    let cut = match blocked_at {
        None => len,
        // stop half a cell before the first blocked boundary
        Some(t) => t - 0.5 * grid.resolution(),
    };
    if cut < 0.3 {
        return None;
    }
    Some(from + dir * cut.min(len))
}

fn dispatch_escape(
    events: &mut Vec<GuardEvent>,
    uavs: &mut [UavState],
    map: &ExploredMap,
    df: &DistanceField,
    cfg: &GuardConfig,
) {
    let x_p = uavs[UavId::Primary.index()].position;
    let (x_s, phi_s, s_s) = {
        let s = &uavs[UavId::Secondary.index()];
        (s.position, s.heading, s.radius)
    };
    let (goal, _theta) = escape_goal(x_p, x_s, phi_s);
    let dispatch = |events: &mut Vec<GuardEvent>, uavs: &mut [UavState], wps: Vec<Vec3>| {
        events.push(GuardEvent::EscapeDispatch {
            x_p,
            x_s,
            goal,
            waypoint_count: wps.len(),
        });
        uavs[UavId::Secondary.index()].active_path = wps.into();
    };

    // straight retreat whenever the line is known free (possibly truncated)
    if let Some(cut) = straight_retreat(map, x_s, goal) {
        dispatch(events, uavs, vec![cut]);
        return;
    }

    // the separation is pure distance, so the retreat direction can point
    // into a wall (the primary may sit beyond it); sweep rotated retreats at
    // the same altitude and take the first that opens the separation
    let d_now = x_p.dist(x_s);
    let horiz = (x_s - x_p).horizontal_norm();
    let base = if horiz < 1e-9 {
        Vec3::new(phi_s.cos(), phi_s.sin(), 0.0)
    } else {
        Vec3::new((x_s.x - x_p.x) / horiz, (x_s.y - x_p.y) / horiz, 0.0)
    };
    let mut fallback: Option<Vec3> = None;
    for deg in [30.0f64, -30.0, 60.0, -60.0, 90.0, -90.0, 120.0, -120.0, 150.0, -150.0, 180.0] {
        let a = deg.to_radians();
        let dir = Vec3::new(
            base.x * a.cos() - base.y * a.sin(),
            base.x * a.sin() + base.y * a.cos(),
            0.0,
        );
        if let Some(cut) = straight_retreat(map, x_s, x_s + dir) {
            if cut.dist(x_p) > d_now + 0.05 {
                dispatch(events, uavs, vec![cut]);
                return;
            }
            if fallback.is_none() {
                fallback = Some(cut);
            }
        }
    }

    // plan around obstacles toward the canonical goal; prefer full vehicle
    // clearance, fall back to a one-cell dilation, and accept starting from
    // a nearby clear cell reachable in a straight line
    let tight = 1.05 * map.grid().resolution();
    let path = grid_astar(map, x_s, goal, s_s, cfg.escape_relax)
        .or_else(|| grid_astar(map, x_s, goal, tight, cfg.escape_relax))
        .or_else(|| {
            let start = snap_start_cell(map, df, x_s, tight)?;
            let mut cells = grid_astar(map, start, goal, tight, cfg.escape_relax)?;
            cells.insert(0, start);
            Some(cells)
        });
    if let Some(cells) = path {
        // keep the remainder of the route outside the current separation
        let bubble = [(x_p, cfg.d_c)];
        let waypoints = smooth_dispatch_path(map, df, x_s, &cells, s_s, &bubble);
        // a route that ends where the vehicle already is makes no progress
        if let Some(&end) = waypoints.last() {
            if end.dist(x_s) > 0.1 {
                dispatch(events, uavs, waypoints);
                return;
            }
        }
    }
    // global extraction: route to the nearest known cell at a safe
    // separation, never stepping closer to the primary than we already are
    if let Some(cells) = escape_to_safety(map, df, x_p, x_s, tight, cfg) {
        let waypoints = smooth_dispatch_path(map, df, x_s, &cells, s_s, &[]);
        if let Some(&end) = waypoints.last() {
            if end.dist(x_s) > 0.1 {
                dispatch(events, uavs, waypoints);
                return;
            }
        }
    }
    if let Some(cut) = fallback {
        // any known-free motion beats hovering in a blocked pocket
        dispatch(events, uavs, vec![cut]);
        return;
    }
    events.push(GuardEvent::SafetyStall);
}

/// Dijkstra over known-free cells toward any cell at a safe separation from
/// the primary. Cells closer to the primary than the critical distance are
/// off limits (except the start itself), so following the route never
/// shrinks the separation below its current value minus chord sag.
fn escape_to_safety(
    map: &ExploredMap,
    df: &DistanceField,
    x_p: Vec3,
    x_s: Vec3,
    clearance: f64,
    cfg: &GuardConfig,
) -> Option<Vec<Vec3>> {
    use std::cmp::Reverse;
    use std::collections::BinaryHeap;
    let grid = map.grid();
    let start = grid.world_to_cell(x_s)?;
    let start_lin = grid.linear(start);
    let ok = |c: crate::voxel_world::CellIndex| -> bool {
        grid.state(c) == CellState::Free
            && df.clearance_m(c) >= clearance
            && grid.cell_center(c).dist(x_p) >= cfg.d_c
    };
    let n = grid.cell_count();
    let mut dist = vec![f64::INFINITY; n];
    let mut came: Vec<u32> = vec![u32::MAX; n];
    let mut heap: BinaryHeap<Reverse<(u64, usize)>> = BinaryHeap::new();
    dist[start_lin] = 0.0;
    heap.push(Reverse((0u64, start_lin)));
    let res = grid.resolution();
    while let Some(Reverse((db, u))) = heap.pop() {
        let du = f64::from_bits(db);
        if du > dist[u] {
            continue;
        }
        let uc = grid.from_linear(u);
        if grid.cell_center(uc).dist(x_p) >= cfg.d_s + res {
            // reconstruct
            let mut cells = vec![uc];
            let mut cur = u;
            while came[cur] != u32::MAX {
                cur = came[cur] as usize;
                cells.push(grid.from_linear(cur));
            }
            cells.reverse();
            return Some(cells.into_iter().map(|c| grid.cell_center(c)).collect());
        }
        for dz in -1i32..=1 {
            for dy in -1i32..=1 {
                for dx in -1i32..=1 {
                    if dx == 0 && dy == 0 && dz == 0 {
                        continue;
                    }
                    let vc = crate::voxel_world::CellIndex::new(uc.x + dx, uc.y + dy, uc.z + dz);
                    if !grid.in_bounds(vc) || !ok(vc) {
                        continue;
                    }
                    let v = grid.linear(vc);
                    let nd = du + res * ((dx * dx + dy * dy + dz * dz) as f64).sqrt();
                    if nd < dist[v] {
                        dist[v] = nd;
                        came[v] = u as u32;
                        heap.push(Reverse((nd.to_bits(), v)));
                    }
                }
            }
        }
    }
    None
}

/// Nearest clear cell around a pose that the vehicle can reach in a straight
/// known-free line; lets escape planning start beside the hover blind spot.
fn snap_start_cell(map: &ExploredMap, df: &DistanceField, from: Vec3, radius: f64) -> Option<Vec3> {
    let grid = map.grid();
    let center = grid.world_to_cell(from)?;
    let mut best: Option<(f64, Vec3)> = None;
    for dz in -2i32..=2 {
        for dy in -2i32..=2 {
            for dx in -2i32..=2 {
                let c = crate::voxel_world::CellIndex::new(center.x + dx, center.y + dy, center.z + dz);
                if !grid.in_bounds(c) || grid.state(c) != CellState::Free {
                    continue;
                }
                if df.clearance_m(c) < radius {
                    continue;
                }
                let p = grid.cell_center(c);
                if !crate::mission_planner::segment_known_free(map, from, p) {
                    continue;
                }
                let d = p.dist(from);
                match best {
                    Some((bd, _)) if bd <= d => {}
                    _ => best = Some((d, p)),
                }
            }
        }
    }
    best.map(|(_, p)| p)
}
