//! Two-state monitoring/planning loop plus the dilated-grid A* planner used
//! for avoidance and path repair.
//!
//! Monitoring collects UAVs that finished their path into a waiting set and
//! records reached goals as visited. Planning waits for fresh map data, runs
//! the allocator over the candidates not yet visited, and dispatches
//! clearance-aware routes to the waiting UAVs. Dispatched polylines are
//! post-processed: hops that would cross occupied or unexplored cells are
//! re-routed on a tightly dilated grid, then the result is greedily
//! shortcut wherever the straight segment keeps the vehicle's clearance.

use crate::allocator::{self, AllocParams, Assignment, GoalChoice, Strategy};
use crate::error::Result;
use crate::frontier_finder::Poi;
use crate::geom::Vec3;
use crate::occupancy_map::{ExploredMap, UavId};
use crate::sim_harness::UavState;
use crate::sphere_map::{DistanceField, SphereGraph};
use crate::voxel_world::{CellIndex, CellState};
use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlannerMode {
    Monitoring,
    Planning,
}

#[derive(Debug, Clone)]
pub struct PlannerState {
    pub mode: PlannerMode,
    pub waiting: BTreeSet<UavId>,
    /// Positions of goals already reached; nearby candidates are filtered out
    /// before allocation so no goal is handed out twice.
    pub visited: Vec<Vec3>,
    pub last_map_version: u64,
}

impl Default for PlannerState {
    fn default() -> PlannerState {
        PlannerState {
            mode: PlannerMode::Monitoring,
            waiting: BTreeSet::new(),
            visited: Vec::new(),
            last_map_version: 0,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PlannerConfig {
    pub goal_tolerance: f64,
    pub goal_snap: f64,
    pub lambda: f64,
    /// Critical separation; routes near a parked partner stay outside it.
    pub d_c: f64,
}

/// Arrival check: a UAV with no remaining path, or within tolerance of its
/// goal, joins the waiting set and its goal becomes visited.
pub fn tick_monitoring(state: &mut PlannerState, uavs: &mut [UavState], cfg: &PlannerConfig) {
    for uav in uavs.iter_mut() {
        if uav.guard_controlled {
            continue;
        }
        let arrived = uav.active_path.is_empty()
            || uav
                .goal
                .map(|g| uav.position.dist(g.position) <= cfg.goal_tolerance)
                .unwrap_or(false);
        if arrived {
            if let Some(g) = uav.goal.take() {
                state.visited.push(g.position);
            }
            uav.active_path.clear();
            state.waiting.insert(uav.id);
        }
    }
    if !state.waiting.is_empty() {
        state.mode = PlannerMode::Planning;
    }
}

#[derive(Debug, Clone)]
pub struct DispatchRecord {
    pub uav: UavId,
    pub goal: Poi,
    pub waypoint_count: usize,
    pub length_m: f64,
}

#[derive(Debug, Default)]
pub struct PlanningOutcome {
    /// Planning ran (false means it stayed blocked on a stale map).
    pub ran: bool,
    pub assignment: Option<Assignment>,
    pub n_pois: usize,
    pub n_arcs: usize,
    pub dispatched: Vec<DispatchRecord>,
    /// An idle vehicle was relocated because its parked position blocked
    /// the other vehicle's only remaining candidates.
    pub yielded: Option<UavId>,
}

/// One planning pass: blocked until the map version moves, then allocate and
/// dispatch. UAVs assigned `Stay` remain waiting; the mode returns to
/// monitoring either way.
#[allow(clippy::too_many_arguments)]
pub fn tick_planning(
    state: &mut PlannerState,
    map: &ExploredMap,
    pois: &[Poi],
    strategy: Strategy,
    alloc: &AllocParams,
    graph: &SphereGraph,
    uavs: &mut [UavState],
    cfg: &PlannerConfig,
) -> Result<PlanningOutcome> {
    let mut out = PlanningOutcome::default();
    if map.version() <= state.last_map_version {
        return Ok(out);
    }
    out.ran = true;
    let candidates: Vec<Poi> = pois
        .iter()
        .filter(|p| {
            !state
                .visited
                .iter()
                .any(|v| v.dist(p.position) <= cfg.goal_tolerance)
        })
        .copied()
        .collect();
    out.n_pois = candidates.len();
    let (x_p, x_s, phi_s, s_p, s_s) = {
        let p = &uavs[UavId::Primary.index()];
        let s = &uavs[UavId::Secondary.index()];
        (p.position, s.position, s.heading, p.radius, s.radius)
    };
    // UAVs still flying keep their goal; the allocator treats it as a
    // commitment so it is neither re-optimized nor handed to the other
    let committed = allocator::Commitments {
        primary: uavs[UavId::Primary.index()].goal,
        secondary: uavs[UavId::Secondary.index()].goal,
    };
    // a parked partner and a partner's in-flight goal each project a
    // keep-out bubble at the critical distance: a route through one would
    // only trigger the avoidance maneuver, and convergent goals park the
    // pair inside halting range
    let idle = |u: &UavState| u.active_path.is_empty();
    let bubble_radius = cfg.d_c + 2.0 * map.grid().resolution();
    let mut keep_out: allocator::KeepOut = [Vec::new(), Vec::new()];
    for id in UavId::BOTH {
        let me = &uavs[id.index()];
        let other = &uavs[1 - id.index()];
        // bubbles gate entry; a vehicle already inside one must stay free to
        // leave (the guard owns genuine proximity)
        let mut centers = Vec::new();
        if idle(other) {
            centers.push(other.position);
        }
        if let Some(g) = other.goal {
            centers.push(g.position);
        }
        for c in centers {
            if me.position.dist(c) > bubble_radius {
                keep_out[id.index()].push((c, bubble_radius));
            }
        }
    }
    let (assignment, n_arcs) = allocator::assign(
        strategy,
        &candidates,
        x_p,
        x_s,
        phi_s,
        graph,
        s_p,
        s_s,
        alloc,
        committed,
        &keep_out,
    )?;
    out.n_arcs = n_arcs;
    for id in UavId::BOTH {
        if !state.waiting.contains(&id) {
            continue;
        }
        let uav = &mut uavs[id.index()];
        if uav.guard_controlled {
            continue;
        }
        let GoalChoice::Goal(poi) = *assignment.goal_for(id) else {
            continue; // stays waiting, holds position this cycle
        };
        let Some(path) = graph.plan(uav.position, poi.position, uav.radius, alloc.lambda, alloc.goal_snap)
        else {
            continue; // accessibility said yes moments ago; replan next cycle
        };
        let waypoints = smooth_dispatch_path(
            map,
            graph.distance_field(),
            uav.position,
            &path.waypoints,
            uav.radius,
            &keep_out[id.index()],
        );
        if waypoints.is_empty() {
            continue;
        }
        let mut length = uav.position.dist(waypoints[0]);
        for w in waypoints.windows(2) {
            length += w[0].dist(w[1]);
        }
        out.dispatched.push(DispatchRecord {
            uav: id,
            goal: poi,
            waypoint_count: waypoints.len(),
            length_m: length,
        });
        uav.goal = Some(poi);
        uav.active_path = waypoints.into();
        state.waiting.remove(&id);
    }
    // an idle vehicle with nothing to do must not strand the other's last
    // reachable work inside its bubble; it yields by relocating away
    out.yielded = try_yield(state, map, &candidates, graph, uavs, alloc, &keep_out, &assignment);
    out.assignment = Some(assignment);
    state.last_map_version = map.version();
    state.mode = PlannerMode::Monitoring;
    Ok(out)
}

#[allow(clippy::too_many_arguments)]
fn try_yield(
    state: &mut PlannerState,
    map: &ExploredMap,
    candidates: &[Poi],
    graph: &SphereGraph,
    uavs: &mut [UavState],
    alloc: &AllocParams,
    keep_out: &allocator::KeepOut,
    assignment: &Assignment,
) -> Option<UavId> {
    for id in UavId::BOTH {
        let other_id = if id == UavId::Primary { UavId::Secondary } else { UavId::Primary };
        let stranded = state.waiting.contains(&id)
            && matches!(assignment.goal_for(id), GoalChoice::Stay)
            && !uavs[id.index()].guard_controlled;
        if !stranded {
            continue;
        }
        let blocker_idle = uavs[other_id.index()].active_path.is_empty()
            && !uavs[other_id.index()].guard_controlled
            && matches!(assignment.goal_for(other_id), GoalChoice::Stay);
        if !blocker_idle {
            continue;
        }
        let bubbles = &keep_out[id.index()];
        if bubbles.is_empty() {
            continue;
        }
        // stranding is real only if some candidate is reachable once the
        // bubbles are ignored
        let me = &uavs[id.index()];
        let Some(tree) = graph.shortest_paths(me.position, me.radius, alloc.lambda, alloc.goal_snap)
        else {
            continue;
        };
        let blocked_only = candidates.iter().any(|poi| {
            tree.path_to(graph, poi.position)
                .map(|p| allocator::path_enters_bubble(me.position, &p, bubbles))
                .unwrap_or(false)
        });
        if !blocked_only {
            continue;
        }
        // relocate the blocker to the reachable node farthest from here
        let me_pos = me.position;
        let other = &uavs[other_id.index()];
        let Some(other_tree) =
            graph.shortest_paths(other.position, other.radius, alloc.lambda, alloc.goal_snap)
        else {
            continue;
        };
        let mut best: Option<(f64, usize)> = None;
        for (i, n) in graph.nodes.iter().enumerate() {
            if n.radius < other.radius || !other_tree.reaches(i) {
                continue;
            }
            let d = n.center.dist(me_pos);
            match best {
                Some((bd, _)) if bd >= d => {}
                _ => best = Some((d, i)),
            }
        }
        let Some((_, node)) = best else { continue };
        let Some(path) = other_tree.path_to(graph, graph.nodes[node].center) else {
            continue;
        };
        let waypoints = smooth_dispatch_path(
            map,
            graph.distance_field(),
            other.position,
            &path.waypoints,
            other.radius,
            &[],
        );
        if waypoints.is_empty() {
            continue;
        }
        let other_mut = &mut uavs[other_id.index()];
        other_mut.goal = None;
        other_mut.active_path = waypoints.into();
        state.waiting.remove(&other_id);
        return Some(other_id);
    }
    None
}

const NEIGHBORS_26: [(i32, i32, i32); 26] = {
    let mut n = [(0, 0, 0); 26];
    let mut i = 0;
    let mut dz = -1;
    while dz <= 1 {
        let mut dy = -1;
        while dy <= 1 {
            let mut dx = -1;
            while dx <= 1 {
                if dx != 0 || dy != 0 || dz != 0 {
                    n[i] = (dx, dy, dz);
                    i += 1;
                }
                dx += 1;
            }
            dy += 1;
        }
        dz += 1;
    }
    n
};

/// A* over the occupancy grid dilated by `uav_radius` (unknown counts as an
/// obstacle), 26-connectivity, Euclidean heuristic. If the goal cell is
/// infeasible, the nearest feasible cell within `goal_relax` is accepted.
/// Returns cell-center waypoints from the start cell to the accepted goal.
pub fn grid_astar(
    map: &ExploredMap,
    start: Vec3,
    goal: Vec3,
    uav_radius: f64,
    goal_relax: f64,
) -> Option<Vec<Vec3>> {
    let df = DistanceField::build(map.grid(), |s| s != CellState::Free);
    grid_astar_with_field(map, &df, start, goal, uav_radius, goal_relax)
}

pub fn grid_astar_with_field(
    map: &ExploredMap,
    df: &DistanceField,
    start: Vec3,
    goal: Vec3,
    uav_radius: f64,
    goal_relax: f64,
) -> Option<Vec<Vec3>> {
    let grid = map.grid();
    let res = grid.resolution();
    let traversable = |c: CellIndex| -> bool {
        grid.state(c) == CellState::Free && df.clearance_m(c) >= uav_radius
    };
    let start_cell = grid.world_to_cell(start)?;
    if !traversable(start_cell) {
        return None;
    }
    // accepted goal: the goal cell itself, or the nearest feasible cell
    // within the relaxation radius (ties to the lower cell index)
    let goal_cell = grid.world_to_cell(goal);
    let target = match goal_cell {
        Some(c) if traversable(c) => c,
        _ => {
            let r = (goal_relax / res).ceil() as i32;
            let around = goal_cell.unwrap_or_else(|| {
                // clamp an out-of-grid goal to the nearest boundary cell
                let rel = goal - grid.origin();
                let [nx, ny, nz] = grid.dims();
                CellIndex::new(
                    ((rel.x / res).floor() as i32).clamp(0, nx as i32 - 1),
                    ((rel.y / res).floor() as i32).clamp(0, ny as i32 - 1),
                    ((rel.z / res).floor() as i32).clamp(0, nz as i32 - 1),
                )
            });
            let mut best: Option<(f64, usize, CellIndex)> = None;
            for dz in -r..=r {
                for dy in -r..=r {
                    for dx in -r..=r {
                        let c = CellIndex::new(around.x + dx, around.y + dy, around.z + dz);
                        if !grid.in_bounds(c) || !traversable(c) {
                            continue;
                        }
                        let d = grid.cell_center(c).dist(goal);
                        if d > goal_relax {
                            continue;
                        }
                        let lin = grid.linear(c);
                        match best {
                            Some((bd, bl, _)) if (bd, bl) <= (d, lin) => {}
                            _ => best = Some((d, lin, c)),
                        }
                    }
                }
            }
            best?.2
        }
    };

    let n = grid.cell_count();
    let target_center = grid.cell_center(target);
    let mut g = vec![f64::INFINITY; n];
    let mut came: Vec<u32> = vec![u32::MAX; n];
    let mut closed = vec![false; n];
    let start_lin = grid.linear(start_cell);
    g[start_lin] = 0.0;
    let h0 = grid.cell_center(start_cell).dist(target_center);
    let mut open: BinaryHeap<Reverse<(u64, usize)>> = BinaryHeap::new();
    open.push(Reverse((h0.to_bits(), start_lin)));
    while let Some(Reverse((_, u))) = open.pop() {
        if closed[u] {
            continue;
        }
        closed[u] = true;
        let uc = grid.from_linear(u);
        if uc == target {
            let mut cells = vec![uc];
            let mut cur = u;
            while came[cur] != u32::MAX {
                cur = came[cur] as usize;
                cells.push(grid.from_linear(cur));
            }
            cells.reverse();
            return Some(cells.into_iter().map(|c| grid.cell_center(c)).collect());
        }
        for (dx, dy, dz) in NEIGHBORS_26 {
            let vc = CellIndex::new(uc.x + dx, uc.y + dy, uc.z + dz);
            if !grid.in_bounds(vc) || !traversable(vc) {
                continue;
            }
            let v = grid.linear(vc);
            if closed[v] {
                continue;
            }
            let step = res * ((dx * dx + dy * dy + dz * dz) as f64).sqrt();
            let ng = g[u] + step;
            if ng < g[v] {
                g[v] = ng;
                came[v] = u as u32;
                let f = ng + grid.cell_center(vc).dist(target_center);
                open.push(Reverse((f.to_bits(), v)));
            }
        }
    }
    None
}

/// True when every cell the segment passes through is known free.
pub fn segment_known_free(map: &ExploredMap, a: Vec3, b: Vec3) -> bool {
    let grid = map.grid();
    if grid.world_to_cell(a).is_none() || grid.world_to_cell(b).is_none() {
        return false;
    }
    let len = a.dist(b);
    let Some(dir) = (b - a).normalized() else {
        return grid.state(grid.world_to_cell(a).expect("checked")) == CellState::Free;
    };
    let mut ok = true;
    let mut reached = 0.0f64;
    grid.traverse_segment(a, dir, len, |c, t| {
        reached = t;
        if grid.state(c) != CellState::Free {
            ok = false;
            return false;
        }
        true
    });
    ok
}

fn segment_clearance_ok(df: &DistanceField, a: Vec3, b: Vec3, min_clearance: f64) -> bool {
    let len = a.dist(b);
    let steps = (len / (df.resolution() * 0.5)).ceil().max(1.0) as usize;
    for i in 0..=steps {
        let p = a + (b - a) * (i as f64 / steps as f64);
        if df.clearance_at(p) < min_clearance {
            return false;
        }
    }
    true
}

/// Make a dispatch polyline safe to fly, then shorten it.
///
/// Hops crossing occupied or unexplored cells are replaced by a grid route
/// at a one-cell dilation; if no such route exists the path is truncated at
/// the last safe waypoint. The shortcut pass then skips intermediate
/// waypoints wherever the straight segment is known free, keeps clearance
/// at or above the vehicle radius, and stays outside the keep-out bubble
/// (shortcutting an arc around a parked partner must not cut through it).
pub fn smooth_dispatch_path(
    map: &ExploredMap,
    df: &DistanceField,
    start: Vec3,
    waypoints: &[Vec3],
    uav_radius: f64,
    keep_out: &[(Vec3, f64)],
) -> Vec<Vec3> {
    let res = map.grid().resolution();
    let repair_radius = 1.05 * res;
    let mut repaired: Vec<Vec3> = vec![start];
    'hops: for &q in waypoints {
        let p = *repaired.last().expect("seeded with start");
        if segment_known_free(map, p, q) {
            repaired.push(q);
            continue;
        }
        match grid_astar_with_field(map, df, p, q, repair_radius, 3.0 * res) {
            Some(cells) => {
                repaired.extend(cells.into_iter().skip(1));
                let last = *repaired.last().expect("nonempty");
                if segment_known_free(map, last, q) {
                    repaired.push(q);
                }
            }
            None => break 'hops, // no safe continuation; fly what we have
        }
    }

    let outside_bubble = |a: Vec3, b: Vec3| {
        keep_out
            .iter()
            .all(|&(c, r)| crate::geom::dist_point_segment(c, a, b) >= r)
    };
    let mut out = Vec::new();
    let mut i = 0usize;
    while i + 1 < repaired.len() {
        let mut j = repaired.len() - 1;
        while j > i + 1 {
            if segment_known_free(map, repaired[i], repaired[j])
                && segment_clearance_ok(df, repaired[i], repaired[j], uav_radius)
                && outside_bubble(repaired[i], repaired[j])
            {
                break;
            }
            j -= 1;
        }
        out.push(repaired[j]);
        i = j;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::voxel_world::VoxelGrid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn known_map(dims: [usize; 3], res: f64, occ: impl Fn(CellIndex) -> bool) -> ExploredMap {
        let world = VoxelGrid::new(Vec3::ZERO, res, dims, CellState::Free).unwrap();
        let mut map = ExploredMap::new(&world, world.bounds()).unwrap();
        for i in 0..world.cell_count() {
            let c = world.from_linear(i);
            map.mark_known(
                c,
                if occ(c) {
                    CellState::Occupied
                } else {
                    CellState::Free
                },
            );
        }
        map
    }

    #[test]
    fn astar_start_equals_goal() {
        let map = known_map([10, 10, 6], 0.2, |_| false);
        let p = Vec3::new(1.0, 1.0, 0.6);
        let path = grid_astar(&map, p, p, 0.2, 0.5).unwrap();
        assert_eq!(path.len(), 1);
    }

    #[test]
    fn astar_straight_corridor_is_near_euclidean() {
        let map = known_map([30, 10, 6], 0.2, |_| false);
        let a = Vec3::new(0.5, 1.0, 0.6);
        let b = Vec3::new(5.5, 1.0, 0.6);
        let path = grid_astar(&map, a, b, 0.2, 0.5).unwrap();
        let mut len = 0.0;
        for w in path.windows(2) {
            len += w[0].dist(w[1]);
        }
        let direct = a.dist(b);
        assert!(len <= direct + 2.0 * 0.2 * 3f64.sqrt(), "{len} vs {direct}");
    }

    #[test]
    fn astar_goal_relaxation_accepts_nearby_cell() {
        // goal inside a pillar; the accepted goal must be beside it
        let map = known_map([20, 20, 6], 0.2, |c| c.x == 10 && c.y == 10);
        let goal = Vec3::new(2.1, 2.1, 0.5);
        let path = grid_astar(&map, Vec3::new(0.5, 0.5, 0.5), goal, 0.2, 1.0).unwrap();
        let end = *path.last().unwrap();
        assert!(end.dist(goal) <= 1.0);
        assert!(map.state_at(end).unwrap() == CellState::Free);
    }

    #[test]
    fn astar_no_feasible_goal_within_relax() {
        let map = known_map([20, 20, 6], 0.2, |c| {
            (7..=13).contains(&c.x) && (7..=13).contains(&c.y)
        });
        let goal = Vec3::new(2.1, 2.1, 0.5); // deep inside the block
        assert!(grid_astar(&map, Vec3::new(0.5, 0.5, 0.5), goal, 0.2, 0.3).is_none());
    }

    #[test]
    fn astar_cost_matches_dijkstra_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let map = known_map([14, 14, 5], 0.2, |c| {
            // deterministic scattered obstacles
            (c.x * 7 + c.y * 13 + c.z * 29) % 11 == 0
        });
        let radius = 0.2;
        let df = DistanceField::build(map.grid(), |s| s != CellState::Free);
        let grid = map.grid();
        let traversable = |c: CellIndex| {
            grid.state(c) == CellState::Free && df.clearance_m(c) >= radius
        };
        // oracle: plain Dijkstra over the same 26-connected graph
        let dijkstra = |s: CellIndex, t: CellIndex| -> Option<f64> {
            let n = grid.cell_count();
            let mut dist = vec![f64::INFINITY; n];
            let mut heap: BinaryHeap<Reverse<(u64, usize)>> = BinaryHeap::new();
            dist[grid.linear(s)] = 0.0;
            heap.push(Reverse((0f64.to_bits(), grid.linear(s))));
            while let Some(Reverse((db, u))) = heap.pop() {
                let du = f64::from_bits(db);
                if du > dist[u] {
                    continue;
                }
                let uc = grid.from_linear(u);
                if uc == t {
                    return Some(du);
                }
                for (dx, dy, dz) in NEIGHBORS_26 {
                    let vc = CellIndex::new(uc.x + dx, uc.y + dy, uc.z + dz);
                    if !grid.in_bounds(vc) || !traversable(vc) {
                        continue;
                    }
                    let v = grid.linear(vc);
                    let nd = du + 0.2 * ((dx * dx + dy * dy + dz * dz) as f64).sqrt();
                    if nd < dist[v] {
                        dist[v] = nd;
                        heap.push(Reverse((nd.to_bits(), v)));
                    }
                }
            }
            None
        };
        let mut tested = 0;
        while tested < 20 {
            let s = CellIndex::new(rng.gen_range(0..14), rng.gen_range(0..14), rng.gen_range(0..5));
            let t = CellIndex::new(rng.gen_range(0..14), rng.gen_range(0..14), rng.gen_range(0..5));
            if !traversable(s) || !traversable(t) {
                continue;
            }
            let got = grid_astar_with_field(
                &map,
                &df,
                grid.cell_center(s),
                grid.cell_center(t),
                radius,
                0.01,
            );
            let want = dijkstra(s, t);
            match (got, want) {
                (Some(path), Some(w)) => {
                    let mut len = 0.0;
                    for seg in path.windows(2) {
                        len += seg[0].dist(seg[1]);
                    }
                    assert!((len - w).abs() < 1e-9, "astar {len} vs dijkstra {w}");
                }
                (None, None) => {}
                (g, w) => panic!("reachability mismatch: {g:?} vs {w:?}"),
            }
            tested += 1;
        }
    }

    #[test]
    fn smoothing_never_crosses_unknown_or_occupied() {
        // wall with a gap; raw polyline cuts the corner through the wall
        let map = known_map([30, 20, 6], 0.2, |c| c.x == 15 && !(8..=11).contains(&c.y));
        let df = DistanceField::build(map.grid(), |s| s != CellState::Free);
        let start = Vec3::new(1.0, 0.9, 0.5);
        let raw = vec![Vec3::new(5.9, 3.9, 0.5), Vec3::new(4.5, 0.9, 0.5)];
        let smoothed = smooth_dispatch_path(&map, &df, start, &raw, 0.2, &[]);
        assert!(!smoothed.is_empty());
        let mut prev = start;
        for &w in &smoothed {
            assert!(segment_known_free(&map, prev, w), "unsafe hop {prev:?} -> {w:?}");
            prev = w;
        }
    }

    #[test]
    fn monitoring_and_planning_state_machine() {
        use crate::scenario::Scenario;
        use crate::sim_harness::UavState;
        use crate::sphere_map::{update, SphereParams};

        let map = known_map([20, 20, 8], 0.2, |_| false);
        let graph = update(&map, SphereParams { r_sph: 0.2, r_max: 1.0, stride: 2 }).unwrap();
        let scenario = Scenario::minimal_for_test(
            Vec3::ZERO,
            Vec3::new(4.0, 4.0, 1.6),
            0.2,
            vec![],
        );
        let mut uavs = vec![
            UavState::from_spec(scenario.uav(UavId::Primary)),
            UavState::from_spec(scenario.uav(UavId::Secondary)),
        ];
        let cfg = PlannerConfig {
            goal_tolerance: 0.3,
            goal_snap: 0.5,
            lambda: 0.2,
            d_c: 0.4,
        };
        let mut state = PlannerState::default();

        // both idle: monitoring moves them to waiting and flips the mode
        tick_monitoring(&mut state, &mut uavs, &cfg);
        assert_eq!(state.mode, PlannerMode::Planning);
        assert_eq!(state.waiting.len(), 2);

        // planning with a fresh map dispatches to a candidate
        let pois = vec![Poi {
            position: Vec3::new(3.5, 3.5, 0.9),
            source: crate::frontier_finder::PoiSource::Centroid,
            cluster_id: 0,
            cell: CellIndex::new(17, 17, 4),
        }];
        let out = tick_planning(
            &mut state,
            &map,
            &pois,
            Strategy::Greedy,
            &AllocParams::default(),
            &graph,
            &mut uavs,
            &cfg,
        )
        .unwrap();
        assert!(out.ran);
        assert_eq!(out.dispatched.len(), 1, "one poi goes to the primary");
        assert_eq!(out.dispatched[0].uav, UavId::Primary);
        assert_eq!(state.mode, PlannerMode::Monitoring);
        assert!(state.waiting.contains(&UavId::Secondary));
        assert!(!uavs[0].active_path.is_empty());

        // a second planning pass on the same map version is blocked
        state.mode = PlannerMode::Planning;
        let out2 = tick_planning(
            &mut state,
            &map,
            &pois,
            Strategy::Greedy,
            &AllocParams::default(),
            &graph,
            &mut uavs,
            &cfg,
        )
        .unwrap();
        assert!(!out2.ran);

        // teleport the primary to its goal; monitoring records the visit
        uavs[0].position = uavs[0].goal.unwrap().position;
        uavs[0].active_path.clear();
        tick_monitoring(&mut state, &mut uavs, &cfg);
        assert_eq!(state.visited.len(), 1);
        assert!(state.waiting.contains(&UavId::Primary));
    }

    #[test]
    fn visited_goals_are_filtered_from_candidates() {
        use crate::sim_harness::UavState;
        use crate::scenario::Scenario;
        use crate::sphere_map::{update, SphereParams};

        let map = known_map([20, 20, 8], 0.2, |_| false);
        let graph = update(&map, SphereParams { r_sph: 0.2, r_max: 1.0, stride: 2 }).unwrap();
        let scenario =
            Scenario::minimal_for_test(Vec3::ZERO, Vec3::new(4.0, 4.0, 1.6), 0.2, vec![]);
        let mut uavs = vec![
            UavState::from_spec(scenario.uav(UavId::Primary)),
            UavState::from_spec(scenario.uav(UavId::Secondary)),
        ];
        let cfg = PlannerConfig { goal_tolerance: 0.3, goal_snap: 0.5, lambda: 0.2, d_c: 0.4 };
        let mut state = PlannerState::default();
        state.waiting.insert(UavId::Primary);
        state.mode = PlannerMode::Planning;
        let poi = Poi {
            position: Vec3::new(3.5, 3.5, 0.9),
            source: crate::frontier_finder::PoiSource::Centroid,
            cluster_id: 0,
            cell: CellIndex::new(17, 17, 4),
        };
        state.visited.push(poi.position);
        let out = tick_planning(
            &mut state,
            &map,
            &[poi],
            Strategy::Mcf,
            &AllocParams::default(),
            &graph,
            &mut uavs,
            &cfg,
        )
        .unwrap();
        assert!(out.ran);
        assert_eq!(out.n_pois, 0);
        assert!(out.dispatched.is_empty());
        // no candidates: the UAV stays waiting via the self-arc
        assert!(state.waiting.contains(&UavId::Primary));
    }
}
