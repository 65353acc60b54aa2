//! Task allocation: greedy nearest-accessible assignment and the globally
//! optimal min-cost-flow formulation.
//!
//! Both strategies rank candidate goals by the same per-vehicle heuristics:
//! plain Euclidean distance for the primary UAV, and a weighted mix of
//! distance and heading change for the secondary. The greedy strategy gives
//! the primary UAV priority and takes the first accessible candidate per
//! vehicle. The flow strategy builds a small network (source, sink, one node
//! per UAV and candidate, plus a high-cost self-arc per UAV that encodes
//! "stay put" and guarantees feasibility) and solves it exactly with
//! successive shortest augmenting paths over integer milliunit costs.

use crate::error::{Error, Result};
use crate::frontier_finder::Poi;
use crate::geom::{wrap_angle, Vec3};
use crate::occupancy_map::UavId;
use crate::sphere_map::SphereGraph;

/// Fixed-point scale: costs enter the solver in integer milliunits.
pub const COST_SCALE: f64 = 1000.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    Greedy,
    Mcf,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Greedy => "greedy",
            Strategy::Mcf => "mcf",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GoalChoice {
    Stay,
    Goal(Poi),
}

impl GoalChoice {
    pub fn poi(&self) -> Option<&Poi> {
        match self {
            GoalChoice::Stay => None,
            GoalChoice::Goal(p) => Some(p),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub goal_p: GoalChoice,
    pub goal_s: GoalChoice,
    pub total_cost: f64,
}

impl Assignment {
    pub fn goal_for(&self, id: UavId) -> &GoalChoice {
        match id {
            UavId::Primary => &self.goal_p,
            UavId::Secondary => &self.goal_s,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct AllocParams {
    pub alpha: f64,
    pub beta: f64,
    /// Arc budget per UAV.
    pub n_arcs: usize,
    /// Self-arc cost, in the same units as the heuristics.
    pub c_x: f64,
    pub lambda: f64,
    pub goal_snap: f64,
}

impl Default for AllocParams {
    fn default() -> AllocParams {
        AllocParams {
            alpha: 1.0,
            beta: 0.5,
            n_arcs: 5,
            c_x: 1000.0,
            lambda: 0.2,
            goal_snap: 0.5,
        }
    }
}

/// Primary UAV heuristic: Euclidean distance to the candidate.
pub fn greedy_cost_p(x_p: Vec3, g: Vec3) -> f64 {
    x_p.dist(g)
}

/// Secondary UAV heuristic: alpha * distance + beta * |heading change|,
/// where the target bearing is the azimuth of the displacement and the
/// difference is wrapped into (-pi, pi]. A candidate directly above or below
/// the vehicle has no defined bearing; its heading term is zero.
pub fn greedy_cost_s(x_s: Vec3, phi_s: f64, g: Vec3, alpha: f64, beta: f64) -> f64 {
    let d = g - x_s;
    let heading_term = if d.horizontal_norm() < 1e-12 {
        0.0
    } else {
        wrap_angle(phi_s - d.azimuth()).abs()
    };
    alpha * x_s.dist(g) + beta * heading_term
}

/// Candidates for one UAV in ascending heuristic order, ties broken by
/// lexicographic position.
fn ranked_candidates(pois: &[Poi], cost: impl Fn(&Poi) -> f64) -> Vec<(f64, usize)> {
    let mut v: Vec<(f64, usize)> = pois.iter().enumerate().map(|(i, p)| (cost(p), i)).collect();
    v.sort_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then_with(|| pois[a.1].position.lex_cmp(pois[b.1].position))
    });
    v
}

/// In-flight goals of UAVs that are not waiting for a new assignment. A
/// committed UAV keeps its goal and the candidate is off-limits for the
/// other vehicle; re-optimizing a vehicle that cannot be redirected would
/// let a phantom assignment distort the real one.
#[derive(Debug, Clone, Copy, Default)]
pub struct Commitments {
    pub primary: Option<Poi>,
    pub secondary: Option<Poi>,
}

/// Keep-out spheres per vehicle (indexed by `UavId::index`): the
/// critical-distance bubble around the other vehicle while it is parked,
/// and around its in-flight goal. A route whose polyline enters a bubble
/// would only trigger the avoidance maneuver and be aborted (or park the
/// pair within halting range), so such candidates count as inaccessible
/// for this allocation round.
pub type KeepOut = [Vec<(Vec3, f64)>; 2];

/// True when the polyline from `from` through the path waypoints passes
/// within any keep-out sphere.
pub fn path_enters_bubble(
    from: Vec3,
    path: &crate::sphere_map::SpherePath,
    bubbles: &[(Vec3, f64)],
) -> bool {
    let mut prev = from;
    for &w in &path.waypoints {
        for &(center, radius) in bubbles {
            if crate::geom::dist_point_segment(center, prev, w) < radius {
                return true;
            }
        }
        prev = w;
    }
    false
}

/// Core of the greedy rule over abstract accessibility predicates; the
/// public entry points bind these to sphere-graph planning. Kept generic so
/// oracle tests can drive it with synthetic instances.
pub fn greedy_assign_with(
    pois: &[Poi],
    x_p: Vec3,
    x_s: Vec3,
    phi_s: f64,
    params: &AllocParams,
    committed: Commitments,
    mut accessible_p: impl FnMut(&Poi) -> bool,
    mut accessible_s: impl FnMut(&Poi) -> bool,
) -> Assignment {
    let mut goal_p = GoalChoice::Stay;
    let mut cost_p = 0.0;
    match committed.primary {
        Some(poi) => {
            goal_p = GoalChoice::Goal(poi);
            cost_p = greedy_cost_p(x_p, poi.position);
        }
        None => {
            let order_p = ranked_candidates(pois, |p| greedy_cost_p(x_p, p.position));
            for &(c, i) in &order_p {
                if committed.secondary.map(|s| s.cell) == Some(pois[i].cell) {
                    continue;
                }
                if accessible_p(&pois[i]) {
                    goal_p = GoalChoice::Goal(pois[i]);
                    cost_p = c;
                    break;
                }
            }
        }
    }
    let mut goal_s = GoalChoice::Stay;
    let mut cost_s = 0.0;
    match committed.secondary {
        Some(poi) => {
            goal_s = GoalChoice::Goal(poi);
            cost_s = greedy_cost_s(x_s, phi_s, poi.position, params.alpha, params.beta);
        }
        None => {
            let order_s =
                ranked_candidates(pois, |p| greedy_cost_s(x_s, phi_s, p.position, params.alpha, params.beta));
            for &(c, i) in &order_s {
                if goal_p.poi().map(|p| p.cell) == Some(pois[i].cell) {
                    continue; // primary's goal is excluded for the secondary
                }
                if accessible_s(&pois[i]) {
                    goal_s = GoalChoice::Goal(pois[i]);
                    cost_s = c;
                    break;
                }
            }
        }
    }
    Assignment {
        goal_p,
        goal_s,
        total_cost: cost_p + cost_s,
    }
}

/// Greedy strategy: primary UAV takes its nearest accessible candidate, then
/// the secondary takes its best accessible candidate among the rest; a UAV
/// with no accessible candidate stays where it is.
#[allow(clippy::too_many_arguments)]
pub fn greedy_assign(
    pois: &[Poi],
    x_p: Vec3,
    x_s: Vec3,
    phi_s: f64,
    graph: &SphereGraph,
    s_p: f64,
    s_s: f64,
    params: &AllocParams,
    committed: Commitments,
    keep_out: &KeepOut,
) -> Assignment {
    let tree_p = graph.shortest_paths(x_p, s_p, params.lambda, params.goal_snap);
    let tree_s = graph.shortest_paths(x_s, s_s, params.lambda, params.goal_snap);
    greedy_assign_with(
        pois,
        x_p,
        x_s,
        phi_s,
        params,
        committed,
        |poi| {
            tree_p
                .as_ref()
                .and_then(|t| t.path_to(graph, poi.position))
                .map(|p| !path_enters_bubble(x_p, &p, &keep_out[UavId::Primary.index()]))
                .unwrap_or(false)
        },
        |poi| {
            tree_s
                .as_ref()
                .and_then(|t| t.path_to(graph, poi.position))
                .map(|p| !path_enters_bubble(x_s, &p, &keep_out[UavId::Secondary.index()]))
                .unwrap_or(false)
        },
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowNode {
    Source,
    Sink,
    Uav(UavId),
    /// Candidate goal, indexing into the POI list the network was built from.
    Poi(usize),
    /// Stand-in goal at the UAV's own position; absorbs the self-arc.
    SelfGoal(UavId),
}

#[derive(Debug, Clone, Copy)]
pub struct FlowArc {
    pub from: usize,
    pub to: usize,
    pub capacity: u32,
    /// Cost in integer milliunits.
    pub cost: i64,
}

/// Assignment problem encoded as a min-cost-flow instance of value 2.
#[derive(Debug, Clone)]
pub struct FlowNetwork {
    pub nodes: Vec<FlowNode>,
    pub arcs: Vec<FlowArc>,
    pub pois: Vec<Poi>,
    /// Arcs from each UAV node, in queue pop order (used for reporting).
    pub uav_arc_count: [usize; 2],
}

impl FlowNetwork {
    pub fn source(&self) -> usize {
        0
    }

    pub fn sink(&self) -> usize {
        1
    }

    pub fn uav_node(&self, id: UavId) -> usize {
        2 + id.index()
    }

    pub fn poi_node(&self, poi_idx: usize) -> usize {
        4 + poi_idx
    }

    pub fn self_node(&self, id: UavId) -> usize {
        4 + self.pois.len() + id.index()
    }

    pub fn balance(&self, node: usize) -> i64 {
        if node == self.source() {
            2
        } else if node == self.sink() {
            -2
        } else {
            0
        }
    }

    /// Cost of a concrete (goal_p, goal_s) pair under this network's arcs,
    /// if both corresponding arcs exist. Used by tests to compare strategies
    /// on the same instance.
    pub fn pair_cost(&self, p_choice: Option<usize>, s_choice: Option<usize>) -> Option<i64> {
        if let (Some(a), Some(b)) = (p_choice, s_choice) {
            if a == b {
                return None;
            }
        }
        let mut total = 0i64;
        for (id, choice) in [(UavId::Primary, p_choice), (UavId::Secondary, s_choice)] {
            let to = match choice {
                Some(i) => self.poi_node(i),
                None => self.self_node(id),
            };
            let from = self.uav_node(id);
            let arc = self.arcs.iter().find(|a| a.from == from && a.to == to)?;
            total += arc.cost;
        }
        Some(total)
    }
}

fn scale_cost(c: f64) -> i64 {
    (c * COST_SCALE).round() as i64
}

/// Build the flow network from explicit per-UAV plan outcomes. The closures
/// return `Some(extra_cost)` (the path-derived cost surcharge) when the POI
/// is reachable for that UAV. Candidates are examined in heuristic order and
/// each UAV stops after `n_arcs` reachable ones. A committed UAV gets only
/// the arc to its in-flight goal (appended to the candidate list when
/// absent), and that goal is excluded from the other vehicle's queue.
#[allow(clippy::too_many_arguments)]
pub fn build_network_with(
    pois: &[Poi],
    x_p: Vec3,
    x_s: Vec3,
    phi_s: f64,
    params: &AllocParams,
    committed: Commitments,
    mut plan_p: impl FnMut(&Poi) -> Option<f64>,
    mut plan_s: impl FnMut(&Poi) -> Option<f64>,
) -> Result<FlowNetwork> {
    assert!(params.n_arcs >= 1, "arc budget must be >= 1");
    let mut all = pois.to_vec();
    for c in [committed.primary, committed.secondary].into_iter().flatten() {
        if !all.iter().any(|p| p.cell == c.cell) {
            all.push(c);
        }
    }
    let mut net = FlowNetwork {
        nodes: Vec::new(),
        arcs: Vec::new(),
        pois: all,
        uav_arc_count: [0, 0],
    };
    net.nodes.push(FlowNode::Source);
    net.nodes.push(FlowNode::Sink);
    net.nodes.push(FlowNode::Uav(UavId::Primary));
    net.nodes.push(FlowNode::Uav(UavId::Secondary));
    for i in 0..net.pois.len() {
        net.nodes.push(FlowNode::Poi(i));
    }
    net.nodes.push(FlowNode::SelfGoal(UavId::Primary));
    net.nodes.push(FlowNode::SelfGoal(UavId::Secondary));

    // source and sink arcs exist only to express matching as a flow; cost 0
    for id in UavId::BOTH {
        net.arcs.push(FlowArc {
            from: net.source(),
            to: net.uav_node(id),
            capacity: 1,
            cost: 0,
        });
    }
    for i in 0..net.pois.len() {
        net.arcs.push(FlowArc {
            from: net.poi_node(i),
            to: net.sink(),
            capacity: 1,
            cost: 0,
        });
    }
    for id in UavId::BOTH {
        net.arcs.push(FlowArc {
            from: net.self_node(id),
            to: net.sink(),
            capacity: 1,
            cost: 0,
        });
    }

    let c_x_scaled = scale_cost(params.c_x);
    let queue_for = |own: Option<Poi>, other: Option<Poi>, cost: &dyn Fn(&Poi) -> f64| -> Vec<(f64, usize)> {
        match own {
            Some(c) => {
                let i = net.pois.iter().position(|p| p.cell == c.cell).expect("appended");
                vec![(cost(&net.pois[i]), i)]
            }
            None => ranked_candidates(&net.pois, cost)
                .into_iter()
                .filter(|&(_, i)| other.map(|o| o.cell) != Some(net.pois[i].cell))
                .collect(),
        }
    };
    let queue_p = queue_for(committed.primary, committed.secondary, &|p: &Poi| {
        greedy_cost_p(x_p, p.position)
    });
    let queue_s = queue_for(committed.secondary, committed.primary, &|p: &Poi| {
        greedy_cost_s(x_s, phi_s, p.position, params.alpha, params.beta)
    });
    add_uav_arcs(&mut net, UavId::Primary, &queue_p, &mut plan_p, params, c_x_scaled)?;
    add_uav_arcs(&mut net, UavId::Secondary, &queue_s, &mut plan_s, params, c_x_scaled)?;
    Ok(net)
}

fn add_uav_arcs(
    net: &mut FlowNetwork,
    id: UavId,
    queue: &[(f64, usize)],
    plan: &mut impl FnMut(&Poi) -> Option<f64>,
    params: &AllocParams,
    c_x_scaled: i64,
) -> Result<()> {
    let mut added = 0usize;
    for &(heuristic, i) in queue {
        if added >= params.n_arcs {
            break;
        }
        let poi = net.pois[i];
        if let Some(extra) = plan(&poi) {
            let cost = scale_cost(heuristic + extra);
            if cost >= c_x_scaled {
                return Err(Error::domain(format!(
                    "self-arc cost {} must exceed every realizable arc cost ({})",
                    params.c_x,
                    heuristic + extra
                )));
            }
            let arc = FlowArc {
                from: net.uav_node(id),
                to: net.poi_node(i),
                capacity: 1,
                cost,
            };
            net.arcs.push(arc);
            added += 1;
        }
    }
    net.uav_arc_count[id.index()] = added;
    let arc = FlowArc {
        from: net.uav_node(id),
        to: net.self_node(id),
        capacity: 1,
        cost: c_x_scaled,
    };
    net.arcs.push(arc);
    Ok(())
}

/// Build the network using sphere-graph planning; the path surcharge is the
/// waypoint count of the found route.
#[allow(clippy::too_many_arguments)]
pub fn build_network(
    pois: &[Poi],
    x_p: Vec3,
    x_s: Vec3,
    phi_s: f64,
    graph: &SphereGraph,
    s_p: f64,
    s_s: f64,
    params: &AllocParams,
    committed: Commitments,
    keep_out: &KeepOut,
) -> Result<FlowNetwork> {
    let tree_p = graph.shortest_paths(x_p, s_p, params.lambda, params.goal_snap);
    let tree_s = graph.shortest_paths(x_s, s_s, params.lambda, params.goal_snap);
    build_network_with(
        pois,
        x_p,
        x_s,
        phi_s,
        params,
        committed,
        |poi| {
            tree_p
                .as_ref()
                .and_then(|t| t.path_to(graph, poi.position))
                .filter(|p| !path_enters_bubble(x_p, p, &keep_out[UavId::Primary.index()]))
                .map(|p| p.waypoint_count as f64)
        },
        |poi| {
            tree_s
                .as_ref()
                .and_then(|t| t.path_to(graph, poi.position))
                .filter(|p| !path_enters_bubble(x_s, p, &keep_out[UavId::Secondary.index()]))
                .map(|p| p.waypoint_count as f64)
        },
    )
}

/// Exact integral min-cost flow of value 2 by successive shortest augmenting
/// paths with node potentials, returning per-arc flow. Costs are
/// nonnegative, so Dijkstra on reduced costs suffices. Deterministic: the
/// candidate scan runs in node order and relaxations keep the first (lowest
/// arc index) strict improvement.
pub fn solve_mcf_flows(net: &FlowNetwork) -> Result<Vec<u32>> {
    let n = net.nodes.len();
    // forward arcs keep remaining capacity; each has an implicit reverse
    // residual with negated cost usable while it carries flow
    let mut remaining: Vec<u32> = net.arcs.iter().map(|a| a.capacity).collect();
    let mut flow: Vec<u32> = vec![0; net.arcs.len()];
    let mut potential = vec![0i64; n];
    for _ in 0..2 {
        const INF: i64 = i64::MAX / 4;
        let mut dist = vec![INF; n];
        let mut done = vec![false; n];
        let mut parent: Vec<Option<(usize, bool)>> = vec![None; n]; // (arc, forward)
        dist[net.source()] = 0;
        loop {
            let mut u = usize::MAX;
            let mut best = INF;
            for i in 0..n {
                if !done[i] && dist[i] < best {
                    best = dist[i];
                    u = i;
                }
            }
            if u == usize::MAX {
                break;
            }
            done[u] = true;
            for (ai, a) in net.arcs.iter().enumerate() {
                if a.from == u && remaining[ai] > 0 {
                    let rc = a.cost + potential[u] - potential[a.to];
                    if dist[u] != INF && dist[u] + rc < dist[a.to] {
                        dist[a.to] = dist[u] + rc;
                        parent[a.to] = Some((ai, true));
                    }
                } else if a.to == u && flow[ai] > 0 {
                    let rc = -a.cost + potential[u] - potential[a.from];
                    if dist[u] != INF && dist[u] + rc < dist[a.from] {
                        dist[a.from] = dist[u] + rc;
                        parent[a.from] = Some((ai, false));
                    }
                }
            }
        }
        if dist[net.sink()] >= INF {
            return Err(Error::Infeasible(
                "no augmenting path; self-arcs missing".to_string(),
            ));
        }
        for i in 0..n {
            if dist[i] < INF {
                potential[i] += dist[i];
            }
        }
        // unit augmentation along the parent chain
        let mut v = net.sink();
        while v != net.source() {
            let (ai, forward) = parent[v].expect("path reconstruction");
            if forward {
                remaining[ai] -= 1;
                flow[ai] += 1;
                v = net.arcs[ai].from;
            } else {
                remaining[ai] += 1;
                flow[ai] -= 1;
                v = net.arcs[ai].to;
            }
        }
    }
    Ok(flow)
}

/// Solve the network and read the goals off the unit-flow arcs.
pub fn solve_mcf(net: &FlowNetwork) -> Result<Assignment> {
    let flow = solve_mcf_flows(net)?;
    let mut total = 0i64;
    for (ai, a) in net.arcs.iter().enumerate() {
        total += a.cost * flow[ai] as i64;
    }
    let goal_of = |id: UavId| -> GoalChoice {
        let from = net.uav_node(id);
        for (ai, a) in net.arcs.iter().enumerate() {
            if a.from == from && flow[ai] > 0 {
                return match net.nodes[a.to] {
                    FlowNode::Poi(i) => GoalChoice::Goal(net.pois[i]),
                    FlowNode::SelfGoal(_) => GoalChoice::Stay,
                    _ => unreachable!("uav arcs lead to goals"),
                };
            }
        }
        GoalChoice::Stay
    };
    Ok(Assignment {
        goal_p: goal_of(UavId::Primary),
        goal_s: goal_of(UavId::Secondary),
        total_cost: total as f64 / COST_SCALE,
    })
}

/// Strategy dispatch with a shared contract: distinct goals unless both stay.
#[allow(clippy::too_many_arguments)]
pub fn assign(
    strategy: Strategy,
    pois: &[Poi],
    x_p: Vec3,
    x_s: Vec3,
    phi_s: f64,
    graph: &SphereGraph,
    s_p: f64,
    s_s: f64,
    params: &AllocParams,
    committed: Commitments,
    keep_out: &KeepOut,
) -> Result<(Assignment, usize)> {
    match strategy {
        Strategy::Greedy => {
            let a = greedy_assign(pois, x_p, x_s, phi_s, graph, s_p, s_s, params, committed, keep_out);
            Ok((a, 0))
        }
        Strategy::Mcf => {
            let net = build_network(pois, x_p, x_s, phi_s, graph, s_p, s_s, params, committed, keep_out)?;
            let arcs = net.uav_arc_count[0] + net.uav_arc_count[1];
            let a = solve_mcf(&net)?;
            Ok((a, arcs))
        }
    }
}
