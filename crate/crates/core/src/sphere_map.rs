//! Free-space sphere graph for clearance-aware planning and accessibility.
//!
//! The graph is rebuilt deterministically from each map snapshot: candidate
//! centers are free cells on a sub-lattice, a candidate with obstacle
//! clearance of at least `r_sph` becomes a node with radius `min(d, r_max)`,
//! and nodes whose balls intersect are connected. Unknown cells count as
//! obstacles, which keeps sphere validity conservative while exploring.
//!
//! Clearance is the distance to the nearest occupied (or unknown) cell
//! center, computed by an exact integer squared distance transform. Each
//! edge additionally records its throat: the tightest clearance lower bound
//! along the straight center-to-center segment. Planning for a vehicle of
//! radius `s` runs Dijkstra over nodes with radius >= s using only edges with
//! throat >= s, so a path never squeezes through gaps the vehicle cannot
//! occupy and never crosses cells that are occupied or unexplored.

use crate::error::Result;
use crate::frontier_finder::Poi;
use crate::geom::{dist_point_segment, Vec3};
use crate::occupancy_map::ExploredMap;
use crate::voxel_world::{CellIndex, CellState, VoxelGrid};
use std::cmp::Reverse;
use std::collections::BinaryHeap;

/// Exact squared Euclidean distance (in cell units) to the nearest obstacle
/// cell center, for every cell of a grid.
#[derive(Debug, Clone)]
pub struct DistanceField {
    dims: [usize; 3],
    resolution: f64,
    origin: Vec3,
    sq: Vec<i64>,
}

// Far sentinel for "no obstacle". Large against any real squared distance
// (<= 3e6 cells for 1000-cell axes) yet exact in f64, so the envelope math
// in the 1D transform stays precise.
const FAR: i64 = 1_000_000_000_000;

impl DistanceField {
    pub fn build(grid: &VoxelGrid, obstacle: impl Fn(CellState) -> bool) -> DistanceField {
        let [nx, ny, nz] = grid.dims();
        let n = nx * ny * nz;
        let mut sq: Vec<i64> = Vec::with_capacity(n);
        for i in 0..n {
            sq.push(if obstacle(grid.state_linear(i)) { 0 } else { FAR });
        }
        // three 1D lower-envelope passes lift the 1D transform to 3D
        let mut f = vec![0i64; nx.max(ny).max(nz)];
        let mut d = vec![0i64; nx.max(ny).max(nz)];
        let mut v = vec![0usize; nx.max(ny).max(nz)];
        let mut zb = vec![0f64; nx.max(ny).max(nz) + 1];
        // x rows
        for z in 0..nz {
            for y in 0..ny {
                let base = (z * ny + y) * nx;
                for x in 0..nx {
                    f[x] = sq[base + x];
                }
                edt_1d(&f[..nx], &mut d, &mut v, &mut zb);
                for x in 0..nx {
                    sq[base + x] = d[x];
                }
            }
        }
        // y columns
        for z in 0..nz {
            for x in 0..nx {
                for y in 0..ny {
                    f[y] = sq[(z * ny + y) * nx + x];
                }
                edt_1d(&f[..ny], &mut d, &mut v, &mut zb);
                for y in 0..ny {
                    sq[(z * ny + y) * nx + x] = d[y];
                }
            }
        }
        // z columns
        for y in 0..ny {
            for x in 0..nx {
                for z in 0..nz {
                    f[z] = sq[(z * ny + y) * nx + x];
                }
                edt_1d(&f[..nz], &mut d, &mut v, &mut zb);
                for z in 0..nz {
                    sq[(z * ny + y) * nx + x] = d[z];
                }
            }
        }
        DistanceField {
            dims: grid.dims(),
            resolution: grid.resolution(),
            origin: grid.origin(),
            sq,
        }
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    fn linear(&self, c: CellIndex) -> usize {
        (c.z as usize * self.dims[1] + c.y as usize) * self.dims[0] + c.x as usize
    }

    pub fn clearance_sq_cells(&self, c: CellIndex) -> i64 {
        self.sq[self.linear(c)]
    }

    /// Clearance of a cell center in meters; infinite when no obstacle exists.
    pub fn clearance_m(&self, c: CellIndex) -> f64 {
        let s = self.clearance_sq_cells(c);
        if s >= FAR {
            f64::INFINITY
        } else {
            (s as f64).sqrt() * self.resolution
        }
    }

    pub fn cell_of(&self, p: Vec3) -> Option<CellIndex> {
        let r = p - self.origin;
        let c = CellIndex::new(
            (r.x / self.resolution).floor() as i32,
            (r.y / self.resolution).floor() as i32,
            (r.z / self.resolution).floor() as i32,
        );
        let [nx, ny, nz] = self.dims;
        if c.x >= 0
            && c.y >= 0
            && c.z >= 0
            && (c.x as usize) < nx
            && (c.y as usize) < ny
            && (c.z as usize) < nz
        {
            Some(c)
        } else {
            None
        }
    }

    fn cell_center(&self, c: CellIndex) -> Vec3 {
        self.origin
            + Vec3::new(
                (c.x as f64 + 0.5) * self.resolution,
                (c.y as f64 + 0.5) * self.resolution,
                (c.z as f64 + 0.5) * self.resolution,
            )
    }

    /// Conservative clearance lower bound at an arbitrary point.
    pub fn clearance_at(&self, p: Vec3) -> f64 {
        match self.cell_of(p) {
            Some(c) => self.clearance_m(c) - p.dist(self.cell_center(c)),
            None => 0.0,
        }
    }
}

/// 1D squared distance transform (lower envelope of parabolas). FAR inputs
/// participate as very high parabolas; they only win where nothing finite
/// reaches, leaving values >= FAR that read back as "no obstacle".
fn edt_1d(f: &[i64], d: &mut [i64], v: &mut [usize], z: &mut [f64]) {
    let n = f.len();
    let sep = |q: usize, p: usize| -> f64 {
        ((f[q] - f[p]) as f64 + (q * q) as f64 - (p * p) as f64) / (2.0 * (q as f64 - p as f64))
    };
    let mut k = 0usize;
    v[0] = 0;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        let mut s = sep(q, v[k]);
        while k > 0 && s <= z[k] {
            k -= 1;
            s = sep(q, v[k]);
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = f64::INFINITY;
    }
    let mut k = 0usize;
    for q in 0..n {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let dq = q as i64 - p as i64;
        d[q] = f[p] + dq * dq;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereNode {
    pub center: Vec3,
    pub radius: f64,
    pub cell: CellIndex,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereEdge {
    pub a: u32,
    pub b: u32,
    pub length: f64,
    /// Minimum clearance lower bound along the straight a-b segment.
    pub throat: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct SphereParams {
    /// Minimum sphere radius; candidates below it are discarded.
    pub r_sph: f64,
    /// Radius cap.
    pub r_max: f64,
    /// Candidate sub-lattice stride in cells.
    pub stride: usize,
}

impl Default for SphereParams {
    fn default() -> SphereParams {
        SphereParams {
            r_sph: 0.35,
            r_max: 2.0,
            stride: 2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SphereGraph {
    pub nodes: Vec<SphereNode>,
    pub edges: Vec<SphereEdge>,
    adj: Vec<Vec<u32>>,
    df: DistanceField,
    pub built_from_version: u64,
    params: SphereParams,
}

/// Deterministic full rebuild from a map snapshot.
pub fn update(map: &ExploredMap, params: SphereParams) -> Result<SphereGraph> {
    assert!(params.r_sph > 0.0 && params.r_max >= params.r_sph && params.stride >= 1);
    let grid = map.grid();
    let df = DistanceField::build(grid, |s| s != CellState::Free);
    let [nx, ny, nz] = grid.dims();
    let mut nodes = Vec::new();
    for z in (0..nz).step_by(params.stride) {
        for y in (0..ny).step_by(params.stride) {
            for x in (0..nx).step_by(params.stride) {
                let c = CellIndex::new(x as i32, y as i32, z as i32);
                if grid.state(c) != CellState::Free {
                    continue;
                }
                let d = df.clearance_m(c);
                if d >= params.r_sph {
                    nodes.push(SphereNode {
                        center: grid.cell_center(c),
                        radius: d.min(params.r_max),
                        cell: c,
                    });
                }
            }
        }
    }

    // bucket nodes so edge candidates are limited to reachable neighbors
    let bucket = 2.0 * params.r_max;
    let key = |p: Vec3| {
        (
            (p.x / bucket).floor() as i64,
            (p.y / bucket).floor() as i64,
            (p.z / bucket).floor() as i64,
        )
    };
    let mut buckets: std::collections::HashMap<(i64, i64, i64), Vec<u32>> =
        std::collections::HashMap::new();
    for (i, n) in nodes.iter().enumerate() {
        buckets.entry(key(n.center)).or_default().push(i as u32);
    }
    let mut edges = Vec::new();
    let mut adj = vec![Vec::new(); nodes.len()];
    for (i, ni) in nodes.iter().enumerate() {
        let (kx, ky, kz) = key(ni.center);
        for dz in -1..=1 {
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let Some(cand) = buckets.get(&(kx + dx, ky + dy, kz + dz)) else {
                        continue;
                    };
                    for &j in cand {
                        let j = j as usize;
                        if j <= i {
                            continue;
                        }
                        let nj = &nodes[j];
                        let len = ni.center.dist(nj.center);
                        if len < ni.radius + nj.radius {
                            let throat = segment_throat(&df, grid, ni.center, nj.center);
                            let e = SphereEdge {
                                a: i as u32,
                                b: j as u32,
                                length: len,
                                throat,
                            };
                            adj[i].push(edges.len() as u32);
                            adj[j].push(edges.len() as u32);
                            edges.push(e);
                        }
                    }
                }
            }
        }
    }
    for a in &mut adj {
        a.sort_unstable();
    }
    Ok(SphereGraph {
        nodes,
        edges,
        adj,
        df,
        built_from_version: map.version(),
        params,
    })
}

/// Tightest clearance lower bound along the a-b segment, evaluated on every
/// cell the segment passes through. An edge crossing an obstacle or unknown
/// cell comes out with throat <= 0 and is unusable for any vehicle.
fn segment_throat(df: &DistanceField, grid: &VoxelGrid, a: Vec3, b: Vec3) -> f64 {
    let len = a.dist(b);
    let Some(dir) = (b - a).normalized() else {
        return match grid.world_to_cell(a) {
            Some(c) => df.clearance_m(c),
            None => 0.0,
        };
    };
    let mut throat = f64::INFINITY;
    grid.traverse_segment(a, dir, len, |c, _| {
        let lb = df.clearance_m(c) - dist_point_segment(grid.cell_center(c), a, b);
        if lb < throat {
            throat = lb;
        }
        true
    });
    throat
}

/// Planner output: sphere centers along the route, then the goal point.
#[derive(Debug, Clone, PartialEq)]
pub struct SpherePath {
    pub waypoints: Vec<Vec3>,
    pub min_clearance: f64,
    /// Polyline length from the start position through every waypoint.
    pub length_m: f64,
    pub waypoint_count: usize,
    /// Dijkstra cost between the snapped start and goal nodes.
    pub cost: f64,
}

/// Single-source shortest paths over the admissible subgraph for one vehicle
/// radius. Shared by point-to-point planning, accessibility checks and the
/// allocator's per-POI queries so all of them agree.
#[derive(Debug, Clone)]
pub struct ShortestPaths {
    start: Vec3,
    start_node: usize,
    uav_radius: f64,
    goal_snap: f64,
    dist: Vec<f64>,
    parent_edge: Vec<u32>,
}

const NO_EDGE: u32 = u32::MAX;

impl SphereGraph {
    pub fn params(&self) -> SphereParams {
        self.params
    }

    pub fn distance_field(&self) -> &DistanceField {
        &self.df
    }

    pub fn neighbors(&self, node: usize) -> &[u32] {
        &self.adj[node]
    }

    /// Admissible node nearest to `p`: radius >= uav_radius and either the
    /// ball contains `p` or its center is within `goal_snap`. Ties go to the
    /// lower node id. The same rule snaps both endpoints of a plan.
    pub fn snap_node(&self, p: Vec3, uav_radius: f64, goal_snap: f64) -> Option<usize> {
        let mut best: Option<(f64, usize)> = None;
        for (i, n) in self.nodes.iter().enumerate() {
            if n.radius < uav_radius {
                continue;
            }
            let d = n.center.dist(p);
            if d < n.radius || d <= goal_snap {
                match best {
                    Some((bd, _)) if bd <= d => {}
                    _ => best = Some((d, i)),
                }
            }
        }
        best.map(|(_, i)| i)
    }

    /// Dijkstra from the node snapped to `start`, over nodes with radius and
    /// edges with throat admissible for `uav_radius`. Edge cost is
    /// `length * (1 + lambda / min(radius_a, radius_b))`.
    pub fn shortest_paths(
        &self,
        start: Vec3,
        uav_radius: f64,
        lambda: f64,
        goal_snap: f64,
    ) -> Option<ShortestPaths> {
        let start_node = self.snap_node(start, uav_radius, goal_snap)?;
        let n = self.nodes.len();
        let mut dist = vec![f64::INFINITY; n];
        let mut parent_edge = vec![NO_EDGE; n];
        let mut heap: BinaryHeap<Reverse<(u64, usize)>> = BinaryHeap::new();
        dist[start_node] = 0.0;
        heap.push(Reverse((0u64, start_node)));
        while let Some(Reverse((dbits, u))) = heap.pop() {
            let du = f64::from_bits(dbits);
            if du > dist[u] {
                continue;
            }
            for &ei in &self.adj[u] {
                let e = &self.edges[ei as usize];
                if e.throat < uav_radius {
                    continue;
                }
                let v = if e.a as usize == u { e.b as usize } else { e.a as usize };
                if self.nodes[v].radius < uav_radius {
                    continue;
                }
                let w = e.length
                    * (1.0 + lambda / self.nodes[e.a as usize].radius.min(self.nodes[e.b as usize].radius));
                let nd = du + w;
                if nd < dist[v] {
                    dist[v] = nd;
                    parent_edge[v] = ei;
                    heap.push(Reverse((nd.to_bits(), v)));
                }
            }
        }
        Some(ShortestPaths {
            start,
            start_node,
            uav_radius,
            goal_snap,
            dist,
            parent_edge,
        })
    }

    /// Point-to-point clearance-aware plan; `None` means no admissible route.
    pub fn plan(
        &self,
        start: Vec3,
        goal: Vec3,
        uav_radius: f64,
        lambda: f64,
        goal_snap: f64,
    ) -> Option<SpherePath> {
        self.shortest_paths(start, uav_radius, lambda, goal_snap)?
            .path_to(self, goal)
    }

    /// Shares the plan machinery, so the verdicts always agree with `plan`.
    pub fn is_accessible(
        &self,
        from: Vec3,
        poi: &Poi,
        uav_radius: f64,
        lambda: f64,
        goal_snap: f64,
    ) -> bool {
        self.plan(from, poi.position, uav_radius, lambda, goal_snap).is_some()
    }
}

impl ShortestPaths {
    pub fn start_node(&self) -> usize {
        self.start_node
    }

    pub fn reaches(&self, node: usize) -> bool {
        self.dist[node].is_finite()
    }

    pub fn path_to(&self, graph: &SphereGraph, goal: Vec3) -> Option<SpherePath> {
        let goal_node = graph.snap_node(goal, self.uav_radius, self.goal_snap)?;
        if self.dist[goal_node].is_infinite() {
            return None;
        }
        if goal_node == self.start_node {
            return Some(SpherePath {
                waypoints: vec![goal],
                min_clearance: graph.nodes[goal_node].radius,
                length_m: self.start.dist(goal),
                waypoint_count: 1,
                cost: 0.0,
            });
        }
        let mut chain = vec![goal_node];
        let mut cur = goal_node;
        while cur != self.start_node {
            let e = &graph.edges[self.parent_edge[cur] as usize];
            cur = if e.a as usize == cur { e.b as usize } else { e.a as usize };
            chain.push(cur);
        }
        chain.reverse();
        let mut waypoints: Vec<Vec3> = chain.iter().map(|&i| graph.nodes[i].center).collect();
        let min_clearance = chain
            .iter()
            .map(|&i| graph.nodes[i].radius)
            .fold(f64::INFINITY, f64::min);
        waypoints.push(goal);
        let mut length = self.start.dist(waypoints[0]);
        for w in waypoints.windows(2) {
            length += w[0].dist(w[1]);
        }
        Some(SpherePath {
            waypoint_count: waypoints.len(),
            waypoints,
            min_clearance,
            length_m: length,
            cost: self.dist[goal_node],
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Aabb;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn known_map(n: [usize; 3], res: f64, occ: &[CellIndex]) -> ExploredMap {
        let world = VoxelGrid::new(Vec3::ZERO, res, n, CellState::Free).unwrap();
        let mut map = ExploredMap::new(&world, world.bounds()).unwrap();
        for i in 0..world.cell_count() {
            let c = world.from_linear(i);
            map.mark_known(
                c,
                if occ.contains(&c) {
                    CellState::Occupied
                } else {
                    CellState::Free
                },
            );
        }
        map
    }

    #[test]
    fn edt_matches_brute_force_on_random_grids() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..8 {
            let dims = [
                rng.gen_range(4..14usize),
                rng.gen_range(4..12usize),
                rng.gen_range(3..10usize),
            ];
            let mut grid =
                VoxelGrid::new(Vec3::ZERO, 0.2, dims, CellState::Free).unwrap();
            let mut obstacles = Vec::new();
            for i in 0..grid.cell_count() {
                if rng.gen_bool(0.08) {
                    let c = grid.from_linear(i);
                    grid.set_state(c, CellState::Occupied);
                    obstacles.push(c);
                }
            }
            let df = DistanceField::build(&grid, |s| s == CellState::Occupied);
            for i in 0..grid.cell_count() {
                let c = grid.from_linear(i);
                let want = obstacles
                    .iter()
                    .map(|o| {
                        let (dx, dy, dz) =
                            ((o.x - c.x) as i64, (o.y - c.y) as i64, (o.z - c.z) as i64);
                        dx * dx + dy * dy + dz * dz
                    })
                    .min();
                match want {
                    Some(w) => assert_eq!(df.clearance_sq_cells(c), w, "cell {c:?}"),
                    None => assert!(df.clearance_sq_cells(c) >= FAR),
                }
            }
        }
    }

    #[test]
    fn open_region_nodes_fully_interconnect() {
        // 8 sub-lattice candidates in an open 4-cell cube, big resolution so
        // all balls overlap
        let map = known_map([4, 4, 4], 0.5, &[]);
        let graph = update(
            &map,
            SphereParams {
                r_sph: 0.3,
                r_max: 5.0,
                stride: 2,
            },
        )
        .unwrap();
        assert_eq!(graph.nodes.len(), 8);
        assert_eq!(graph.edges.len(), 8 * 7 / 2);
    }

    #[test]
    fn narrow_corridor_has_no_nodes() {
        // free corridor 2 cells wide (0.4 m) between walls; r_sph 0.35
        let mut occ = Vec::new();
        for z in 0..6 {
            for x in 0..10 {
                occ.push(CellIndex::new(x, 0, z));
                occ.push(CellIndex::new(x, 3, z));
            }
        }
        let map = known_map([10, 4, 6], 0.2, &occ);
        let graph = update(&map, SphereParams { r_sph: 0.35, r_max: 2.0, stride: 1 }).unwrap();
        for n in &graph.nodes {
            assert!(
                n.cell.y != 1 && n.cell.y != 2,
                "unexpected node inside corridor: {n:?}"
            );
        }
    }

    #[test]
    fn node_radii_match_brute_force_nearest_obstacle() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut occ = Vec::new();
        for _ in 0..40 {
            occ.push(CellIndex::new(
                rng.gen_range(0..16),
                rng.gen_range(0..16),
                rng.gen_range(0..8),
            ));
        }
        let map = known_map([16, 16, 8], 0.2, &occ);
        let params = SphereParams { r_sph: 0.3, r_max: 1.5, stride: 2 };
        let graph = update(&map, params).unwrap();
        assert!(!graph.nodes.is_empty());
        for n in &graph.nodes {
            let d = occ
                .iter()
                .map(|o| map.grid().cell_center(*o).dist(n.center))
                .fold(f64::INFINITY, f64::min);
            assert!(
                (n.radius - d.min(params.r_max)).abs() <= map.grid().resolution(),
                "radius {} vs brute force {}",
                n.radius,
                d
            );
            // ball contains no obstacle cell center
            assert!(d >= n.radius - 1e-9);
        }
    }

    fn wall_with_gap_map() -> ExploredMap {
        // wall at x cells 10, with a 2-cell gap at y in {4,5}, z all
        let mut occ = Vec::new();
        for z in 0..8 {
            for y in 0..10 {
                if y == 4 || y == 5 {
                    continue;
                }
                occ.push(CellIndex::new(10, y, z));
            }
        }
        known_map([20, 10, 8], 0.2, &occ)
    }

    #[test]
    fn plan_trivial_same_sphere() {
        let map = known_map([6, 6, 6], 0.4, &[]);
        let graph = update(&map, SphereParams { r_sph: 0.3, r_max: 4.0, stride: 2 }).unwrap();
        let p = Vec3::new(1.2, 1.2, 1.2);
        let path = graph.plan(p, p, 0.2, 0.2, 0.5).unwrap();
        assert_eq!(path.waypoint_count, 1);
        assert_eq!(path.length_m, 0.0);
        assert_eq!(path.cost, 0.0);
    }

    #[test]
    fn walled_off_goal_is_inaccessible() {
        // solid wall, no gap
        let mut occ = Vec::new();
        for z in 0..8 {
            for y in 0..10 {
                occ.push(CellIndex::new(10, y, z));
            }
        }
        let map = known_map([20, 10, 8], 0.2, &occ);
        let graph = update(&map, SphereParams { r_sph: 0.3, r_max: 2.0, stride: 1 }).unwrap();
        let start = Vec3::new(1.0, 1.0, 0.8);
        let goal = Vec3::new(3.0, 1.0, 0.8);
        assert!(graph.plan(start, goal, 0.25, 0.2, 0.5).is_none());
    }

    #[test]
    fn gap_admits_small_but_not_large_vehicle() {
        let map = wall_with_gap_map();
        let graph = update(&map, SphereParams { r_sph: 0.2, r_max: 2.0, stride: 1 }).unwrap();
        let start = Vec3::new(1.0, 0.9, 0.8);
        let goal = Vec3::new(3.0, 0.9, 0.8);
        let small = graph.plan(start, goal, 0.2, 0.2, 0.5);
        let large = graph.plan(start, goal, 0.6, 0.2, 0.5);
        assert!(small.is_some(), "small vehicle should fit through the gap");
        assert!(large.is_none(), "large vehicle must not fit");
    }

    #[test]
    fn plan_cost_matches_independent_dijkstra() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut occ = Vec::new();
        for _ in 0..30 {
            occ.push(CellIndex::new(
                rng.gen_range(0..16),
                rng.gen_range(0..16),
                rng.gen_range(0..8),
            ));
        }
        let map = known_map([16, 16, 8], 0.2, &occ);
        let graph = update(&map, SphereParams { r_sph: 0.3, r_max: 1.2, stride: 2 }).unwrap();
        let radius = 0.3;
        // independent oracle: dense Dijkstra over the same admissible graph,
        // lambda = 0 so costs are plain lengths
        let n = graph.nodes.len();
        let mut wmat = vec![vec![f64::INFINITY; n]; n];
        for e in &graph.edges {
            if e.throat >= radius
                && graph.nodes[e.a as usize].radius >= radius
                && graph.nodes[e.b as usize].radius >= radius
            {
                wmat[e.a as usize][e.b as usize] = e.length;
                wmat[e.b as usize][e.a as usize] = e.length;
            }
        }
        let oracle = |s: usize| -> Vec<f64> {
            let mut dist = vec![f64::INFINITY; n];
            let mut done = vec![false; n];
            dist[s] = 0.0;
            for _ in 0..n {
                let mut u = usize::MAX;
                let mut best = f64::INFINITY;
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
                for v in 0..n {
                    if wmat[u][v].is_finite() && dist[u] + wmat[u][v] < dist[v] {
                        dist[v] = dist[u] + wmat[u][v];
                    }
                }
            }
            dist
        };
        let mut checked = 0;
        for _ in 0..60 {
            if checked >= 20 {
                break;
            }
            let a = rng.gen_range(0..n);
            let b = rng.gen_range(0..n);
            if graph.nodes[a].radius < radius || graph.nodes[b].radius < radius {
                continue;
            }
            let sp = graph
                .shortest_paths(graph.nodes[a].center, radius, 0.0, 0.01)
                .unwrap();
            assert_eq!(sp.start_node(), a);
            let dist = oracle(a);
            match sp.path_to(&graph, graph.nodes[b].center) {
                Some(p) => {
                    assert!(
                        (p.cost - dist[b]).abs() < 1e-9,
                        "cost {} oracle {}",
                        p.cost,
                        dist[b]
                    );
                }
                None => assert!(dist[b].is_infinite()),
            }
            checked += 1;
        }
        assert!(checked >= 10, "not enough admissible node pairs sampled");
    }

    #[test]
    fn plan_cost_is_symmetric() {
        let map = wall_with_gap_map();
        let graph = update(&map, SphereParams { r_sph: 0.2, r_max: 2.0, stride: 1 }).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut checked = 0;
        while checked < 15 {
            let a = Vec3::new(
                rng.gen_range(0.3..3.7),
                rng.gen_range(0.3..1.7),
                rng.gen_range(0.3..1.3),
            );
            let b = Vec3::new(
                rng.gen_range(0.3..3.7),
                rng.gen_range(0.3..1.7),
                rng.gen_range(0.3..1.3),
            );
            let ab = graph.plan(a, b, 0.2, 0.2, 0.5);
            let ba = graph.plan(b, a, 0.2, 0.2, 0.5);
            match (ab, ba) {
                (Some(x), Some(y)) => {
                    assert!((x.cost - y.cost).abs() < 1e-9);
                    checked += 1;
                }
                (None, None) => {}
                _ => panic!("asymmetric reachability"),
            }
        }
    }

    #[test]
    fn accessibility_is_monotone_in_radius() {
        let map = wall_with_gap_map();
        let graph = update(&map, SphereParams { r_sph: 0.2, r_max: 2.0, stride: 1 }).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..40 {
            let a = Vec3::new(
                rng.gen_range(0.3..3.7),
                rng.gen_range(0.3..1.7),
                rng.gen_range(0.3..1.3),
            );
            let b = Vec3::new(
                rng.gen_range(0.3..3.7),
                rng.gen_range(0.3..1.7),
                rng.gen_range(0.3..1.3),
            );
            let big = graph.plan(a, b, 0.45, 0.2, 0.5).is_some();
            let small = graph.plan(a, b, 0.22, 0.2, 0.5).is_some();
            if big {
                assert!(small, "path for the larger radius implies one for the smaller");
            }
        }
    }

    #[test]
    fn path_waypoints_respect_clearance() {
        let map = wall_with_gap_map();
        let graph = update(&map, SphereParams { r_sph: 0.2, r_max: 2.0, stride: 1 }).unwrap();
        let radius = 0.2;
        let p = graph
            .plan(
                Vec3::new(0.5, 0.9, 0.8),
                Vec3::new(3.5, 0.9, 0.8),
                radius,
                0.2,
                0.5,
            )
            .expect("route through the gap");
        // brute-force obstacle distance at every waypoint except the goal
        let occ: Vec<Vec3> = (0..map.grid().cell_count())
            .map(|i| map.grid().from_linear(i))
            .filter(|&c| map.grid().state(c) == CellState::Occupied)
            .map(|c| map.grid().cell_center(c))
            .collect();
        for w in &p.waypoints[..p.waypoints.len() - 1] {
            let d = occ.iter().map(|o| o.dist(*w)).fold(f64::INFINITY, f64::min);
            assert!(d >= radius - 1e-9, "waypoint {w:?} clearance {d}");
        }
        assert!(p.min_clearance >= radius);
    }

    #[test]
    fn stale_version_is_tracked() {
        let world = VoxelGrid::new(Vec3::ZERO, 0.2, [6, 6, 6], CellState::Free).unwrap();
        let mut map = ExploredMap::new(&world, world.bounds()).unwrap();
        map.mark_known(CellIndex::new(1, 1, 1), CellState::Free);
        let g = update(&map, SphereParams::default()).unwrap();
        assert_eq!(g.built_from_version, map.version());
    }

    #[test]
    fn explore_bounds_subset() {
        // guard against Aabb::contains misuse in snapping; whole map free
        let map = known_map([8, 8, 8], 0.25, &[]);
        let graph = update(&map, SphereParams { r_sph: 0.2, r_max: 3.0, stride: 2 }).unwrap();
        let inside = Vec3::new(1.0, 1.0, 1.0);
        assert!(graph.snap_node(inside, 0.2, 0.5).is_some());
        let b = map.explore_bounds();
        assert!(Aabb::new(b.min, b.max).contains(inside));
    }
}
