//! Frontier detection, single-linkage clustering and POI generation.
//!
//! A frontier cell is a known-free cell with at least one face-adjacent
//! unknown neighbor, both inside the exploration bounds. Clusters are the
//! connected components of the "centers within eps" relation, and each
//! cluster contributes one centroid POI plus optional random member samples.

use crate::geom::Vec3;
use crate::occupancy_map::ExploredMap;
use crate::voxel_world::{CellIndex, CellState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontierCell {
    pub cell: CellIndex,
    pub position: Vec3,
}

#[derive(Debug, Clone)]
pub struct FrontierCluster {
    /// Member cells, sorted by cell index.
    pub cells: Vec<FrontierCell>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoiSource {
    Centroid,
    Sample,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Poi {
    pub position: Vec3,
    pub source: PoiSource,
    pub cluster_id: usize,
    pub cell: CellIndex,
}

const FACE_NEIGHBORS: [(i32, i32, i32); 6] = [
    (1, 0, 0),
    (-1, 0, 0),
    (0, 1, 0),
    (0, -1, 0),
    (0, 0, 1),
    (0, 0, -1),
];

/// All frontier cells of the map, sorted by cell index.
pub fn detect_frontiers(map: &ExploredMap) -> Vec<FrontierCell> {
    let grid = map.grid();
    let bounds = map.explore_bounds();
    let mut out = Vec::new();
    for i in 0..grid.cell_count() {
        if grid.state_linear(i) != CellState::Free {
            continue;
        }
        let c = grid.from_linear(i);
        let pos = grid.cell_center(c);
        if !bounds.contains(pos) {
            continue;
        }
        let frontier = FACE_NEIGHBORS.iter().any(|&(dx, dy, dz)| {
            let n = CellIndex::new(c.x + dx, c.y + dy, c.z + dz);
            grid.in_bounds(n)
                && grid.state(n) == CellState::Unknown
                && bounds.contains(grid.cell_center(n))
        });
        if frontier {
            out.push(FrontierCell { cell: c, position: pos });
        }
    }
    out
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> UnionFind {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, x: usize) -> usize {
        if self.parent[x] != x {
            self.parent[x] = self.find(self.parent[x]);
        }
        self.parent[x]
    }

    fn union(&mut self, a: usize, b: usize) {
        let ra = self.find(a);
        let rb = self.find(b);
        if ra != rb {
            // root at the smaller index keeps component ids deterministic
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Single-linkage components under "distance <= eps". Clusters come out
/// sorted by their smallest member cell index, members sorted within.
pub fn cluster_frontiers(cells: &[FrontierCell], eps: f64) -> Vec<FrontierCluster> {
    assert!(eps > 0.0, "eps must be > 0");
    let mut order: Vec<usize> = (0..cells.len()).collect();
    order.sort_by_key(|&i| cells[i].cell);

    // hash buckets of size eps: any pair within eps shares adjacent buckets
    let key = |p: Vec3| {
        (
            (p.x / eps).floor() as i64,
            (p.y / eps).floor() as i64,
            (p.z / eps).floor() as i64,
        )
    };
    let mut buckets: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
    for &i in &order {
        buckets.entry(key(cells[i].position)).or_default().push(i);
    }
    let mut uf = UnionFind::new(cells.len());
    let eps_sq = eps * eps;
    for &i in &order {
        let (kx, ky, kz) = key(cells[i].position);
        for dz in -1..=1 {
            for dy in -1..=1 {
                for dx in -1..=1 {
                    if let Some(cand) = buckets.get(&(kx + dx, ky + dy, kz + dz)) {
                        for &j in cand {
                            if j != i
                                && cells[i].position.dist_sq(cells[j].position) <= eps_sq + 1e-12
                            {
                                uf.union(i, j);
                            }
                        }
                    }
                }
            }
        }
    }

    let mut groups: HashMap<usize, Vec<usize>> = HashMap::new();
    for &i in &order {
        groups.entry(uf.find(i)).or_default().push(i);
    }
    let mut clusters: Vec<Vec<usize>> = groups.into_values().collect();
    for members in &mut clusters {
        members.sort_by_key(|&i| cells[i].cell);
    }
    clusters.sort_by_key(|m| cells[m[0]].cell);
    clusters
        .into_iter()
        .map(|members| FrontierCluster {
            cells: members.into_iter().map(|i| cells[i]).collect(),
        })
        .collect()
}

/// One centroid POI per cluster (snapped to the nearest member cell, ties to
/// the lower cell index) plus `samples_per_cluster` distinct member samples
/// for clusters of at least `min_cluster_for_sampling` cells.
pub fn generate_pois(
    clusters: &[FrontierCluster],
    _map: &ExploredMap,
    samples_per_cluster: usize,
    min_cluster_for_sampling: usize,
    rng_seed: u64,
) -> Vec<Poi> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut out: Vec<Poi> = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for (cluster_id, cluster) in clusters.iter().enumerate() {
        let n = cluster.cells.len();
        if n == 0 {
            continue;
        }
        let mut centroid = Vec3::ZERO;
        for c in &cluster.cells {
            centroid += c.position;
        }
        centroid = centroid * (1.0 / n as f64);
        let snapped = cluster
            .cells
            .iter()
            .min_by(|a, b| {
                a.position
                    .dist_sq(centroid)
                    .total_cmp(&b.position.dist_sq(centroid))
                    .then(a.cell.cmp(&b.cell))
            })
            .expect("nonempty cluster");
        if seen.insert(snapped.cell) {
            out.push(Poi {
                position: snapped.position,
                source: PoiSource::Centroid,
                cluster_id,
                cell: snapped.cell,
            });
        }
        if n >= min_cluster_for_sampling && samples_per_cluster > 0 {
            // partial Fisher-Yates draw without replacement
            let mut idx: Vec<usize> = (0..n).collect();
            let k = samples_per_cluster.min(n);
            for s in 0..k {
                let j = rng.gen_range(s..n);
                idx.swap(s, j);
                let cell = cluster.cells[idx[s]];
                if seen.insert(cell.cell) {
                    out.push(Poi {
                        position: cell.position,
                        source: PoiSource::Sample,
                        cluster_id,
                        cell: cell.cell,
                    });
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Aabb;
    use crate::voxel_world::VoxelGrid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn map_with_states(n: usize, res: f64, f: impl Fn(CellIndex) -> CellState) -> ExploredMap {
        let world = VoxelGrid::new(Vec3::ZERO, res, [n, n, n], CellState::Free).unwrap();
        let mut map = ExploredMap::new(&world, world.bounds()).unwrap();
        for i in 0..world.cell_count() {
            let c = world.from_linear(i);
            match f(c) {
                CellState::Unknown => {}
                s => map.mark_known(c, s),
            }
        }
        map
    }

    #[test]
    fn fully_unknown_map_has_no_frontiers() {
        let map = map_with_states(6, 0.2, |_| CellState::Unknown);
        assert!(detect_frontiers(&map).is_empty());
    }

    #[test]
    fn fully_known_map_has_no_frontiers() {
        let map = map_with_states(6, 0.2, |_| CellState::Free);
        assert!(detect_frontiers(&map).is_empty());
    }

    #[test]
    fn detect_matches_brute_force_on_random_maps() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..10 {
            let states: Vec<CellState> = (0..12 * 12 * 12)
                .map(|_| match rng.gen_range(0..10) {
                    0..=3 => CellState::Unknown,
                    4..=8 => CellState::Free,
                    _ => CellState::Occupied,
                })
                .collect();
            let map = map_with_states(12, 0.2, |c| {
                states[(c.z as usize * 12 + c.y as usize) * 12 + c.x as usize]
            });
            let got = detect_frontiers(&map);
            // brute force over every cell and the 6 face neighbors
            let grid = map.grid();
            let mut want = Vec::new();
            for z in 0..12 {
                for y in 0..12 {
                    for x in 0..12 {
                        let c = CellIndex::new(x, y, z);
                        if grid.state(c) != CellState::Free {
                            continue;
                        }
                        let mut is_frontier = false;
                        for (dx, dy, dz) in FACE_NEIGHBORS {
                            let nb = CellIndex::new(x + dx, y + dy, z + dz);
                            if grid.in_bounds(nb) && grid.state(nb) == CellState::Unknown {
                                is_frontier = true;
                            }
                        }
                        if is_frontier {
                            want.push(c);
                        }
                    }
                }
            }
            let got_cells: Vec<CellIndex> = got.iter().map(|f| f.cell).collect();
            assert_eq!(got_cells, want);
        }
    }

    #[test]
    fn frontier_requires_neighbor_inside_explore_bounds() {
        // free map with unknowns only outside the explore bounds
        let world = VoxelGrid::new(Vec3::ZERO, 0.2, [10, 10, 10], CellState::Free).unwrap();
        let inner = Aabb::new(Vec3::ZERO, Vec3::new(1.0, 2.0, 2.0));
        let mut map = ExploredMap::new(&world, inner).unwrap();
        for i in 0..world.cell_count() {
            let c = world.from_linear(i);
            if inner.contains(world.cell_center(c)) {
                map.mark_known(c, CellState::Free);
            }
        }
        // unknown neighbors exist across x = 1.0, but they are outside bounds
        assert!(detect_frontiers(&map).is_empty());
    }

    fn cell_at(x: i32, y: i32, z: i32, res: f64) -> FrontierCell {
        FrontierCell {
            cell: CellIndex::new(x, y, z),
            position: Vec3::new(
                (x as f64 + 0.5) * res,
                (y as f64 + 0.5) * res,
                (z as f64 + 0.5) * res,
            ),
        }
    }

    #[test]
    fn two_cells_within_eps_form_one_cluster() {
        let cells = vec![cell_at(0, 0, 0, 0.2), cell_at(1, 0, 0, 0.2)];
        let clusters = cluster_frontiers(&cells, 0.4);
        assert_eq!(clusters.len(), 1);
        assert_eq!(clusters[0].cells.len(), 2);
    }

    #[test]
    fn two_cells_beyond_eps_form_two_clusters() {
        let cells = vec![cell_at(0, 0, 0, 0.2), cell_at(4, 0, 0, 0.2)];
        let clusters = cluster_frontiers(&cells, 0.4);
        assert_eq!(clusters.len(), 2);
    }

    #[test]
    fn clustering_matches_pairwise_union_find_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let cells: Vec<FrontierCell> = (0..200)
            .map(|_| {
                cell_at(
                    rng.gen_range(0..25),
                    rng.gen_range(0..25),
                    rng.gen_range(0..6),
                    0.2,
                )
            })
            .collect();
        // dedupe cells (random draws may repeat) to keep the comparison clean
        let mut uniq: Vec<FrontierCell> = Vec::new();
        for c in cells {
            if !uniq.iter().any(|u| u.cell == c.cell) {
                uniq.push(c);
            }
        }
        let eps = 0.5;
        let got = cluster_frontiers(&uniq, eps);

        // O(n^2) oracle
        let n = uniq.len();
        let mut uf = UnionFind::new(n);
        for i in 0..n {
            for j in (i + 1)..n {
                if uniq[i].position.dist(uniq[j].position) <= eps {
                    uf.union(i, j);
                }
            }
        }
        let mut want: HashMap<usize, Vec<CellIndex>> = HashMap::new();
        for i in 0..n {
            let r = uf.find(i);
            want.entry(r).or_default().push(uniq[i].cell);
        }
        let mut want: Vec<Vec<CellIndex>> = want
            .into_values()
            .map(|mut v| {
                v.sort();
                v
            })
            .collect();
        want.sort();
        let mut got_sets: Vec<Vec<CellIndex>> = got
            .iter()
            .map(|c| c.cells.iter().map(|f| f.cell).collect())
            .collect();
        got_sets.sort();
        assert_eq!(got_sets, want);

        // partition property: every cell in exactly one cluster
        let total: usize = got.iter().map(|c| c.cells.len()).sum();
        assert_eq!(total, n);
    }

    fn dummy_map() -> ExploredMap {
        map_with_states(4, 0.2, |_| CellState::Free)
    }

    #[test]
    fn single_cell_cluster_yields_that_centroid() {
        let cluster = FrontierCluster {
            cells: vec![cell_at(2, 1, 0, 0.2)],
        };
        let pois = generate_pois(&[cluster], &dummy_map(), 0, 100, 9);
        assert_eq!(pois.len(), 1);
        assert_eq!(pois[0].source, PoiSource::Centroid);
        assert_eq!(pois[0].cell, CellIndex::new(2, 1, 0));
    }

    #[test]
    fn symmetric_cluster_tie_breaks_to_lower_cell() {
        let cluster = FrontierCluster {
            cells: vec![cell_at(1, 0, 0, 0.2), cell_at(2, 0, 0, 0.2)],
        };
        let pois = generate_pois(&[cluster], &dummy_map(), 0, 100, 9);
        assert_eq!(pois.len(), 1);
        assert_eq!(pois[0].cell, CellIndex::new(1, 0, 0));
    }

    #[test]
    fn sampling_is_reproducible_and_distinct() {
        let cells: Vec<FrontierCell> = (0..50).map(|i| cell_at(i, 0, 0, 0.2)).collect();
        let cluster = FrontierCluster { cells };
        let a = generate_pois(&[cluster.clone()], &dummy_map(), 3, 25, 1234);
        let b = generate_pois(&[cluster], &dummy_map(), 3, 25, 1234);
        assert_eq!(a.len(), 4); // centroid + 3 samples
        assert_eq!(
            a.iter().map(|p| p.cell).collect::<Vec<_>>(),
            b.iter().map(|p| p.cell).collect::<Vec<_>>()
        );
        let mut cells: Vec<CellIndex> = a.iter().map(|p| p.cell).collect();
        cells.sort();
        cells.dedup();
        assert_eq!(cells.len(), 4);
    }

    #[test]
    fn small_clusters_are_not_sampled() {
        let cells: Vec<FrontierCell> = (0..10).map(|i| cell_at(i, 0, 0, 0.2)).collect();
        let cluster = FrontierCluster { cells };
        let pois = generate_pois(&[cluster], &dummy_map(), 3, 25, 7);
        assert_eq!(pois.len(), 1);
    }
}
