//! Explored occupancy map shared by both UAVs.
//!
//! Cells are ternary (unknown / free / occupied) with per-cell attribution of
//! which UAV observed them. The global frame equals the primary UAV frame and
//! the secondary transform is identity in simulation, so merging reduces to
//! integrating both UAVs' scans into this one map. Knowledge is monotone: a
//! cell never returns to unknown, and occupied is terminal.

use crate::error::{Error, Result};
use crate::geom::{Aabb, Vec3};
use crate::voxel_world::{CellIndex, CellState, RayEnd, Scan, VoxelGrid};
use serde::{Deserialize, Serialize};
use std::io::Write;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum UavId {
    Primary,
    Secondary,
}

impl UavId {
    pub const BOTH: [UavId; 2] = [UavId::Primary, UavId::Secondary];

    pub fn bit(self) -> u8 {
        match self {
            UavId::Primary => 1,
            UavId::Secondary => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            UavId::Primary => "puav",
            UavId::Secondary => "suav",
        }
    }

    pub fn index(self) -> usize {
        match self {
            UavId::Primary => 0,
            UavId::Secondary => 1,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExploredMap {
    grid: VoxelGrid,
    explore_bounds: Aabb,
    observed_by: Vec<u8>,
    in_bounds: Vec<bool>,
    version: u64,
    known_in_bounds: u64,
    total_in_bounds: u64,
}

impl ExploredMap {
    /// Fresh all-unknown map sharing the geometry of the ground-truth grid.
    pub fn new(world: &VoxelGrid, explore_bounds: Aabb) -> Result<ExploredMap> {
        if !explore_bounds.is_valid() {
            return Err(Error::domain("explore_bounds must be nonempty"));
        }
        let grid = VoxelGrid::new(
            world.origin(),
            world.resolution(),
            world.dims(),
            CellState::Unknown,
        )?;
        let n = grid.cell_count();
        let mut in_bounds = vec![false; n];
        let mut total = 0u64;
        for i in 0..n {
            let c = grid.from_linear(i);
            if explore_bounds.contains(grid.cell_center(c)) {
                in_bounds[i] = true;
                total += 1;
            }
        }
        if total == 0 {
            return Err(Error::domain("explore_bounds contains no cells"));
        }
        Ok(ExploredMap {
            grid,
            explore_bounds,
            observed_by: vec![0; n],
            in_bounds,
            version: 0,
            known_in_bounds: 0,
            total_in_bounds: total,
        })
    }

    /// Fully-known map copied from ground truth, attributed to both UAVs.
    /// Used by tests and offline accessibility queries.
    pub fn from_ground_truth(world: &VoxelGrid, explore_bounds: Aabb) -> Result<ExploredMap> {
        let mut m = ExploredMap::new(world, explore_bounds)?;
        for i in 0..world.cell_count() {
            let c = world.from_linear(i);
            m.mark(c, world.state(c), UavId::Primary.bit() | UavId::Secondary.bit());
        }
        m.version = 1;
        Ok(m)
    }

    pub fn grid(&self) -> &VoxelGrid {
        &self.grid
    }

    pub fn explore_bounds(&self) -> Aabb {
        self.explore_bounds
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn observed_by(&self, c: CellIndex) -> u8 {
        self.observed_by[self.grid.linear(c)]
    }

    /// Directly mark one cell known with both UAVs as observers. Intended for
    /// scripted map construction in tests and offline tools; mission code
    /// goes through `integrate_scan`.
    pub fn mark_known(&mut self, c: CellIndex, state: CellState) {
        self.mark(c, state, UavId::Primary.bit() | UavId::Secondary.bit());
        self.version += 1;
    }

    fn mark(&mut self, c: CellIndex, state: CellState, who_mask: u8) {
        let i = self.grid.linear(c);
        let old = self.grid.state_linear(i);
        // occupied is terminal; free never downgrades knowledge
        let new = match (old, state) {
            (CellState::Occupied, _) => CellState::Occupied,
            (_, s) => s,
        };
        if new == CellState::Unknown {
            return;
        }
        if old == CellState::Unknown && self.in_bounds[i] {
            self.known_in_bounds += 1;
        }
        self.grid.set_state(c, new);
        self.observed_by[i] |= who_mask;
    }

    /// Fold one scan into the map. Cells traversed before a hit become free,
    /// the hit cell becomes occupied, and `who` is recorded on every touched
    /// cell. Occupied wins over free within the scan.
    pub fn integrate_scan(&mut self, scan: &Scan, who: UavId) -> Result<()> {
        if self.grid.world_to_cell(scan.origin).is_none() {
            return Err(Error::domain("scan origin outside map bounds"));
        }
        let mut free = Vec::new();
        let mut occupied = Vec::new();
        for hit in &scan.hits {
            // identical traversal to the cast that produced the hit, so the
            // cell entered at t == range is exactly the hit cell; a free cell
            // grazed at exactly max range is not considered traversed
            self.grid.traverse_segment(scan.origin, hit.dir, hit.range, |c, t| {
                if t < hit.range {
                    free.push(c);
                } else if hit.end == RayEnd::Obstacle {
                    occupied.push(c);
                }
                true
            });
        }
        let bit = who.bit();
        for c in free {
            self.mark(c, CellState::Free, bit);
        }
        for c in occupied {
            self.mark(c, CellState::Occupied, bit);
        }
        self.version += 1;
        Ok(())
    }

    /// Ratio of known cells to all cells inside the exploration bounds.
    pub fn explored_fraction(&self) -> f64 {
        self.known_in_bounds as f64 / self.total_in_bounds as f64
    }

    pub fn state_at(&self, p: Vec3) -> Result<CellState> {
        let c = self
            .grid
            .world_to_cell(p)
            .ok_or_else(|| Error::domain("point outside map bounds"))?;
        Ok(self.grid.state(c))
    }

    /// Text dump of the whole map for offline visualization.
    ///
    /// Layout (x fastest, then y, then z — the grid's linear order):
    /// ```text
    /// hetex-map v1
    /// dims <nx> <ny> <nz>
    /// resolution <res>
    /// origin <x> <y> <z>
    /// cells <one char per cell: U|F|O>
    /// observed <one digit per cell: 0..3, bit 1 = puav, bit 2 = suav>
    /// ```
    pub fn write_dump(&self, mut w: impl Write) -> Result<()> {
        let d = self.grid.dims();
        writeln!(w, "hetex-map v1")?;
        writeln!(w, "dims {} {} {}", d[0], d[1], d[2])?;
        writeln!(w, "resolution {}", self.grid.resolution())?;
        let o = self.grid.origin();
        writeln!(w, "origin {} {} {}", o.x, o.y, o.z)?;
        let mut cells = String::with_capacity(self.grid.cell_count());
        for i in 0..self.grid.cell_count() {
            cells.push(match self.grid.state_linear(i) {
                CellState::Unknown => 'U',
                CellState::Free => 'F',
                CellState::Occupied => 'O',
            });
        }
        writeln!(w, "cells {cells}")?;
        let mut obs = String::with_capacity(self.grid.cell_count());
        for &b in &self.observed_by {
            obs.push(char::from(b'0' + b));
        }
        writeln!(w, "observed {obs}")?;
        Ok(())
    }
}
