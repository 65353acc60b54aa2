//! Ground-truth voxel world: box rasterization, exact grid ray traversal and
//! the two simulated range sensors.
//!
//! Rays are walked cell-by-cell (Amanatides/Woo style stepping), so a cast
//! visits every cell the segment intersects, in order. The same traversal is
//! reused when scans are integrated into the explored map, which keeps the
//! two sides bit-identical.

use crate::error::{Error, Result};
use crate::geom::{Aabb, Vec3};
use crate::scenario::Scenario;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CellState {
    Unknown,
    Free,
    Occupied,
}

/// Integer cell coordinates. Ordering is lexicographic (x, y, z) and is used
/// as the deterministic tie-break throughout the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CellIndex {
    pub x: i32,
    pub y: i32,
    pub z: i32,
}

impl CellIndex {
    pub fn new(x: i32, y: i32, z: i32) -> CellIndex {
        CellIndex { x, y, z }
    }
}

/// Dense uniform grid of cell states.
#[derive(Debug, Clone)]
pub struct VoxelGrid {
    origin: Vec3,
    resolution: f64,
    dims: [usize; 3],
    cells: Vec<CellState>,
}

impl VoxelGrid {
    pub fn new(origin: Vec3, resolution: f64, dims: [usize; 3], fill: CellState) -> Result<VoxelGrid> {
        if resolution <= 0.0 {
            return Err(Error::domain("resolution must be > 0"));
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::domain("grid dims must all be >= 1"));
        }
        let n = dims[0] * dims[1] * dims[2];
        Ok(VoxelGrid {
            origin,
            resolution,
            dims,
            cells: vec![fill; n],
        })
    }

    pub fn origin(&self) -> Vec3 {
        self.origin
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    pub fn bounds(&self) -> Aabb {
        let e = Vec3::new(
            self.dims[0] as f64 * self.resolution,
            self.dims[1] as f64 * self.resolution,
            self.dims[2] as f64 * self.resolution,
        );
        Aabb::new(self.origin, self.origin + e)
    }

    pub fn in_bounds(&self, c: CellIndex) -> bool {
        c.x >= 0
            && c.y >= 0
            && c.z >= 0
            && (c.x as usize) < self.dims[0]
            && (c.y as usize) < self.dims[1]
            && (c.z as usize) < self.dims[2]
    }

    /// Flat index, x fastest: `(z * ny + y) * nx + x`.
    pub fn linear(&self, c: CellIndex) -> usize {
        debug_assert!(self.in_bounds(c));
        (c.z as usize * self.dims[1] + c.y as usize) * self.dims[0] + c.x as usize
    }

    pub fn from_linear(&self, i: usize) -> CellIndex {
        let nx = self.dims[0];
        let ny = self.dims[1];
        CellIndex::new((i % nx) as i32, ((i / nx) % ny) as i32, (i / (nx * ny)) as i32)
    }

    pub fn state(&self, c: CellIndex) -> CellState {
        self.cells[self.linear(c)]
    }

    pub fn state_linear(&self, i: usize) -> CellState {
        self.cells[i]
    }

    pub fn set_state(&mut self, c: CellIndex, s: CellState) {
        let i = self.linear(c);
        self.cells[i] = s;
    }

    pub fn world_to_cell(&self, p: Vec3) -> Option<CellIndex> {
        let r = p - self.origin;
        let c = CellIndex::new(
            (r.x / self.resolution).floor() as i32,
            (r.y / self.resolution).floor() as i32,
            (r.z / self.resolution).floor() as i32,
        );
        if self.in_bounds(c) {
            Some(c)
        } else {
            None
        }
    }

    pub fn cell_center(&self, c: CellIndex) -> Vec3 {
        self.origin
            + Vec3::new(
                (c.x as f64 + 0.5) * self.resolution,
                (c.y as f64 + 0.5) * self.resolution,
                (c.z as f64 + 0.5) * self.resolution,
            )
    }

    /// Walk the segment from `origin` along unit `dir` up to parameter `t_max`.
    ///
    /// Visits `(cell, t_entry)` for every cell the segment intersects, in
    /// order, starting with the cell containing `origin` at `t_entry = 0`.
    /// Cells entered at exactly `t_max` are still visited. Stops early when
    /// the visitor returns `false` or the segment leaves the grid.
    pub fn traverse_segment(
        &self,
        origin: Vec3,
        dir: Vec3,
        t_max: f64,
        mut visit: impl FnMut(CellIndex, f64) -> bool,
    ) {
        let Some(mut cell) = self.world_to_cell(origin) else {
            return;
        };
        if !visit(cell, 0.0) {
            return;
        }
        let res = self.resolution;
        let axes = [dir.x, dir.y, dir.z];
        let orel = origin - self.origin;
        let opos = [orel.x, orel.y, orel.z];
        let mut step = [0i32; 3];
        let mut t_delta = [f64::INFINITY; 3];
        let mut t_next = [f64::INFINITY; 3];
        let idx = [cell.x, cell.y, cell.z];
        for a in 0..3 {
            if axes[a] > 0.0 {
                step[a] = 1;
                t_delta[a] = res / axes[a];
                t_next[a] = ((idx[a] as f64 + 1.0) * res - opos[a]) / axes[a];
            } else if axes[a] < 0.0 {
                step[a] = -1;
                t_delta[a] = -res / axes[a];
                t_next[a] = (idx[a] as f64 * res - opos[a]) / axes[a];
            }
        }
        loop {
            // advance along the axis with the nearest boundary crossing
            let a = if t_next[0] <= t_next[1] && t_next[0] <= t_next[2] {
                0
            } else if t_next[1] <= t_next[2] {
                1
            } else {
                2
            };
            let t = t_next[a];
            if t > t_max {
                return;
            }
            match a {
                0 => cell.x += step[0],
                1 => cell.y += step[1],
                _ => cell.z += step[2],
            }
            if !self.in_bounds(cell) {
                return;
            }
            t_next[a] += t_delta[a];
            if !visit(cell, t) {
                return;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RayEnd {
    Obstacle,
    MaxRange,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RayHit {
    pub dir: Vec3,
    pub range: f64,
    pub end: RayEnd,
}

/// One full sensor sweep from a fixed pose.
#[derive(Debug, Clone, PartialEq)]
pub struct Scan {
    pub origin: Vec3,
    pub heading: f64,
    pub hits: Vec<RayHit>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensorKind {
    /// Full 360 degree horizontal sweep; heading is ignored.
    Omni3d,
    /// Forward cone centered on the vehicle heading.
    Cone,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorModel {
    pub kind: SensorKind,
    /// Horizontal field of view, radians.
    pub h_fov: f64,
    /// Vertical field of view, radians.
    pub v_fov: f64,
    pub max_range: f64,
    pub n_azimuth: u32,
    pub n_elevation: u32,
}

impl SensorModel {
    pub fn validate(&self) -> Result<()> {
        if self.max_range <= 0.0 {
            return Err(Error::domain("sensor max_range must be > 0"));
        }
        if self.n_azimuth == 0 || self.n_elevation == 0 {
            return Err(Error::domain("sensor ray counts must be >= 1"));
        }
        match self.kind {
            SensorKind::Omni3d => {
                if (self.h_fov - std::f64::consts::TAU).abs() > 1e-9 {
                    return Err(Error::domain("omni3d sensor requires h_fov = 2*pi"));
                }
            }
            SensorKind::Cone => {
                if self.h_fov >= std::f64::consts::PI {
                    return Err(Error::domain("cone sensor requires h_fov < pi"));
                }
            }
        }
        Ok(())
    }
}

/// Rasterize a scenario document into a ground-truth grid.
///
/// Every cell starts `Free`; a cell becomes `Occupied` when its center lies
/// inside one of the scenario boxes (half-open containment). Ground truth
/// never holds `Unknown`.
pub fn load_world(scenario: &Scenario) -> Result<VoxelGrid> {
    let dims = scenario.grid_dims()?;
    let mut grid = VoxelGrid::new(scenario.bounds.min, scenario.resolution, dims, CellState::Free)?;
    let world = grid.bounds();
    for (k, b) in scenario.boxes.iter().enumerate() {
        if !b.is_valid() {
            return Err(Error::schema(format!("boxes[{k}]"), "box min must be < max"));
        }
        let aabb = b.aabb();
        if !world.encloses(&aabb, 1e-9) {
            return Err(Error::bounds(
                format!("boxes[{k}]"),
                "box extends outside world bounds",
            ));
        }
        rasterize_box(&mut grid, &aabb);
    }
    Ok(grid)
}

fn rasterize_box(grid: &mut VoxelGrid, b: &Aabb) {
    let res = grid.resolution();
    let org = grid.origin();
    let lo = |v: f64, o: f64| (((v - o) / res).floor() as i32).max(0);
    let hi = |v: f64, o: f64, d: usize| (((v - o) / res).ceil() as i32).min(d as i32 - 1);
    let (x0, x1) = (lo(b.min.x, org.x), hi(b.max.x, org.x, grid.dims()[0]));
    let (y0, y1) = (lo(b.min.y, org.y), hi(b.max.y, org.y, grid.dims()[1]));
    let (z0, z1) = (lo(b.min.z, org.z), hi(b.max.z, org.z, grid.dims()[2]));
    for z in z0..=z1 {
        for y in y0..=y1 {
            for x in x0..=x1 {
                let c = CellIndex::new(x, y, z);
                if b.contains(grid.cell_center(c)) {
                    grid.set_state(c, CellState::Occupied);
                }
            }
        }
    }
}

/// Distance to the boundary of the first occupied cell along the ray, or
/// `MaxRange` when the ray exits the grid or exceeds `max_range` first.
pub fn cast_ray(grid: &VoxelGrid, origin: Vec3, dir: Vec3, max_range: f64) -> Result<(f64, RayEnd)> {
    if grid.world_to_cell(origin).is_none() {
        return Err(Error::domain("ray origin outside grid bounds"));
    }
    if (dir.norm() - 1.0).abs() > 1e-9 {
        return Err(Error::domain("ray direction must be unit-norm"));
    }
    let mut hit: Option<f64> = None;
    grid.traverse_segment(origin, dir, max_range, |c, t| {
        if grid.state(c) == CellState::Occupied {
            hit = Some(t);
            false
        } else {
            true
        }
    });
    match hit {
        Some(t) => Ok((t, RayEnd::Obstacle)),
        None => Ok((max_range, RayEnd::MaxRange)),
    }
}

/// Ray directions for a sensor pose, azimuth-major. Cone sensors rotate with
/// the heading; omni sensors ignore it. `phase` in [0, 1) shifts the lattice
/// within the field of view, so successive sweeps from a stationary pose
/// cover different directions (the angular analogue of a spinning head);
/// every ray stays inside the FOV for any phase.
pub fn scan_directions(sensor: &SensorModel, heading: f64, phase: f64) -> Vec<Vec3> {
    let phase = phase.rem_euclid(1.0);
    let phase_el = (phase * 2.0 + 0.381_966).rem_euclid(1.0);
    let mut dirs = Vec::with_capacity((sensor.n_azimuth * sensor.n_elevation) as usize);
    for i in 0..sensor.n_azimuth {
        let az = match sensor.kind {
            SensorKind::Omni3d => {
                std::f64::consts::TAU * (i as f64 + phase) / sensor.n_azimuth as f64
            }
            SensorKind::Cone => {
                heading + sensor.h_fov * ((i as f64 + phase) / sensor.n_azimuth as f64 - 0.5)
            }
        };
        for j in 0..sensor.n_elevation {
            let el = sensor.v_fov * ((j as f64 + phase_el) / sensor.n_elevation as f64 - 0.5);
            dirs.push(Vec3::new(
                el.cos() * az.cos(),
                el.cos() * az.sin(),
                el.sin(),
            ));
        }
    }
    dirs
}

/// Cast the full `n_azimuth * n_elevation` ray lattice from a pose.
pub fn sample_scan(
    grid: &VoxelGrid,
    sensor: &SensorModel,
    position: Vec3,
    heading: f64,
    phase: f64,
) -> Result<Scan> {
    let cell = grid
        .world_to_cell(position)
        .ok_or_else(|| Error::domain("sensor pose outside grid bounds"))?;
    if grid.state(cell) == CellState::Occupied {
        return Err(Error::domain("sensor pose inside occupied cell"));
    }
    let mut hits = Vec::new();
    for dir in scan_directions(sensor, heading, phase) {
        let (range, end) = cast_ray(grid, position, dir, sensor.max_range)?;
        hits.push(RayHit { dir, range, end });
    }
    Ok(Scan {
        origin: position,
        heading,
        hits,
    })
}
