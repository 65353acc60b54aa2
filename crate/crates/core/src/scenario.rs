//! Scenario documents: the JSON world description consumed by the simulator.
//!
//! Schema (all lengths in meters, angles in radians, sensor FOVs in degrees):
//!
//! ```json
//! {
//!   "name": "office_s",
//!   "bounds": {"min": [0,0,0], "max": [20,20,3]},
//!   "resolution": 0.2,
//!   "explore_bounds": {"min": [0,0,0], "max": [20,20,3]},
//!   "boxes": [{"min": [1,1,0], "max": [1.2,5,3]}],
//!   "uavs": [
//!     {"id": "puav", "start": [5.1,2.1,1.5], "heading": 0.0, "radius": 0.45,
//!      "speed": 1.0,
//!      "sensor": {"kind": "omni3d", "h_fov_deg": 360, "v_fov_deg": 90,
//!                 "max_range": 40, "n_azimuth": 36, "n_elevation": 9}},
//!     {"id": "suav", ...}
//!   ]
//! }
//! ```
//!
//! `bounds` must rasterize to a whole number of cells per axis and boxes must
//! stay inside `bounds`. Exactly one `puav` and one `suav` entry are required.

use crate::error::{Error, Result};
use crate::geom::{Aabb, Vec3};
use crate::occupancy_map::UavId;
use crate::voxel_world::{SensorKind, SensorModel};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub min: Vec3,
    pub max: Vec3,
}

impl BoxSpec {
    pub fn is_valid(&self) -> bool {
        Aabb::new(self.min, self.max).is_valid()
    }
}

impl BoxSpec {
    pub fn aabb(&self) -> Aabb {
        Aabb::new(self.min, self.max)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SensorSpec {
    pub kind: SensorKind,
    pub h_fov_deg: f64,
    pub v_fov_deg: f64,
    pub max_range: f64,
    pub n_azimuth: u32,
    pub n_elevation: u32,
}

impl SensorSpec {
    pub fn to_model(&self) -> SensorModel {
        SensorModel {
            kind: self.kind,
            h_fov: self.h_fov_deg.to_radians(),
            v_fov: self.v_fov_deg.to_radians(),
            max_range: self.max_range,
            n_azimuth: self.n_azimuth,
            n_elevation: self.n_elevation,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UavSpec {
    pub id: String,
    pub start: Vec3,
    pub heading: f64,
    pub radius: f64,
    pub speed: f64,
    pub sensor: SensorSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    pub bounds: Aabb,
    pub resolution: f64,
    pub explore_bounds: Aabb,
    #[serde(default)]
    pub boxes: Vec<BoxSpec>,
    pub uavs: Vec<UavSpec>,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Scenario> {
        let s: Scenario = serde_json::from_str(text)
            .map_err(|e| Error::schema("document", e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn from_path(path: &Path) -> Result<Scenario> {
        let text = std::fs::read_to_string(path)?;
        Scenario::from_json(&text)
    }

    /// Cell counts per axis; errors unless bounds are a whole number of cells.
    pub fn grid_dims(&self) -> Result<[usize; 3]> {
        let e = self.bounds.extent();
        let mut dims = [0usize; 3];
        for (i, (len, name)) in [(e.x, "x"), (e.y, "y"), (e.z, "z")].iter().enumerate() {
            let n = len / self.resolution;
            if (n - n.round()).abs() > 1e-6 || n.round() < 1.0 {
                return Err(Error::schema(
                    "bounds",
                    format!("extent on {name} is not a positive whole number of cells"),
                ));
            }
            dims[i] = n.round() as usize;
        }
        Ok(dims)
    }

    pub fn validate(&self) -> Result<()> {
        if self.resolution <= 0.0 {
            return Err(Error::schema("resolution", "must be > 0"));
        }
        if !self.bounds.is_valid() {
            return Err(Error::schema("bounds", "min must be < max"));
        }
        self.grid_dims()?;
        if !self.explore_bounds.is_valid() {
            return Err(Error::schema("explore_bounds", "min must be < max"));
        }
        if !self.bounds.encloses(&self.explore_bounds, 1e-9) {
            return Err(Error::schema("explore_bounds", "must lie inside bounds"));
        }
        for (k, b) in self.boxes.iter().enumerate() {
            if !b.is_valid() {
                return Err(Error::schema(format!("boxes[{k}]"), "box min must be < max"));
            }
        }
        if self.uavs.len() != 2 {
            return Err(Error::schema("uavs", "exactly two UAVs (puav, suav) required"));
        }
        let mut seen_p = false;
        let mut seen_s = false;
        for (k, u) in self.uavs.iter().enumerate() {
            match u.id.as_str() {
                "puav" => seen_p = true,
                "suav" => seen_s = true,
                other => {
                    return Err(Error::schema(
                        format!("uavs[{k}].id"),
                        format!("unknown id `{other}`, expected puav or suav"),
                    ))
                }
            }
            if u.radius <= 0.0 {
                return Err(Error::schema(format!("uavs[{k}].radius"), "must be > 0"));
            }
            if u.speed <= 0.0 {
                return Err(Error::schema(format!("uavs[{k}].speed"), "must be > 0"));
            }
            if !self.bounds.contains(u.start) {
                return Err(Error::schema(
                    format!("uavs[{k}].start"),
                    "start position outside bounds",
                ));
            }
            u.sensor
                .to_model()
                .validate()
                .map_err(|e| Error::schema(format!("uavs[{k}].sensor"), e.to_string()))?;
        }
        if !(seen_p && seen_s) {
            return Err(Error::schema("uavs", "both puav and suav entries required"));
        }
        Ok(())
    }

    pub fn uav(&self, id: UavId) -> &UavSpec {
        let want = match id {
            UavId::Primary => "puav",
            UavId::Secondary => "suav",
        };
        self.uavs.iter().find(|u| u.id == want).expect("validated scenario")
    }

    /// Bare scenario used by unit tests that only need world geometry.
    pub fn minimal_for_test(min: Vec3, max: Vec3, resolution: f64, boxes: Vec<BoxSpec>) -> Scenario {
        let sensor = SensorSpec {
            kind: SensorKind::Omni3d,
            h_fov_deg: 360.0,
            v_fov_deg: 90.0,
            max_range: 5.0,
            n_azimuth: 8,
            n_elevation: 4,
        };
        let mk = |id: &str, start: Vec3, radius: f64| UavSpec {
            id: id.to_string(),
            start,
            heading: 0.0,
            radius,
            speed: 1.0,
            sensor: sensor.clone(),
        };
        let c = min + (max - min) * 0.5;
        Scenario {
            name: "test".to_string(),
            bounds: Aabb::new(min, max),
            resolution,
            explore_bounds: Aabb::new(min, max),
            boxes,
            uavs: vec![
                mk("puav", c, 0.45),
                mk("suav", c + Vec3::new(resolution, 0.0, 0.0), 0.25),
            ],
        }
    }
}
