//! hetex: a deterministic simulator for heterogeneous two-UAV indoor
//! exploration.
//!
//! A larger primary UAV with a long-range omnidirectional sensor and a
//! smaller secondary UAV with a narrow forward camera cooperatively explore
//! a voxelized world. Frontier cells drive candidate goal generation, a
//! sphere graph over free space answers clearance-constrained accessibility
//! and path queries per vehicle size, and goals are assigned either greedily
//! or by solving a small min-cost-flow problem. A three-zone distance
//! protocol keeps the pair safe, including an escape maneuver for the
//! secondary. The `hetex` binary runs missions, paired strategy
//! comparisons, and scenario validation.

pub mod allocator;
pub mod collision_guard;
pub mod config;
pub mod error;
pub mod frontier_finder;
pub mod geom;
pub mod metrics;
pub mod mission_planner;
pub mod occupancy_map;
pub mod scenario;
pub mod sim_harness;
pub mod sphere_map;
pub mod voxel_world;

pub use error::{Error, Result};
