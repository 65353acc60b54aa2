//! Crate-wide error type. CLI exit codes map onto the variants.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Scenario document does not match the schema; names the offending field.
    #[error("schema error in `{field}`: {reason}")]
    Schema { field: String, reason: String },

    /// Geometry outside the world bounds.
    #[error("bounds error in `{field}`: {reason}")]
    Bounds { field: String, reason: String },

    /// Config file problem; names the offending key.
    #[error("config error for `{key}`: {reason}")]
    Config { key: String, reason: String },

    /// Operation called with arguments outside its domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Flow network without self-arcs cannot carry the required flow.
    #[error("infeasible flow network: {0}")]
    Infeasible(String),

    /// A UAV entered an occupied ground-truth cell; the mission aborts.
    #[error("collision fault: {uav} at ({x:.3}, {y:.3}, {z:.3}) t={t:.3}")]
    CollisionFault {
        uav: &'static str,
        x: f64,
        y: f64,
        z: f64,
        t: f64,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn domain(msg: impl Into<String>) -> Error {
        Error::Domain(msg.into())
    }

    pub fn schema(field: impl Into<String>, reason: impl Into<String>) -> Error {
        Error::Schema {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn bounds(field: impl Into<String>, reason: impl Into<String>) -> Error {
        Error::Bounds {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn config(key: impl Into<String>, reason: impl Into<String>) -> Error {
        Error::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }
}
