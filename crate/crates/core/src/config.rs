//! Mission configuration: defaults, `key = value` file parsing, overrides.
//!
//! Config files are flat text, one `key = value` per line, `#` comments.
//! CLI flags override file values; the `HETEX_SEED` environment variable
//! overrides the seed last.

use crate::allocator::Strategy;
use crate::error::{Error, Result};
use serde::Serialize;
use std::path::Path;

#[derive(Debug, Clone, Serialize)]
pub struct MissionConfig {
    /// Fixed timestep, seconds.
    pub dt: f64,
    /// Sensor sampling rate, Hz.
    pub f_sensor: f64,
    /// Frontier detection rate, Hz.
    pub f_front: f64,
    /// Path planning rate, Hz.
    pub f_path: f64,
    /// Collision avoidance rate, Hz.
    pub f_coll: f64,
    /// Critical distance, m.
    pub d_c: f64,
    /// Safety distance, m.
    pub d_s: f64,
    /// Minimum sphere radius, m.
    pub r_sph: f64,
    /// Sphere radius cap, m.
    pub r_max: f64,
    /// Sphere candidate sub-lattice stride, cells.
    pub sphere_stride: usize,
    /// Map resolution check, m; must match the scenario when set.
    pub m_res: Option<f64>,
    pub allocator: Strategy,
    /// Secondary cost weight on distance.
    pub alpha: f64,
    /// Secondary cost weight on heading change.
    pub beta: f64,
    /// Arc budget per UAV in the flow network.
    pub n_arcs: usize,
    /// Self-arc cost; must dominate every realizable arc cost.
    pub c_x: f64,
    /// Clearance weight in sphere edge costs.
    pub lambda: f64,
    /// Frontier clustering radius, m; defaults to 3 x resolution.
    pub eps: Option<f64>,
    pub samples_per_cluster: usize,
    pub min_cluster_for_sampling: usize,
    pub goal_tolerance: f64,
    /// Endpoint snap radius for sphere planning, m.
    pub goal_snap: f64,
    /// Escape goal relaxation radius, m.
    pub escape_relax: f64,
    /// Heading rate limit, rad/s.
    pub heading_rate: f64,
    pub completion_target: f64,
    /// Mission time cap, seconds.
    pub t_max: f64,
    pub seed: u64,
}

impl Default for MissionConfig {
    fn default() -> MissionConfig {
        MissionConfig {
            dt: 0.05,
            f_sensor: 5.0,
            f_front: 0.5,
            f_path: 2.0,
            f_coll: 10.0,
            d_c: 2.0,
            d_s: 2.5,
            r_sph: 0.35,
            r_max: 2.0,
            sphere_stride: 2,
            m_res: None,
            allocator: Strategy::Mcf,
            alpha: 1.0,
            beta: 0.5,
            n_arcs: 5,
            c_x: 1000.0,
            lambda: 0.2,
            eps: None,
            samples_per_cluster: 3,
            min_cluster_for_sampling: 25,
            goal_tolerance: 0.3,
            goal_snap: 0.5,
            escape_relax: 1.0,
            heading_rate: 1.5,
            completion_target: 0.95,
            t_max: 600.0,
            seed: 0,
        }
    }
}

impl MissionConfig {
    pub fn from_file(path: &Path) -> Result<MissionConfig> {
        let mut cfg = MissionConfig::default();
        cfg.apply_file(path)?;
        Ok(cfg)
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        let text = std::fs::read_to_string(path)?;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::config(
                    format!("line {}", lineno + 1),
                    "expected `key = value`",
                ));
            };
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let fnum = |v: &str| -> Result<f64> {
            v.parse::<f64>()
                .map_err(|_| Error::config(key, format!("`{v}` is not a number")))
        };
        let unum = |v: &str| -> Result<u64> {
            v.parse::<u64>()
                .map_err(|_| Error::config(key, format!("`{v}` is not a nonnegative integer")))
        };
        match key {
            "dt" => self.dt = fnum(value)?,
            "f_sensor" => self.f_sensor = fnum(value)?,
            "f_front" => self.f_front = fnum(value)?,
            "f_path" => self.f_path = fnum(value)?,
            "f_coll" => self.f_coll = fnum(value)?,
            "d_c" => self.d_c = fnum(value)?,
            "d_s" => self.d_s = fnum(value)?,
            "r_sph" => self.r_sph = fnum(value)?,
            "r_max" => self.r_max = fnum(value)?,
            "sphere_stride" => self.sphere_stride = unum(value)? as usize,
            "m_res" => self.m_res = Some(fnum(value)?),
            "allocator" => {
                self.allocator = match value {
                    "greedy" => Strategy::Greedy,
                    "mcf" => Strategy::Mcf,
                    other => {
                        return Err(Error::config(
                            key,
                            format!("`{other}` is not one of greedy|mcf"),
                        ))
                    }
                }
            }
            "alpha" => self.alpha = fnum(value)?,
            "beta" => self.beta = fnum(value)?,
            "n_arcs" => self.n_arcs = unum(value)? as usize,
            "c_x" => self.c_x = fnum(value)?,
            "lambda" => self.lambda = fnum(value)?,
            "eps" => self.eps = Some(fnum(value)?),
            "samples_per_cluster" => self.samples_per_cluster = unum(value)? as usize,
            "min_cluster_for_sampling" => self.min_cluster_for_sampling = unum(value)? as usize,
            "goal_tolerance" => self.goal_tolerance = fnum(value)?,
            "goal_snap" => self.goal_snap = fnum(value)?,
            "escape_relax" => self.escape_relax = fnum(value)?,
            "heading_rate" => self.heading_rate = fnum(value)?,
            "completion_target" => self.completion_target = fnum(value)?,
            "t_max" => self.t_max = fnum(value)?,
            "seed" => self.seed = unum(value)?,
            other => return Err(Error::config(other, "unknown config key")),
        }
        Ok(())
    }

    /// Steps between ticks of a module running at `rate_hz`; errors unless
    /// the period is a whole number of timesteps.
    pub fn period_steps(&self, key: &str, rate_hz: f64) -> Result<u64> {
        if rate_hz <= 0.0 {
            return Err(Error::config(key, "rate must be > 0"));
        }
        let period = 1.0 / (rate_hz * self.dt);
        if (period - period.round()).abs() > 1e-9 || period.round() < 1.0 {
            return Err(Error::config(
                key,
                format!("1/{rate_hz} Hz is not a whole number of {} s steps", self.dt),
            ));
        }
        Ok(period.round() as u64)
    }

    pub fn validate(&self, scenario_resolution: f64) -> Result<()> {
        if self.dt <= 0.0 {
            return Err(Error::config("dt", "must be > 0"));
        }
        for (key, rate) in [
            ("f_sensor", self.f_sensor),
            ("f_front", self.f_front),
            ("f_path", self.f_path),
            ("f_coll", self.f_coll),
        ] {
            self.period_steps(key, rate)?;
        }
        if !(self.d_c > 0.0 && self.d_c < self.d_s) {
            return Err(Error::config("d_c", "requires 0 < d_c < d_s"));
        }
        if self.r_sph <= 0.0 || self.r_max < self.r_sph {
            return Err(Error::config("r_sph", "requires 0 < r_sph <= r_max"));
        }
        if self.sphere_stride == 0 {
            return Err(Error::config("sphere_stride", "must be >= 1"));
        }
        if let Some(m) = self.m_res {
            if (m - scenario_resolution).abs() > 1e-9 {
                return Err(Error::config(
                    "m_res",
                    format!(
                        "{m} does not match the scenario resolution {scenario_resolution}; \
                         the explored map shares the world grid"
                    ),
                ));
            }
        }
        if self.alpha < 0.0 || self.beta < 0.0 {
            return Err(Error::config("alpha", "alpha and beta must be >= 0"));
        }
        if self.n_arcs == 0 {
            return Err(Error::config("n_arcs", "must be >= 1"));
        }
        if !(self.completion_target > 0.0 && self.completion_target <= 1.0) {
            return Err(Error::config("completion_target", "must be in (0, 1]"));
        }
        if self.heading_rate <= 0.0 {
            return Err(Error::config("heading_rate", "must be > 0"));
        }
        Ok(())
    }

    pub fn eps_or_default(&self, resolution: f64) -> f64 {
        self.eps.unwrap_or(3.0 * resolution)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn defaults_validate_against_standard_resolution() {
        let cfg = MissionConfig::default();
        cfg.validate(0.2).unwrap();
        assert_eq!(cfg.period_steps("f_coll", cfg.f_coll).unwrap(), 2);
        assert_eq!(cfg.period_steps("f_front", cfg.f_front).unwrap(), 40);
    }

    #[test]
    fn file_parsing_and_unknown_key() {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        writeln!(f, "# comment\nd_c = 1.5\nd_s = 3.0\nallocator = greedy").unwrap();
        let cfg = MissionConfig::from_file(f.path()).unwrap();
        assert_eq!(cfg.d_c, 1.5);
        assert_eq!(cfg.allocator, Strategy::Greedy);

        let mut g = tempfile::NamedTempFile::new().unwrap();
        writeln!(g, "bogus_key = 1").unwrap();
        let err = MissionConfig::from_file(g.path()).unwrap_err();
        assert!(err.to_string().contains("bogus_key"));
    }

    #[test]
    fn mismatched_m_res_is_rejected() {
        let mut cfg = MissionConfig::default();
        cfg.m_res = Some(0.1);
        assert!(cfg.validate(0.2).is_err());
        cfg.m_res = Some(0.2);
        assert!(cfg.validate(0.2).is_ok());
    }

    #[test]
    fn non_integral_rate_is_rejected() {
        let mut cfg = MissionConfig::default();
        cfg.f_sensor = 7.0; // 1/(7*0.05) is not whole
        assert!(cfg.validate(0.2).is_err());
    }
}
