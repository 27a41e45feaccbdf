//! Instance files: JSON with a fixed schema and no unknown keys.
//!
//! ```json
//! {
//!   "capacities": [2.0, 1.0],
//!   "free_flow_times": [1.0, 2.0],
//!   "betas": [1.0, 0.5],
//!   "demands": [[1.0, 1.0], [2.0, 2.0]],
//!   "schedule": { "family": "piecewise_linear", "early": 0.4, "late": 0.9 },
//!   "oracle": { "dt": 0.01, "padding": 0.5 },
//!   "output_dir": "out"
//! }
//! ```
//!
//! Index 1 of every per-bottleneck list is the most downstream bottleneck.

use std::path::Path;

use qrp_core::{Corridor, ScheduleDelayFn};
use serde::Deserialize;

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct InstanceConfig {
    pub capacities: Vec<f64>,
    pub free_flow_times: Vec<f64>,
    pub betas: Vec<f64>,
    pub demands: Vec<Vec<f64>>,
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default)]
    pub output_dir: Option<String>,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleConfig {
    /// c(t) = −early·t before the desired time, late·t after it.
    PiecewiseLinear { early: f64, late: f64 },
    /// c(t) = Σ coeffs[j] t^j.
    ConvexPolynomial { coeffs: Vec<f64> },
}

#[derive(Clone, Copy, Debug, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct OracleConfig {
    pub dt: f64,
    pub padding: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            dt: 0.01,
            padding: 0.5,
        }
    }
}

#[derive(Debug)]
pub enum ConfigError {
    Io(String),
    Parse(String),
    Domain(qrp_core::Error),
}

impl InstanceConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    /// The corridor as given; validation is left to the caller.
    pub fn corridor(&self) -> Corridor {
        Corridor::new(
            self.capacities.clone(),
            self.free_flow_times.clone(),
            self.betas.clone(),
            self.demands.clone(),
        )
    }

    pub fn schedule(&self) -> Result<ScheduleDelayFn, ConfigError> {
        match &self.schedule {
            ScheduleConfig::PiecewiseLinear { early, late } => {
                ScheduleDelayFn::piecewise_linear(*early, *late)
            }
            ScheduleConfig::ConvexPolynomial { coeffs } => {
                ScheduleDelayFn::convex_polynomial(coeffs.clone())
            }
        }
        .map_err(ConfigError::Domain)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const EX1: &str = r#"{
        "capacities": [2, 1], "free_flow_times": [1, 2], "betas": [1, 0.5],
        "demands": [[1, 1], [2, 2]],
        "schedule": {"family": "piecewise_linear", "early": 0.4, "late": 0.9}
    }"#;

    #[test]
    fn parses_with_defaults() {
        let c = InstanceConfig::parse(EX1).unwrap();
        assert_eq!(c.oracle, OracleConfig::default());
        assert_eq!(c.output_dir, None);
        assert_eq!(c.corridor().n_bottlenecks(), 2);
        assert!(c.schedule().is_ok());
    }

    #[test]
    fn rejects_unknown_keys() {
        let text = EX1.replace("\"betas\"", "\"beta_typo\": 1, \"betas\"");
        assert!(matches!(
            InstanceConfig::parse(&text),
            Err(ConfigError::Parse(_))
        ));
        let text = EX1.replace("\"late\": 0.9", "\"late\": 0.9, \"alpha\": 1");
        assert!(matches!(
            InstanceConfig::parse(&text),
            Err(ConfigError::Parse(_))
        ));
    }

    #[test]
    fn polynomial_family() {
        let text = EX1.replace(
            r#"{"family": "piecewise_linear", "early": 0.4, "late": 0.9}"#,
            r#"{"family": "convex_polynomial", "coeffs": [0, 0, 0.3, 0, 0.02]}"#,
        );
        let c = InstanceConfig::parse(&text).unwrap();
        assert!(matches!(
            c.schedule().unwrap(),
            ScheduleDelayFn::ConvexPolynomial { .. }
        ));
    }
}
