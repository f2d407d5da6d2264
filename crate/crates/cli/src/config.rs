//! Run configuration: defaults, the optional JSON file, and flag overrides.
//!
//! Every default lives here. A `--config` file mirrors the flags and may set
//! any subset of the fields below; explicit flags win over the file.
//!
//! ```json
//! {
//!   "gamma": -30.0,
//!   "threshold": { "tol": 1e-10, "deltas": [1.0, 0.5, 0.25] },
//!   "flow": { "spacing": 0.0078125, "ball_schedule": [8.0, 12.0, 16.0, 24.0] },
//!   "propagation": { "z": 10.0, "dz": 0.001, "half_width": 10.0, "m": 256 }
//! }
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use satground::groundstate::FlowConfig;
use satground::threshold::ThresholdConfig;
use serde::Deserialize;

use crate::CliError;

/// Box and step settings of `propagate`.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PropagationSettings {
    pub z: f64,
    pub dz: f64,
    pub half_width: f64,
    pub m: usize,
}

impl Default for PropagationSettings {
    fn default() -> Self {
        PropagationSettings {
            z: 10.0,
            dz: 1e-3,
            half_width: 10.0,
            m: 256,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub gamma: Option<f64>,
    pub gammas: Option<Vec<f64>>,
    pub state: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub threshold: ThresholdConfig,
    pub flow: FlowConfig,
    pub propagation: PropagationSettings,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(RunConfig::default());
        };
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::io(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::io(format!("malformed config {}: {e}", path.display())))
    }
}

/// Replaces `slot` when the flag was given.
pub fn set<T>(slot: &mut T, flag: Option<T>) {
    if let Some(v) = flag {
        *slot = v;
    }
}

/// Parsed `--gamma-range` value.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaRange(pub Vec<f64>);

impl GammaRange {
    pub fn parse(text: &str) -> Result<Self, String> {
        parse_range(text).map(GammaRange)
    }
}

/// `a:b:n` as `n` evenly spaced couplings from `a` to `b`.
pub fn parse_range(text: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = text.split(':').collect();
    let [a, b, n] = parts[..] else {
        return Err(format!("expected a:b:n, got {text:?}"));
    };
    let a: f64 = a.trim().parse().map_err(|_| format!("bad range start {a:?}"))?;
    let b: f64 = b.trim().parse().map_err(|_| format!("bad range end {b:?}"))?;
    let n: usize = n.trim().parse().map_err(|_| format!("bad range count {n:?}"))?;
    if !(a.is_finite() && b.is_finite()) || n == 0 {
        return Err(format!("range {text:?} needs finite ends and a positive count"));
    }
    if n == 1 {
        return Ok(vec![a]);
    }
    let step = (b - a) / (n - 1) as f64;
    Ok((0..n).map(|k| if k == n - 1 { b } else { a + k as f64 * step }).collect())
}
