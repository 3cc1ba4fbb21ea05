//! Run configuration: defaults, JSON config file, flag precedence.
//!
//! Precedence is flags > config file > built-in defaults. The resolved
//! configuration has a canonical JSON text form that parses back to an
//! identical value; unknown keys are rejected.

use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

/// Fully resolved run configuration (one document, versioned).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema: u32,
    pub command: String,
    pub instance: String,
    /// Penalty exponent; 1 selects the entropic branch.
    pub p: f64,
    /// Single-solve / audit regularisation parameter.
    pub eps: f64,
    /// Geometric sweep endpoints and length (scans).
    pub eps_from: f64,
    pub eps_to: f64,
    pub points: usize,
    /// Atoms per axis; 0 = resolve by the mesh rule (scans) or 64 (solve).
    pub n: usize,
    pub amplitude: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub out: String,
    /// Gate the run on its acceptance thresholds (exit 4 on failure).
    pub assert_thresholds: bool,
    /// Worker cap; 0 = library default. N = 1 reproduces N > 1 bit-exactly.
    pub threads: usize,
    /// Monotonicity audit sample count.
    pub quadruples: usize,
    /// Rescaling audit parameters: diagonal of A, shift b, γ, κ.
    pub a_diag: Vec<f64>,
    pub shift: Vec<f64>,
    pub gamma: f64,
    pub kappa: f64,
    /// Interior window radius override; 0 = instance default.
    pub window_radius: f64,
}

impl RunConfig {
    pub fn defaults(command: &str) -> Self {
        RunConfig {
            schema: SCHEMA_VERSION,
            command: command.to_string(),
            instance: "translation1d".to_string(),
            p: 2.0,
            eps: 0.05,
            eps_from: 0.1,
            eps_to: 0.0125,
            points: 4,
            n: 0,
            amplitude: 0.3,
            tol: 1e-8,
            max_iter: 500_000,
            seed: 0,
            out: "out".to_string(),
            assert_thresholds: false,
            threads: 0,
            quadruples: 10_000,
            a_diag: vec![1.0],
            shift: vec![0.0],
            gamma: 1.0,
            kappa: 1.0,
            window_radius: 0.0,
        }
    }

    /// Canonical text form; parsing it back yields an identical value.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self, String> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| format!("config parse error: {e}"))?;
        if cfg.schema != SCHEMA_VERSION {
            return Err(format!(
                "unsupported config schema {} (expected {SCHEMA_VERSION})",
                cfg.schema
            ));
        }
        Ok(cfg)
    }
}
