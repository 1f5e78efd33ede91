//! Versioned scenario configuration: one JSON file describes the model, the
//! kernel fields to build, the checks to run, and an optional backward-limit
//! experiment.
//!
//! The `schema` field pins the format (`"heatlab/1"`); parse failures carry
//! the offending line and column, and reference/shape problems are caught by
//! [`Scenario::validate`] before any computation starts.

use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use heatlab_core::bounds::{
    DEFAULT_LOWER_FLOOR, DEFAULT_MEAN_VALUE_CAP, DEFAULT_Q_WINDOW, DEFAULT_UPPER_CAP,
};
use heatlab_core::entropy::{DEFAULT_ALPHA_CAP, DEFAULT_SOBOLEV_CAP, MASS_TOL};
use heatlab_core::kernel::KernelDirection;

pub const SCHEMA: &str = "heatlab/1";

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error in {path} at line {line}, column {column}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid scenario {path}: {detail}")]
    Invalid { path: String, detail: String },
}

/// Model geometry and its discretization.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    /// Shrinking round sphere tracked in closed form.
    ExactSphere {
        n: usize,
        #[serde(rename = "M")]
        grid_m: usize,
        #[serde(rename = "T0")]
        t0: f64,
    },
    /// Perturbed round sphere evolved by the numeric flow integrator.
    WarpedSphere {
        n: usize,
        #[serde(rename = "M")]
        grid_m: usize,
        r0: f64,
        perturbation: f64,
    },
    /// Static flat torus (control model).
    FlatTorus {
        sides: Vec<f64>,
        #[serde(rename = "M")]
        grid_m: usize,
    },
}

/// How a kernel field is produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelMethod {
    /// Closed form where the model admits one, finite differences otherwise.
    #[default]
    Auto,
    FiniteDifference,
    Spectral,
    ClosedForm,
}

/// One kernel field to build and persist.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelSpec {
    pub name: String,
    pub direction: KernelDirection,
    /// Source pole (radial models only).
    #[serde(default)]
    pub x0: f64,
    pub source_time: f64,
    /// Output times, ordered away from the source.
    pub times: Vec<f64>,
    /// Seed offset ε for finite-difference marches; solver default if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed_eps: Option<f64>,
    #[serde(default)]
    pub method: KernelMethod,
}

/// One verification to run, keyed by `kind`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CheckKind {
    /// Conserved-mass audit: the mass in the conserving measure stays 1.
    MassConservation {
        kernel: String,
        #[serde(default = "default_mass_tol")]
        tol: f64,
    },
    /// Forward mass against the curvature-integral bracket.
    MassBracket { kernel: String },
    /// On-diagonal upper bound with fitted constant a₁ ≤ cap.
    OnDiagUpper {
        kernel: String,
        #[serde(default = "default_upper_cap")]
        cap: f64,
    },
    /// On-diagonal lower bound with fitted constant ≥ floor.
    OnDiagLower {
        kernel: String,
        #[serde(default = "default_lower_floor")]
        floor: f64,
    },
    /// Effective Gaussian exponents inside the admissible window.
    GaussianEnvelope {
        kernel: String,
        #[serde(default = "default_q_window")]
        q_window: (f64, f64),
    },
    /// Parabolic mean-value comparison at a point.
    MeanValue {
        kernel: String,
        x: f64,
        t_center: f64,
        radius: f64,
        #[serde(default = "default_mean_value_cap")]
        cap: f64,
    },
    /// W-entropy monotonicity along the conjugate kernel.
    EntropyMonotone { kernel: String, s_grid: Vec<f64> },
    /// Bottom of the spectrum of −4Δ + R against an expected value.
    Lambda0 { time: f64, expected: f64, tol: f64 },
    /// Pointwise log-Sobolev inequality over the trial corpus.
    LogSobolev {
        time: f64,
        eps_grid: Vec<f64>,
        #[serde(default = "default_random_trials")]
        random_trials: usize,
        #[serde(default = "default_alpha_cap")]
        cap: f64,
    },
    /// Sobolev inequality over the trial corpus.
    Sobolev {
        #[serde(default)]
        time: f64,
        #[serde(default = "default_random_trials")]
        random_trials: usize,
        #[serde(default = "default_sobolev_cap")]
        cap: f64,
    },
}

fn default_mass_tol() -> f64 {
    MASS_TOL
}
fn default_upper_cap() -> f64 {
    DEFAULT_UPPER_CAP
}
fn default_lower_floor() -> f64 {
    DEFAULT_LOWER_FLOOR
}
fn default_q_window() -> (f64, f64) {
    DEFAULT_Q_WINDOW
}
fn default_mean_value_cap() -> f64 {
    DEFAULT_MEAN_VALUE_CAP
}
fn default_alpha_cap() -> f64 {
    DEFAULT_ALPHA_CAP
}
fn default_sobolev_cap() -> f64 {
    DEFAULT_SOBOLEV_CAP
}
fn default_random_trials() -> usize {
    5
}
fn default_s_ref() -> f64 {
    1.0
}

impl CheckKind {
    /// Snake-case label matching the name the produced report carries.
    pub fn label(&self) -> &'static str {
        match self {
            CheckKind::MassConservation { .. } => "mass_conservation",
            CheckKind::MassBracket { .. } => "mass_bracket",
            CheckKind::OnDiagUpper { .. } => "on_diag_upper",
            CheckKind::OnDiagLower { .. } => "on_diag_lower",
            CheckKind::GaussianEnvelope { .. } => "gaussian_envelope",
            CheckKind::MeanValue { .. } => "mean_value",
            CheckKind::EntropyMonotone { .. } => "entropy_monotone",
            CheckKind::Lambda0 { .. } => "lambda0",
            CheckKind::LogSobolev { .. } => "log_sobolev",
            CheckKind::Sobolev { .. } => "sobolev",
        }
    }

    /// Kernel field this check reads, if any.
    pub fn kernel(&self) -> Option<&str> {
        match self {
            CheckKind::MassConservation { kernel, .. }
            | CheckKind::MassBracket { kernel }
            | CheckKind::OnDiagUpper { kernel, .. }
            | CheckKind::OnDiagLower { kernel, .. }
            | CheckKind::GaussianEnvelope { kernel, .. }
            | CheckKind::MeanValue { kernel, .. }
            | CheckKind::EntropyMonotone { kernel, .. } => Some(kernel),
            CheckKind::Lambda0 { .. } | CheckKind::LogSobolev { .. } | CheckKind::Sobolev { .. } => {
                None
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckSpec {
    #[serde(flatten)]
    pub kind: CheckKind,
    /// Control checks are reported but do not affect the exit status.
    #[serde(default)]
    pub control: bool,
}

/// Backward-limit experiment parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LimitSpec {
    pub tau_list: Vec<f64>,
    #[serde(default = "default_s_ref")]
    pub s_ref: f64,
    #[serde(default)]
    pub control: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    /// Format version; must equal [`SCHEMA`].
    pub schema: String,
    pub name: String,
    pub model: ModelSpec,
    /// Trajectory snapshot times, strictly increasing.
    pub snapshot_times: Vec<f64>,
    #[serde(default)]
    pub kernels: Vec<KernelSpec>,
    #[serde(default)]
    pub checks: Vec<CheckSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limit: Option<LimitSpec>,
    /// RNG seed for the trial corpora; fixed seed ⇒ byte-identical reports.
    pub seed: u64,
    pub out_dir: String,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Scenario, ScenarioError> {
        let display = path.display().to_string();
        let text = fs::read_to_string(path).map_err(|source| ScenarioError::Read {
            path: display.clone(),
            source,
        })?;
        let scenario: Scenario =
            serde_json::from_str(&text).map_err(|e| ScenarioError::Parse {
                path: display.clone(),
                line: e.line(),
                column: e.column(),
                message: e.to_string(),
            })?;
        scenario.validate(&display)?;
        Ok(scenario)
    }

    pub fn validate(&self, path: &str) -> Result<(), ScenarioError> {
        let fail = |detail: String| {
            Err(ScenarioError::Invalid {
                path: path.to_string(),
                detail,
            })
        };
        if self.schema != SCHEMA {
            return fail(format!(
                "unsupported schema {:?}; this build reads {SCHEMA:?}",
                self.schema
            ));
        }
        if self.name.is_empty() {
            return fail("empty scenario name".into());
        }
        if self.out_dir.is_empty() {
            return fail("empty out_dir".into());
        }
        if self.snapshot_times.is_empty()
            || self.snapshot_times.windows(2).any(|w| w[0] >= w[1])
        {
            return fail("snapshot_times must be nonempty and strictly increasing".into());
        }

        let mut names = BTreeSet::new();
        for k in &self.kernels {
            if k.name.is_empty() {
                return fail("kernel with empty name".into());
            }
            if !names.insert(k.name.as_str()) {
                return fail(format!("duplicate kernel name {:?}", k.name));
            }
            if k.times.is_empty() {
                return fail(format!("kernel {:?} has no output times", k.name));
            }
        }

        for (i, c) in self.checks.iter().enumerate() {
            let ctx = format!("check #{i} ({})", c.kind.label());
            if let Some(kernel) = c.kind.kernel() {
                if !names.contains(kernel) {
                    return fail(format!("{ctx} references unknown kernel {kernel:?}"));
                }
            }
            let positive = |v: f64, what: &str| -> Result<(), ScenarioError> {
                if v > 0.0 && v.is_finite() {
                    Ok(())
                } else {
                    Err(ScenarioError::Invalid {
                        path: path.to_string(),
                        detail: format!("{ctx}: {what} must be positive and finite, got {v}"),
                    })
                }
            };
            match &c.kind {
                CheckKind::MassConservation { tol, .. } => positive(*tol, "tol")?,
                CheckKind::MassBracket { .. } => {}
                CheckKind::OnDiagUpper { cap, .. } => positive(*cap, "cap")?,
                CheckKind::OnDiagLower { floor, .. } => positive(*floor, "floor")?,
                CheckKind::GaussianEnvelope { q_window, .. } => {
                    positive(q_window.0, "q window low end")?;
                    if q_window.1 <= q_window.0 {
                        return fail(format!("{ctx}: q window is empty"));
                    }
                }
                CheckKind::MeanValue { radius, cap, .. } => {
                    positive(*radius, "radius")?;
                    positive(*cap, "cap")?;
                }
                CheckKind::EntropyMonotone { s_grid, .. } => {
                    if s_grid.len() < 2
                        || s_grid.windows(2).any(|w| w[0] >= w[1])
                        || s_grid[0] <= 0.0
                    {
                        return fail(format!(
                            "{ctx}: s_grid must be at least two positive, strictly increasing scales"
                        ));
                    }
                }
                CheckKind::Lambda0 { tol, .. } => positive(*tol, "tol")?,
                CheckKind::LogSobolev { eps_grid, cap, .. } => {
                    positive(*cap, "cap")?;
                    if eps_grid.is_empty() || eps_grid.iter().any(|&e| !(e > 0.0)) {
                        return fail(format!("{ctx}: eps_grid must be nonempty and positive"));
                    }
                }
                CheckKind::Sobolev { cap, .. } => positive(*cap, "cap")?,
            }
        }

        if let Some(limit) = &self.limit {
            if limit.tau_list.is_empty()
                || limit.tau_list.iter().any(|&t| !(t > 0.0))
                || limit.tau_list.windows(2).any(|w| w[0] >= w[1])
            {
                return fail(
                    "limit.tau_list must be nonempty, positive, and strictly increasing".into(),
                );
            }
            if !(limit.s_ref > 0.0) {
                return fail(format!("limit.s_ref must be positive, got {}", limit.s_ref));
            }
        }
        Ok(())
    }
}
