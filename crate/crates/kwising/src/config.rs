//! Experiment configuration: a flat TOML document.
//!
//! ```toml
//! kind = "correlator"        # optimize | correlator | ybar | energy-scan | zne
//! lengths = [12]
//! boundary = "open"          # open | periodic
//! impurity = [0.0, 4.0]      # v values; `inf` selects the duality defect
//! defect_site = 6            # 1-based site j of the defect bond (j, j+1); default L/2
//! shots = 8192
//! runs = 10
//! seed = 7
//! ```
//!
//! Every key except `kind` and `lengths` has a default; see
//! [`ExperimentConfig`] for the full list.

use std::fmt;
use std::path::Path;

use anyhow::Context;
use kwising_core::model::{Boundary, ModelParams, MAX_ORACLE_LENGTH};
use kwising_core::zne::{NoiseModel, ZneSchedule};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Optimize,
    Correlator,
    Ybar,
    EnergyScan,
    Zne,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryName {
    Open,
    Periodic,
}

impl From<BoundaryName> for Boundary {
    fn from(b: BoundaryName) -> Self {
        match b {
            BoundaryName::Open => Boundary::Open,
            BoundaryName::Periodic => Boundary::Periodic,
        }
    }
}

/// Where gradients and metrics come from during optimization.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorName {
    Exact,
    Shots,
}

/// Which state measurements run on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StateSource {
    /// The optimized ansatz state.
    Optimized,
    /// The exact-diagonalization ground state.
    Exact,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ZneObservable {
    Energy,
    Ybar,
}

fn default_boundary() -> BoundaryName {
    BoundaryName::Open
}
fn default_impurity() -> Vec<f64> {
    vec![0.0]
}
fn default_learning_rate() -> f64 {
    kwising_core::qng::DEFAULT_LEARNING_RATE
}
fn default_regularization() -> f64 {
    kwising_core::qng::DEFAULT_REGULARIZATION
}
fn default_max_iters() -> usize {
    500
}
fn default_target() -> f64 {
    1e-3
}
fn default_true() -> bool {
    true
}
fn default_estimator() -> EstimatorName {
    EstimatorName::Exact
}
fn default_state() -> StateSource {
    StateSource::Optimized
}
fn default_observable() -> ZneObservable {
    ZneObservable::Energy
}
fn default_p2() -> f64 {
    NoiseModel::default().p2
}
fn default_degree() -> usize {
    2
}
fn default_trajectories() -> i64 {
    1000
}
fn default_seed() -> u64 {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub lengths: Vec<usize>,
    #[serde(default = "default_boundary")]
    pub boundary: BoundaryName,
    #[serde(default = "default_impurity")]
    pub impurity: Vec<f64>,
    /// 1-based; `None` means `L/2`.
    #[serde(default)]
    pub defect_site: Option<usize>,
    /// `None` means `L/2`.
    #[serde(default)]
    pub layers: Option<usize>,
    #[serde(default = "default_learning_rate")]
    pub learning_rate: f64,
    #[serde(default = "default_regularization")]
    pub regularization: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_target")]
    pub target_rel_error: f64,
    /// Stop on relative error against the exact ground energy.
    #[serde(default = "default_true")]
    pub stop_on_oracle: bool,
    #[serde(default = "default_estimator")]
    pub estimator: EstimatorName,
    /// Shots per circuit; defaults to 8192 for correlators and 1024 otherwise.
    #[serde(default)]
    pub shots: Option<i64>,
    /// Independent repetitions; defaults to 10 for correlators and 5 otherwise.
    #[serde(default)]
    pub runs: Option<i64>,
    #[serde(default)]
    pub analytic: bool,
    #[serde(default = "default_state")]
    pub state: StateSource,
    #[serde(default = "default_observable")]
    pub observable: ZneObservable,
    #[serde(default = "default_p2")]
    pub noise_p2: f64,
    #[serde(default)]
    pub noise_p1: f64,
    /// Defaults to 1.0, 1.2, …, 3.0.
    #[serde(default)]
    pub zne_factors: Option<Vec<f64>>,
    #[serde(default = "default_degree")]
    pub zne_degree: usize,
    #[serde(default = "default_trajectories")]
    pub trajectories: i64,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

/// One configuration problem, tied to the offending key.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Diagnostic {
    pub field: String,
    pub message: String,
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary.into()
    }

    pub fn shots(&self) -> i64 {
        self.shots.unwrap_or(match self.kind {
            ExperimentKind::Correlator => 8192,
            _ => 1024,
        })
    }

    pub fn runs(&self) -> i64 {
        self.runs.unwrap_or(match self.kind {
            ExperimentKind::Correlator => 10,
            _ => 5,
        })
    }

    pub fn layers_for(&self, length: usize) -> usize {
        self.layers.unwrap_or((length / 2).max(1))
    }

    /// 0-based defect site for a chain of `length`.
    pub fn defect_site_for(&self, length: usize) -> usize {
        match self.defect_site {
            Some(j) => j.saturating_sub(1),
            None => (length / 2).saturating_sub(1),
        }
    }

    pub fn model(&self, length: usize, impurity: f64) -> ModelParams {
        ModelParams::new(length, self.boundary(), impurity).with_defect_site(self.defect_site_for(length))
    }

    pub fn schedule(&self) -> Result<ZneSchedule, kwising_core::Error> {
        match &self.zne_factors {
            Some(f) => ZneSchedule::new(f.clone(), self.zne_degree),
            None => ZneSchedule::new(ZneSchedule::default().factors().to_vec(), self.zne_degree),
        }
    }

    fn needs_oracle(&self) -> bool {
        match self.kind {
            ExperimentKind::Optimize | ExperimentKind::Zne => self.stop_on_oracle,
            ExperimentKind::Correlator | ExperimentKind::Ybar => {
                self.stop_on_oracle || self.state == StateSource::Exact
            }
            ExperimentKind::EnergyScan => true,
        }
    }

    /// Every violation found, without side effects. An empty list means the config is runnable.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let mut push = |field: &str, message: String| {
            out.push(Diagnostic {
                field: field.into(),
                message,
            })
        };

        if self.lengths.is_empty() {
            push("lengths", "at least one chain length is required".into());
        }
        for &l in &self.lengths {
            if l < 2 {
                push("lengths", format!("L={l}: chains need at least 2 sites"));
                continue;
            }
            if self.layers.is_none() && l % 2 != 0 {
                push("lengths", format!("L={l} is odd; N = L/2 layers needs an even length (or set `layers`)"));
            }
            if self.needs_oracle() && l > MAX_ORACLE_LENGTH {
                push(
                    "lengths",
                    format!("L={l}: oracle range exceeded (exact diagonalization supports L ≤ {MAX_ORACLE_LENGTH})"),
                );
            }
            if let Some(j) = self.defect_site {
                let max = match self.boundary {
                    BoundaryName::Open => l - 1,
                    BoundaryName::Periodic => l,
                };
                if j == 0 || j > max {
                    push("defect_site", format!("L={l}: defect site must lie in 1..={max}, got {j}"));
                }
            }
        }
        if self.layers == Some(0) {
            push("layers", "at least one layer is required".into());
        }
        if self.impurity.is_empty() {
            push("impurity", "at least one impurity value is required".into());
        }
        for &v in &self.impurity {
            if v.is_nan() || v < 0.0 {
                push("impurity", format!("impurity strength must be ≥ 0 (or inf), got {v}"));
            }
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            push("learning_rate", format!("must be positive, got {}", self.learning_rate));
        }
        if !(self.regularization >= 0.0 && self.regularization.is_finite()) {
            push("regularization", format!("must be non-negative, got {}", self.regularization));
        }
        if self.target_rel_error.is_nan() || self.target_rel_error <= 0.0 {
            push("target_rel_error", format!("must be positive, got {}", self.target_rel_error));
        }
        if self.shots() <= 0 {
            push("shots", format!("must be positive, got {}", self.shots()));
        }
        if self.runs() <= 0 {
            push("runs", format!("must be positive, got {}", self.runs()));
        }
        if matches!(self.kind, ExperimentKind::Ybar) && self.boundary == BoundaryName::Open {
            push("boundary", "the loop operator is defined on periodic chains".into());
        }
        if self.kind == ExperimentKind::Zne {
            if let Err(e) = NoiseModel::new(self.noise_p2, self.noise_p1) {
                push("noise_p2", e.to_string());
            }
            if let Err(e) = self.schedule() {
                push("zne_factors", e.to_string());
            }
            if self.trajectories <= 0 {
                push("trajectories", format!("must be positive, got {}", self.trajectories));
            }
            if self.observable == ZneObservable::Ybar && self.boundary == BoundaryName::Open {
                push("observable", "the loop operator is defined on periodic chains".into());
            }
        }
        out
    }
}
