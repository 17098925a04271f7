//! Experiment configuration document.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use poince::{FitConfig, MarginalSpec};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Estimator {
    PoinceLars,
    PoinceDerLars,
    PoinceDerAvg,
    PoinceMc,
    PoinceDerMc,
}

impl Estimator {
    pub const ALL: [Estimator; 5] = [
        Estimator::PoinceLars,
        Estimator::PoinceDerLars,
        Estimator::PoinceDerAvg,
        Estimator::PoinceMc,
        Estimator::PoinceDerMc,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Estimator::PoinceLars => "poince-lars",
            Estimator::PoinceDerLars => "poince-der-lars",
            Estimator::PoinceDerAvg => "poince-der-avg",
            Estimator::PoinceMc => "poince-mc",
            Estimator::PoinceDerMc => "poince-der-mc",
        }
    }

    pub fn needs_derivatives(self) -> bool {
        matches!(self, Estimator::PoinceDerLars | Estimator::PoinceDerAvg | Estimator::PoinceDerMc)
    }

    pub fn is_mc(self) -> bool {
        matches!(self, Estimator::PoinceMc | Estimator::PoinceDerMc)
    }
}

impl std::fmt::Display for Estimator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Estimator {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Estimator::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .with_context(|| format!("unknown estimator `{s}`"))
    }
}

/// A built-in model name, or a CSV data file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelSource {
    Named(String),
    Data {
        data: PathBuf,
        #[serde(default = "default_output")]
        output: String,
    },
}

fn default_output() -> String {
    "y".into()
}

/// Either a fixed total degree or a range explored by cross-validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DegreePolicy {
    Fixed(u32),
    Adaptive { p_min: Option<u32>, p_max: u32 },
}

impl Default for DegreePolicy {
    fn default() -> Self {
        DegreePolicy::Adaptive { p_min: None, p_max: 5 }
    }
}

impl DegreePolicy {
    pub fn degrees(&self) -> Vec<u32> {
        match *self {
            DegreePolicy::Fixed(p) => vec![p],
            DegreePolicy::Adaptive { p_min, p_max } => (p_min.unwrap_or(1)..=p_max).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSource,
    /// Required for data files; built-in models supply their own.
    #[serde(default)]
    pub marginals: Option<Vec<MarginalSpec>>,
    pub estimators: Vec<Estimator>,
    #[serde(default)]
    pub degree: DegreePolicy,
    #[serde(default = "default_q")]
    pub q: f64,
    /// Total degree of the Monte Carlo projection estimators.
    #[serde(default = "default_mc_degree")]
    pub mc_degree: u32,
    pub sizes: Vec<usize>,
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_validation")]
    pub validation_size: usize,
    #[serde(default = "default_grid")]
    pub grid_n: usize,
    #[serde(default = "default_restarts")]
    pub lhs_restarts: usize,
    /// Finite-difference step of built-in gradients, relative to each support length.
    #[serde(default = "default_fd_step")]
    pub fd_step: f64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

fn default_q() -> f64 {
    1.0
}
fn default_mc_degree() -> u32 {
    2
}
fn default_validation() -> usize {
    10_000
}
fn default_grid() -> usize {
    poince::poincare1d::DEFAULT_GRID_N
}
fn default_restarts() -> usize {
    poince::design::DEFAULT_RESTARTS
}
fn default_fd_step() -> f64 {
    1e-6
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text).context("invalid experiment configuration")?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::from_json(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            bail!("`replications` must be at least 1");
        }
        if self.sizes.is_empty() || self.sizes.contains(&0) {
            bail!("`sizes` must be a nonempty list of positive design sizes");
        }
        if self.estimators.is_empty() {
            bail!("`estimators` must not be empty");
        }
        let degrees = self.degree.degrees();
        if degrees.is_empty() {
            bail!("the degree range is empty");
        }
        if !(self.q > 0.0 && self.q <= 1.0) {
            bail!("`q` must lie in (0, 1], got {}", self.q);
        }
        if self.grid_n < 2 {
            bail!("`grid_n` must be at least 2");
        }
        if !(self.fd_step > 0.0) {
            bail!("`fd_step` must be positive");
        }
        if let ModelSource::Data { .. } = self.model {
            if self.marginals.is_none() {
                bail!("a data-file model needs one marginal per input column");
            }
        }
        Ok(())
    }

    pub fn fit_config(&self) -> FitConfig {
        FitConfig { degrees: self.degree.degrees(), q: self.q, max_active: None }
    }

    /// Highest univariate order any requested estimator needs.
    pub fn p_max(&self) -> u32 {
        let regression = self.degree.degrees().into_iter().max().unwrap_or(0);
        if self.estimators.iter().any(|e| e.is_mc()) {
            regression.max(self.mc_degree)
        } else {
            regression
        }
    }
}
