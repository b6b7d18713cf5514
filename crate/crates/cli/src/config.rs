//! Experiment configuration, read from JSON or assembled from CLI flags.

use std::path::{Path, PathBuf};

use krylov_qfi::spectral::ClassifyOptions;
use krylov_qfi::IsingParams;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

pub const MAX_DIM_ENV: &str = "QFI_MAX_HILBERT_DIM";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "regime", rename_all = "kebab-case")]
pub enum SyntheticRegime {
    Gapped { lambda_min: f64, lambda_max: f64 },
    HardEdge { alpha: f64, lambda_max: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticParams {
    #[serde(flatten)]
    pub regime: SyntheticRegime,
    pub atoms: usize,
    /// Inclusive fit window in n; defaults to (5, 25) gapped, (8, 40) hard edge.
    #[serde(default)]
    pub fit_window: Option<(usize, usize)>,
}

impl SyntheticParams {
    pub fn window(&self) -> (usize, usize) {
        self.fit_window.unwrap_or(match self.regime {
            SyntheticRegime::Gapped { .. } => (5, 25),
            SyntheticRegime::HardEdge { .. } => (8, 40),
        })
    }
}

/// Matrices are JSON files `{"re": [[..]], "im": [[..]]}` in row-major order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CustomParams {
    pub rho: PathBuf,
    #[serde(default)]
    pub hamiltonian: Option<PathBuf>,
    /// Arbitrary seed operator; the result is reported as a resolvent moment.
    #[serde(default)]
    pub seed_operator: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", rename_all = "kebab-case")]
pub enum Model {
    Ising(IsingParams),
    Synthetic(SyntheticParams),
    CustomSeed(CustomParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(flatten)]
    pub model: Model,
    #[serde(default = "one")]
    pub ensemble_size: usize,
    #[serde(default)]
    pub rng_seed: u64,
    pub max_n: usize,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default = "all_formats")]
    pub formats: Vec<Format>,
    /// Cap on `2^L`; falls back to `QFI_MAX_HILBERT_DIM`, then 128.
    #[serde(default)]
    pub max_hilbert_dim: Option<usize>,
    #[serde(default)]
    pub classify: ClassifyOptions,
}

fn one() -> usize {
    1
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

pub fn all_formats() -> Vec<Format> {
    vec![Format::Json, Format::Csv]
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(CliError::io(path))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.ensemble_size == 0 {
            return Err(CliError::Config("ensemble_size must be at least 1".into()));
        }
        if self.max_n == 0 {
            return Err(CliError::Config("max_n must be at least 1".into()));
        }
        if self.formats.is_empty() {
            return Err(CliError::Config("at least one output format is required".into()));
        }
        if let Model::CustomSeed(c) = &self.model {
            if c.hamiltonian.is_some() == c.seed_operator.is_some() {
                return Err(CliError::Config(
                    "custom-seed needs exactly one of hamiltonian or seed_operator".into(),
                ));
            }
        }
        Ok(())
    }

    /// Fills `max_hilbert_dim` from the environment or the default so that the
    /// echoed config records the value actually used.
    pub fn resolved(mut self) -> Result<Self, CliError> {
        if self.max_hilbert_dim.is_none() {
            let dim = match std::env::var(MAX_DIM_ENV) {
                Ok(v) => v
                    .trim()
                    .parse()
                    .map_err(|_| CliError::Config(format!("{MAX_DIM_ENV}={v:?} is not a positive integer")))?,
                Err(_) => krylov_qfi::models::DEFAULT_MAX_HILBERT_DIM,
            };
            self.max_hilbert_dim = Some(dim);
        }
        self.validate()?;
        Ok(self)
    }

    pub fn hilbert_cap(&self) -> usize {
        self.max_hilbert_dim.unwrap_or(krylov_qfi::models::DEFAULT_MAX_HILBERT_DIM)
    }
}
