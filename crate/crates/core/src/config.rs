//! Pipeline configuration: a JSON key-value file whose keys mirror the CLI flags.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::areapred::{AreaStatistic, DEFAULT_THRESHOLDS};
use crate::grid::FieldFormat;
use crate::marginals::DEFAULT_RESOLUTION;
use crate::synth::SynthConfig;
use crate::{Error, Result};

/// Ensembles compared in verification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ModelTag {
    #[serde(rename = "COPULA")]
    Copula,
    #[serde(rename = "COPULA_sorted")]
    CopulaSorted,
    #[serde(rename = "RANDOM")]
    Random,
    /// The dataset's own input ensemble.
    #[serde(rename = "REFERENCE")]
    Reference,
}

impl ModelTag {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Copula => "COPULA",
            Self::CopulaSorted => "COPULA_sorted",
            Self::Random => "RANDOM",
            Self::Reference => "REFERENCE",
        }
    }
}

impl std::fmt::Display for ModelTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ModelTag {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "copula" => Ok(Self::Copula),
            "sorted" | "copula_sorted" => Ok(Self::CopulaSorted),
            "random" => Ok(Self::Random),
            "reference" => Ok(Self::Reference),
            _ => Err(Error::Config(format!(
                "unknown model '{s}' (expected copula, sorted, random or reference)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Side length of square evaluation areas.
    pub side: usize,
    /// Samples per gridpoint before the last member is dropped.
    pub members: usize,
    pub truncation: usize,
    pub n_quantiles: usize,
    pub thresholds: Vec<f64>,
    pub statistic: AreaStatistic,
    pub seed: u64,
    pub refit_every: usize,
    pub min_train_days: usize,
    pub lead_times: Vec<u32>,
    pub models: Vec<ModelTag>,
    /// Hours between consecutive validation origins.
    pub validate_every: usize,
    /// Most recent training rows kept per fit; 0 keeps all.
    pub max_train_rows: usize,
    pub workers: usize,
    pub max_failures: usize,
    pub resolution: f64,
    pub pooled_marginals: bool,
    pub format: FieldFormat,
    pub data_dir: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub model_path: Option<PathBuf>,
    pub simulation: SynthConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            side: 9,
            members: 20,
            truncation: 5,
            n_quantiles: 100,
            thresholds: DEFAULT_THRESHOLDS.to_vec(),
            statistic: AreaStatistic::Mean,
            seed: 0,
            refit_every: 24,
            min_train_days: 7,
            lead_times: (1..=6).collect(),
            models: vec![ModelTag::Copula, ModelTag::CopulaSorted, ModelTag::Random],
            validate_every: 1,
            max_train_rows: 1000,
            workers: 8,
            max_failures: 10_000,
            resolution: DEFAULT_RESOLUTION,
            pooled_marginals: false,
            format: FieldFormat::Bin,
            data_dir: None,
            out_dir: None,
            model_path: None,
            simulation: SynthConfig::default(),
        }
    }
}

impl PipelineConfig {
    /// Reads a JSON file; absent keys keep their defaults, unknown keys are errors.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("config {}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.side == 0 {
            return bad("side must be at least 1".into());
        }
        if self.members < 2 {
            return bad(format!("members must be at least 2, got {}", self.members));
        }
        if self.truncation == 0 {
            return bad("truncation must be at least 1".into());
        }
        if self.thresholds.iter().any(|z| !z.is_finite()) {
            return bad("thresholds must be finite".into());
        }
        if self.refit_every == 0 || self.validate_every == 0 {
            return bad("refit_every and validate_every must be positive".into());
        }
        if self.min_train_days == 0 {
            return bad("min_train_days must be positive".into());
        }
        if self.lead_times.is_empty() || self.lead_times.contains(&0) {
            return bad("lead_times must be a non-empty list of positive hours".into());
        }
        if self.models.is_empty() {
            return bad("at least one model is required".into());
        }
        if self.workers == 0 || self.max_failures == 0 {
            return bad("workers and max_failures must be positive".into());
        }
        if !(self.resolution > 0.0) {
            return bad("resolution must be positive".into());
        }
        if self.n_quantiles == 0 || self.n_quantiles % self.members != 0 {
            return bad(format!(
                "members ({}) must divide n_quantiles ({}) for stratified sampling",
                self.members, self.n_quantiles
            ));
        }
        self.simulation.validate()
    }
}

/// Parses a comma-separated list such as `0.62,1.23`.
pub fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| {
            p.trim()
                .parse::<T>()
                .map_err(|e| Error::Config(format!("cannot parse '{p}': {e}")))
        })
        .collect()
}
