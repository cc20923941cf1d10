//! Declarative experiment configuration.

use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::acquisition::StochasticVariant;
use crate::dataset::SyntheticSpec;
use crate::error::{Error, Result};
use crate::parbals::UniverseCoupling;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "random")]
    Random,
    #[serde(rename = "confidence")]
    Confidence,
    #[serde(rename = "bald")]
    Bald,
    #[serde(rename = "epig")]
    Epig,
    #[serde(rename = "power-bald")]
    PowerBald,
    #[serde(rename = "power-epig")]
    PowerEpig,
    #[serde(rename = "softmax-bald")]
    SoftmaxBald,
    #[serde(rename = "softmax-epig")]
    SoftmaxEpig,
    #[serde(rename = "softrank-bald")]
    SoftRankBald,
    #[serde(rename = "softrank-epig")]
    SoftRankEpig,
    #[serde(rename = "batchbald")]
    BatchBald,
    #[serde(rename = "bait")]
    Bait,
    #[serde(rename = "parbals-epig")]
    ParbalsEpig,
    #[serde(rename = "parbals-map-epig")]
    ParbalsMapEpig,
}

impl Algorithm {
    pub const ALL: [Algorithm; 14] = [
        Algorithm::Random,
        Algorithm::Confidence,
        Algorithm::Bald,
        Algorithm::Epig,
        Algorithm::PowerBald,
        Algorithm::PowerEpig,
        Algorithm::SoftmaxBald,
        Algorithm::SoftmaxEpig,
        Algorithm::SoftRankBald,
        Algorithm::SoftRankEpig,
        Algorithm::BatchBald,
        Algorithm::Bait,
        Algorithm::ParbalsEpig,
        Algorithm::ParbalsMapEpig,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Random => "random",
            Algorithm::Confidence => "confidence",
            Algorithm::Bald => "bald",
            Algorithm::Epig => "epig",
            Algorithm::PowerBald => "power-bald",
            Algorithm::PowerEpig => "power-epig",
            Algorithm::SoftmaxBald => "softmax-bald",
            Algorithm::SoftmaxEpig => "softmax-epig",
            Algorithm::SoftRankBald => "softrank-bald",
            Algorithm::SoftRankEpig => "softrank-epig",
            Algorithm::BatchBald => "batchbald",
            Algorithm::Bait => "bait",
            Algorithm::ParbalsEpig => "parbals-epig",
            Algorithm::ParbalsMapEpig => "parbals-map-epig",
        }
    }

    pub fn stochastic_variant(&self) -> Option<StochasticVariant> {
        match self {
            Algorithm::PowerBald | Algorithm::PowerEpig => Some(StochasticVariant::Power),
            Algorithm::SoftmaxBald | Algorithm::SoftmaxEpig => Some(StochasticVariant::Softmax),
            Algorithm::SoftRankBald | Algorithm::SoftRankEpig => Some(StochasticVariant::SoftRank),
            _ => None,
        }
    }

    pub fn is_parbals(&self) -> bool {
        matches!(self, Algorithm::ParbalsEpig | Algorithm::ParbalsMapEpig)
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .iter()
            .copied()
            .find(|a| a.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Algorithm::ALL.iter().map(|a| a.name()).collect();
                Error::InvalidConfig(format!(
                    "unknown algorithm '{s}'; expected one of {}",
                    names.join(", ")
                ))
            })
    }
}

/// Where the scenario comes from: a JSON manifest on disk or an inline
/// synthetic data-generating process.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioSource {
    Manifest(PathBuf),
    Synthetic(SyntheticSpec),
}

fn default_k() -> usize {
    400
}

fn default_sigma2() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: ScenarioSource,
    pub algorithm: Algorithm,
    /// Number of acquisition iterations T.
    pub t: usize,
    /// Budget B per iteration.
    pub b: usize,
    pub initial_labeled: usize,
    /// Posterior sample count.
    #[serde(default = "default_k")]
    pub k: usize,
    /// Universe count for parbals-epig.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    /// Temperature for the stochastic variants.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    /// Prior variance.
    #[serde(default = "default_sigma2")]
    pub sigma2: f64,
    pub seed: u64,
    /// EPIG validation subsample size; defaults to min(|V|, 500).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub val_subsample: Option<usize>,
    #[serde(default)]
    pub universe_coupling: UniverseCoupling,
}

pub const DEFAULT_VAL_SUBSAMPLE: usize = 500;

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.b < 1 {
            return Err(Error::InvalidConfig("b must be at least 1".into()));
        }
        if self.initial_labeled < 1 {
            return Err(Error::InvalidConfig("initial_labeled must be at least 1".into()));
        }
        if self.k < 1 {
            return Err(Error::InvalidConfig("k must be at least 1".into()));
        }
        if self.sigma2 <= 0.0 || !self.sigma2.is_finite() {
            return Err(Error::InvalidConfig("sigma2 must be positive".into()));
        }
        match self.algorithm {
            Algorithm::ParbalsEpig => {
                if self.m.is_none_or(|m| m < 1) {
                    return Err(Error::InvalidConfig(
                        "parbals-epig requires m >= 1".into(),
                    ));
                }
            }
            Algorithm::ParbalsMapEpig => {
                if self.m.is_some_and(|m| m != 1) {
                    return Err(Error::InvalidConfig(
                        "parbals-map-epig uses exactly one universe; omit m or set m = 1".into(),
                    ));
                }
            }
            _ => {
                if self.m.is_some() {
                    return Err(Error::InvalidConfig(format!(
                        "m only applies to parbals algorithms, not {}",
                        self.algorithm
                    )));
                }
            }
        }
        if self.beta.is_some() && self.algorithm.stochastic_variant().is_none() {
            return Err(Error::InvalidConfig(format!(
                "beta only applies to the stochastic variants, not {}",
                self.algorithm
            )));
        }
        if let Some(beta) = self.beta {
            if !(beta > 0.0) {
                return Err(Error::InvalidConfig("beta must be positive".into()));
            }
        }
        if let ScenarioSource::Synthetic(spec) = &self.scenario {
            spec.validate()?;
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn val_subsample_or_default(&self, n_val: usize) -> usize {
        self.val_subsample.unwrap_or(DEFAULT_VAL_SUBSAMPLE).min(n_val)
    }
}
