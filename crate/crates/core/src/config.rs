//! Run configuration: every numeric default in one table, optionally
//! overridden by a TOML file, itself overridden by command-line flags.
//!
//! | key | default |
//! |---|---|
//! | `seed` | 0 |
//! | `jobs` | available parallelism |
//! | `em.max_sweeps` | 500 |
//! | `em.msg_tol` | 1e-6 |
//! | `em.param_tol` | 1e-5 |
//! | `em.max_em_iters` | 100 |
//! | `em.max_total_sweeps` | 1000 |
//! | `em.restarts` | 5 |
//! | `em.noise` | 0.1 |
//! | `em.factorized_tol` | 1e-3 |
//! | `em.frozen_params` | false |
//! | `em.damping` | 0 |
//! | `sweep.q_min` | 1 |
//! | `sweep.q_max` | min(30, N/10) |
//! | `sweep.greedy_runs` | 10 |
//! | `sweep.spectral` | true |
//! | `sweep.keep_marginals` | false |
//! | `spectral.alpha` | 1 |
//! | `spectral.k` | min(N/2, 2 q_max + 10) |
//! | `spectral.histogram_bins` | 50 |
//! | `greedy.runs` | 30 |
//! | `greedy.alpha` | 1 |
//! | `generate.eps` | 0.5 |
//! | `generate.exponent` | 2.5 |
//! | `generate.theta_max` | 10 |

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bp::EmConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepDefaults {
    pub q_min: usize,
    pub q_max: Option<usize>,
    pub greedy_runs: usize,
    pub spectral: bool,
    pub keep_marginals: bool,
}

impl Default for SweepDefaults {
    fn default() -> Self {
        SweepDefaults {
            q_min: 1,
            q_max: None,
            greedy_runs: 10,
            spectral: true,
            keep_marginals: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectralDefaults {
    pub alpha: f64,
    pub k: Option<usize>,
    pub histogram_bins: usize,
}

impl Default for SpectralDefaults {
    fn default() -> Self {
        SpectralDefaults {
            alpha: 1.0,
            k: None,
            histogram_bins: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GreedyDefaults {
    pub runs: usize,
    pub alpha: f64,
}

impl Default for GreedyDefaults {
    fn default() -> Self {
        GreedyDefaults { runs: 30, alpha: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerateDefaults {
    pub eps: f64,
    /// Power-law exponent of the degree propensities (`dcsbm` only).
    pub exponent: f64,
    /// Upper cutoff of the propensities; the lower one is 1.
    pub theta_max: f64,
}

impl Default for GenerateDefaults {
    fn default() -> Self {
        GenerateDefaults {
            eps: 0.5,
            exponent: 2.5,
            theta_max: 10.0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub jobs: Option<usize>,
    pub em: EmConfig,
    pub sweep: SweepDefaults,
    pub spectral: SpectralDefaults,
    pub greedy: GreedyDefaults,
    pub generate: GenerateDefaults,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidArgument(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Serialization(e.to_string()))
    }
}
