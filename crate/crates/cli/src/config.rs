//! Run configuration: TOML file with sections, overridden by flags.
//!
//! ```toml
//! seed = 7
//! standardize = false
//!
//! [model]
//! latent_dim = 5
//!
//! [model.architecture]
//! encoder_hidden = [512, 256, 128, 64, 32]
//!
//! [train]
//! iterations = 3000
//! batch_size = 256
//!
//! [train.model_adam]
//! lr = 1e-3
//!
//! [lambda]
//! subsets = 50
//!
//! [bootstrap]
//! rounds = 100
//! ```
//!
//! Every section and key is optional; unknown keys are rejected.

use std::fs;
use std::path::Path;

use anyhow::Context;
use lwgan_core::dimsel::{BootstrapConfig, LambdaConfig};
use lwgan_core::trainer::TrainConfig;
use lwgan_core::Architecture;
use serde::{Deserialize, Serialize};

use crate::UsageError;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Latent width `d`; defaults to the data width `p`.
    pub latent_dim: Option<usize>,
    pub architecture: Architecture,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    /// Z-score each column before training.
    pub standardize: bool,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub lambda: LambdaConfig,
    pub bootstrap: BootstrapConfig,
}

impl RunConfig {
    /// Parses TOML text, reporting the key path of the first bad entry.
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        let table: toml::Table = toml::from_str(text).map_err(|e| UsageError(format!("config: {e}")))?;
        serde_path_to_error::deserialize(toml::Value::Table(table)).map_err(|e| {
            let path = e.path().to_string();
            UsageError(format!("config key `{path}`: {}", e.into_inner())).into()
        })
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("in {}", path.display()))
    }

    /// File values when a path is given, defaults otherwise.
    pub fn load_or_default(path: Option<&Path>) -> anyhow::Result<Self> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }
}
