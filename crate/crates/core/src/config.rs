//! Run configuration read from TOML. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimation::FitConfig;
use crate::evaluation::EvaluationConfig;
use crate::io::sha256_hex;
use crate::model::{ModelParams, PopulationParams};
use crate::simulator::PopulationConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PosteriorConfig {
    pub grid_size: usize,
}

impl Default for PosteriorConfig {
    fn default() -> Self {
        Self { grid_size: 1001 }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Advocate constants for fit, predict, classify and posterior.
    pub population: Option<PopulationParams>,
    /// Generating parameters for `simulate`.
    pub model: Option<ModelParams>,
    #[serde(default)]
    pub fit: FitConfig,
    #[serde(default)]
    pub simulation: PopulationConfig,
    #[serde(default)]
    pub evaluation: EvaluationConfig,
    #[serde(default)]
    pub posterior: PosteriorConfig,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
}

/// A parsed configuration with the hash of the text it came from.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub config: RunConfig,
    pub sha256: String,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(pop) = &self.population {
            pop.validate().map_err(|e| Error::Config(format!("population: {e}")))?;
        }
        if let Some(model) = &self.model {
            model.validate().map_err(|e| Error::Config(format!("model: {e}")))?;
        }
        self.fit.validate()?;
        self.simulation
            .validate()
            .map_err(|e| Error::Config(format!("simulation: {e}")))?;
        self.evaluation.validate()?;
        if self.posterior.grid_size < 101 {
            return Err(Error::Config("posterior.grid_size must be at least 101".into()));
        }
        Ok(())
    }

    /// Reads `path`, or returns the defaults (hash of the empty string) when
    /// no file is given.
    pub fn load(path: Option<&Path>) -> Result<LoadedConfig> {
        match path {
            None => Ok(LoadedConfig {
                config: RunConfig::default(),
                sha256: sha256_hex(b""),
            }),
            Some(path) => {
                let bytes = std::fs::read(path).map_err(|e| Error::File {
                    path: path.to_path_buf(),
                    message: e.to_string(),
                })?;
                let text = String::from_utf8(bytes.clone()).map_err(|e| Error::File {
                    path: path.to_path_buf(),
                    message: e.to_string(),
                })?;
                let config = RunConfig::parse(&text).map_err(|e| match e {
                    Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
                    other => other,
                })?;
                Ok(LoadedConfig {
                    config,
                    sha256: sha256_hex(&bytes),
                })
            }
        }
    }
}
