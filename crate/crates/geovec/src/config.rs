//! Run configuration: one JSON document whose fields seed every command
//! flag. Flags given on the command line take precedence.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{}: {message}", path.display())]
    Read { path: PathBuf, message: String },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub nodes: Option<PathBuf>,
    pub attributes: Option<PathBuf>,
    pub timeseries: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub store: Option<PathBuf>,
    pub fixtures: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    Mock,
    Rff,
    Remote,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProviderConfig {
    pub kind: Option<ProviderKind>,
    pub dim: Option<usize>,
    pub seed: Option<u64>,
    pub lengthscale_deg: Option<f64>,
    pub url: Option<String>,
    pub model: Option<String>,
    pub workers: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GpConfig {
    pub alpha: Option<f64>,
    pub folds: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForecastSettings {
    pub history: Option<usize>,
    pub horizon: Option<usize>,
    pub d_t: Option<usize>,
    pub d_s: Option<usize>,
    pub hidden: Option<usize>,
    pub lr: Option<f64>,
    pub epochs: Option<usize>,
    pub batch: Option<usize>,
    pub seed: Option<u64>,
    pub leaky_slope: Option<f64>,
    pub epsilon_revin: Option<f64>,
    pub preserve_width: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Fallback for every seed not set in its own section.
    pub seed: Option<u64>,
    pub paths: Paths,
    pub provider: ProviderConfig,
    pub variant: Option<String>,
    pub radius_km: Option<f64>,
    pub gp: GpConfig,
    pub forecast: ForecastSettings,
    pub offline: bool,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let read_err = |m: String| ConfigError::Read { path: path.to_path_buf(), message: m };
        let text = std::fs::read_to_string(path).map_err(|e| read_err(e.to_string()))?;
        let cfg: RunConfig = serde_json::from_str(&text).map_err(|e| read_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Every path named in the file must exist, except outputs (store and
    /// cache directory may be created by the run).
    pub fn validate(&self) -> Result<(), ConfigError> {
        let p = &self.paths;
        for (name, path) in [("nodes", &p.nodes), ("attributes", &p.attributes), ("timeseries", &p.timeseries), ("fixtures", &p.fixtures)] {
            if let Some(path) = path {
                if !path.exists() {
                    return Err(ConfigError::Invalid(format!("paths.{name}: {} does not exist", path.display())));
                }
            }
        }
        if self.provider.kind == Some(ProviderKind::Remote) && self.provider.url.is_none() {
            return Err(ConfigError::Invalid("provider.kind is remote but provider.url is missing".into()));
        }
        Ok(())
    }
}
