//! The pipeline configuration file. Every threshold of every stage lives
//! here; omitted fields take their defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use wkit_core::gnn::GnnDims;
use wkit_core::metrics::SapConfig;
use wkit_core::pipeline::DetectConfig;
use wkit_core::wireframe3d::FusionConfig;
use wkit_core::{AssembleConfig, DecodeConfig, PoolConfig};

use crate::error::{CliError, Result};
use crate::io;

/// Environment variable consulted when no `--config` is given.
pub const CONFIG_ENV: &str = "WKIT_CONFIG";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GnnConfig {
    /// Embedding width.
    pub d: usize,
    /// Residual graph-convolution layers.
    pub n: usize,
    pub head_hidden: usize,
    /// Weight manifest (or its directory), relative to the working directory.
    pub weights: Option<PathBuf>,
}

impl Default for GnnConfig {
    fn default() -> Self {
        let d = GnnDims::default();
        Self { d: d.d, n: d.layers, head_hidden: d.head_hidden, weights: None }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub decode: DecodeConfig,
    pub assemble: AssembleConfig,
    pub pool: PoolConfig,
    pub gnn: GnnConfig,
    pub sap: SapConfig,
    pub fusion: FusionConfig,
    pub seed: u64,
}

impl PipelineConfig {
    pub fn validate(&self) -> wkit_core::Result<()> {
        self.detect().validate()?;
        self.sap.validate()?;
        self.fusion.validate()?;
        if self.gnn.d == 0 || self.gnn.head_hidden == 0 {
            return Err(wkit_core::Error::Invalid { what: "gnn config", detail: "d and head_hidden must be positive".into() });
        }
        Ok(())
    }

    pub fn detect(&self) -> DetectConfig {
        DetectConfig { decode: self.decode.clone(), assemble: self.assemble.clone(), pool: self.pool.clone() }
    }

    /// Network dimensions for feature maps with `channels` channels.
    pub fn gnn_dims(&self, channels: usize) -> GnnDims {
        GnnDims { semantic_dim: self.pool.semantic_len(channels), d: self.gnn.d, head_hidden: self.gnn.head_hidden, layers: self.gnn.n }
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// Reads and validates a config file.
    pub fn load(path: &Path) -> Result<Self> {
        let cfg: Self = io::read_json(path)?;
        cfg.validate().map_err(|e| CliError::core(path, e))?;
        Ok(cfg)
    }

    /// The explicit path, else `$WKIT_CONFIG`, else defaults.
    pub fn resolve(explicit: Option<&Path>) -> Result<Self> {
        let env = std::env::var_os(CONFIG_ENV).filter(|v| !v.is_empty()).map(PathBuf::from);
        match explicit.map(Path::to_owned).or(env) {
            Some(p) => Self::load(&p),
            None => Ok(Self::default()),
        }
    }
}
