//! TOML experiment configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::covariate::GpConfig;
use crate::error::{AcsError, Result};
use crate::mcmc::McmcConfig;
use crate::survey::{stage_sizes, SamplingMode};

pub const SPEC_VERSION: u32 = 1;

/// Where the population comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Scenario {
    Generate {
        rows: usize,
        cols: usize,
        alpha: f64,
        beta: f64,
        theta: Vec<f64>,
        #[serde(default)]
        gp: GpConfig,
        #[serde(default)]
        covariate_seed: u64,
        #[serde(default)]
        population_seed: u64,
        /// Draw a fresh population for every replication.
        #[serde(default)]
        regenerate: bool,
    },
    Load {
        path: PathBuf,
        #[serde(default)]
        center: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Baseline {
    Raj,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub spec_version: u32,
    pub scenario: Scenario,
    /// Total networks drawn per sample.
    pub m: usize,
    /// Share of `m` drawn in stage 1.
    pub stage1_fraction: f64,
    #[serde(default)]
    pub mode: SamplingMode,
    pub replications: usize,
    #[serde(default)]
    pub mcmc: McmcConfig,
    #[serde(default)]
    pub baselines: Vec<Baseline>,
    /// Keep only samples with exactly this many nonempty networks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition_networks: Option<usize>,
    #[serde(default = "default_condition_budget")]
    pub condition_budget: usize,
    pub master_seed: u64,
}

fn default_condition_budget() -> usize {
    200
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| AcsError::Config(e.to_string()))
    }

    /// Read a config file; a relative scenario path resolves against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| AcsError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)?;
        if let Scenario::Load { path: data, .. } = &mut cfg.scenario {
            if data.is_relative() {
                if let Some(dir) = path.parent() {
                    *data = dir.join(&*data);
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| AcsError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(AcsError::Config(msg));
        if self.spec_version != SPEC_VERSION {
            return bad(format!("unsupported spec_version {} (expected {SPEC_VERSION})", self.spec_version));
        }
        if self.m < 2 {
            return bad(format!("m must be at least 2, got {}", self.m));
        }
        if self.replications == 0 {
            return bad("replications must be at least 1".into());
        }
        stage_sizes(self.m, self.stage1_fraction).map_err(|e| AcsError::Config(e.to_string()))?;
        if self.condition_networks == Some(0) {
            return bad("condition_networks must be at least 1".into());
        }
        if let Scenario::Generate { rows, cols, alpha, beta, theta, gp, .. } = &self.scenario {
            if *rows == 0 || *cols == 0 {
                return bad("grid dimensions must be positive".into());
            }
            if !(*alpha > 0.0 && *alpha < 1.0 && *beta > 0.0 && *beta < 1.0) {
                return bad("alpha and beta must lie in (0, 1)".into());
            }
            if theta.len() != 2 {
                return bad("generated scenarios use one covariate: theta needs 2 entries".into());
            }
            gp.validate().map_err(|e| AcsError::Config(e.to_string()))?;
        }
        self.mcmc.validate()
    }

    pub fn stage_sizes(&self) -> (usize, usize) {
        stage_sizes(self.m, self.stage1_fraction).expect("validated")
    }
}
