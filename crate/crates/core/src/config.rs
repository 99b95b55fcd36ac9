//! Flat key-value run configuration (TOML syntax).
//!
//! ```toml
//! step0_epochs = 30
//! restraint_epochs = 10
//! relaxation_epochs = 10
//! max_rri = 15
//! lr_step0 = 0.05
//! lr_restraint = 0.02
//! lr_relaxation = 0.02
//! batch_size = 32
//! epsilon_s = 0.001
//! seed = 1
//! hidden_dims = [64, 64]
//! eigen_dim = 32
//! data = "dataset.csv"
//! eval_feature = "output"
//! normalize = false
//! ```
//!
//! Every key is optional; unknown keys are rejected.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Result, SvdnetError};
use crate::network::{FeatureKind, ModelDims};
use crate::trainer::{EvalOptions, RriSchedule};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub step0_epochs: usize,
    pub restraint_epochs: usize,
    pub relaxation_epochs: usize,
    pub max_rri: usize,
    pub lr_step0: f64,
    pub lr_restraint: f64,
    pub lr_relaxation: f64,
    pub batch_size: usize,
    pub epsilon_s: f64,
    pub seed: u64,
    pub hidden_dims: Vec<usize>,
    pub eigen_dim: usize,
    pub data: Option<PathBuf>,
    /// Retrieval features: Eigenlayer `output` (default) or `input`.
    pub eval_feature: FeatureKind,
    /// ℓ2-normalize features before ranking.
    pub normalize: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        let s = RriSchedule::default();
        Self {
            step0_epochs: s.step0_epochs,
            restraint_epochs: s.restraint_epochs,
            relaxation_epochs: s.relaxation_epochs,
            max_rri: s.max_rri,
            lr_step0: s.lr_step0,
            lr_restraint: s.lr_restraint,
            lr_relaxation: s.lr_relaxation,
            batch_size: s.batch_size,
            epsilon_s: s.epsilon_s,
            seed: s.seed,
            hidden_dims: vec![64, 64],
            eigen_dim: 32,
            data: None,
            eval_feature: FeatureKind::Output,
            normalize: false,
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let msg = e.message().trim();
            match e.span().and_then(|span| key_at(text, span.start)) {
                Some(key) => SvdnetError::Format(format!("config key `{key}`: {msg}")),
                None => SvdnetError::Format(format!("config: {msg}")),
            }
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        Self::from_toml_str(&text).map_err(|e| match e {
            SvdnetError::Format(msg) => SvdnetError::Format(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn schedule(&self) -> RriSchedule {
        RriSchedule {
            step0_epochs: self.step0_epochs,
            restraint_epochs: self.restraint_epochs,
            relaxation_epochs: self.relaxation_epochs,
            max_rri: self.max_rri,
            lr_step0: self.lr_step0,
            lr_restraint: self.lr_restraint,
            lr_relaxation: self.lr_relaxation,
            batch_size: self.batch_size,
            epsilon_s: self.epsilon_s,
            seed: self.seed,
        }
    }

    pub fn eval_options(&self) -> EvalOptions {
        EvalOptions { feature: self.eval_feature, normalize: self.normalize }
    }

    pub fn model_dims(&self, input_dim: usize, classes: usize) -> ModelDims {
        ModelDims {
            input_dim,
            hidden_dims: self.hidden_dims.clone(),
            eigen_dim: self.eigen_dim,
            classes,
        }
    }
}

/// Key name on the line containing byte offset `pos`.
fn key_at(text: &str, pos: usize) -> Option<&str> {
    let start = text[..pos.min(text.len())].rfind('\n').map_or(0, |i| i + 1);
    let line = text[start..].lines().next()?;
    let (key, _) = line.split_once('=')?;
    Some(key.trim()).filter(|k| !k.is_empty())
}
