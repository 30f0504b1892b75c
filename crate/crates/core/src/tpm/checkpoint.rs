//! Model files: one JSON object
//!
//! ```text
//! {"format":"tpm-checkpoint","version":1,"kind":"tpm"|"regression",
//!  "config":{..},"classes":[..],"normalization":{..},"training":{..}|null,
//!  "params":{"format":"tpm-params","version":1,"seed":..,"params":{name:{"shape":[..],"values":[..]}}}}
//! ```
//!
//! Parameter values are row-major and written in shortest round-trip form.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{Normalization, TpmConfig, TpmModel};
use super::regression::{RegressionConfig, RegressionModel};
use super::train::TrainConfig;
use super::TpmError;
use crate::neural::ParamCheckpoint;

pub const CHECKPOINT_FORMAT: &str = "tpm-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Tpm,
    Regression,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub kind: ModelKind,
    pub config: serde_json::Value,
    pub classes: Vec<String>,
    pub normalization: Normalization,
    #[serde(default)]
    pub training: Option<TrainConfig>,
    pub params: ParamCheckpoint,
}

#[derive(Debug, Clone)]
pub enum LoadedModel {
    Tpm(TpmModel),
    Regression(RegressionModel),
}

impl LoadedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            LoadedModel::Tpm(_) => ModelKind::Tpm,
            LoadedModel::Regression(_) => ModelKind::Regression,
        }
    }

    pub fn classes(&self) -> &[String] {
        match self {
            LoadedModel::Tpm(m) => &m.classes,
            LoadedModel::Regression(m) => &m.classes,
        }
    }

    pub fn to_checkpoint(&self, training: Option<TrainConfig>) -> Checkpoint {
        let (kind, config, classes, normalization, params) = match self {
            LoadedModel::Tpm(m) => (
                ModelKind::Tpm,
                serde_json::to_value(&m.config),
                &m.classes,
                &m.normalization,
                m.store().to_checkpoint(),
            ),
            LoadedModel::Regression(m) => (
                ModelKind::Regression,
                serde_json::to_value(&m.config),
                &m.classes,
                &m.normalization,
                m.store().to_checkpoint(),
            ),
        };
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            version: CHECKPOINT_VERSION,
            kind,
            config: config.expect("config serializes"),
            classes: classes.clone(),
            normalization: normalization.clone(),
            training,
            params,
        }
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self, TpmError> {
        if ckpt.format != CHECKPOINT_FORMAT || ckpt.version != CHECKPOINT_VERSION {
            return Err(TpmError::Checkpoint(format!(
                "unsupported checkpoint {} v{}",
                ckpt.format, ckpt.version
            )));
        }
        let bad = |e: serde_json::Error| TpmError::Checkpoint(format!("invalid config: {e}"));
        Ok(match ckpt.kind {
            ModelKind::Tpm => {
                let config: TpmConfig = serde_json::from_value(ckpt.config.clone()).map_err(bad)?;
                LoadedModel::Tpm(TpmModel::from_parts(
                    config,
                    ckpt.classes.clone(),
                    ckpt.normalization.clone(),
                    &ckpt.params,
                )?)
            }
            ModelKind::Regression => {
                let config: RegressionConfig = serde_json::from_value(ckpt.config.clone()).map_err(bad)?;
                LoadedModel::Regression(RegressionModel::from_parts(
                    config,
                    ckpt.classes.clone(),
                    ckpt.normalization.clone(),
                    &ckpt.params,
                )?)
            }
        })
    }
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<(), TpmError> {
    let text = serde_json::to_string(ckpt).expect("checkpoint serializes");
    std::fs::write(path, text + "\n").map_err(|e| TpmError::Io(format!("{}: {e}", path.display())))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, TpmError> {
    let text = std::fs::read_to_string(path).map_err(|e| TpmError::Io(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| TpmError::Checkpoint(format!("{}: {e}", path.display())))
}
