use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::dvr::{DvrModel, TrainConfig};
use super::features::FeatureSpace;
use super::rank::ScoreMode;
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

/// Everything needed to score new records: vocabulary, parameters and config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub space: FeatureSpace,
    pub model: DvrModel,
    pub config: TrainConfig,
    pub score_mode: ScoreMode,
    /// Training duration range used to normalize the duration head's target.
    pub duration_range: (f64, f64),
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let ckpt: Checkpoint = serde_json::from_str(&text)?;
        if ckpt.version != CHECKPOINT_VERSION {
            return Err(Error::Data(format!(
                "checkpoint version {} is not supported (expected {CHECKPOINT_VERSION})",
                ckpt.version
            )));
        }
        Ok(ckpt)
    }
}
