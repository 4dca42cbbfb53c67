//! Run configuration: one TOML document with `[stft]`, `[model]`, `[train]`
//! and `[data]` tables. Missing keys take their defaults and unknown keys
//! are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::RECORDING_LEN;
use crate::dsp::StftConfig;
use crate::error::{Error, Result};
use crate::io::read_text;
use crate::model::ModelConfig;
use crate::train::TrainConfig;

/// Environment variable naming the default data root.
pub const DATA_ROOT_ENV: &str = "SALCNN_DATA_ROOT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    /// Directory holding one sub-directory per bearing.
    pub data_root: Option<PathBuf>,
    /// Step between the end snapshots of consecutive training windows.
    pub stride: usize,
    /// Recordings per bearing of the synthetic fleet.
    pub synthetic_life_n: usize,
    pub synthetic_seed: u64,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            data_root: None,
            stride: 1,
            synthetic_life_n: 120,
            synthetic_seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub stft: StftConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub data: DataConfig,
}

impl RunConfig {
    /// Parses and validates a TOML document. `source_name` labels errors.
    pub fn from_toml_str(text: &str, source_name: &str) -> Result<Self> {
        let cfg: Self =
            toml::from_str(text).map_err(|e| Error::Config(format!("{source_name}: {}", e.message())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&read_text(path)?, &path.display().to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configuration is always representable")
    }

    /// Checks every section and the agreements between them.
    pub fn validate(&self) -> Result<()> {
        self.stft.validate()?;
        self.model.validate()?;
        self.train.validate()?;
        let frames = self.stft.frame_count(RECORDING_LEN);
        if self.model.frames != frames {
            return Err(Error::Config(format!(
                "model.frames is {} but the STFT yields {frames} frames per recording",
                self.model.frames
            )));
        }
        if self.model.freq_bins > self.stft.crop_bins {
            return Err(Error::Config(format!(
                "model.freq_bins {} exceeds stft.crop_bins {}",
                self.model.freq_bins, self.stft.crop_bins
            )));
        }
        if self.data.stride == 0 {
            return Err(Error::Config("data.stride must be at least 1".into()));
        }
        if self.data.synthetic_life_n <= self.model.sequence_window {
            return Err(Error::Config(format!(
                "data.synthetic_life_n must exceed the sequence window {}, got {}",
                self.model.sequence_window, self.data.synthetic_life_n
            )));
        }
        Ok(())
    }

    /// The configured data root, else the environment default.
    pub fn data_root(&self) -> Option<PathBuf> {
        self.data
            .data_root
            .clone()
            .or_else(|| std::env::var_os(DATA_ROOT_ENV).map(PathBuf::from))
    }
}
