use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{io_err, HarnessError, Result};
use crate::camera::CaptureConfig;
use crate::nn::{AdamConfig, NetworkConfig};
use crate::sampling::ClipSpec;

/// Environment variable that overrides the configured cache directory.
pub const CACHE_ENV: &str = "ORBITPCQA_CACHE";

const DEFAULT_CACHE_DIR: &str = ".orbitpcqa-cache";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// 64×64 renders cropped to 56×56, narrow network, 10 epochs.
    Desk,
    /// 520×520 renders cropped to 448×448, full-width network, 50 epochs.
    Full,
}

impl std::str::FromStr for Profile {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "desk" => Ok(Profile::Desk),
            "full" => Ok(Profile::Full),
            other => Err(format!("unknown profile {other:?}, expected desk or full")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub profile: Profile,
    pub capture: CaptureConfig,
    pub network: NetworkConfig,
    pub clip: ClipSpec,
    pub adam: AdamConfig,
    pub epochs: usize,
    pub batch_size: usize,
    #[serde(default)]
    pub cache_dir: Option<PathBuf>,
    /// Runs everything on one thread.
    #[serde(default)]
    pub deterministic: bool,
}

impl ExperimentConfig {
    pub fn for_profile(profile: Profile) -> Self {
        match profile {
            Profile::Desk => Self {
                profile,
                capture: CaptureConfig::desk(),
                network: NetworkConfig::desk(),
                clip: ClipSpec::default(),
                adam: AdamConfig::default(),
                epochs: 10,
                batch_size: 4,
                cache_dir: None,
                deterministic: false,
            },
            Profile::Full => Self {
                profile,
                capture: CaptureConfig::default(),
                network: NetworkConfig::full(),
                epochs: 50,
                ..Self::for_profile(Profile::Desk)
            },
        }
    }

    pub fn desk() -> Self {
        Self::for_profile(Profile::Desk)
    }

    pub fn full() -> Self {
        Self::for_profile(Profile::Full)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(HarnessError::Config(m));
        self.capture.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        self.network.validate()?;
        self.clip.max_start()?;
        if self.clip.sequence_length != self.capture.frames_per_orbit {
            return bad(format!(
                "clip sequence length {} differs from frames per orbit {}",
                self.clip.sequence_length, self.capture.frames_per_orbit
            ));
        }
        let expected = [3, self.clip.clip_length, self.capture.crop_height, self.capture.crop_width];
        if self.network.input_shape != expected {
            return bad(format!("network input shape {:?} must be {expected:?}", self.network.input_shape));
        }
        if self.epochs == 0 || self.batch_size == 0 {
            return bad("epochs and batch size must be positive".into());
        }
        Ok(())
    }

    /// Cache directory: `ORBITPCQA_CACHE` if set, else the configured one,
    /// else `.orbitpcqa-cache`.
    pub fn resolved_cache_dir(&self) -> PathBuf {
        match std::env::var_os(CACHE_ENV) {
            Some(dir) if !dir.is_empty() => PathBuf::from(dir),
            _ => self.cache_dir.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_CACHE_DIR)),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_json(&std::fs::read_to_string(path).map_err(io_err(path))?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}
