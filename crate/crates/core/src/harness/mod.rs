//! Experiment orchestration: manifests, split protocols, the capture cache,
//! per-fold training, prediction, evaluation reports and model comparison.

mod cache;
mod config;
mod experiment;
mod manifest;
mod splits;
mod synth;
mod train;

use std::path::PathBuf;

use thiserror::Error;

pub use cache::{build_cache, config_hash, CacheIndex, CacheReport};
pub use config::{ExperimentConfig, Profile, CACHE_ENV};
pub use experiment::{compare_models, run_experiment, EvalReport, FoldReport, ModelKind, SamplePrediction};
pub use manifest::{load_manifest, parse_manifest, write_manifest, ManifestEntry, ManifestError, MANIFEST_COLUMNS};
pub use splits::{make_splits, Fold, SplitKind, SplitPlan};
pub use synth::{pseudo_mos, synth_dataset, synth_shape, SynthSpec};
pub use train::{load_clip, predict_entry, predict_entry_orbits, predict_sequences, train_fold, TrainOutcome, TrainedModel};

use crate::camera::OrbitId;
use crate::cloud::CloudError;
use crate::metrics::MetricError;
use crate::nn::NnError;
use crate::render::RenderError;
use crate::sampling::SamplingError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error("need at least 2 content groups, found {0}")]
    TooFewGroups(usize),
    #[error("rendering entry {id}: {source}")]
    RenderFailure { id: String, source: RenderError },
    #[error("reading cloud for entry {id}: {source}")]
    CloudFailure { id: String, source: CloudError },
    #[error("cache has no valid orbit {orbit} sequence for entry {id}")]
    CacheMiss { id: String, orbit: OrbitId },
    #[error("reports were produced on different split plans")]
    SplitMismatch,
    #[error("unknown entry id {0}")]
    UnknownId(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Cloud(#[from] CloudError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

pub type Result<T> = std::result::Result<T, HarnessError>;

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> HarnessError {
    let path = path.into();
    move |source| HarnessError::Io { path, source }
}
