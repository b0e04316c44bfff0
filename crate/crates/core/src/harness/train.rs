//! Per-fold training and per-entry prediction.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{io_err, CacheIndex, ExperimentConfig, HarnessError, ManifestEntry, Result};
use crate::camera::{CaptureConfig, OrbitId};
use crate::nn::{
    load_params, mse_loss, network_backward, network_forward, save_params, AdamState, Mode, NetworkConfig,
    NetworkParams, Scalar, Tensor,
};
use crate::render::{prepare_frame, Frame, VideoSequence};
use crate::rng::Rng;
use crate::sampling::{frames_to_clip, sample_eval_clip, sample_training_clip};

/// Network weights plus the affine map from network outputs to label
/// units. Training targets are `(mos − label_mean) / label_scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub params: NetworkParams<f32>,
    pub label_mean: f64,
    pub label_scale: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModelMeta {
    label_mean: f64,
    label_scale: f64,
    network: NetworkConfig,
}

impl TrainedModel {
    pub fn to_label(&self, output: f64) -> f64 {
        output * self.label_scale + self.label_mean
    }

    /// Writes the weights to `path` and the label map to `path` with a
    /// `.json` extension.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        save_params(&self.params, path)?;
        let meta = ModelMeta {
            label_mean: self.label_mean,
            label_scale: self.label_scale,
            network: self.params.config.clone(),
        };
        let meta_path = path.with_extension("json");
        std::fs::write(&meta_path, serde_json::to_string_pretty(&meta)?).map_err(io_err(&meta_path))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let meta_path = path.with_extension("json");
        let text = std::fs::read_to_string(&meta_path).map_err(io_err(&meta_path))?;
        let meta: ModelMeta = serde_json::from_str(&text)?;
        let params = load_params(path, &meta.network)?;
        Ok(Self { params, label_mean: meta.label_mean, label_scale: meta.label_scale })
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: TrainedModel,
    /// Mean training loss of each epoch, in standardized label units.
    pub loss_curve: Vec<f64>,
}

fn clip_from_frames<T: Scalar>(frames: &[Frame], capture: &CaptureConfig) -> Result<Tensor<T>> {
    let prepared = frames.iter().map(|f| prepare_frame(f, capture)).collect::<std::result::Result<Vec<_>, _>>()?;
    Ok(frames_to_clip(&prepared.iter().collect::<Vec<_>>())?)
}

/// Loads, crops and scales the listed frames of one cached sequence.
pub fn load_clip<T: Scalar>(cache: &CacheIndex, id: &str, orbit: OrbitId, indices: &[usize]) -> Result<Tensor<T>> {
    clip_from_frames(&cache.frames(id, orbit, indices)?, cache.capture())
}

/// Trains a fresh network on every orbit sequence of the given entries,
/// each labeled with its entry's MOS. Each epoch visits all samples in a
/// new random order with a freshly drawn clip per sample.
pub fn train_fold(
    entries: &[&ManifestEntry],
    cache: &CacheIndex,
    config: &ExperimentConfig,
    seed: u64,
) -> Result<TrainOutcome> {
    config.validate()?;
    if cache.capture() != &config.capture {
        return Err(HarnessError::Config("cache was built for a different capture config".into()));
    }
    if entries.is_empty() {
        return Err(HarnessError::Config("no training entries".into()));
    }
    for e in entries {
        cache.check(&e.id)?;
    }
    let mut rng = Rng::new(seed);
    let mut params = NetworkParams::<f32>::init(&config.network, rng.fork_seed())?;
    let mos: Vec<f64> = entries.iter().map(|e| e.mos).collect();
    let label_mean = mos.iter().sum::<f64>() / mos.len() as f64;
    let spread = (mos.iter().map(|m| (m - label_mean).powi(2)).sum::<f64>() / mos.len() as f64).sqrt();
    let label_scale = if spread > 0.0 { spread } else { 1.0 };

    let samples: Vec<(usize, OrbitId)> =
        (0..entries.len()).flat_map(|i| OrbitId::ALL.map(move |o| (i, o))).collect();
    let mut adam = AdamState::new(config.adam, params.trainable());
    let mut loss_curve = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        let mut order: Vec<usize> = (0..samples.len()).collect();
        rng.shuffle(&mut order);
        let clips = order
            .iter()
            .map(|_| sample_training_clip(&config.clip, &mut rng))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        let mut total = 0.0;
        for range in batch_ranges(order.len(), config.batch_size) {
            let (batch, batch_clips) = (&order[range.clone()], &clips[range]);
            let inputs = batch
                .par_iter()
                .zip(batch_clips)
                .map(|(&s, indices)| {
                    let (i, orbit) = samples[s];
                    load_clip::<f32>(cache, &entries[i].id, orbit, indices)
                })
                .collect::<Result<Vec<_>>>()?;
            let x = Tensor::stack(&inputs)?;
            let y: Vec<f32> = batch.iter().map(|&s| ((mos[samples[s].0] - label_mean) / label_scale) as f32).collect();
            let out = network_forward(&params, &x, Mode::Train)?;
            let (loss, grad) = mse_loss(&out.predictions, &y)?;
            let grads = network_backward(&params, &out.cache, &grad)?;
            adam.step(&mut params.trainable_mut(), &grads.trainable())?;
            params.apply_batch_stats(&out.cache);
            total += loss * batch.len() as f64;
        }
        loss_curve.push(total / samples.len() as f64);
    }
    Ok(TrainOutcome { model: TrainedModel { params, label_mean, label_scale }, loss_curve })
}

/// Consecutive batch ranges; a trailing single sample joins the previous
/// batch, since batch statistics of one sample are undefined.
fn batch_ranges(len: usize, batch_size: usize) -> Vec<std::ops::Range<usize>> {
    let mut ranges: Vec<_> = (0..len).step_by(batch_size.max(1)).map(|s| s..(s + batch_size).min(len)).collect();
    if ranges.len() > 1 && ranges.last().map_or(false, |r| r.len() == 1) {
        let last = ranges.pop().unwrap();
        ranges.last_mut().unwrap().end = last.end;
    }
    ranges
}

fn predict_clips(model: &TrainedModel, clips: &[Tensor<f32>]) -> Result<[f64; 3]> {
    let x = Tensor::stack(clips)?;
    let out = network_forward(&model.params, &x, Mode::Eval)?;
    let p = out.predictions.data();
    Ok([0, 1, 2].map(|k| model.to_label(p[k].as_f64())))
}

/// Per-orbit predictions (A, B, C) of one cached entry, each from the
/// evaluation clip.
pub fn predict_entry_orbits(
    model: &TrainedModel,
    entry: &ManifestEntry,
    cache: &CacheIndex,
    config: &ExperimentConfig,
) -> Result<[f64; 3]> {
    let indices = sample_eval_clip(&config.clip)?;
    let clips = OrbitId::ALL
        .iter()
        .map(|&o| load_clip(cache, &entry.id, o, &indices))
        .collect::<Result<Vec<_>>>()?;
    predict_clips(model, &clips)
}

/// Mean of the three per-orbit predictions.
pub fn predict_entry(
    model: &TrainedModel,
    entry: &ManifestEntry,
    cache: &CacheIndex,
    config: &ExperimentConfig,
) -> Result<f64> {
    let p = predict_entry_orbits(model, entry, cache, config)?;
    Ok(p.iter().sum::<f64>() / 3.0)
}

/// Same as [`predict_entry`] but from freshly captured sequences.
pub fn predict_sequences(model: &TrainedModel, sequences: &[VideoSequence; 3], config: &ExperimentConfig) -> Result<f64> {
    let indices = sample_eval_clip(&config.clip)?;
    let clips = sequences
        .iter()
        .map(|seq| {
            let frames = indices
                .iter()
                .map(|&i| {
                    seq.frames().get(i).cloned().ok_or(crate::sampling::SamplingError::IndexOutOfRange {
                        index: i,
                        len: seq.len(),
                    })
                })
                .collect::<std::result::Result<Vec<_>, _>>()?;
            clip_from_frames(&frames, &config.capture)
        })
        .collect::<Result<Vec<_>>>()?;
    let p = predict_clips(model, &clips)?;
    Ok(p.iter().sum::<f64>() / 3.0)
}
