//! Fixed-stride clip sampling and clip tensor assembly.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nn::{Scalar, Tensor};
use crate::render::{Frame, VideoSequence};
use crate::rng::Rng;

#[derive(Debug, Error, PartialEq)]
pub enum SamplingError {
    #[error("clip of {clip_length} frames at stride {stride} does not fit in {sequence_length} frames")]
    ClipTooLong { sequence_length: usize, stride: usize, clip_length: usize },
    #[error("stride and clip length must be positive")]
    InvalidSpec,
    #[error("frame index {index} out of range for {len} frames")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("no frames to gather")]
    Empty,
}

pub type Result<T> = std::result::Result<T, SamplingError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClipSpec {
    pub sequence_length: usize,
    pub stride: usize,
    pub clip_length: usize,
}

impl Default for ClipSpec {
    fn default() -> Self {
        Self { sequence_length: 210, stride: 7, clip_length: 30 }
    }
}

impl ClipSpec {
    /// Largest start index whose clip stays inside the sequence, capped at
    /// `stride − 1`.
    pub fn max_start(&self) -> Result<usize> {
        let Self { sequence_length, stride, clip_length } = *self;
        if stride == 0 || clip_length == 0 {
            return Err(SamplingError::InvalidSpec);
        }
        let span = stride * (clip_length - 1);
        if span >= sequence_length {
            return Err(SamplingError::ClipTooLong { sequence_length, stride, clip_length });
        }
        Ok((stride - 1).min(sequence_length - 1 - span))
    }

    pub fn indices_from(&self, start: usize) -> Result<Vec<usize>> {
        if start > self.max_start()? {
            return Err(SamplingError::ClipTooLong {
                sequence_length: self.sequence_length,
                stride: self.stride,
                clip_length: self.clip_length,
            });
        }
        Ok((0..self.clip_length).map(|k| start + k * self.stride).collect())
    }
}

/// Training clip: start drawn uniformly from `0..=max_start`, then every
/// `stride`-th frame.
pub fn sample_training_clip(spec: &ClipSpec, rng: &mut Rng) -> Result<Vec<usize>> {
    let max_start = spec.max_start()?;
    let start = rng.below(max_start as u64 + 1) as usize;
    spec.indices_from(start)
}

/// Evaluation clip: always starts at frame 0.
pub fn sample_eval_clip(spec: &ClipSpec) -> Result<Vec<usize>> {
    spec.indices_from(0)
}

/// Stacks frames into a `[3, T, H, W]` tensor with values `byte / 255`.
pub fn frames_to_clip<T: Scalar>(frames: &[&Frame]) -> Result<Tensor<T>> {
    let first = frames.first().ok_or(SamplingError::Empty)?;
    let (w, h, t) = (first.width(), first.height(), frames.len());
    let plane = w * h;
    let mut data = vec![T::zero(); 3 * t * plane];
    let scale = 1.0 / 255.0;
    for (k, f) in frames.iter().enumerate() {
        assert_eq!((f.width(), f.height()), (w, h), "frames differ in size");
        for (i, px) in f.pixels().chunks_exact(3).enumerate() {
            for c in 0..3 {
                data[(c * t + k) * plane + i] = T::of_f64(px[c] as f64 * scale);
            }
        }
    }
    Ok(Tensor::from_vec(&[3, t, h, w], data).expect("consistent clip shape"))
}

/// Gathers the listed frames of a sequence as a `[3, T, H, W]` clip.
pub fn gather_clip<T: Scalar>(seq: &VideoSequence, indices: &[usize]) -> Result<Tensor<T>> {
    let frames = indices
        .iter()
        .map(|&i| seq.frames().get(i).ok_or(SamplingError::IndexOutOfRange { index: i, len: seq.len() }))
        .collect::<Result<Vec<_>>>()?;
    frames_to_clip(&frames)
}
