//! Stem → four residual stages → global average pool → 128-d features →
//! scalar quality score.

use serde::{Deserialize, Serialize};

use super::conv::{conv3d_backward, conv3d_forward, ConvGeometry};
use super::layers::{
    global_avg_pool, global_avg_pool_backward, relu_backward, relu_forward, BatchNorm3d, BnCache, Linear,
};
use super::tensor::{Scalar, Tensor};
use super::{Mode, NnError, Result};
use crate::rng::Rng;

pub const FEATURE_DIM: usize = 128;
const STEM_KERNEL: [usize; 3] = [3, 7, 7];
const STEM_STRIDE: [usize; 3] = [1, 2, 2];
const STEM_PADDING: [usize; 3] = [1, 3, 3];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkConfig {
    pub stage_channels: [usize; 4],
    pub blocks_per_stage: [usize; 4],
    pub feature_dim: usize,
    /// (channels, frames, height, width) of one clip.
    pub input_shape: [usize; 4],
    pub temporal_downsample: [bool; 4],
    pub spatial_downsample: [bool; 4],
}

impl Default for NetworkConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl NetworkConfig {
    pub fn desk() -> Self {
        Self {
            stage_channels: [8, 16, 32, 64],
            blocks_per_stage: [1, 1, 1, 1],
            feature_dim: FEATURE_DIM,
            input_shape: [3, 30, 56, 56],
            temporal_downsample: [false, true, true, true],
            spatial_downsample: [false, true, true, true],
        }
    }

    /// Full-width 18-layer variant on 448×448 crops.
    pub fn full() -> Self {
        Self {
            stage_channels: [64, 128, 256, 512],
            blocks_per_stage: [2, 2, 2, 2],
            input_shape: [3, 30, 448, 448],
            ..Self::desk()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(NnError::InvalidConfig(m));
        if self.feature_dim != FEATURE_DIM {
            return bad(format!("feature_dim must be {FEATURE_DIM}, got {}", self.feature_dim));
        }
        if self.stage_channels.contains(&0) || self.blocks_per_stage.contains(&0) {
            return bad("stage channels and block counts must be positive".into());
        }
        if self.input_shape[0] != 3 || self.input_shape.contains(&0) {
            return bad(format!("input shape must be (3, T, H, W), got {:?}", self.input_shape));
        }
        Ok(())
    }

    fn stage_stride(&self, stage: usize) -> [usize; 3] {
        let t = if self.temporal_downsample[stage] { 2 } else { 1 };
        let s = if self.spatial_downsample[stage] { 2 } else { 1 };
        [t, s, s]
    }
}

/// Convolution without bias (batch norm follows every conv).
#[derive(Debug, Clone, PartialEq)]
pub struct Conv3d<T> {
    pub weight: Tensor<T>,
    pub stride: [usize; 3],
    pub padding: [usize; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvBn<T> {
    pub conv: Conv3d<T>,
    pub bn: BatchNorm3d<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasicBlock<T> {
    pub conv1: ConvBn<T>,
    pub conv2: ConvBn<T>,
    /// 1×1×1 projection when the block changes shape.
    pub shortcut: Option<ConvBn<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkParams<T> {
    pub config: NetworkConfig,
    pub stem: ConvBn<T>,
    pub blocks: Vec<BasicBlock<T>>,
    pub head: Linear<T>,
    pub regressor: Linear<T>,
}

fn he_uniform<T: Scalar>(shape: &[usize], fan_in: usize, rng: &mut Rng) -> Tensor<T> {
    let bound = (6.0 / fan_in as f64).sqrt();
    Tensor::from_fn(shape, |_| T::of_f64((rng.next_f64() * 2.0 - 1.0) * bound))
}

impl<T: Scalar> ConvBn<T> {
    fn init(cin: usize, cout: usize, kernel: [usize; 3], stride: [usize; 3], padding: [usize; 3], rng: &mut Rng) -> Self {
        let fan_in = cin * kernel.iter().product::<usize>();
        let weight = he_uniform(&[cout, cin, kernel[0], kernel[1], kernel[2]], fan_in, rng);
        Self { conv: Conv3d { weight, stride, padding }, bn: BatchNorm3d::new(cout) }
    }

    fn forward(&self, x: &Tensor<T>, mode: Mode) -> Result<(Tensor<T>, ConvBnCache<T>)> {
        let y = conv3d_forward(x, &self.conv.weight, None, self.conv.stride, self.conv.padding)?;
        let (z, bn) = self.bn.forward(&y, mode)?;
        Ok((z, ConvBnCache { input: x.clone(), bn }))
    }

    fn backward(&self, grad: &Tensor<T>, cache: &ConvBnCache<T>, out: &mut ConvBn<T>, need_input: bool) -> Result<Option<Tensor<T>>> {
        let (dy, dgamma, dbeta) = self.bn.backward(grad, &cache.bn)?;
        out.bn.gamma.add_assign(&dgamma)?;
        out.bn.beta.add_assign(&dbeta)?;
        let g = conv3d_backward(&dy, &cache.input, &self.conv.weight, self.conv.stride, self.conv.padding, false, need_input)?;
        out.conv.weight.add_assign(&g.weight)?;
        Ok(g.input)
    }

    fn visit<'a>(&'a self, out: &mut Vec<&'a Tensor<T>>) {
        out.extend([&self.conv.weight, &self.bn.gamma, &self.bn.beta]);
    }

    fn visit_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Tensor<T>>) {
        out.extend([&mut self.conv.weight, &mut self.bn.gamma, &mut self.bn.beta]);
    }

    fn visit_all<'a>(&'a self, out: &mut Vec<&'a Tensor<T>>) {
        out.extend([&self.conv.weight, &self.bn.gamma, &self.bn.beta, &self.bn.running_mean, &self.bn.running_var]);
    }

    fn visit_all_mut<'a>(&'a mut self, out: &mut Vec<&'a mut Tensor<T>>) {
        let bn = &mut self.bn;
        out.extend([&mut self.conv.weight, &mut bn.gamma, &mut bn.beta, &mut bn.running_mean, &mut bn.running_var]);
    }
}

#[derive(Debug, Clone)]
struct ConvBnCache<T> {
    input: Tensor<T>,
    bn: BnCache<T>,
}

#[derive(Debug, Clone)]
struct BlockCache<T> {
    conv1: ConvBnCache<T>,
    mid: Tensor<T>,
    conv2: ConvBnCache<T>,
    shortcut: Option<ConvBnCache<T>>,
    out: Tensor<T>,
}

/// Intermediate values of a forward pass, consumed by [`network_backward`]
/// and by [`NetworkParams::apply_batch_stats`].
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    stem: ConvBnCache<T>,
    stem_out: Tensor<T>,
    blocks: Vec<BlockCache<T>>,
    pooled_input_shape: Vec<usize>,
    pooled: Tensor<T>,
    features: Tensor<T>,
}

pub struct ForwardOutput<T> {
    /// `[N, 128]`
    pub features: Tensor<T>,
    /// `[N]`
    pub predictions: Tensor<T>,
    pub cache: ForwardCache<T>,
}

impl<T: Scalar> NetworkParams<T> {
    /// He-uniform fan-in initialization for convolutions and linears, unit
    /// gamma and zero beta for batch norm, zero linear biases.
    pub fn init(config: &NetworkConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = Rng::new(seed);
        let ch = config.stage_channels;
        let stem = ConvBn::init(config.input_shape[0], ch[0], STEM_KERNEL, STEM_STRIDE, STEM_PADDING, &mut rng);
        let mut blocks = Vec::new();
        let mut cin = ch[0];
        for stage in 0..4 {
            for b in 0..config.blocks_per_stage[stage] {
                let stride = if b == 0 { config.stage_stride(stage) } else { [1, 1, 1] };
                let cout = ch[stage];
                let conv1 = ConvBn::init(cin, cout, [3, 3, 3], stride, [1, 1, 1], &mut rng);
                let conv2 = ConvBn::init(cout, cout, [3, 3, 3], [1, 1, 1], [1, 1, 1], &mut rng);
                let shortcut = (stride != [1, 1, 1] || cin != cout)
                    .then(|| ConvBn::init(cin, cout, [1, 1, 1], stride, [0, 0, 0], &mut rng));
                blocks.push(BasicBlock { conv1, conv2, shortcut });
                cin = cout;
            }
        }
        let head = Linear {
            weight: he_uniform(&[config.feature_dim, cin], cin, &mut rng),
            bias: Tensor::zeros(&[config.feature_dim]),
        };
        let regressor = Linear {
            weight: he_uniform(&[1, config.feature_dim], config.feature_dim, &mut rng),
            bias: Tensor::zeros(&[1]),
        };
        let params = Self { config: config.clone(), stem, blocks, head, regressor };
        params.check_geometry()?;
        Ok(params)
    }

    /// Verifies the configured input survives every downsampling step.
    fn check_geometry(&self) -> Result<()> {
        let [c, t, h, w] = self.config.input_shape;
        let mut shape = vec![1, c, t, h, w];
        let step = |cb: &ConvBn<T>, shape: &[usize]| -> Result<Vec<usize>> {
            Ok(ConvGeometry::new(shape, cb.conv.weight.shape(), cb.conv.stride, cb.conv.padding)?.output_shape().to_vec())
        };
        shape = step(&self.stem, &shape)?;
        for b in &self.blocks {
            let mid = step(&b.conv1, &shape)?;
            shape = step(&b.conv2, &mid)?;
        }
        Ok(())
    }

    /// Trainable tensors in a fixed order.
    pub fn trainable(&self) -> Vec<&Tensor<T>> {
        let mut out = Vec::new();
        self.stem.visit(&mut out);
        for b in &self.blocks {
            b.conv1.visit(&mut out);
            b.conv2.visit(&mut out);
            if let Some(s) = &b.shortcut {
                s.visit(&mut out);
            }
        }
        out.extend([&self.head.weight, &self.head.bias, &self.regressor.weight, &self.regressor.bias]);
        out
    }

    /// Same order as [`NetworkParams::trainable`].
    pub fn trainable_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut out = Vec::new();
        self.stem.visit_mut(&mut out);
        for b in &mut self.blocks {
            b.conv1.visit_mut(&mut out);
            b.conv2.visit_mut(&mut out);
            if let Some(s) = &mut b.shortcut {
                s.visit_mut(&mut out);
            }
        }
        let (head, reg) = (&mut self.head, &mut self.regressor);
        out.extend([&mut head.weight, &mut head.bias, &mut reg.weight, &mut reg.bias]);
        out
    }

    /// Every stored tensor including batch-norm running statistics.
    pub fn all_tensors(&self) -> Vec<&Tensor<T>> {
        let mut out = Vec::new();
        self.stem.visit_all(&mut out);
        for b in &self.blocks {
            b.conv1.visit_all(&mut out);
            b.conv2.visit_all(&mut out);
            if let Some(s) = &b.shortcut {
                s.visit_all(&mut out);
            }
        }
        out.extend([&self.head.weight, &self.head.bias, &self.regressor.weight, &self.regressor.bias]);
        out
    }

    pub fn all_tensors_mut(&mut self) -> Vec<&mut Tensor<T>> {
        let mut out = Vec::new();
        self.stem.visit_all_mut(&mut out);
        for b in &mut self.blocks {
            b.conv1.visit_all_mut(&mut out);
            b.conv2.visit_all_mut(&mut out);
            if let Some(s) = &mut b.shortcut {
                s.visit_all_mut(&mut out);
            }
        }
        let (head, reg) = (&mut self.head, &mut self.regressor);
        out.extend([&mut head.weight, &mut head.bias, &mut reg.weight, &mut reg.bias]);
        out
    }

    /// Zero tensors with the structure of `self`; used as a gradient holder.
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for t in z.all_tensors_mut() {
            t.data_mut().fill(T::zero());
        }
        z
    }

    pub fn parameter_count(&self) -> usize {
        self.trainable().iter().map(|t| t.len()).sum()
    }

    /// Folds the batch statistics of a train-mode pass into the running
    /// statistics of every batch-norm layer.
    pub fn apply_batch_stats(&mut self, cache: &ForwardCache<T>) {
        self.stem.bn.update_running(&cache.stem.bn);
        for (b, c) in self.blocks.iter_mut().zip(&cache.blocks) {
            b.conv1.bn.update_running(&c.conv1.bn);
            b.conv2.bn.update_running(&c.conv2.bn);
            if let (Some(s), Some(sc)) = (&mut b.shortcut, &c.shortcut) {
                s.bn.update_running(&sc.bn);
            }
        }
    }

    pub fn cast<U: Scalar>(&self) -> NetworkParams<U> {
        let cast_cb = |cb: &ConvBn<T>| ConvBn {
            conv: Conv3d { weight: cb.conv.weight.cast(), stride: cb.conv.stride, padding: cb.conv.padding },
            bn: BatchNorm3d {
                gamma: cb.bn.gamma.cast(),
                beta: cb.bn.beta.cast(),
                running_mean: cb.bn.running_mean.cast(),
                running_var: cb.bn.running_var.cast(),
            },
        };
        NetworkParams {
            config: self.config.clone(),
            stem: cast_cb(&self.stem),
            blocks: self
                .blocks
                .iter()
                .map(|b| BasicBlock {
                    conv1: cast_cb(&b.conv1),
                    conv2: cast_cb(&b.conv2),
                    shortcut: b.shortcut.as_ref().map(cast_cb),
                })
                .collect(),
            head: Linear { weight: self.head.weight.cast(), bias: self.head.bias.cast() },
            regressor: Linear { weight: self.regressor.weight.cast(), bias: self.regressor.bias.cast() },
        }
    }
}

/// Runs the network on a clip batch `[N, 3, T, H, W]`. Pure: batch-norm
/// running statistics are only changed by [`NetworkParams::apply_batch_stats`].
pub fn network_forward<T: Scalar>(params: &NetworkParams<T>, input: &Tensor<T>, mode: Mode) -> Result<ForwardOutput<T>> {
    let [c, t, h, w] = params.config.input_shape;
    let n = input.shape().first().copied().unwrap_or(0);
    if n == 0 || input.shape() != [n, c, t, h, w] {
        return Err(NnError::ShapeMismatch(format!(
            "network expects [N, {c}, {t}, {h}, {w}], got {:?}",
            input.shape()
        )));
    }
    let (x, stem) = params.stem.forward(input, mode)?;
    let stem_out = relu_forward(&x);
    stem_out.ensure_finite("stem")?;

    let mut blocks = Vec::with_capacity(params.blocks.len());
    let mut x = stem_out.clone();
    for (i, block) in params.blocks.iter().enumerate() {
        let (a, conv1) = block.conv1.forward(&x, mode)?;
        let mid = relu_forward(&a);
        let (mut b, conv2) = block.conv2.forward(&mid, mode)?;
        let shortcut = match &block.shortcut {
            Some(s) => {
                let (sc, cache) = s.forward(&x, mode)?;
                b.add_assign(&sc)?;
                Some(cache)
            }
            None => {
                b.add_assign(&x)?;
                None
            }
        };
        let out = relu_forward(&b);
        out.ensure_finite(&format!("residual block {i}"))?;
        blocks.push(BlockCache { conv1, mid, conv2, shortcut, out: out.clone() });
        x = out;
    }

    let pooled = global_avg_pool(&x)?;
    let features = params.head.forward(&pooled)?;
    let scores = params.regressor.forward(&features)?;
    scores.ensure_finite("regressor")?;
    let predictions = scores.reshape(&[n])?;
    Ok(ForwardOutput {
        features: features.clone(),
        predictions,
        cache: ForwardCache { stem, stem_out, blocks, pooled_input_shape: x.shape().to_vec(), pooled, features },
    })
}

/// Gradients of a scalar loss with respect to every trainable tensor, given
/// `dL/dpredictions`. The result mirrors `params`; its running-stat slots
/// are zero.
pub fn network_backward<T: Scalar>(
    params: &NetworkParams<T>,
    cache: &ForwardCache<T>,
    grad_predictions: &Tensor<T>,
) -> Result<NetworkParams<T>> {
    let n = cache.features.shape()[0];
    let mut grads = params.zeros_like();
    let g_scores = grad_predictions.clone().reshape(&[n, 1])?;

    let (g_features, dw, db) = params.regressor.backward(&g_scores, &cache.features)?;
    grads.regressor.weight = dw;
    grads.regressor.bias = db;
    let (g_pooled, dw, db) = params.head.backward(&g_features, &cache.pooled)?;
    grads.head.weight = dw;
    grads.head.bias = db;
    let mut g = global_avg_pool_backward(&g_pooled, &cache.pooled_input_shape)?;

    for i in (0..params.blocks.len()).rev() {
        let (block, bc) = (&params.blocks[i], &cache.blocks[i]);
        let gsum = relu_backward(&g, &bc.out)?;
        let gb = &mut grads.blocks[i];
        let g_mid = block.conv2.backward(&gsum, &bc.conv2, &mut gb.conv2, true)?.unwrap();
        let g_a = relu_backward(&g_mid, &bc.mid)?;
        let mut g_in = block.conv1.backward(&g_a, &bc.conv1, &mut gb.conv1, true)?.unwrap();
        match (&block.shortcut, &bc.shortcut, &mut gb.shortcut) {
            (Some(s), Some(sc), Some(gs)) => {
                let g_short = s.backward(&gsum, sc, gs, true)?.unwrap();
                g_in.add_assign(&g_short)?;
            }
            _ => g_in.add_assign(&gsum)?,
        }
        g = g_in;
    }

    let g_stem = relu_backward(&g, &cache.stem_out)?;
    params.stem.backward(&g_stem, &cache.stem, &mut grads.stem, false)?;
    for t in grads.trainable() {
        t.ensure_finite("backward pass")?;
    }
    Ok(grads)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_config() -> NetworkConfig {
        NetworkConfig { stage_channels: [2, 2, 2, 2], input_shape: [3, 4, 8, 8], ..NetworkConfig::desk() }
    }

    fn clip_batch(n: usize, cfg: &NetworkConfig, seed: u64) -> Tensor<f64> {
        let mut r = Rng::new(seed);
        let [c, t, h, w] = cfg.input_shape;
        Tensor::from_fn(&[n, c, t, h, w], |_| r.next_f64())
    }

    #[test]
    fn output_shapes() {
        let cfg = tiny_config();
        let p = NetworkParams::<f64>::init(&cfg, 1).unwrap();
        for n in [1, 3] {
            let out = network_forward(&p, &clip_batch(n, &cfg, 2), Mode::Eval).unwrap();
            assert_eq!(out.features.shape(), &[n, 128]);
            assert_eq!(out.predictions.shape(), &[n]);
        }
        assert!(network_forward(&p, &Tensor::zeros(&[1, 3, 4, 8, 9]), Mode::Eval).is_err());
    }

    #[test]
    fn eval_is_deterministic_and_batch_invariant() {
        let cfg = tiny_config();
        let p = NetworkParams::<f64>::init(&cfg, 3).unwrap();
        let x = clip_batch(2, &cfg, 4);
        let a = network_forward(&p, &x, Mode::Eval).unwrap();
        let b = network_forward(&p, &x, Mode::Eval).unwrap();
        assert_eq!(a.predictions, b.predictions);
        let doubled = Tensor::stack(&[x.index_outer(0), x.index_outer(1), x.index_outer(0), x.index_outer(1)]).unwrap();
        let d = network_forward(&p, &doubled, Mode::Eval).unwrap();
        for i in 0..4 {
            assert!((d.predictions.data()[i] - a.predictions.data()[i % 2]).abs() < 1e-6);
        }
    }

    #[test]
    fn trainable_orders_agree() {
        let cfg = NetworkConfig { blocks_per_stage: [2, 1, 1, 2], ..tiny_config() };
        let mut p = NetworkParams::<f64>::init(&cfg, 5).unwrap();
        let shapes: Vec<Vec<usize>> = p.trainable().iter().map(|t| t.shape().to_vec()).collect();
        let shapes_mut: Vec<Vec<usize>> = p.trainable_mut().iter().map(|t| t.shape().to_vec()).collect();
        assert_eq!(shapes, shapes_mut);
        assert_eq!(p.all_tensors().len(), p.all_tensors_mut().len());
    }

    #[test]
    fn config_validation() {
        let mut c = NetworkConfig::desk();
        c.feature_dim = 64;
        assert!(c.validate().is_err());
        assert!(NetworkConfig::full().validate().is_ok());
    }

    #[test]
    fn batch_stats_update_changes_only_running_values() {
        let cfg = tiny_config();
        let mut p = NetworkParams::<f64>::init(&cfg, 6).unwrap();
        let before = p.clone();
        let out = network_forward(&p, &clip_batch(2, &cfg, 7), Mode::Train).unwrap();
        p.apply_batch_stats(&out.cache);
        assert_eq!(p.trainable(), before.trainable());
        assert_ne!(p.all_tensors(), before.all_tensors());
    }
}
