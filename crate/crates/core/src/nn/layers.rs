//! Batch normalization, ReLU, global average pooling and linear layers.

use super::tensor::{gemm, Scalar, Tensor};
use super::{Mode, NnError, Result};

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

/// Per-channel normalization over every axis except the channel axis (1).
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm3d<T> {
    pub gamma: Tensor<T>,
    pub beta: Tensor<T>,
    pub running_mean: Tensor<T>,
    pub running_var: Tensor<T>,
}

/// Everything the backward pass and the running-stat update need.
#[derive(Debug, Clone)]
pub struct BnCache<T> {
    pub xhat: Tensor<T>,
    pub inv_std: Vec<f64>,
    pub mode: Mode,
    /// Batch mean and unbiased batch variance (train mode only).
    pub batch_mean: Vec<f64>,
    pub batch_var: Vec<f64>,
}

fn channel_layout(shape: &[usize]) -> Result<(usize, usize, usize)> {
    if shape.len() < 2 {
        return Err(NnError::ShapeMismatch(format!("batch norm needs [N, C, ...], got {shape:?}")));
    }
    Ok((shape[0], shape[1], shape[2..].iter().product()))
}

impl<T: Scalar> BatchNorm3d<T> {
    pub fn new(channels: usize) -> Self {
        Self {
            gamma: Tensor::full(&[channels], T::one()),
            beta: Tensor::zeros(&[channels]),
            running_mean: Tensor::zeros(&[channels]),
            running_var: Tensor::full(&[channels], T::one()),
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    pub fn forward(&self, x: &Tensor<T>, mode: Mode) -> Result<(Tensor<T>, BnCache<T>)> {
        let (n, c, s) = channel_layout(x.shape())?;
        if c != self.channels() {
            return Err(NnError::ShapeMismatch(format!("batch norm has {} channels, input {c}", self.channels())));
        }
        let m = n * s;
        let (mut mean, mut var) = (vec![0.0; c], vec![0.0; c]);
        let (mut batch_mean, mut batch_var) = (Vec::new(), Vec::new());
        match mode {
            Mode::Train => {
                if m < 2 {
                    return Err(NnError::DegenerateBatch);
                }
                for ch in 0..c {
                    let vals = || (0..n).flat_map(move |b| x.data()[(b * c + ch) * s..(b * c + ch + 1) * s].iter());
                    let mu = vals().map(|v| v.as_f64()).sum::<f64>() / m as f64;
                    let ss = vals().map(|v| (v.as_f64() - mu).powi(2)).sum::<f64>();
                    mean[ch] = mu;
                    var[ch] = ss / m as f64;
                    batch_mean.push(mu);
                    batch_var.push(ss / (m - 1) as f64);
                }
            }
            Mode::Eval => {
                for ch in 0..c {
                    mean[ch] = self.running_mean.data()[ch].as_f64();
                    var[ch] = self.running_var.data()[ch].as_f64();
                }
            }
        }
        let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + BN_EPS).sqrt()).collect();
        let mut xhat = x.zeros_like();
        let mut y = x.zeros_like();
        for b in 0..n {
            for ch in 0..c {
                let range = (b * c + ch) * s..(b * c + ch + 1) * s;
                let (g, be) = (self.gamma.data()[ch].as_f64(), self.beta.data()[ch].as_f64());
                for i in range {
                    let h = (x.data()[i].as_f64() - mean[ch]) * inv_std[ch];
                    xhat.data_mut()[i] = T::of_f64(h);
                    y.data_mut()[i] = T::of_f64(g * h + be);
                }
            }
        }
        Ok((y, BnCache { xhat, inv_std, mode, batch_mean, batch_var }))
    }

    /// Returns (dx, dgamma, dbeta).
    pub fn backward(&self, grad_out: &Tensor<T>, cache: &BnCache<T>) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
        grad_out.expect_shape(cache.xhat.shape())?;
        let (n, c, s) = channel_layout(grad_out.shape())?;
        let m = (n * s) as f64;
        let mut dgamma = vec![0.0; c];
        let mut dbeta = vec![0.0; c];
        for b in 0..n {
            for ch in 0..c {
                for i in (b * c + ch) * s..(b * c + ch + 1) * s {
                    let dy = grad_out.data()[i].as_f64();
                    dbeta[ch] += dy;
                    dgamma[ch] += dy * cache.xhat.data()[i].as_f64();
                }
            }
        }
        let mut dx = grad_out.zeros_like();
        for b in 0..n {
            for ch in 0..c {
                let scale = self.gamma.data()[ch].as_f64() * cache.inv_std[ch];
                for i in (b * c + ch) * s..(b * c + ch + 1) * s {
                    let dy = grad_out.data()[i].as_f64();
                    let v = match cache.mode {
                        Mode::Train => {
                            scale / m * (m * dy - dbeta[ch] - cache.xhat.data()[i].as_f64() * dgamma[ch])
                        }
                        Mode::Eval => scale * dy,
                    };
                    dx.data_mut()[i] = T::of_f64(v);
                }
            }
        }
        let to_t = |v: Vec<f64>| Tensor::from_vec(&[c], v.into_iter().map(T::of_f64).collect());
        Ok((dx, to_t(dgamma)?, to_t(dbeta)?))
    }

    /// Exponential moving update of the running statistics from a
    /// train-mode forward pass (unbiased variance, momentum 0.1).
    pub fn update_running(&mut self, cache: &BnCache<T>) {
        if cache.mode != Mode::Train {
            return;
        }
        for ch in 0..self.channels() {
            let rm = &mut self.running_mean.data_mut()[ch];
            *rm = T::of_f64((1.0 - BN_MOMENTUM) * rm.as_f64() + BN_MOMENTUM * cache.batch_mean[ch]);
            let rv = &mut self.running_var.data_mut()[ch];
            *rv = T::of_f64((1.0 - BN_MOMENTUM) * rv.as_f64() + BN_MOMENTUM * cache.batch_var[ch]);
        }
    }
}

pub fn relu_forward<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    let mut y = x.clone();
    y.data_mut().iter_mut().for_each(|v| *v = v.max(T::zero()));
    y
}

/// Gradient of ReLU given its output (positive output ⇔ positive input).
pub fn relu_backward<T: Scalar>(grad_out: &Tensor<T>, output: &Tensor<T>) -> Result<Tensor<T>> {
    grad_out.expect_shape(output.shape())?;
    let mut dx = grad_out.clone();
    for (d, &o) in dx.data_mut().iter_mut().zip(output.data()) {
        if o <= T::zero() {
            *d = T::zero();
        }
    }
    Ok(dx)
}

/// `[N, C, ...] -> [N, C]` mean over all trailing axes.
pub fn global_avg_pool<T: Scalar>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let (n, c, s) = channel_layout(x.shape())?;
    if s == 0 {
        return Err(NnError::ShapeMismatch("pooling over an empty extent".into()));
    }
    let data = x.data().chunks(s).map(|ch| T::of_f64(ch.iter().map(|v| v.as_f64()).sum::<f64>() / s as f64)).collect();
    Tensor::from_vec(&[n, c], data)
}

pub fn global_avg_pool_backward<T: Scalar>(grad_out: &Tensor<T>, input_shape: &[usize]) -> Result<Tensor<T>> {
    let (n, c, s) = channel_layout(input_shape)?;
    grad_out.expect_shape(&[n, c])?;
    let inv = T::of_f64(1.0 / s as f64);
    let mut dx = Tensor::zeros(input_shape);
    for (chunk, &g) in dx.data_mut().chunks_mut(s).zip(grad_out.data()) {
        chunk.iter_mut().for_each(|v| *v = g * inv);
    }
    Ok(dx)
}

/// `y = x Wᵀ + b` with `W [out, in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Linear<T> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Scalar> Linear<T> {
    pub fn in_features(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn out_features(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let (fin, fout) = (self.in_features(), self.out_features());
        let &[n, xin] = x.shape() else {
            return Err(NnError::ShapeMismatch(format!("linear expects [N, {fin}], got {:?}", x.shape())));
        };
        if xin != fin {
            return Err(NnError::ShapeMismatch(format!("linear expects {fin} features, got {xin}")));
        }
        let mut y = Tensor::zeros(&[n, fout]);
        for row in y.data_mut().chunks_mut(fout) {
            row.copy_from_slice(self.bias.data());
        }
        gemm(n, fin, fout, x.data(), false, self.weight.data(), true, y.data_mut(), true);
        Ok(y)
    }

    /// Returns (dx, dW, db).
    pub fn backward(&self, grad_out: &Tensor<T>, x: &Tensor<T>) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
        let (fin, fout) = (self.in_features(), self.out_features());
        let n = x.shape()[0];
        grad_out.expect_shape(&[n, fout])?;
        let mut dw = self.weight.zeros_like();
        gemm(fout, n, fin, grad_out.data(), true, x.data(), false, dw.data_mut(), false);
        let mut db = self.bias.zeros_like();
        for row in grad_out.data().chunks(fout) {
            for (d, &g) in db.data_mut().iter_mut().zip(row) {
                *d += g;
            }
        }
        let mut dx = x.zeros_like();
        gemm(n, fout, fin, grad_out.data(), false, self.weight.data(), false, dx.data_mut(), false);
        Ok((dx, dw, db))
    }
}
