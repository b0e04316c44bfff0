use serde::{Deserialize, Serialize};

use super::tensor::{Scalar, Tensor};
use super::{NnError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { lr: 1e-4, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// First/second moment estimates for a fixed list of parameter tensors.
#[derive(Debug, Clone)]
pub struct AdamState<T> {
    pub config: AdamConfig,
    pub step: u64,
    m: Vec<Tensor<T>>,
    v: Vec<Tensor<T>>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new<'a>(config: AdamConfig, params: impl IntoIterator<Item = &'a Tensor<T>>) -> Self {
        let m: Vec<_> = params.into_iter().map(Tensor::zeros_like).collect();
        let v = m.clone();
        Self { config, step: 0, m, v }
    }

    /// One bias-corrected Adam update:
    /// `m ← β1 m + (1−β1) g`, `v ← β2 v + (1−β2) g²`,
    /// `p ← p − lr · m̂ / (√v̂ + ε)` with `m̂ = m/(1−β1ᵗ)`, `v̂ = v/(1−β2ᵗ)`.
    pub fn step(&mut self, params: &mut [&mut Tensor<T>], grads: &[&Tensor<T>]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(NnError::ShapeMismatch(format!(
                "adam tracks {} tensors, got {} params and {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        for ((p, g), m) in params.iter().zip(grads).zip(&self.m) {
            p.expect_shape(m.shape())?;
            g.expect_shape(m.shape())?;
        }
        self.step += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let bc1 = 1.0 - beta1.powi(self.step as i32);
        let bc2 = 1.0 - beta2.powi(self.step as i32);
        for (i, p) in params.iter_mut().enumerate() {
            let g = grads[i].data();
            let m = self.m[i].data_mut();
            let v = self.v[i].data_mut();
            for (j, pv) in p.data_mut().iter_mut().enumerate() {
                let gj = g[j].as_f64();
                let mj = beta1 * m[j].as_f64() + (1.0 - beta1) * gj;
                let vj = beta2 * v[j].as_f64() + (1.0 - beta2) * gj * gj;
                m[j] = T::of_f64(mj);
                v[j] = T::of_f64(vj);
                let update = lr * (mj / bc1) / ((vj / bc2).sqrt() + eps);
                *pv = T::of_f64(pv.as_f64() - update);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = Tensor::<f64>::from_vec(&[3], vec![1.0, -2.0, 0.5]).unwrap();
        let before = p.clone();
        let mut st = AdamState::new(AdamConfig::default(), [&p]);
        let g = Tensor::zeros(&[3]);
        for _ in 0..5 {
            st.step(&mut [&mut p], &[&g]).unwrap();
        }
        assert_eq!(p, before);
    }

    #[test]
    fn first_step_moves_by_lr_against_gradient() {
        for g0 in [3.0, -0.02] {
            let mut p = Tensor::<f64>::from_vec(&[1], vec![0.7]).unwrap();
            let mut st = AdamState::new(AdamConfig::default(), [&p]);
            let g = Tensor::from_vec(&[1], vec![g0]).unwrap();
            st.step(&mut [&mut p], &[&g]).unwrap();
            let delta = p.data()[0] - 0.7;
            assert!((delta.abs() - 1e-4).abs() < 1e-9);
            assert_eq!(delta.signum(), -f64::signum(g0));
        }
    }

    #[test]
    fn mismatched_lists_rejected() {
        let mut p = Tensor::<f64>::zeros(&[2]);
        let mut st = AdamState::new(AdamConfig::default(), [&p]);
        assert!(st.step(&mut [&mut p], &[]).is_err());
        assert!(st.step(&mut [&mut p], &[&Tensor::zeros(&[3])]).is_err());
    }
}
