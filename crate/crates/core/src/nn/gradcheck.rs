//! Finite-difference verification of the analytic network gradients.

use super::loss::mse_loss;
use super::network::{network_backward, network_forward, NetworkParams};
use super::tensor::Tensor;
use super::{Mode, NnError, Result};

/// Lower bound on the relative-error denominator, so gradient entries
/// that are zero up to rounding are judged by absolute error instead.
pub const GRADCHECK_DENOM_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GradCheckScope {
    /// Every trainable tensor.
    All,
    /// Only the two linear layers after pooling.
    HeadOnly,
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub checked: usize,
    /// (trainable tensor index, element index) of the worst entry.
    pub worst: (usize, usize),
}

fn loss_of(params: &NetworkParams<f64>, input: &Tensor<f64>, labels: &[f64]) -> Result<f64> {
    let out = network_forward(params, input, Mode::Train)?;
    Ok(mse_loss(&out.predictions, labels)?.0)
}

/// Compares backpropagated gradients of the train-mode MSE loss against
/// central differences `(L(θ+ε) − L(θ−ε)) / 2ε` for every parameter in
/// scope. Relative error is `|a − n| / max(|a|, |n|, GRADCHECK_DENOM_FLOOR)`.
pub fn gradient_check(
    params: &NetworkParams<f64>,
    input: &Tensor<f64>,
    labels: &[f64],
    eps: f64,
    scope: GradCheckScope,
) -> Result<GradCheckReport> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(NnError::BadEpsilon);
    }
    let out = network_forward(params, input, Mode::Train)?;
    let (_, dloss) = mse_loss(&out.predictions, labels)?;
    let grads = network_backward(params, &out.cache, &dloss)?;
    let analytic: Vec<Vec<f64>> = grads.trainable().iter().map(|t| t.data().to_vec()).collect();

    let total = analytic.len();
    let first = match scope {
        GradCheckScope::All => 0,
        GradCheckScope::HeadOnly => total - 4,
    };
    let mut probe = params.clone();
    let mut report = GradCheckReport { max_rel_error: 0.0, checked: 0, worst: (0, 0) };
    for ti in first..total {
        for ei in 0..analytic[ti].len() {
            let original = probe.trainable()[ti].data()[ei];
            probe.trainable_mut()[ti].data_mut()[ei] = original + eps;
            let plus = loss_of(&probe, input, labels)?;
            probe.trainable_mut()[ti].data_mut()[ei] = original - eps;
            let minus = loss_of(&probe, input, labels)?;
            probe.trainable_mut()[ti].data_mut()[ei] = original;
            let numeric = (plus - minus) / (2.0 * eps);
            let a = analytic[ti][ei];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(GRADCHECK_DENOM_FLOOR);
            if rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst = (ti, ei);
            }
            report.checked += 1;
        }
    }
    Ok(report)
}
