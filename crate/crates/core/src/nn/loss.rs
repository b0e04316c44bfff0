use super::tensor::{Scalar, Tensor};
use super::{NnError, Result};

/// Mean squared error over the batch and its gradient `2(p − l)/N`.
pub fn mse_loss<T: Scalar>(predictions: &Tensor<T>, labels: &[T]) -> Result<(f64, Tensor<T>)> {
    let n = predictions.len();
    if n != labels.len() {
        return Err(NnError::LengthMismatch(n, labels.len()));
    }
    if n == 0 {
        return Err(NnError::ShapeMismatch("empty batch".into()));
    }
    let mut grad = predictions.zeros_like();
    let mut total = 0.0;
    for ((g, &p), &l) in grad.data_mut().iter_mut().zip(predictions.data()).zip(labels) {
        let d = p.as_f64() - l.as_f64();
        total += d * d;
        *g = T::of_f64(2.0 * d / n as f64);
    }
    let loss = total / n as f64;
    if !loss.is_finite() {
        return Err(NnError::NonFinite("mse loss".into()));
    }
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions() {
        let p = Tensor::<f64>::from_vec(&[3], vec![1.0, 2.0, 3.0]).unwrap();
        let (l, g) = mse_loss(&p, &[1.0, 2.0, 3.0]).unwrap();
        assert_eq!(l, 0.0);
        assert!(g.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn worked_value() {
        let p = Tensor::<f64>::zeros(&[2]);
        let (l, g) = mse_loss(&p, &[1.0, 3.0]).unwrap();
        assert_eq!(l, 5.0);
        assert_eq!(g.data(), &[-1.0, -3.0]);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let labels = [0.3, -1.2, 2.5, 0.0];
        let base = vec![1.0, 0.5, -0.25, 2.0];
        let p = Tensor::<f64>::from_vec(&[4], base.clone()).unwrap();
        let (_, g) = mse_loss(&p, &labels).unwrap();
        let eps = 1e-5;
        for i in 0..4 {
            let mut plus = base.clone();
            plus[i] += eps;
            let mut minus = base.clone();
            minus[i] -= eps;
            let f = |v: Vec<f64>| mse_loss(&Tensor::from_vec(&[4], v).unwrap(), &labels).unwrap().0;
            let num = (f(plus) - f(minus)) / (2.0 * eps);
            assert!((num - g.data()[i]).abs() / g.data()[i].abs().max(1e-12) < 1e-8);
        }
    }

    #[test]
    fn length_mismatch() {
        let p = Tensor::<f64>::zeros(&[2]);
        assert!(matches!(mse_loss(&p, &[1.0]), Err(NnError::LengthMismatch(2, 1))));
    }
}
