//! 3D convolution (cross-correlation) via im2col and GEMM.

use super::tensor::{gemm, Scalar, Tensor};
use super::{NnError, Result};

/// Resolved sizes of one convolution call.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeometry {
    pub batch: usize,
    pub in_channels: usize,
    pub out_channels: usize,
    pub input: [usize; 3],
    pub kernel: [usize; 3],
    pub stride: [usize; 3],
    pub padding: [usize; 3],
    pub output: [usize; 3],
}

impl ConvGeometry {
    /// Output extent per axis is `floor((in + 2·pad − kernel) / stride) + 1`.
    pub fn new(input_shape: &[usize], weight_shape: &[usize], stride: [usize; 3], padding: [usize; 3]) -> Result<Self> {
        let (&[batch, cin, t, h, w], &[cout, wcin, kt, kh, kw]) = (input_shape, weight_shape) else {
            return Err(NnError::ShapeMismatch(format!(
                "conv3d expects 5-d input and weight, got {input_shape:?} and {weight_shape:?}"
            )));
        };
        if cin != wcin {
            return Err(NnError::ShapeMismatch(format!("input has {cin} channels, weight expects {wcin}")));
        }
        if stride.contains(&0) || [kt, kh, kw].contains(&0) {
            return Err(NnError::ShapeMismatch("zero stride or kernel extent".into()));
        }
        let input = [t, h, w];
        let kernel = [kt, kh, kw];
        let mut output = [0; 3];
        for d in 0..3 {
            let span = input[d] + 2 * padding[d];
            if span < kernel[d] {
                return Err(NnError::ShapeMismatch(format!(
                    "kernel {kernel:?} larger than padded input {input:?}"
                )));
            }
            output[d] = (span - kernel[d]) / stride[d] + 1;
        }
        Ok(Self { batch, in_channels: cin, out_channels: cout, input, kernel, stride, padding, output })
    }

    fn patch_len(&self) -> usize {
        self.in_channels * self.kernel.iter().product::<usize>()
    }

    fn out_positions(&self) -> usize {
        self.output.iter().product()
    }

    fn in_len(&self) -> usize {
        self.in_channels * self.input.iter().product::<usize>()
    }

    pub fn output_shape(&self) -> [usize; 5] {
        [self.batch, self.out_channels, self.output[0], self.output[1], self.output[2]]
    }
}

/// Output index range `lo..hi` along one axis whose source index
/// `o·stride + tap − pad` lands inside the input.
fn tap_range(out: usize, inp: usize, stride: usize, pad: usize, tap: usize) -> (usize, usize) {
    // source = o*stride + tap - pad must satisfy 0 <= source < inp
    let lo = if tap >= pad { 0 } else { (pad - tap).div_ceil(stride) };
    let hi = if inp + pad > tap { ((inp + pad - tap - 1) / stride + 1).min(out) } else { 0 };
    (lo, hi.max(lo))
}

fn im2col<T: Scalar>(g: &ConvGeometry, input: &[T], cols: &mut [T]) {
    let [it, ih, iw] = g.input;
    let [ot, oh, ow] = g.output;
    let [st, sh, sw] = g.stride;
    let [pt, ph, pw] = g.padding;
    let p = g.out_positions();
    cols.fill(T::zero());
    let mut row = 0;
    for c in 0..g.in_channels {
        let chan = &input[c * it * ih * iw..(c + 1) * it * ih * iw];
        for dt in 0..g.kernel[0] {
            let (t0, t1) = tap_range(ot, it, st, pt, dt);
            for dh in 0..g.kernel[1] {
                let (h0, h1) = tap_range(oh, ih, sh, ph, dh);
                for dw in 0..g.kernel[2] {
                    let (w0, w1) = tap_range(ow, iw, sw, pw, dw);
                    let dst = &mut cols[row * p..(row + 1) * p];
                    for o_t in t0..t1 {
                        let src_t = o_t * st + dt - pt;
                        for o_h in h0..h1 {
                            let src_h = o_h * sh + dh - ph;
                            let src_row = &chan[(src_t * ih + src_h) * iw..];
                            let dst_row = &mut dst[(o_t * oh + o_h) * ow..];
                            for o_w in w0..w1 {
                                dst_row[o_w] = src_row[o_w * sw + dw - pw];
                            }
                        }
                    }
                    row += 1;
                }
            }
        }
    }
}

fn col2im<T: Scalar>(g: &ConvGeometry, cols: &[T], grad_input: &mut [T]) {
    let [it, ih, iw] = g.input;
    let [ot, oh, ow] = g.output;
    let [st, sh, sw] = g.stride;
    let [pt, ph, pw] = g.padding;
    let p = g.out_positions();
    let mut row = 0;
    for c in 0..g.in_channels {
        let chan = &mut grad_input[c * it * ih * iw..(c + 1) * it * ih * iw];
        for dt in 0..g.kernel[0] {
            let (t0, t1) = tap_range(ot, it, st, pt, dt);
            for dh in 0..g.kernel[1] {
                let (h0, h1) = tap_range(oh, ih, sh, ph, dh);
                for dw in 0..g.kernel[2] {
                    let (w0, w1) = tap_range(ow, iw, sw, pw, dw);
                    let src = &cols[row * p..(row + 1) * p];
                    for o_t in t0..t1 {
                        let dst_t = o_t * st + dt - pt;
                        for o_h in h0..h1 {
                            let dst_h = o_h * sh + dh - ph;
                            let base = (dst_t * ih + dst_h) * iw;
                            let src_row = &src[(o_t * oh + o_h) * ow..];
                            for o_w in w0..w1 {
                                chan[base + o_w * sw + dw - pw] += src_row[o_w];
                            }
                        }
                    }
                    row += 1;
                }
            }
        }
    }
}

/// Cross-correlation of `input [N, Cin, T, H, W]` with
/// `weight [Cout, Cin, kt, kh, kw]` plus an optional per-channel bias.
pub fn conv3d_forward<T: Scalar>(
    input: &Tensor<T>,
    weight: &Tensor<T>,
    bias: Option<&Tensor<T>>,
    stride: [usize; 3],
    padding: [usize; 3],
) -> Result<Tensor<T>> {
    let g = ConvGeometry::new(input.shape(), weight.shape(), stride, padding)?;
    if let Some(b) = bias {
        b.expect_shape(&[g.out_channels])?;
    }
    let (k, p, cout) = (g.patch_len(), g.out_positions(), g.out_channels);
    let mut out = Tensor::zeros(&g.output_shape());
    let mut cols = vec![T::zero(); k * p];
    for n in 0..g.batch {
        let x = &input.data()[n * g.in_len()..(n + 1) * g.in_len()];
        im2col(&g, x, &mut cols);
        let y = &mut out.data_mut()[n * cout * p..(n + 1) * cout * p];
        gemm(cout, k, p, weight.data(), false, &cols, false, y, false);
        if let Some(b) = bias {
            for (co, chunk) in y.chunks_mut(p).enumerate() {
                let bv = b.data()[co];
                chunk.iter_mut().for_each(|v| *v += bv);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct Conv3dGrads<T> {
    pub input: Option<Tensor<T>>,
    pub weight: Tensor<T>,
    pub bias: Option<Tensor<T>>,
}

/// Exact gradients of [`conv3d_forward`] given the upstream gradient.
pub fn conv3d_backward<T: Scalar>(
    grad_out: &Tensor<T>,
    input: &Tensor<T>,
    weight: &Tensor<T>,
    stride: [usize; 3],
    padding: [usize; 3],
    with_bias: bool,
    need_input_grad: bool,
) -> Result<Conv3dGrads<T>> {
    let g = ConvGeometry::new(input.shape(), weight.shape(), stride, padding)?;
    grad_out.expect_shape(&g.output_shape())?;
    let (k, p, cout) = (g.patch_len(), g.out_positions(), g.out_channels);
    let mut gw = weight.zeros_like();
    let mut gb = with_bias.then(|| Tensor::zeros(&[cout]));
    let mut gi = need_input_grad.then(|| input.zeros_like());
    let mut cols = vec![T::zero(); k * p];
    let mut gcols = if need_input_grad { vec![T::zero(); k * p] } else { Vec::new() };
    for n in 0..g.batch {
        let x = &input.data()[n * g.in_len()..(n + 1) * g.in_len()];
        let gy = &grad_out.data()[n * cout * p..(n + 1) * cout * p];
        im2col(&g, x, &mut cols);
        // dW += dY · colsᵀ
        gemm(cout, p, k, gy, false, &cols, true, gw.data_mut(), true);
        if let Some(gb) = gb.as_mut() {
            for (co, chunk) in gy.chunks(p).enumerate() {
                gb.data_mut()[co] += chunk.iter().copied().sum::<T>();
            }
        }
        if let Some(gi) = gi.as_mut() {
            // dcols = Wᵀ · dY
            gemm(k, cout, p, weight.data(), true, gy, false, &mut gcols, false);
            col2im(&g, &gcols, &mut gi.data_mut()[n * g.in_len()..(n + 1) * g.in_len()]);
        }
    }
    Ok(Conv3dGrads { input: gi, weight: gw, bias: gb })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_kernel_is_identity() {
        let x = Tensor::<f64>::from_fn(&[1, 1, 2, 3, 4], |i| i as f64);
        let w = Tensor::full(&[1, 1, 1, 1, 1], 1.0);
        let b = Tensor::zeros(&[1]);
        let y = conv3d_forward(&x, &w, Some(&b), [1, 1, 1], [0, 0, 0]).unwrap();
        assert_eq!(y, x);
    }

    #[test]
    fn ones_kernel_counts() {
        let x = Tensor::<f64>::full(&[1, 1, 3, 3, 3], 1.0);
        let w = Tensor::full(&[1, 1, 3, 3, 3], 1.0);
        let y = conv3d_forward(&x, &w, None, [1, 1, 1], [0, 0, 0]).unwrap();
        assert_eq!(y.shape(), &[1, 1, 1, 1, 1]);
        assert_eq!(y.data(), &[27.0]);
        // with padding 1 the corner sees 8 of 27 taps
        let y = conv3d_forward(&x, &w, None, [1, 1, 1], [1, 1, 1]).unwrap();
        assert_eq!(y.data()[0], 8.0);
        assert_eq!(y.data()[13], 27.0);
    }

    #[test]
    fn floor_output_extent() {
        let x = Tensor::<f64>::zeros(&[1, 1, 30, 28, 28]);
        let w = Tensor::zeros(&[2, 1, 3, 3, 3]);
        let y = conv3d_forward(&x, &w, None, [2, 2, 2], [1, 1, 1]).unwrap();
        assert_eq!(y.shape(), &[1, 2, 15, 14, 14]);
    }

    #[test]
    fn shape_errors() {
        let x = Tensor::<f64>::zeros(&[1, 2, 3, 3, 3]);
        assert!(conv3d_forward(&x, &Tensor::zeros(&[1, 3, 1, 1, 1]), None, [1; 3], [0; 3]).is_err());
        assert!(conv3d_forward(&x, &Tensor::zeros(&[1, 2, 5, 1, 1]), None, [1; 3], [0; 3]).is_err());
        assert!(conv3d_forward(&x, &Tensor::zeros(&[1, 2, 1, 1, 1]), None, [0, 1, 1], [0; 3]).is_err());
        assert!(conv3d_forward(&Tensor::<f64>::zeros(&[2, 3, 3, 3]), &Tensor::zeros(&[1, 2, 1, 1, 1]), None, [1; 3], [0; 3]).is_err());
    }

    #[test]
    fn zero_upstream_gives_zero_grads() {
        let x = Tensor::<f64>::from_fn(&[2, 2, 3, 4, 4], |i| (i as f64 * 0.37).sin());
        let w = Tensor::from_fn(&[3, 2, 3, 3, 3], |i| (i as f64 * 0.11).cos());
        let gy = Tensor::zeros(&[2, 3, 2, 2, 2]);
        let g = conv3d_backward(&gy, &x, &w, [2, 2, 2], [1, 1, 1], true, true).unwrap();
        assert!(g.weight.data().iter().all(|&v| v == 0.0));
        assert!(g.bias.unwrap().data().iter().all(|&v| v == 0.0));
        assert!(g.input.unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_output_weight_grad_is_scaled_patch() {
        let x = Tensor::<f64>::from_fn(&[1, 2, 2, 3, 3], |i| i as f64 - 7.0);
        let w = Tensor::from_fn(&[1, 2, 2, 3, 3], |i| i as f64 * 0.1);
        let gy = Tensor::full(&[1, 1, 1, 1, 1], 2.5);
        let g = conv3d_backward(&gy, &x, &w, [1; 3], [0; 3], false, false).unwrap();
        for (gw, xv) in g.weight.data().iter().zip(x.data()) {
            assert_eq!(*gw, 2.5 * xv);
        }
        assert!(g.input.is_none() && g.bias.is_none());
    }
}
