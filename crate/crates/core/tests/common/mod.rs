//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use orbitpcqa_core::cloud::{PointCloud, Vec3};
use orbitpcqa_core::nn::Tensor;
use orbitpcqa_core::rng::Rng;

/// Seeded cloud with points in [-1, 1]^3 shifted by `offset` and random colors.
pub fn random_cloud(seed: u64, n: usize, offset: Vec3) -> PointCloud {
    let mut r = Rng::new(seed);
    let mut u = || 2.0 * r.next_f64() - 1.0;
    let points: Vec<Vec3> = (0..n).map(|_| Vec3::new(u(), u(), u()) + offset).collect();
    let mut r = Rng::new(seed ^ 0xc0105);
    let colors = (0..n).map(|_| [r.below(256) as u8, r.below(256) as u8, r.below(256) as u8]).collect();
    PointCloud::new(points, colors).unwrap()
}

/// Rodrigues rotation of `p` about the unit `axis` through `pivot`.
pub fn rotate_about(p: Vec3, pivot: Vec3, axis: Vec3, angle: f64) -> Vec3 {
    let d = p - pivot;
    let (s, c) = angle.sin_cos();
    let rotated = d * c + axis.cross(d) * s + axis * (axis.dot(d) * (1.0 - c));
    pivot + rotated
}

/// Direct seven-loop 3D convolution over `[N, C, T, H, W]` input and
/// `[O, C, kt, kh, kw]` weights with zero padding.
pub fn naive_conv3d(
    x: &Tensor<f64>,
    w: &Tensor<f64>,
    bias: Option<&[f64]>,
    stride: [usize; 3],
    pad: [usize; 3],
) -> Tensor<f64> {
    let [n, c, t, h, wd]: [usize; 5] = x.shape().try_into().unwrap();
    let [o, _, kt, kh, kw]: [usize; 5] = w.shape().try_into().unwrap();
    let out_dim = |len: usize, k: usize, s: usize, p: usize| (len + 2 * p - k) / s + 1;
    let (ot, oh, ow) = (out_dim(t, kt, stride[0], pad[0]), out_dim(h, kh, stride[1], pad[1]), out_dim(wd, kw, stride[2], pad[2]));
    let xv = |b: usize, ch: usize, i: isize, j: isize, k: isize| -> f64 {
        if i < 0 || j < 0 || k < 0 || i >= t as isize || j >= h as isize || k >= wd as isize {
            return 0.0;
        }
        x.data()[(((b * c + ch) * t + i as usize) * h + j as usize) * wd + k as usize]
    };
    let mut out = vec![0.0; n * o * ot * oh * ow];
    for b in 0..n {
        for oc in 0..o {
            for a in 0..ot {
                for y in 0..oh {
                    for z in 0..ow {
                        let mut acc = bias.map_or(0.0, |bs| bs[oc]);
                        for ch in 0..c {
                            for dt in 0..kt {
                                for dy in 0..kh {
                                    for dz in 0..kw {
                                        let i = (a * stride[0] + dt) as isize - pad[0] as isize;
                                        let j = (y * stride[1] + dy) as isize - pad[1] as isize;
                                        let k = (z * stride[2] + dz) as isize - pad[2] as isize;
                                        let wi = (((oc * c + ch) * kt + dt) * kh + dy) * kw + dz;
                                        acc += w.data()[wi] * xv(b, ch, i, j, k);
                                    }
                                }
                            }
                        }
                        out[(((b * o + oc) * ot + a) * oh + y) * ow + z] = acc;
                    }
                }
            }
        }
    }
    Tensor::from_vec(&[n, o, ot, oh, ow], out).unwrap()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// `|a − n| / max(|a|, |n|, floor)`.
pub fn rel_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Central-difference gradient of `f` with respect to every element of `x`.
pub fn numeric_grad(x: &[f64], eps: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut probe = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = probe[i];
            probe[i] = orig + eps;
            let plus = f(&probe);
            probe[i] = orig - eps;
            let minus = f(&probe);
            probe[i] = orig;
            (plus - minus) / (2.0 * eps)
        })
        .collect()
}

/// 1-based average ranks by pairwise counting.
pub fn oracle_ranks(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|&a| {
            let less = v.iter().filter(|&&b| b < a).count() as f64;
            let equal = v.iter().filter(|&&b| b == a).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect()
}

/// Pearson correlation as covariance over the product of standard deviations.
pub fn oracle_pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let cov = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / n;
    let sx = (x.iter().map(|a| (a - mx).powi(2)).sum::<f64>() / n).sqrt();
    let sy = (y.iter().map(|b| (b - my).powi(2)).sum::<f64>() / n).sqrt();
    cov / (sx * sy)
}

pub fn oracle_srcc(x: &[f64], y: &[f64]) -> f64 {
    oracle_pearson(&oracle_ranks(x), &oracle_ranks(y))
}

/// Kendall tau-b with tie terms from tie-group sizes:
/// `(C − D) / sqrt((n0 − Σ t(t−1)/2)(n0 − Σ u(u−1)/2))`.
pub fn oracle_krcc(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let (mut c, mut d) = (0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            if i < j {
                let s = (x[i] - x[j]) * (y[i] - y[j]);
                if s > 0.0 {
                    c += 1.0;
                } else if s < 0.0 {
                    d += 1.0;
                }
            }
        }
    }
    let tie_term = |v: &[f64]| {
        let mut sorted = v.to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut total = 0.0;
        let mut run = 1.0;
        for k in 1..=sorted.len() {
            if k < sorted.len() && sorted[k] == sorted[k - 1] {
                run += 1.0;
            } else {
                total += run * (run - 1.0) / 2.0;
                run = 1.0;
            }
        }
        total
    };
    let n0 = (n * (n - 1)) as f64 / 2.0;
    (c - d) / ((n0 - tie_term(x)) * (n0 - tie_term(y))).sqrt()
}

pub fn oracle_rmse(x: &[f64], y: &[f64]) -> f64 {
    (x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / x.len() as f64).sqrt()
}
