//! Seeded synthetic distortions standing in for real degradations.

use serde::{Deserialize, Serialize};

use super::{CloudError, PointCloud, Result, Vec3};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistortionKind {
    /// `level` is the keep ratio in (0, 1].
    Downsample,
    /// `level` is the Gaussian sigma in model units (>= 0).
    GeometryNoise,
    /// `level` is the retained bit depth, an integer in [1, 8].
    ColorQuantize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistortionSpec {
    pub kind: DistortionKind,
    pub level: f64,
    pub seed: u64,
}

impl DistortionSpec {
    pub fn new(kind: DistortionKind, level: f64, seed: u64) -> Result<Self> {
        let spec = Self { kind, level, seed };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let l = self.level;
        let ok = l.is_finite()
            && match self.kind {
                DistortionKind::Downsample => l > 0.0 && l <= 1.0,
                DistortionKind::GeometryNoise => l >= 0.0,
                DistortionKind::ColorQuantize => (1.0..=8.0).contains(&l) && l.fract() == 0.0,
            };
        if ok {
            Ok(())
        } else {
            Err(CloudError::InvalidLevel { kind: self.kind, level: l })
        }
    }
}

/// Applies one distortion. The result depends only on the cloud and spec.
///
/// * Downsample keeps `ceil(level * N)` points drawn without replacement by a
///   partial Fisher-Yates shuffle, then restores their original order.
/// * GeometryNoise adds N(0, level^2) to x, y, z of each point in turn.
/// * ColorQuantize keeps the top `level` bits of every channel and rescales
///   the quantized value back onto [0, 255] with rounding.
pub fn apply_distortion(cloud: &PointCloud, spec: &DistortionSpec) -> Result<PointCloud> {
    spec.validate()?;
    let mut rng = Rng::new(spec.seed);
    match spec.kind {
        DistortionKind::Downsample => {
            let n = cloud.len();
            let keep = keep_count(spec.level, n);
            let mut idx: Vec<usize> = (0..n).collect();
            for i in 0..keep {
                let j = i + rng.below((n - i) as u64) as usize;
                idx.swap(i, j);
            }
            let mut chosen = idx[..keep].to_vec();
            chosen.sort_unstable();
            PointCloud::new(
                chosen.iter().map(|&i| cloud.points()[i]).collect(),
                chosen.iter().map(|&i| cloud.colors()[i]).collect(),
            )
        }
        DistortionKind::GeometryNoise => {
            let sigma = spec.level;
            let points = cloud
                .points()
                .iter()
                .map(|p| {
                    let dx = sigma * rng.gaussian();
                    let dy = sigma * rng.gaussian();
                    let dz = sigma * rng.gaussian();
                    *p + Vec3::new(dx, dy, dz)
                })
                .collect();
            PointCloud::new(points, cloud.colors().to_vec())
        }
        DistortionKind::ColorQuantize => {
            let bits = spec.level as u32;
            let shift = 8 - bits;
            let max_q = ((1u32 << bits) - 1) as f64;
            let q = |c: u8| -> u8 {
                let v = (c >> shift) as f64;
                (v * 255.0 / max_q).round() as u8
            };
            let colors = cloud.colors().iter().map(|c| [q(c[0]), q(c[1]), q(c[2])]).collect();
            PointCloud::new(cloud.points().to_vec(), colors)
        }
    }
}

/// `ceil(ratio * n)`, ignoring floating error below 1e-9 so that e.g.
/// 0.1 * 30 keeps 3 points rather than 4.
fn keep_count(ratio: f64, n: usize) -> usize {
    let exact = ratio * n as f64;
    let rounded = exact.round();
    let k = if (exact - rounded).abs() < 1e-9 { rounded } else { exact.ceil() };
    (k as usize).clamp(n.min(1), n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::bounding_radius;
    use crate::cloud::mean_center;

    fn cloud(n: usize) -> PointCloud {
        let mut r = Rng::new(99);
        let pts = (0..n).map(|_| Vec3::new(r.gaussian(), r.gaussian(), r.gaussian())).collect();
        let cols = (0..n).map(|i| [(i * 7 % 256) as u8, (i * 13 % 256) as u8, (i * 31 % 256) as u8]).collect();
        PointCloud::new(pts, cols).unwrap()
    }

    #[test]
    fn downsample_identity_level() {
        let c = cloud(50);
        let s = DistortionSpec::new(DistortionKind::Downsample, 1.0, 5).unwrap();
        assert_eq!(apply_distortion(&c, &s).unwrap(), c);
    }

    #[test]
    fn downsample_count_and_order() {
        let c = cloud(30);
        for (ratio, expected) in [(0.1, 3), (0.5, 15), (0.51, 16), (0.01, 1)] {
            let s = DistortionSpec::new(DistortionKind::Downsample, ratio, 1).unwrap();
            let d = apply_distortion(&c, &s).unwrap();
            assert_eq!(d.len(), expected, "ratio {ratio}");
            // every kept point appears in the source, in source order
            let mut pos = 0;
            for p in d.points() {
                pos += c.points()[pos..].iter().position(|q| q == p).unwrap() + 1;
            }
        }
    }

    #[test]
    fn downsample_never_grows_radius() {
        let c = cloud(200);
        let center = mean_center(&c).unwrap();
        let full = bounding_radius(&c, center).unwrap();
        for seed in 0..20 {
            let s = DistortionSpec::new(DistortionKind::Downsample, 0.3, seed).unwrap();
            let d = apply_distortion(&c, &s).unwrap();
            assert!(bounding_radius(&d, center).unwrap() <= full);
        }
    }

    #[test]
    fn quantize_eight_bits_is_identity() {
        let c = cloud(64);
        let s = DistortionSpec::new(DistortionKind::ColorQuantize, 8.0, 0).unwrap();
        assert_eq!(apply_distortion(&c, &s).unwrap(), c);
    }

    #[test]
    fn quantize_one_bit_is_binary() {
        let c = cloud(64);
        let s = DistortionSpec::new(DistortionKind::ColorQuantize, 1.0, 0).unwrap();
        let d = apply_distortion(&c, &s).unwrap();
        for (a, b) in c.colors().iter().zip(d.colors()) {
            for ch in 0..3 {
                assert_eq!(b[ch], if a[ch] >= 128 { 255 } else { 0 });
            }
        }
    }

    #[test]
    fn invalid_levels_rejected() {
        for (kind, level) in [
            (DistortionKind::Downsample, 0.0),
            (DistortionKind::Downsample, 1.5),
            (DistortionKind::GeometryNoise, -0.1),
            (DistortionKind::GeometryNoise, f64::NAN),
            (DistortionKind::ColorQuantize, 0.0),
            (DistortionKind::ColorQuantize, 9.0),
            (DistortionKind::ColorQuantize, 3.5),
        ] {
            assert!(matches!(DistortionSpec::new(kind, level, 0), Err(CloudError::InvalidLevel { .. })));
        }
    }

    #[test]
    fn seeded_determinism() {
        let c = cloud(100);
        for kind in [DistortionKind::Downsample, DistortionKind::GeometryNoise] {
            let s = DistortionSpec::new(kind, 0.5, 17).unwrap();
            assert_eq!(apply_distortion(&c, &s).unwrap(), apply_distortion(&c, &s).unwrap());
        }
    }
}
