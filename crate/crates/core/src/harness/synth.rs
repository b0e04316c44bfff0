//! Procedural dataset with labels that fall strictly with geometry noise.

use std::path::Path;

use super::{io_err, write_manifest, ManifestEntry, Result};
use crate::cloud::{apply_distortion, DistortionKind, DistortionSpec};
use crate::cloud::{write_ply_file, PlyFormat};
use crate::cloud::{bounding_radius, mean_center, PointCloud, Vec3};
use crate::rng::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub contents: usize,
    /// Noise standard deviations as fractions of each reference cloud's
    /// bounding radius.
    pub sigmas: Vec<f64>,
    pub points: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self { contents: 5, sigmas: vec![0.0, 0.02, 0.05, 0.09, 0.14, 0.2], points: 4000, seed: 0 }
    }
}

/// Pseudo-MOS, linear and strictly decreasing in relative sigma
/// (90 at zero noise, 10 at sigma 0.2).
pub fn pseudo_mos(relative_sigma: f64) -> f64 {
    90.0 - 400.0 * relative_sigma
}

const SHAPES: usize = 5;
const STRIPE_COLORS: [[u8; 3]; 2] = [[235, 200, 40], [40, 70, 210]];

/// Reference cloud `index`: one of five textured surfaces (sphere, torus,
/// cube shell, capped cylinder, saddle) with the same two-color stripes,
/// whose frequency grows with `index / 5`.
pub fn synth_shape(index: usize, points: usize, seed: u64) -> PointCloud {
    let mut rng = Rng::new(seed);
    let tau = std::f64::consts::TAU;
    let freq = 3.0 + (index / SHAPES) as f64;
    let [c0, c1] = STRIPE_COLORS;
    let stripe = |t: f64| if (t * freq).rem_euclid(1.0) < 0.5 { c0 } else { c1 };
    let mut pts = Vec::with_capacity(points);
    let mut cols = Vec::with_capacity(points);
    for _ in 0..points {
        let (u, v) = (rng.next_f64(), rng.next_f64());
        let (p, c) = match index % SHAPES {
            0 => {
                let z = 2.0 * u - 1.0;
                let r = (1.0 - z * z).sqrt();
                (Vec3::new(r * (tau * v).cos(), r * (tau * v).sin(), z), stripe(z / 2.0))
            }
            1 => {
                let (a, b) = (tau * u, tau * v);
                let ring = 1.0 + 0.4 * b.cos();
                (Vec3::new(ring * a.cos(), ring * a.sin(), 0.4 * b.sin()), stripe(u + v))
            }
            2 => {
                let face = rng.below(6) as usize;
                let (s, t) = (2.0 * u - 1.0, 2.0 * v - 1.0);
                let sign = if face % 2 == 0 { 1.0 } else { -1.0 };
                let p = match face / 2 {
                    0 => Vec3::new(sign, s, t),
                    1 => Vec3::new(s, sign, t),
                    _ => Vec3::new(s, t, sign),
                };
                (p, stripe((s + t) / 4.0 + face as f64 / 6.0))
            }
            3 => {
                let a = tau * u;
                if rng.below(4) == 0 {
                    let r = v.sqrt();
                    let z = if rng.below(2) == 0 { 1.0 } else { -1.0 };
                    (Vec3::new(r * a.cos(), r * a.sin(), z), stripe(r / 2.0))
                } else {
                    let z = 2.0 * v - 1.0;
                    (Vec3::new(a.cos(), a.sin(), z), stripe(u + z / 4.0))
                }
            }
            _ => {
                let (x, y) = (2.0 * u - 1.0, 2.0 * v - 1.0);
                (Vec3::new(x, y, 0.6 * (x * x - y * y)), stripe((x * x + y * y).sqrt() / 2.0))
            }
        };
        pts.push(p);
        cols.push(c);
    }
    PointCloud::new(pts, cols).expect("finite generated points")
}

/// Writes `contents × sigmas` noisy clouds plus `manifest.csv` into
/// `out_dir` and returns the entries. Entry ids are `c<content>_s<level>`.
pub fn synth_dataset(spec: &SynthSpec, out_dir: impl AsRef<Path>) -> Result<Vec<ManifestEntry>> {
    let out_dir = out_dir.as_ref();
    let clouds_dir = out_dir.join("clouds");
    std::fs::create_dir_all(&clouds_dir).map_err(io_err(&clouds_dir))?;
    let mut rng = Rng::new(spec.seed);
    let mut entries = Vec::with_capacity(spec.contents * spec.sigmas.len());
    for c in 0..spec.contents {
        let reference = synth_shape(c, spec.points, rng.fork_seed());
        let radius = bounding_radius(&reference, mean_center(&reference)?)?;
        for (l, &sigma) in spec.sigmas.iter().enumerate() {
            let noise = DistortionSpec::new(DistortionKind::GeometryNoise, sigma * radius, rng.fork_seed())?;
            let cloud = apply_distortion(&reference, &noise)?;
            let id = format!("c{c}_s{l}");
            let path = clouds_dir.join(format!("{id}.ply"));
            write_ply_file(&cloud, PlyFormat::BinaryLittleEndian, &path)?;
            entries.push(ManifestEntry {
                id,
                cloud_path: path,
                mos: pseudo_mos(sigma),
                content_group: format!("content{c}"),
                distortion: format!("noise_{sigma}"),
            });
        }
    }
    write_manifest(&entries, out_dir.join("manifest.csv"))?;
    Ok(entries)
}
