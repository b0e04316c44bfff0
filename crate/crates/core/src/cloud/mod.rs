//! Colored point clouds and the geometric quantities the capture stage needs.

mod distort;
mod ply;

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use distort::{apply_distortion, DistortionKind, DistortionSpec};
pub use ply::{parse_ply, read_ply, write_ply, write_ply_file, PlyFormat};

/// Color used for vertices whose file carries no color properties.
pub const DEFAULT_COLOR: [u8; 3] = [128, 128, 128];

#[derive(Debug, Error)]
pub enum CloudError {
    #[error("malformed PLY header: {0}")]
    MalformedHeader(String),
    #[error("unsupported PLY property: {0}")]
    UnsupportedProperty(String),
    #[error("unsupported PLY element: {0}")]
    UnsupportedElement(String),
    #[error("vertex count mismatch: header declares {declared}, found {found}")]
    CountMismatch { declared: usize, found: usize },
    #[error("malformed PLY body at vertex {vertex}: {reason}")]
    MalformedBody { vertex: usize, reason: String },
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("non-finite coordinate at point {0}")]
    NonFinite(usize),
    #[error("{points} points but {colors} colors")]
    LengthMismatch { points: usize, colors: usize },
    #[error("invalid distortion level {level} for {kind:?}")]
    InvalidLevel { kind: DistortionKind, level: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CloudError>;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Unit vector in the same direction; `None` for the zero vector.
    pub fn normalized(self) -> Option<Vec3> {
        let n = self.norm();
        (n > 0.0 && n.is_finite()).then(|| self * (1.0 / n))
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }
}

/// A set of points with 8-bit RGB colors. Coordinates are kept in double
/// precision; the point and color lists always have equal length.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    points: Vec<Vec3>,
    colors: Vec<[u8; 3]>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>, colors: Vec<[u8; 3]>) -> Result<Self> {
        if points.len() != colors.len() {
            return Err(CloudError::LengthMismatch {
                points: points.len(),
                colors: colors.len(),
            });
        }
        if let Some(i) = points.iter().position(|p| !p.is_finite()) {
            return Err(CloudError::NonFinite(i));
        }
        Ok(Self { points, colors })
    }

    /// Cloud with every point colored [`DEFAULT_COLOR`].
    pub fn from_points(points: Vec<Vec3>) -> Result<Self> {
        let colors = vec![DEFAULT_COLOR; points.len()];
        Self::new(points, colors)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec3] {
        &self.points
    }

    pub fn colors(&self) -> &[[u8; 3]] {
        &self.colors
    }

    pub fn into_parts(self) -> (Vec<Vec3>, Vec<[u8; 3]>) {
        (self.points, self.colors)
    }

    /// Applies `f` to every point, keeping colors.
    pub fn map_points(&self, f: impl Fn(Vec3) -> Vec3) -> Result<Self> {
        Self::new(self.points.iter().map(|&p| f(p)).collect(), self.colors.clone())
    }
}

/// Arithmetic mean of the point coordinates.
pub fn mean_center(cloud: &PointCloud) -> Result<Vec3> {
    if cloud.is_empty() {
        return Err(CloudError::EmptyCloud);
    }
    let n = cloud.len() as f64;
    let sum = cloud.points().iter().fold(Vec3::ZERO, |acc, &p| acc + p);
    Ok(Vec3::new(sum.x / n, sum.y / n, sum.z / n))
}

/// Largest Euclidean distance from `center` to any point.
pub fn bounding_radius(cloud: &PointCloud, center: Vec3) -> Result<f64> {
    if cloud.is_empty() {
        return Err(CloudError::EmptyCloud);
    }
    Ok(cloud
        .points()
        .iter()
        .map(|&p| (p - center).norm())
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;
    use proptest::prelude::*;

    fn random_cloud(seed: u64, n: usize) -> PointCloud {
        let mut r = Rng::new(seed);
        let pts = (0..n)
            .map(|_| Vec3::new(r.next_f64() * 2.0 - 1.0, r.next_f64() * 4.0, r.next_f64() - 3.0))
            .collect();
        PointCloud::from_points(pts).unwrap()
    }

    #[test]
    fn mean_of_symmetric_pair_is_origin() {
        let c = PointCloud::from_points(vec![Vec3::new(1.0, 0.0, 0.0), Vec3::new(-1.0, 0.0, 0.0)])
            .unwrap();
        assert_eq!(mean_center(&c).unwrap(), Vec3::ZERO);
    }

    #[test]
    fn mean_of_single_point_is_that_point() {
        let c = PointCloud::from_points(vec![Vec3::new(3.0, 4.0, 5.0)]).unwrap();
        assert_eq!(mean_center(&c).unwrap(), Vec3::new(3.0, 4.0, 5.0));
    }

    #[test]
    fn mean_matches_separate_accumulation() {
        let c = random_cloud(11, 100);
        let (mut sx, mut sy, mut sz) = (0.0, 0.0, 0.0);
        for p in c.points() {
            sx += p.x;
        }
        for p in c.points() {
            sy += p.y;
        }
        for p in c.points() {
            sz += p.z;
        }
        let m = mean_center(&c).unwrap();
        assert!((m.x - sx / 100.0).abs() < 1e-12);
        assert!((m.y - sy / 100.0).abs() < 1e-12);
        assert!((m.z - sz / 100.0).abs() < 1e-12);
    }

    #[test]
    fn empty_cloud_errors() {
        let c = PointCloud::default();
        assert!(matches!(mean_center(&c), Err(CloudError::EmptyCloud)));
        assert!(matches!(bounding_radius(&c, Vec3::ZERO), Err(CloudError::EmptyCloud)));
    }

    #[test]
    fn cube_corner_radius() {
        let mut pts = Vec::new();
        for &x in &[-1.0, 1.0] {
            for &y in &[-1.0, 1.0] {
                for &z in &[-1.0, 1.0] {
                    pts.push(Vec3::new(x, y, z));
                }
            }
        }
        let c = PointCloud::from_points(pts).unwrap();
        let center = mean_center(&c).unwrap();
        assert!((bounding_radius(&c, center).unwrap() - 3f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn single_point_radius_zero() {
        let c = PointCloud::from_points(vec![Vec3::new(1.0, 2.0, 3.0)]).unwrap();
        assert_eq!(bounding_radius(&c, Vec3::new(1.0, 2.0, 3.0)).unwrap(), 0.0);
    }

    #[test]
    fn radius_matches_max_loop() {
        let c = random_cloud(5, 500);
        let center = mean_center(&c).unwrap();
        let mut best = 0.0f64;
        for p in c.points() {
            let d = ((p.x - center.x).powi(2) + (p.y - center.y).powi(2) + (p.z - center.z).powi(2)).sqrt();
            if d > best {
                best = d;
            }
        }
        assert_eq!(bounding_radius(&c, center).unwrap(), best);
    }

    #[test]
    fn rejects_bad_construction() {
        assert!(matches!(
            PointCloud::new(vec![Vec3::ZERO], vec![]),
            Err(CloudError::LengthMismatch { .. })
        ));
        assert!(matches!(
            PointCloud::from_points(vec![Vec3::new(f64::NAN, 0.0, 0.0)]),
            Err(CloudError::NonFinite(0))
        ));
    }

    proptest! {
        #[test]
        fn mean_is_translation_equivariant(seed in any::<u64>(), tx in -100.0..100.0f64, ty in -100.0..100.0f64, tz in -100.0..100.0f64) {
            let c = random_cloud(seed, 37);
            let t = Vec3::new(tx, ty, tz);
            let moved = c.map_points(|p| p + t).unwrap();
            let a = mean_center(&moved).unwrap();
            let b = mean_center(&c).unwrap() + t;
            prop_assert!((a - b).norm() < 1e-12);
        }
    }
}
