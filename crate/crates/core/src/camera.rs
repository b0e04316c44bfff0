//! The three circular capture orbits and singularity-free camera poses.
//!
//! All orbits start at angle 0 and advance counter-clockwise when viewed
//! from the tip of the orbit-plane normal. Orbit A lies in the XY plane,
//! orbit B in the YZ plane and orbit C in the plane x + z = 0.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cloud::Vec3;

#[derive(Debug, Error, PartialEq)]
pub enum CameraError {
    #[error("orbit radius must be positive and finite, got {0}")]
    BadRadius(f64),
    #[error("an orbit needs at least 3 frames, got {0}")]
    TooFewFrames(usize),
    #[error("camera position coincides with the look-at center")]
    DegeneratePosition,
    #[error("invalid capture config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum OrbitId {
    A,
    B,
    C,
}

impl OrbitId {
    pub const ALL: [OrbitId; 3] = [OrbitId::A, OrbitId::B, OrbitId::C];

    pub fn index(self) -> u8 {
        match self {
            OrbitId::A => 0,
            OrbitId::B => 1,
            OrbitId::C => 2,
        }
    }

    pub fn from_index(i: u8) -> Option<Self> {
        Self::ALL.get(i as usize).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            OrbitId::A => "A",
            OrbitId::B => "B",
            OrbitId::C => "C",
        }
    }

    /// Orthonormal in-plane basis (u, v); position(θ) = R (cos θ u + sin θ v).
    pub fn basis(self) -> (Vec3, Vec3) {
        match self {
            OrbitId::A => (Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)),
            OrbitId::B => (Vec3::new(0.0, 1.0, 0.0), Vec3::new(0.0, 0.0, 1.0)),
            OrbitId::C => (
                Vec3::new(FRAC_1_SQRT_2, 0.0, -FRAC_1_SQRT_2),
                Vec3::new(0.0, 1.0, 0.0),
            ),
        }
    }

    /// Unit normal of the orbit plane, equal to u × v. Used as the up hint.
    pub fn normal(self) -> Vec3 {
        match self {
            OrbitId::A => Vec3::new(0.0, 0.0, 1.0),
            OrbitId::B => Vec3::new(1.0, 0.0, 0.0),
            OrbitId::C => Vec3::new(FRAC_1_SQRT_2, 0.0, FRAC_1_SQRT_2),
        }
    }
}

impl std::fmt::Display for OrbitId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Rendering and capture geometry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CaptureConfig {
    /// Camera distance as a multiple of the cloud's bounding radius.
    pub radius_scale: f64,
    pub frames_per_orbit: usize,
    pub image_width: usize,
    pub image_height: usize,
    pub crop_width: usize,
    pub crop_height: usize,
    pub vertical_fov_degrees: f64,
    /// Side of the square splat in pixels; odd.
    pub splat_size: usize,
    pub background: [u8; 3],
}

impl Default for CaptureConfig {
    fn default() -> Self {
        Self {
            radius_scale: 2.5,
            frames_per_orbit: 210,
            image_width: 520,
            image_height: 520,
            crop_width: 448,
            crop_height: 448,
            vertical_fov_degrees: 50.0,
            splat_size: 3,
            background: [128, 128, 128],
        }
    }
}

impl CaptureConfig {
    /// Small-image variant used for desk-scale experiments.
    pub fn desk() -> Self {
        Self {
            image_width: 64,
            image_height: 64,
            crop_width: 56,
            crop_height: 56,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), CameraError> {
        let bad = |m: &str| Err(CameraError::InvalidConfig(m.to_string()));
        if self.frames_per_orbit < 3 {
            return Err(CameraError::TooFewFrames(self.frames_per_orbit));
        }
        if self.image_width == 0 || self.image_height == 0 {
            return bad("image dimensions must be positive");
        }
        if self.crop_width == 0
            || self.crop_height == 0
            || self.crop_width > self.image_width
            || self.crop_height > self.image_height
        {
            return bad("crop must be non-empty and fit inside the image");
        }
        if self.splat_size == 0 || self.splat_size % 2 == 0 {
            return bad("splat_size must be odd");
        }
        if !(self.vertical_fov_degrees > 0.0 && self.vertical_fov_degrees < 180.0) {
            return bad("vertical_fov_degrees must be in (0, 180)");
        }
        if !(self.radius_scale.is_finite() && self.radius_scale * self.min_half_fov().sin() > 1.0) {
            return bad("radius_scale too small: bounding sphere would not fit in frame");
        }
        Ok(())
    }

    pub fn focal_length(&self) -> f64 {
        (self.image_height as f64 / 2.0) / (self.vertical_fov_degrees.to_radians() / 2.0).tan()
    }

    /// Smaller of the vertical and horizontal half-angles of view.
    fn min_half_fov(&self) -> f64 {
        let half_v = self.vertical_fov_degrees.to_radians() / 2.0;
        let half_h = ((self.image_width as f64 / 2.0) / self.focal_length()).atan();
        half_v.min(half_h)
    }
}

/// Camera position plus an orthonormal view frame with
/// `right × up = −forward`, the usual right-handed look-at convention.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraPose {
    pub position: Vec3,
    pub forward: Vec3,
    pub right: Vec3,
    pub up: Vec3,
}

/// `n` positions evenly spaced on the orbit circle, relative to the center.
pub fn orbit_positions(orbit: OrbitId, radius: f64, n: usize) -> Result<Vec<Vec3>, CameraError> {
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(CameraError::BadRadius(radius));
    }
    if n < 3 {
        return Err(CameraError::TooFewFrames(n));
    }
    Ok((0..n).map(|k| orbit_position(orbit, radius, k, n)).collect())
}

/// Position `k` of an `n`-step schedule; `k` may exceed `n` and wraps.
pub fn orbit_position(orbit: OrbitId, radius: f64, k: usize, n: usize) -> Vec3 {
    let theta = 2.0 * PI * k as f64 / n as f64;
    let (u, v) = orbit.basis();
    let (s, c) = theta.sin_cos();
    (u * c + v * s) * radius
}

/// Look-at pose aimed at `center`, with the orbit normal as up hint.
///
/// Because `position − center` lies in the orbit plane the forward axis is
/// always perpendicular to the hint, so no orientation is degenerate.
pub fn pose_at(orbit: OrbitId, position: Vec3, center: Vec3) -> Result<CameraPose, CameraError> {
    let forward = (center - position).normalized().ok_or(CameraError::DegeneratePosition)?;
    let right = forward
        .cross(orbit.normal())
        .normalized()
        .ok_or(CameraError::DegeneratePosition)?;
    let up = right.cross(forward);
    Ok(CameraPose { position, forward, right, up })
}

/// Orbit radius for a cloud of the given bounding radius.
pub fn capture_radius(cloud_radius: f64, config: &CaptureConfig) -> Result<f64, CameraError> {
    if !(cloud_radius > 0.0 && cloud_radius.is_finite()) {
        return Err(CameraError::BadRadius(cloud_radius));
    }
    Ok(config.radius_scale * cloud_radius)
}

/// All poses of one orbit around `center`.
pub fn orbit_poses(
    orbit: OrbitId,
    center: Vec3,
    radius: f64,
    n: usize,
) -> Result<Vec<CameraPose>, CameraError> {
    orbit_positions(orbit, radius, n)?
        .into_iter()
        .map(|p| pose_at(orbit, center + p, center))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: Vec3, b: Vec3, tol: f64) -> bool {
        (a - b).norm() <= tol
    }

    #[test]
    fn orbit_a_quarter_points() {
        let p = orbit_positions(OrbitId::A, 2.0, 4).unwrap();
        assert_eq!(p[0], Vec3::new(2.0, 0.0, 0.0));
        assert!(close(p[1], Vec3::new(0.0, 2.0, 0.0), 1e-15));
    }

    #[test]
    fn orbit_c_constraints() {
        for (k, p) in orbit_positions(OrbitId::C, 1.0, 37).unwrap().into_iter().enumerate() {
            assert!((p.x + p.z).abs() < 1e-12, "k={k}");
            assert!((p.dot(p) - 1.0).abs() < 1e-12, "k={k}");
        }
    }

    #[test]
    fn default_schedule_step() {
        let cfg = CaptureConfig::default();
        let p = orbit_positions(OrbitId::A, 1.0, cfg.frames_per_orbit).unwrap();
        assert_eq!(p.len(), 210);
        let step = p[1].y.atan2(p[1].x).to_degrees();
        assert!((step - 360.0 / 210.0).abs() < 1e-12);
        assert!((step - 1.7143).abs() < 1e-4);
    }

    #[test]
    fn bad_inputs() {
        assert_eq!(orbit_positions(OrbitId::A, 0.0, 10), Err(CameraError::BadRadius(0.0)));
        assert_eq!(orbit_positions(OrbitId::A, 1.0, 2), Err(CameraError::TooFewFrames(2)));
        assert_eq!(
            pose_at(OrbitId::A, Vec3::ZERO, Vec3::ZERO),
            Err(CameraError::DegeneratePosition)
        );
        assert!(capture_radius(0.0, &CaptureConfig::default()).is_err());
    }

    #[test]
    fn documented_poses() {
        let a = pose_at(OrbitId::A, Vec3::new(3.0, 0.0, 0.0), Vec3::ZERO).unwrap();
        assert_eq!(a.forward, Vec3::new(-1.0, 0.0, 0.0));
        assert_eq!(a.up, Vec3::new(0.0, 0.0, 1.0));
        let b = pose_at(OrbitId::B, Vec3::new(0.0, 3.0, 0.0), Vec3::ZERO).unwrap();
        assert_eq!(b.forward, Vec3::new(0.0, -1.0, 0.0));
        assert_eq!(b.up, Vec3::new(1.0, 0.0, 0.0));
    }

    #[test]
    fn every_pose_is_orthonormal_and_right_handed() {
        let center = Vec3::new(0.3, -2.0, 5.0);
        for orbit in OrbitId::ALL {
            for pose in orbit_poses(orbit, center, 4.0, 210).unwrap() {
                for v in [pose.forward, pose.right, pose.up] {
                    assert!((v.norm() - 1.0).abs() < 1e-12);
                }
                assert!(pose.forward.dot(pose.up).abs() < 1e-12);
                assert!(pose.forward.dot(pose.right).abs() < 1e-12);
                assert!(pose.right.dot(pose.up).abs() < 1e-12);
                // det[right, up, -forward] = (right × up) · (-forward)
                assert!((pose.right.cross(pose.up).dot(-pose.forward) - 1.0).abs() < 1e-12);
                let expect = (center - pose.position).normalized().unwrap();
                assert!(close(pose.forward, expect, 1e-15));
            }
        }
    }

    #[test]
    fn capture_radius_scales() {
        let cfg = CaptureConfig::default();
        assert_eq!(capture_radius(1.0, &cfg).unwrap(), 2.5);
        assert_eq!(capture_radius(0.5, &cfg).unwrap(), 1.25);
        // bounding sphere subtends less than the field of view
        assert!(2.0 * (1.0f64 / cfg.radius_scale).asin().to_degrees() < cfg.vertical_fov_degrees);
    }

    #[test]
    fn config_validation() {
        assert!(CaptureConfig::default().validate().is_ok());
        assert!(CaptureConfig::desk().validate().is_ok());
        let mut c = CaptureConfig::default();
        c.radius_scale = 2.0;
        assert!(c.validate().is_err());
        let mut c = CaptureConfig::default();
        c.crop_width = 600;
        assert!(c.validate().is_err());
        let mut c = CaptureConfig::default();
        c.splat_size = 2;
        assert!(c.validate().is_err());
        let mut c = CaptureConfig::default();
        c.frames_per_orbit = 2;
        assert_eq!(c.validate(), Err(CameraError::TooFewFrames(2)));
    }
}
