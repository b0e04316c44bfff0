//! Deterministic z-buffered point-splat rasterizer and video capture.

mod image;
mod pcv;

use rayon::prelude::*;
use thiserror::Error;

use crate::camera::{self, CameraError, CameraPose, CaptureConfig, OrbitId};
use crate::cloud::{self, CloudError, PointCloud, Vec3};

pub use image::{center_crop, prepare_frame, resize_bilinear};
pub use pcv::{decode_sequence, encode_sequence, load_frames, load_sequence, read_sequence_header, save_sequence, PcvHeader};

/// Depths at or below this are treated as behind the camera.
pub const NEAR_DEPTH: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("bad dimensions {width}x{height}")]
    BadDimensions { width: usize, height: usize },
    #[error("crop {crop_w}x{crop_h} larger than frame {width}x{height}")]
    CropTooLarge { crop_w: usize, crop_h: usize, width: usize, height: usize },
    #[error("not a PCV file (bad magic)")]
    BadMagic,
    #[error("PCV file truncated: expected {expected} bytes, found {found}")]
    TruncatedFile { expected: usize, found: usize },
    #[error("malformed PCV file: {0}")]
    Malformed(String),
    #[error(transparent)]
    Camera(#[from] CameraError),
    #[error(transparent)]
    Cloud(#[from] CloudError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, RenderError>;

/// Row-major 8-bit RGB image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    width: usize,
    height: usize,
    pixels: Vec<u8>,
}

impl Frame {
    pub fn filled(width: usize, height: usize, color: [u8; 3]) -> Self {
        let pixels = color.iter().copied().cycle().take(width * height * 3).collect();
        Self { width, height, pixels }
    }

    pub fn from_pixels(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 || pixels.len() != width * height * 3 {
            return Err(RenderError::BadDimensions { width, height });
        }
        Ok(Self { width, height, pixels })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, c: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.pixels[i..i + 3].copy_from_slice(&c);
    }
}

/// The frames rendered along one orbit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VideoSequence {
    pub orbit: OrbitId,
    width: usize,
    height: usize,
    frames: Vec<Frame>,
}

impl VideoSequence {
    pub fn new(orbit: OrbitId, frames: Vec<Frame>) -> Result<Self> {
        let first = frames.first().ok_or(RenderError::BadDimensions { width: 0, height: 0 })?;
        let (width, height) = (first.width, first.height);
        if frames.iter().any(|f| f.width != width || f.height != height) {
            return Err(RenderError::Malformed("frames differ in size".into()));
        }
        Ok(Self { orbit, width, height, frames })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    /// Applies a per-frame transform (e.g. resize/crop).
    pub fn map_frames(&self, f: impl Fn(&Frame) -> Result<Frame> + Sync + Send) -> Result<Self> {
        let frames = self.frames.par_iter().map(f).collect::<Result<Vec<_>>>()?;
        Self::new(self.orbit, frames)
    }
}

/// Screen-space projection of a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Projection {
    Visible { px: f64, py: f64, depth: f64 },
    Behind,
}

/// Pinhole projection; origin top-left, +x right, +y down.
pub fn project(point: Vec3, pose: &CameraPose, config: &CaptureConfig) -> Projection {
    let rel = point - pose.position;
    let depth = rel.dot(pose.forward);
    if depth <= NEAR_DEPTH {
        return Projection::Behind;
    }
    let f = config.focal_length();
    let px = config.image_width as f64 / 2.0 + f * rel.dot(pose.right) / depth;
    let py = config.image_height as f64 / 2.0 - f * rel.dot(pose.up) / depth;
    Projection::Visible { px, py, depth }
}

/// Renders one frame. Each visible point covers a `splat_size` square
/// centered on its rounded projection; the nearest depth wins and exact
/// depth ties go to the lower point index.
pub fn render_frame(cloud: &PointCloud, pose: &CameraPose, config: &CaptureConfig) -> Frame {
    let (w, h) = (config.image_width, config.image_height);
    let mut frame = Frame::filled(w, h, config.background);
    let mut zbuf = vec![f64::INFINITY; w * h];
    let half = (config.splat_size / 2) as i64;
    for (&p, &color) in cloud.points().iter().zip(cloud.colors()) {
        let Projection::Visible { px, py, depth } = project(p, pose, config) else {
            continue;
        };
        if !(px.is_finite() && py.is_finite()) {
            continue;
        }
        let (cx, cy) = (px.round() as i64, py.round() as i64);
        let x0 = (cx - half).max(0);
        let x1 = (cx + half).min(w as i64 - 1);
        let y0 = (cy - half).max(0);
        let y1 = (cy + half).min(h as i64 - 1);
        for y in y0..=y1 {
            for x in x0..=x1 {
                let i = y as usize * w + x as usize;
                // strict comparison: an earlier point keeps an exact tie
                if depth < zbuf[i] {
                    zbuf[i] = depth;
                    frame.pixels[i * 3..i * 3 + 3].copy_from_slice(&color);
                }
            }
        }
    }
    frame
}

/// Look-at center and orbit radius used to capture `cloud`. A cloud whose
/// points all coincide is treated as having unit bounding radius.
pub fn capture_geometry(cloud: &PointCloud, config: &CaptureConfig) -> Result<(Vec3, f64)> {
    if cloud.is_empty() {
        return Err(RenderError::EmptyCloud);
    }
    let center = cloud::mean_center(cloud)?;
    let r = cloud::bounding_radius(cloud, center)?;
    let r = if r > 0.0 { r } else { 1.0 };
    Ok((center, camera::capture_radius(r, config)?))
}

/// Renders one orbit's video sequence.
pub fn capture_orbit(cloud: &PointCloud, orbit: OrbitId, config: &CaptureConfig) -> Result<VideoSequence> {
    config.validate()?;
    let (center, radius) = capture_geometry(cloud, config)?;
    let poses = camera::orbit_poses(orbit, center, radius, config.frames_per_orbit)?;
    let frames = poses.par_iter().map(|pose| render_frame(cloud, pose, config)).collect();
    VideoSequence::new(orbit, frames)
}

/// Renders the A, B and C video sequences around the cloud's mean center.
pub fn capture_sequences(cloud: &PointCloud, config: &CaptureConfig) -> Result<[VideoSequence; 3]> {
    Ok([
        capture_orbit(cloud, OrbitId::A, config)?,
        capture_orbit(cloud, OrbitId::B, config)?,
        capture_orbit(cloud, OrbitId::C, config)?,
    ])
}
