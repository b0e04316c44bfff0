//! No-reference point cloud quality assessment from orbital video captures.
//!
//! The pipeline renders a colored point cloud along three circular camera
//! orbits, samples fixed-stride clips from each video sequence, regresses a
//! quality score with a small 3D-convolutional residual network and scores
//! predictions against subjective labels with SRCC, PLCC, KRCC and RMSE.
//!
//! Modules map onto the stages:
//!
//! * [`cloud`] - point cloud representation, PLY I/O and synthetic distortions
//! * [`camera`] - orbit generation and camera poses
//! * [`render`] - point-splat rasterizer, frame resize/crop and the PCV container
//! * [`sampling`] - clip sampling and clip tensor assembly
//! * [`nn`] - tensor engine, 3D residual network, Adam
//! * [`metrics`] - correlation criteria and significance testing
//! * [`harness`] - manifests, splits, caching, training and evaluation

pub mod camera;
pub mod cloud;
pub mod harness;
pub mod metrics;
pub mod nn;
pub mod render;
pub mod rng;
pub mod sampling;

pub use camera::{CameraPose, CaptureConfig, OrbitId};
pub use cloud::{PointCloud, Vec3};
pub use render::{Frame, VideoSequence};
