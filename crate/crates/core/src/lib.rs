//! Geometric core of a sparse-RGBD free-viewpoint rendering system.
//!
//! The crate builds multi-layer point cloud (MPC) depth volumes from a small
//! rig of RGBD cameras, aggregates per-candidate features with an occlusion
//! test, estimates opacities from cross-view variance, and composites
//! depth-sorted candidates over a pre-captured background. A synthetic RGBD
//! simulator with a parametric depth-bias model provides analytic ground
//! truth for every stage.

pub mod aggregate;
pub mod config;
pub mod geometry;
pub mod image;
pub mod io;
pub mod metrics;
pub mod pipeline;
pub mod render;
pub mod simulator;
pub mod volume;

pub use geometry::{CameraModel, DepthMap, Intrinsics, PointCloud, Pose, INVALID_DEPTH};
pub use image::FeatureImage;
