//! Pinhole camera modeling, projection/unprojection, depth-map lifting and
//! point-cloud rasterization.
//!
//! Conventions used throughout the crate:
//! * camera frame: x right, y down, z forward (depth is camera-frame z, not
//!   ray length);
//! * pixel `(x, y)` covers the continuous square `[x, x+1) x [y, y+1)` and its
//!   center is `(x + 0.5, y + 0.5)`;
//! * invalid depth is a reserved non-finite sentinel ([`INVALID_DEPTH`]);
//!   anything non-finite or <= 0 is treated as invalid on input.

use nalgebra::{Matrix3, Point3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Sentinel stored in depth maps for pixels that carry no measurement.
pub const INVALID_DEPTH: f32 = f32::INFINITY;

/// A depth value is usable iff it is finite and strictly positive.
#[inline]
pub fn depth_is_valid(d: f32) -> bool {
    d.is_finite() && d > 0.0
}

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("invalid intrinsics: {0}")]
    BadIntrinsics(String),
    #[error("rotation is not orthonormal (max deviation {deviation:.3e})")]
    NotOrthonormal { deviation: f64 },
    #[error("rotation has determinant {det:.6}, expected +1")]
    NotRightHanded { det: f64 },
    #[error("depth map is {got_w}x{got_h} but camera expects {want_w}x{want_h}")]
    SizeMismatch {
        got_w: u32,
        got_h: u32,
        want_w: u32,
        want_h: u32,
    },
    #[error("depth {0} is not finite and positive")]
    InvalidDepth(f64),
}

/// Pinhole intrinsics in pixel units.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl Intrinsics {
    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.fx > 0.0 && self.fy > 0.0) || !self.fx.is_finite() || !self.fy.is_finite() {
            return Err(GeometryError::BadIntrinsics(format!(
                "focal length must be positive, got fx={} fy={}",
                self.fx, self.fy
            )));
        }
        if !(self.cx > 0.0 && self.cx < self.width as f64)
            || !(self.cy > 0.0 && self.cy < self.height as f64)
        {
            return Err(GeometryError::BadIntrinsics(format!(
                "principal point ({}, {}) outside image {}x{}",
                self.cx, self.cy, self.width, self.height
            )));
        }
        if self.width == 0 || self.height == 0 {
            return Err(GeometryError::BadIntrinsics("zero image size".into()));
        }
        Ok(())
    }

    /// Intrinsics of the same camera rendered at `factor` times the resolution.
    pub fn scaled(&self, factor: u32) -> Intrinsics {
        let f = factor as f64;
        Intrinsics {
            fx: self.fx * f,
            fy: self.fy * f,
            cx: self.cx * f,
            cy: self.cy * f,
            width: self.width * factor,
            height: self.height * factor,
        }
    }
}

/// Rigid camera-to-world transform: `world = R * cam + t`.
///
/// `rotation` columns are the camera axes expressed in world coordinates and
/// `translation` is the camera origin in world coordinates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl Pose {
    /// Builds a pose, rejecting rotations that are not orthonormal with
    /// determinant +1 (tolerance 1e-6, matching calibration-file validation).
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Pose, GeometryError> {
        let dev = (rotation * rotation.transpose() - Matrix3::identity()).abs().max();
        if dev > 1e-6 {
            return Err(GeometryError::NotOrthonormal { deviation: dev });
        }
        let det = rotation.determinant();
        if (det - 1.0).abs() > 1e-6 {
            return Err(GeometryError::NotRightHanded { det });
        }
        Ok(Pose {
            rotation,
            translation,
        })
    }

    pub fn identity() -> Pose {
        Pose {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Camera at `eye` looking at `target`. `world_down` picks the image
    /// vertical; the default scenes use +y as world down so an unrotated
    /// camera has an identity pose.
    pub fn look_at(
        eye: Point3<f64>,
        target: Point3<f64>,
        world_down: Vector3<f64>,
    ) -> Result<Pose, GeometryError> {
        let z = (target - eye)
            .try_normalize(1e-12)
            .ok_or_else(|| GeometryError::BadIntrinsics("look_at: eye == target".into()))?;
        let x = world_down
            .cross(&z)
            .try_normalize(1e-12)
            .ok_or_else(|| GeometryError::BadIntrinsics("look_at: view parallel to down".into()))?;
        let y = z.cross(&x);
        Pose::new(Matrix3::from_columns(&[x, y, z]), eye.coords)
    }

    #[inline]
    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    #[inline]
    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    #[inline]
    pub fn to_world(&self, cam: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.rotation * cam.coords + self.translation)
    }

    #[inline]
    pub fn to_camera(&self, world: &Point3<f64>) -> Point3<f64> {
        Point3::from(self.rotation.transpose() * (world.coords - self.translation))
    }

    #[inline]
    pub fn direction_to_world(&self, cam: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * cam
    }
}

/// A calibrated camera: intrinsics, pose and a view identifier.
#[derive(Clone, Debug)]
pub struct CameraModel {
    pub intrinsics: Intrinsics,
    pub pose: Pose,
    pub id: String,
}

/// Continuous projection of a world point. `z <= 0` flags a point behind the
/// camera; `u`/`v` are meaningless in that case and the caller decides.
#[derive(Clone, Copy, Debug)]
pub struct Projection {
    pub u: f64,
    pub v: f64,
    pub z: f64,
}

impl Projection {
    #[inline]
    pub fn in_front(&self) -> bool {
        self.z > 0.0
    }
}

impl CameraModel {
    pub fn new(intrinsics: Intrinsics, pose: Pose, id: impl Into<String>) -> CameraModel {
        CameraModel {
            intrinsics,
            pose,
            id: id.into(),
        }
    }

    /// Camera origin in world coordinates.
    #[inline]
    pub fn center(&self) -> Point3<f64> {
        Point3::from(*self.pose.translation())
    }

    /// Projects a world point to continuous pixel coordinates and
    /// camera-frame depth.
    #[inline]
    pub fn project(&self, world: &Point3<f64>) -> Projection {
        let c = self.pose.to_camera(world);
        let z = c.z;
        if z <= 0.0 {
            return Projection {
                u: f64::NAN,
                v: f64::NAN,
                z,
            };
        }
        Projection {
            u: self.intrinsics.fx * c.x / z + self.intrinsics.cx,
            v: self.intrinsics.fy * c.y / z + self.intrinsics.cy,
            z,
        }
    }

    /// Inverse of [`CameraModel::project`] for a valid depth.
    pub fn unproject(&self, u: f64, v: f64, depth: f64) -> Result<Point3<f64>, GeometryError> {
        if !(depth.is_finite() && depth > 0.0) {
            return Err(GeometryError::InvalidDepth(depth));
        }
        let x = (u - self.intrinsics.cx) / self.intrinsics.fx * depth;
        let y = (v - self.intrinsics.cy) / self.intrinsics.fy * depth;
        Ok(self.pose.to_world(&Point3::new(x, y, depth)))
    }

    /// World-space ray through continuous pixel `(u, v)`, scaled so that
    /// advancing the parameter by 1 advances camera-frame depth by 1 meter.
    #[inline]
    pub fn pixel_ray(&self, u: f64, v: f64) -> (Point3<f64>, Vector3<f64>) {
        let dir_cam = Vector3::new(
            (u - self.intrinsics.cx) / self.intrinsics.fx,
            (v - self.intrinsics.cy) / self.intrinsics.fy,
            1.0,
        );
        (self.center(), self.pose.direction_to_world(&dir_cam))
    }

    #[inline]
    pub fn width(&self) -> u32 {
        self.intrinsics.width
    }

    #[inline]
    pub fn height(&self) -> u32 {
        self.intrinsics.height
    }

    /// Same camera with intrinsics scaled to `factor` times the resolution.
    pub fn scaled(&self, factor: u32) -> CameraModel {
        CameraModel {
            intrinsics: self.intrinsics.scaled(factor),
            pose: self.pose,
            id: self.id.clone(),
        }
    }
}

/// Row-major single-channel depth image in meters.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthMap {
    width: u32,
    height: u32,
    data: Vec<f32>,
}

impl DepthMap {
    pub fn new_invalid(width: u32, height: u32) -> DepthMap {
        DepthMap {
            width,
            height,
            data: vec![INVALID_DEPTH; width as usize * height as usize],
        }
    }

    pub fn constant(width: u32, height: u32, depth: f32) -> DepthMap {
        DepthMap {
            width,
            height,
            data: vec![depth; width as usize * height as usize],
        }
    }

    pub fn from_data(width: u32, height: u32, data: Vec<f32>) -> DepthMap {
        assert_eq!(data.len(), width as usize * height as usize);
        DepthMap {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> u32 {
        self.width
    }

    #[inline]
    pub fn height(&self) -> u32 {
        self.height
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> f32 {
        self.data[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, d: f32) {
        self.data[y as usize * self.width as usize + x as usize] = d;
    }

    #[inline]
    pub fn is_valid(&self, x: u32, y: u32) -> bool {
        depth_is_valid(self.get(x, y))
    }

    #[inline]
    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn valid_count(&self) -> usize {
        self.data.iter().filter(|d| depth_is_valid(**d)).count()
    }

    /// Bilinear sample at continuous pixel coordinates, ignoring invalid taps
    /// and renormalizing the weights. Returns `None` when the valid taps carry
    /// less than half of the total weight.
    pub fn sample_bilinear(&self, u: f64, v: f64) -> Option<f64> {
        let (x0, y0, wx, wy) = bilinear_setup(u, v, self.width, self.height)?;
        let mut sum = 0.0;
        let mut weight = 0.0;
        for (dy, fy) in [(0u32, 1.0 - wy), (1u32, wy)] {
            for (dx, fx) in [(0u32, 1.0 - wx), (1u32, wx)] {
                let w = fx * fy;
                if w == 0.0 {
                    continue;
                }
                let d = self.get((x0 + dx).min(self.width - 1), (y0 + dy).min(self.height - 1));
                if depth_is_valid(d) {
                    sum += w * d as f64;
                    weight += w;
                }
            }
        }
        if weight >= 0.5 {
            Some(sum / weight)
        } else {
            None
        }
    }
}

/// Shared bilinear footprint: base texel, fractional weights. Returns `None`
/// outside the image (a half-pixel border is clamped, not rejected).
#[inline]
pub(crate) fn bilinear_setup(u: f64, v: f64, width: u32, height: u32) -> Option<(u32, u32, f64, f64)> {
    if !u.is_finite() || !v.is_finite() {
        return None;
    }
    if u < 0.0 || v < 0.0 || u > width as f64 || v > height as f64 {
        return None;
    }
    let gx = (u - 0.5).clamp(0.0, (width - 1) as f64);
    let gy = (v - 0.5).clamp(0.0, (height - 1) as f64);
    let x0 = gx.floor();
    let y0 = gy.floor();
    Some((x0 as u32, y0 as u32, gx - x0, gy - y0))
}

/// One lifted depth sample: world position plus its provenance.
#[derive(Clone, Copy, Debug)]
pub struct CloudPoint {
    pub position: Point3<f64>,
    /// Source pixel in the originating depth map.
    pub pixel: (u32, u32),
    /// Index of the originating view in its rig.
    pub view: u32,
}

/// An unordered set of lifted points.
#[derive(Clone, Debug, Default)]
pub struct PointCloud {
    pub points: Vec<CloudPoint>,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn merge(clouds: impl IntoIterator<Item = PointCloud>) -> PointCloud {
        let mut points = Vec::new();
        for c in clouds {
            points.extend(c.points);
        }
        PointCloud { points }
    }
}

/// Lifts every valid pixel of `depth` into world space at the pixel center.
pub fn lift_depth_map(
    camera: &CameraModel,
    depth: &DepthMap,
    view: u32,
) -> Result<PointCloud, GeometryError> {
    if depth.width() != camera.width() || depth.height() != camera.height() {
        return Err(GeometryError::SizeMismatch {
            got_w: depth.width(),
            got_h: depth.height(),
            want_w: camera.width(),
            want_h: camera.height(),
        });
    }
    let mut points = Vec::with_capacity(depth.valid_count());
    for y in 0..depth.height() {
        for x in 0..depth.width() {
            let d = depth.get(x, y);
            if !depth_is_valid(d) {
                continue;
            }
            let p = camera
                .unproject(x as f64 + 0.5, y as f64 + 0.5, d as f64)
                .expect("valid depth");
            points.push(CloudPoint {
                position: p,
                pixel: (x, y),
                view,
            });
        }
    }
    Ok(PointCloud { points })
}

/// Z-buffers a point cloud into `camera`. Every point splats to all pixels
/// within Chebyshev distance `splat_radius` of its projected pixel; the
/// nearest depth wins. Uncovered pixels keep the invalid sentinel.
pub fn rasterize(cloud: &PointCloud, camera: &CameraModel, splat_radius: u32) -> DepthMap {
    rasterize_merged(std::slice::from_ref(cloud), camera, splat_radius)
}

/// [`rasterize`] over several clouds sharing one z-buffer.
pub fn rasterize_merged(
    clouds: &[PointCloud],
    camera: &CameraModel,
    splat_radius: u32,
) -> DepthMap {
    let w = camera.width();
    let h = camera.height();
    let mut out = DepthMap::new_invalid(w, h);
    let r = splat_radius as i64;

    // Deterministic nearest-depth contract: min() is order-independent, so a
    // plain sequential pass per output buffer is enough. Callers parallelize
    // across independent rasterizations.
    for cloud in clouds {
        for pt in &cloud.points {
            let proj = camera.project(&pt.position);
            if !proj.in_front() || !proj.u.is_finite() || !proj.v.is_finite() {
                continue;
            }
            let px = proj.u.floor() as i64;
            let py = proj.v.floor() as i64;
            if px + r < 0 || py + r < 0 || px - r >= w as i64 || py - r >= h as i64 {
                continue;
            }
            let z = proj.z as f32;
            for y in (py - r).max(0)..=(py + r).min(h as i64 - 1) {
                for x in (px - r).max(0)..=(px + r).min(w as i64 - 1) {
                    let idx = y as usize * w as usize + x as usize;
                    let cur = out.data()[idx];
                    if !depth_is_valid(cur) || z < cur {
                        out.data_mut()[idx] = z;
                    }
                }
            }
        }
    }
    out
}

/// Parallel variant used by volume construction: rasterizes many clouds into
/// the same camera, one z-buffer each.
pub fn rasterize_each(
    clouds: &[PointCloud],
    camera: &CameraModel,
    splat_radius: u32,
) -> Vec<DepthMap> {
    clouds
        .par_iter()
        .map(|c| rasterize(c, camera, splat_radius))
        .collect()
}
