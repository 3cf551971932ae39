//! Synthetic RGBD rig generator: analytic scenes, a ray-cast ground-truth
//! oracle and a parametric depth-sensor bias/noise model.
//!
//! Depth bias perturbs the measured z-depth, which displaces the lifted point
//! along the input camera's viewing ray. Noise is drawn from a counter-based
//! generator keyed by (seed, view, frame, pixel) so captures are bit-identical
//! regardless of evaluation order.

use nalgebra::{Point3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{depth_is_valid, CameraModel, DepthMap, INVALID_DEPTH};
use crate::image::FeatureImage;

#[derive(Debug, Error)]
pub enum SimulatorError {
    #[error("scene has no geometry to render")]
    EmptyScene,
    #[error("rig has no input cameras")]
    EmptyRig,
    #[error("motion references primitive {0} but the scene has {1}")]
    BadMotionTarget(usize, usize),
    #[error("invalid primitive: {0}")]
    BadPrimitive(String),
}

/// Procedural surface color.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Texture {
    /// Uniform albedo.
    Solid,
    /// 3D checker between `albedo` and `secondary`, cells of `scale` meters.
    Checker { secondary: [f32; 3], scale: f64 },
    /// Smooth product-of-sines ripple around `albedo`:
    /// `albedo * (1 + amplitude * sin(2*pi*x/period) * sin(2*pi*y/period))`,
    /// evaluated on world coordinates. Band-limited, so bilinear feature
    /// sampling stays accurate.
    SineGrid { amplitude: f64, period: f64 },
    /// Two superimposed sine grids, the second rotated 45 degrees at an
    /// incommensurate period, so the local gradient never vanishes over any
    /// extended region. Still band-limited at `period`.
    RippleMix { amplitude: f64, period: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    /// Infinite plane `normal . x = offset`.
    Plane { normal: [f64; 3], offset: f64 },
    Sphere { center: [f64; 3], radius: f64 },
    /// Axis-aligned box.
    Box { min: [f64; 3], max: [f64; 3] },
    /// Flat disk with center, unit normal and radius.
    Disk {
        center: [f64; 3],
        normal: [f64; 3],
        radius: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenePrimitive {
    #[serde(flatten)]
    pub shape: Shape,
    pub albedo: [f32; 3],
    #[serde(default = "default_texture")]
    pub texture: Texture,
    /// Foreground primitives are excluded from the background pre-capture
    /// and are the ones a motion trajectory may target.
    #[serde(default)]
    pub foreground: bool,
}

fn default_texture() -> Texture {
    Texture::Solid
}

impl ScenePrimitive {
    pub fn validate(&self) -> Result<(), SimulatorError> {
        let finite3 = |v: &[f64; 3]| v.iter().all(|x| x.is_finite());
        match &self.shape {
            Shape::Plane { normal, offset } => {
                let n = Vector3::from_column_slice(normal);
                if !finite3(normal) || !offset.is_finite() || n.norm() < 1e-12 {
                    return Err(SimulatorError::BadPrimitive("degenerate plane".into()));
                }
            }
            Shape::Sphere { center, radius } => {
                if !finite3(center) || !(*radius > 0.0) {
                    return Err(SimulatorError::BadPrimitive("sphere radius must be > 0".into()));
                }
            }
            Shape::Box { min, max } => {
                if !finite3(min) || !finite3(max) || min.iter().zip(max).any(|(a, b)| a >= b) {
                    return Err(SimulatorError::BadPrimitive("box min must be < max".into()));
                }
            }
            Shape::Disk { normal, radius, center } => {
                let n = Vector3::from_column_slice(normal);
                if !finite3(center) || !(*radius > 0.0) || n.norm() < 1e-12 {
                    return Err(SimulatorError::BadPrimitive("degenerate disk".into()));
                }
            }
        }
        Ok(())
    }

    /// Primitive displaced by a translation (used by motion trajectories).
    pub fn translated(&self, delta: Vector3<f64>) -> ScenePrimitive {
        let mut out = self.clone();
        out.shape = match &self.shape {
            Shape::Plane { normal, offset } => {
                let n = Vector3::from_column_slice(normal);
                Shape::Plane {
                    normal: *normal,
                    offset: offset + n.dot(&delta),
                }
            }
            Shape::Sphere { center, radius } => Shape::Sphere {
                center: (Vector3::from_column_slice(center) + delta).into(),
                radius: *radius,
            },
            Shape::Box { min, max } => Shape::Box {
                min: (Vector3::from_column_slice(min) + delta).into(),
                max: (Vector3::from_column_slice(max) + delta).into(),
            },
            Shape::Disk {
                center,
                normal,
                radius,
            } => Shape::Disk {
                center: (Vector3::from_column_slice(center) + delta).into(),
                normal: *normal,
                radius: *radius,
            },
        };
        out
    }
}

/// Optional Lambert shading by a fixed directional light.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Shading {
    #[default]
    None,
    Lambert,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub primitives: Vec<ScenePrimitive>,
    /// Optional far plane behind everything, never treated as foreground.
    #[serde(default)]
    pub background: Option<ScenePrimitive>,
    /// Color returned when a ray hits nothing.
    #[serde(default)]
    pub miss_color: [f32; 3],
    #[serde(default)]
    pub shading: Shading,
}

impl Scene {
    pub fn validate(&self) -> Result<(), SimulatorError> {
        if self.primitives.is_empty() && self.background.is_none() {
            return Err(SimulatorError::EmptyScene);
        }
        for p in self.primitives.iter().chain(self.background.iter()) {
            p.validate()?;
        }
        Ok(())
    }

    /// The scene without its foreground primitives (background pre-capture).
    pub fn background_only(&self) -> Scene {
        Scene {
            primitives: self
                .primitives
                .iter()
                .filter(|p| !p.foreground)
                .cloned()
                .collect(),
            background: self.background.clone(),
            miss_color: self.miss_color,
            shading: self.shading,
        }
    }

    fn surfaces(&self) -> impl Iterator<Item = &ScenePrimitive> {
        self.primitives.iter().chain(self.background.iter())
    }
}

/// Nearest intersection along a ray, in the ray's depth parameterization.
#[derive(Clone, Copy, Debug)]
pub struct Hit {
    /// Camera-frame z when the ray comes from [`CameraModel::pixel_ray`].
    pub depth: f64,
    pub point: Point3<f64>,
    /// Unit surface normal oriented toward the ray origin.
    pub normal: Vector3<f64>,
    pub primitive: usize,
    pub foreground: bool,
}

const RAY_EPS: f64 = 1e-9;

fn intersect_shape(shape: &Shape, origin: &Point3<f64>, dir: &Vector3<f64>) -> Option<(f64, Vector3<f64>)> {
    match shape {
        Shape::Plane { normal, offset } => {
            let n = Vector3::from_column_slice(normal);
            let denom = n.dot(dir);
            if denom.abs() < 1e-15 {
                return None;
            }
            let t = (offset - n.dot(&origin.coords)) / denom;
            (t > RAY_EPS).then_some((t, n))
        }
        Shape::Sphere { center, radius } => {
            let c = Point3::from(Vector3::from_column_slice(center));
            let oc = origin - c;
            let a = dir.dot(dir);
            let b = 2.0 * dir.dot(&oc);
            let cc = oc.dot(&oc) - radius * radius;
            let disc = b * b - 4.0 * a * cc;
            if disc < 0.0 {
                return None;
            }
            let sq = disc.sqrt();
            let t = [(-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a)]
                .into_iter()
                .find(|t| *t > RAY_EPS)?;
            let p = origin + dir * t;
            Some((t, (p - c).normalize()))
        }
        Shape::Box { min, max } => {
            let mut t_near = f64::NEG_INFINITY;
            let mut t_far = f64::INFINITY;
            let mut axis_near = 0usize;
            for axis in 0..3 {
                let o = origin.coords[axis];
                let d = dir[axis];
                if d.abs() < 1e-15 {
                    if o < min[axis] || o > max[axis] {
                        return None;
                    }
                    continue;
                }
                let mut t0 = (min[axis] - o) / d;
                let mut t1 = (max[axis] - o) / d;
                if t0 > t1 {
                    std::mem::swap(&mut t0, &mut t1);
                }
                if t0 > t_near {
                    t_near = t0;
                    axis_near = axis;
                }
                t_far = t_far.min(t1);
                if t_near > t_far {
                    return None;
                }
            }
            let t = if t_near > RAY_EPS {
                t_near
            } else if t_far > RAY_EPS {
                // Origin inside the box; use the exit face.
                axis_near = (0..3)
                    .filter(|a| dir[*a].abs() > 1e-15)
                    .min_by(|a, b| {
                        let ta = ((if dir[*a] > 0.0 { max[*a] } else { min[*a] }) - origin.coords[*a]) / dir[*a];
                        let tb = ((if dir[*b] > 0.0 { max[*b] } else { min[*b] }) - origin.coords[*b]) / dir[*b];
                        ta.partial_cmp(&tb).unwrap()
                    })?;
                t_far
            } else {
                return None;
            };
            let mut n = Vector3::zeros();
            n[axis_near] = if dir[axis_near] > 0.0 { -1.0 } else { 1.0 };
            Some((t, n))
        }
        Shape::Disk {
            center,
            normal,
            radius,
        } => {
            let n = Vector3::from_column_slice(normal).normalize();
            let c = Point3::from(Vector3::from_column_slice(center));
            let denom = n.dot(dir);
            if denom.abs() < 1e-15 {
                return None;
            }
            let t = n.dot(&(c - origin)) / denom;
            if t <= RAY_EPS {
                return None;
            }
            let p = origin + dir * t;
            ((p - c).norm() <= *radius).then_some((t, n))
        }
    }
}

/// Nearest scene intersection along `origin + t * dir`, `t` in the ray's own
/// parameterization (camera depth for pixel rays, meters for unit rays).
pub fn raycast(scene: &Scene, origin: &Point3<f64>, dir: &Vector3<f64>) -> Option<Hit> {
    let mut best: Option<Hit> = None;
    for (idx, prim) in scene.surfaces().enumerate() {
        if let Some((t, n)) = intersect_shape(&prim.shape, origin, dir) {
            if best.as_ref().map_or(true, |b| t < b.depth) {
                // Orient the normal toward the ray origin.
                let normal = if n.dot(dir) > 0.0 { -n } else { n };
                best = Some(Hit {
                    depth: t,
                    point: origin + dir * t,
                    normal,
                    primitive: idx,
                    foreground: prim.foreground,
                });
            }
        }
    }
    best
}

fn texture_color(prim: &ScenePrimitive, point: &Point3<f64>) -> [f32; 3] {
    match &prim.texture {
        Texture::Solid => prim.albedo,
        Texture::Checker { secondary, scale } => {
            let parity = (point.x / scale).floor() as i64
                + (point.y / scale).floor() as i64
                + (point.z / scale).floor() as i64;
            if parity.rem_euclid(2) == 0 {
                prim.albedo
            } else {
                *secondary
            }
        }
        Texture::SineGrid { amplitude, period } => {
            let k = std::f64::consts::TAU / period;
            let m = 1.0 + amplitude * (k * point.x).sin() * (k * point.y).sin();
            let mut c = prim.albedo;
            for ch in &mut c {
                *ch = (*ch as f64 * m).clamp(0.0, 1.0) as f32;
            }
            c
        }
        Texture::RippleMix { amplitude, period } => {
            let k1 = std::f64::consts::TAU / period;
            let k2 = k1 * 0.7235;
            let g1 = (k1 * point.x).sin() * (k1 * point.y).sin();
            let g2 = (k2 * (point.x + point.y)).sin() * (k2 * (point.x - point.y)).sin();
            let m = 1.0 + amplitude * 0.5 * (g1 + g2);
            let mut c = prim.albedo;
            for ch in &mut c {
                *ch = (*ch as f64 * m).clamp(0.0, 1.0) as f32;
            }
            c
        }
    }
}

const LIGHT_DIR: Vector3<f64> = Vector3::new(-0.3, -0.5, -0.8);

fn shade(scene: &Scene, prim: &ScenePrimitive, hit: &Hit) -> [f32; 3] {
    let base = texture_color(prim, &hit.point);
    match scene.shading {
        Shading::None => base,
        Shading::Lambert => {
            let l = -LIGHT_DIR.normalize();
            let lambert = hit.normal.dot(&l).max(0.0) * 0.8 + 0.2;
            let mut c = base;
            for ch in &mut c {
                *ch = (*ch as f64 * lambert).clamp(0.0, 1.0) as f32;
            }
            c
        }
    }
}

fn prim_by_hit<'s>(scene: &'s Scene, hit: &Hit) -> &'s ScenePrimitive {
    scene
        .surfaces()
        .nth(hit.primitive)
        .expect("hit indexes a scene surface")
}

/// Per-pixel nearest-intersection camera-frame depth; misses carry the
/// invalid sentinel.
pub fn raycast_depth(scene: &Scene, camera: &CameraModel) -> DepthMap {
    let w = camera.width();
    let h = camera.height();
    let mut out = DepthMap::new_invalid(w, h);
    out.data_mut()
        .par_chunks_mut(w as usize)
        .enumerate()
        .for_each(|(y, row)| {
            for (x, px) in row.iter_mut().enumerate() {
                let (o, d) = camera.pixel_ray(x as f64 + 0.5, y as f64 + 0.5);
                if let Some(hit) = raycast(scene, &o, &d) {
                    *px = hit.depth as f32;
                }
            }
        });
    out
}

/// Per-pixel albedo (optionally Lambert-shaded) of the nearest primitive;
/// misses get the scene's miss color.
pub fn render_color(scene: &Scene, camera: &CameraModel) -> FeatureImage {
    let w = camera.width();
    let h = camera.height();
    let mut out = FeatureImage::zeros(w, h, 3);
    out.data_mut()
        .par_chunks_mut(w as usize * 3)
        .enumerate()
        .for_each(|(y, row)| {
            for x in 0..w as usize {
                let (o, d) = camera.pixel_ray(x as f64 + 0.5, y as f64 + 0.5);
                let c = match raycast(scene, &o, &d) {
                    Some(hit) => shade(scene, prim_by_hit(scene, &hit), &hit),
                    None => scene.miss_color,
                };
                row[x * 3..x * 3 + 3].copy_from_slice(&c);
            }
        });
    out
}

/// Piecewise-linear depth bias plus a linear incidence-angle term, clamped to
/// `max_abs`. All values in meters; incidence in radians at evaluation time.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiasModel {
    /// Control points (true depth, additive bias), sorted by depth.
    /// A single point means a constant bias.
    pub depth_points: Vec<(f64, f64)>,
    /// Additional bias of `incidence_coeff * incidence / incidence_ref`.
    pub incidence_coeff: f64,
    /// Reference angle in radians for the incidence term.
    pub incidence_ref: f64,
    /// Hard bound on |bias|.
    pub max_abs: f64,
}

impl BiasModel {
    pub fn zero() -> BiasModel {
        BiasModel {
            depth_points: vec![(0.0, 0.0)],
            incidence_coeff: 0.0,
            incidence_ref: 60f64.to_radians(),
            max_abs: 0.05,
        }
    }

    pub fn constant(bias: f64) -> BiasModel {
        BiasModel {
            depth_points: vec![(0.0, bias)],
            incidence_coeff: 0.0,
            incidence_ref: 60f64.to_radians(),
            max_abs: 0.05,
        }
    }

    pub fn eval(&self, depth: f64, incidence: f64) -> f64 {
        let from_depth = match self.depth_points.as_slice() {
            [] => 0.0,
            [single] => single.1,
            points => {
                if depth <= points[0].0 {
                    points[0].1
                } else if depth >= points[points.len() - 1].0 {
                    points[points.len() - 1].1
                } else {
                    let i = points.partition_point(|(d, _)| *d <= depth) - 1;
                    let (d0, b0) = points[i];
                    let (d1, b1) = points[i + 1];
                    b0 + (b1 - b0) * (depth - d0) / (d1 - d0)
                }
            }
        };
        let from_incidence = if self.incidence_ref.abs() > 1e-12 {
            self.incidence_coeff * incidence / self.incidence_ref
        } else {
            0.0
        };
        (from_depth + from_incidence).clamp(-self.max_abs, self.max_abs)
    }
}

impl Default for BiasModel {
    /// +1.5 cm constant plus 0.5 cm per 60 degrees of incidence, bounded at
    /// 5 cm. Phenomenological desk-scale magnitudes, not a characterization
    /// of any particular sensor.
    fn default() -> BiasModel {
        BiasModel {
            depth_points: vec![(0.0, 0.015)],
            incidence_coeff: 0.005,
            incidence_ref: 60f64.to_radians(),
            max_abs: 0.05,
        }
    }
}

/// Parametric depth sensor: bias plus zero-mean per-pixel per-frame noise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensorModel {
    pub bias: BiasModel,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl SensorModel {
    pub fn ideal() -> SensorModel {
        SensorModel {
            bias: BiasModel::zero(),
            noise_sigma: 0.0,
            seed: 0,
        }
    }
}

impl Default for SensorModel {
    fn default() -> SensorModel {
        SensorModel {
            bias: BiasModel::default(),
            noise_sigma: 0.0,
            seed: 0,
        }
    }
}

#[inline]
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

#[inline]
fn to_unit_open(x: u64) -> f64 {
    // (0, 1]: never returns 0, safe for ln().
    ((x >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal sample keyed by (seed, view, frame, pixel); identical keys
/// give identical samples regardless of evaluation order.
pub fn counter_gaussian(seed: u64, view: u32, frame: u32, pixel: u64) -> f64 {
    let k = splitmix64(
        splitmix64(seed ^ 0xA076_1D64_78BD_642F)
            ^ splitmix64((view as u64) << 32 | frame as u64)
            ^ splitmix64(pixel ^ 0xE703_7ED1_A0B4_28DB),
    );
    let u1 = to_unit_open(splitmix64(k));
    let u2 = to_unit_open(splitmix64(k ^ 0x9E37_79B9_7F4A_7C15));
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Applies bias and noise to a ground-truth depth map. The perturbation is
/// additive on camera-frame z, so the lifted point moves along the pixel ray.
/// Invalid pixels pass through untouched.
pub fn apply_sensor(
    depth_gt: &DepthMap,
    camera: &CameraModel,
    scene: &Scene,
    sensor: &SensorModel,
    view: u32,
    frame: u32,
) -> DepthMap {
    let w = depth_gt.width();
    let mut out = depth_gt.clone();
    let identity_bias = sensor.bias.depth_points.iter().all(|(_, b)| *b == 0.0)
        && sensor.bias.incidence_coeff == 0.0;
    if identity_bias && sensor.noise_sigma == 0.0 {
        return out;
    }
    out.data_mut()
        .par_chunks_mut(w as usize)
        .enumerate()
        .for_each(|(y, row)| {
            for (x, px) in row.iter_mut().enumerate() {
                if !depth_is_valid(*px) {
                    continue;
                }
                let z = *px as f64;
                let bias = if identity_bias {
                    0.0
                } else {
                    let (o, d) = camera.pixel_ray(x as f64 + 0.5, y as f64 + 0.5);
                    let incidence = match raycast(scene, &o, &d) {
                        Some(hit) => {
                            let cos = (-hit.normal.dot(&d.normalize())).clamp(-1.0, 1.0);
                            cos.acos()
                        }
                        None => 0.0,
                    };
                    sensor.bias.eval(z, incidence)
                };
                let noise = if sensor.noise_sigma > 0.0 {
                    sensor.noise_sigma
                        * counter_gaussian(
                            sensor.seed,
                            view,
                            frame,
                            y as u64 * w as u64 + x as u64,
                        )
                } else {
                    0.0
                };
                let perturbed = z + bias + noise;
                *px = if perturbed > 0.0 {
                    perturbed as f32
                } else {
                    INVALID_DEPTH
                };
            }
        });
    out
}

/// Camera role inside a rig.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CameraRole {
    Input,
    Novel,
    Groundtruth,
}

/// A camera plus its role.
#[derive(Clone, Debug)]
pub struct RigCamera {
    pub camera: CameraModel,
    pub role: CameraRole,
}

/// One captured view: depth plus color.
#[derive(Clone, Debug)]
pub struct ViewCapture {
    pub depth: DepthMap,
    pub color: FeatureImage,
}

/// One synchronized frame: sensor-perturbed input views plus clean
/// ground-truth views.
#[derive(Clone, Debug)]
pub struct FrameBundle {
    pub t: u32,
    pub inputs: Vec<ViewCapture>,
    pub groundtruth: Vec<ViewCapture>,
}

/// Rigid per-frame translation of one foreground primitive.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Motion {
    pub primitive: usize,
    /// Meters per frame.
    pub velocity: [f64; 3],
}

/// A full synthetic capture: shared rig, background pre-capture and frames.
#[derive(Clone, Debug)]
pub struct FrameSequence {
    pub rig: Vec<RigCamera>,
    pub background: Vec<ViewCapture>,
    pub frames: Vec<FrameBundle>,
}

impl FrameSequence {
    pub fn input_cameras(&self) -> Vec<&CameraModel> {
        self.rig
            .iter()
            .filter(|c| c.role == CameraRole::Input)
            .map(|c| &c.camera)
            .collect()
    }

    pub fn groundtruth_cameras(&self) -> Vec<&CameraModel> {
        self.rig
            .iter()
            .filter(|c| c.role == CameraRole::Groundtruth)
            .map(|c| &c.camera)
            .collect()
    }

    pub fn novel_cameras(&self) -> Vec<&CameraModel> {
        self.rig
            .iter()
            .filter(|c| c.role == CameraRole::Novel)
            .map(|c| &c.camera)
            .collect()
    }
}

fn scene_at_frame(scene: &Scene, motion: Option<&Motion>, t: u32) -> Scene {
    match motion {
        None => scene.clone(),
        Some(m) => {
            let mut s = scene.clone();
            let delta = Vector3::from_column_slice(&m.velocity) * t as f64;
            s.primitives[m.primitive] = s.primitives[m.primitive].translated(delta);
            s
        }
    }
}

/// Renders a full capture session: a background bundle without the foreground
/// primitives, then `num_frames` frames with the sensor applied to input
/// views only. Ground-truth views carry clean color and clean depth.
pub fn capture_sequence(
    scene: &Scene,
    rig: &[RigCamera],
    sensor: &SensorModel,
    num_frames: u32,
    motion: Option<&Motion>,
) -> Result<FrameSequence, SimulatorError> {
    scene.validate()?;
    let inputs: Vec<&CameraModel> = rig
        .iter()
        .filter(|c| c.role == CameraRole::Input)
        .map(|c| &c.camera)
        .collect();
    if inputs.is_empty() {
        return Err(SimulatorError::EmptyRig);
    }
    if let Some(m) = motion {
        if m.primitive >= scene.primitives.len() {
            return Err(SimulatorError::BadMotionTarget(
                m.primitive,
                scene.primitives.len(),
            ));
        }
    }

    let bg_scene = scene.background_only();
    let background = inputs
        .iter()
        .map(|cam| ViewCapture {
            depth: raycast_depth(&bg_scene, cam),
            color: render_color(&bg_scene, cam),
        })
        .collect();

    let gts: Vec<&CameraModel> = rig
        .iter()
        .filter(|c| c.role == CameraRole::Groundtruth)
        .map(|c| &c.camera)
        .collect();

    let mut frames = Vec::with_capacity(num_frames as usize);
    for t in 0..num_frames {
        let frame_scene = scene_at_frame(scene, motion, t);
        let input_caps = inputs
            .iter()
            .enumerate()
            .map(|(k, cam)| {
                let gt = raycast_depth(&frame_scene, cam);
                ViewCapture {
                    depth: apply_sensor(&gt, cam, &frame_scene, sensor, k as u32, t),
                    color: render_color(&frame_scene, cam),
                }
            })
            .collect();
        let gt_caps = gts
            .iter()
            .map(|cam| ViewCapture {
                depth: raycast_depth(&frame_scene, cam),
                color: render_color(&frame_scene, cam),
            })
            .collect();
        frames.push(FrameBundle {
            t,
            inputs: input_caps,
            groundtruth: gt_caps,
        });
    }

    Ok(FrameSequence {
        rig: rig.to_vec(),
        background,
        frames,
    })
}
