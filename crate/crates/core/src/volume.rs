//! Candidate depth volumes for novel-view synthesis.
//!
//! Two constructions are provided:
//! * [`build_mpc`] sweeps each input depth map along its own viewing rays by
//!   N offsets, lifts, and rasterizes every layer into the novel view — the
//!   multi-layer point cloud volume. Layers are ordered by camera then
//!   offset, so candidates are *not* depth-sorted.
//! * [`build_novel_view_sweep`] is the conventional baseline: it averages the
//!   rasterized input depth maps in the novel view and sweeps depth planes
//!   along the novel rays around that average.
//!
//! [`coverage_fraction`] quantifies how well a candidate set reaches the true
//! geometry: a pixel is covered when some candidate lies within a tolerance
//! of the surface, measured along the ray family that generated the candidate
//! (input-view rays for MPC layers, novel-view rays for sweep planes). That
//! is the direction each volume can actually recover along, and it is robust
//! to rasterization quantization.

use nalgebra::{Point3, Vector3};
use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::{
    depth_is_valid, lift_depth_map, rasterize, CameraModel, DepthMap, GeometryError, INVALID_DEPTH,
};
use crate::simulator::{raycast, Scene};

#[derive(Debug, Error)]
pub enum VolumeError {
    #[error("{depths} depth maps for {cameras} cameras")]
    ViewCountMismatch { depths: usize, cameras: usize },
    #[error("offsets must be non-empty and sorted ascending")]
    BadOffsets,
    #[error("sweep needs num_planes >= 1 and step > 0")]
    BadSweep,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Where a depth candidate came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Provenance {
    /// MPC layer: offset index `offset` of input view `view`.
    InputView { view: u32, offset: u32 },
    /// Sweep plane `layer` along the novel rays.
    SweepPlane { layer: u32 },
}

/// Common access for MPC and sweep volumes so aggregation, rendering and
/// coverage run on either.
pub trait CandidateVolume: Sync {
    fn num_layers(&self) -> usize;
    fn width(&self) -> u32;
    fn height(&self) -> u32;
    fn novel_camera(&self) -> &CameraModel;
    /// Candidate depth, or `None` when the slot is invalid.
    fn depth_at(&self, layer: usize, x: u32, y: u32) -> Option<f64>;
    fn provenance(&self, layer: usize) -> Provenance;
    /// Origin of the ray family that generated `layer` (input camera center
    /// for MPC layers, novel camera center for sweep planes).
    fn generator_origin(&self, layer: usize) -> Point3<f64>;
    /// Unit forward (z) axis of the generating camera; candidate offsets are
    /// measured in that camera's depth units.
    fn generator_forward(&self, layer: usize) -> Vector3<f64>;
}

/// The K x N x H x W depth-candidate tensor in the novel camera frame.
#[derive(Clone, Debug)]
pub struct MpcDepthVolume {
    depths: Vec<f32>,
    valid: Vec<bool>,
    offsets: Vec<f64>,
    view_ids: Vec<String>,
    view_origins: Vec<Point3<f64>>,
    view_forwards: Vec<Vector3<f64>>,
    novel_camera: CameraModel,
    width: u32,
    height: u32,
}

impl MpcDepthVolume {
    pub fn num_views(&self) -> usize {
        self.view_ids.len()
    }

    pub fn num_offsets(&self) -> usize {
        self.offsets.len()
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    pub fn view_ids(&self) -> &[String] {
        &self.view_ids
    }

    pub fn view_origins(&self) -> &[Point3<f64>] {
        &self.view_origins
    }

    pub fn view_forwards(&self) -> &[Vector3<f64>] {
        &self.view_forwards
    }

    #[inline]
    fn idx(&self, layer: usize, x: u32, y: u32) -> usize {
        (layer * self.height as usize + y as usize) * self.width as usize + x as usize
    }

    #[inline]
    pub fn raw_depth(&self, layer: usize, x: u32, y: u32) -> f32 {
        self.depths[self.idx(layer, x, y)]
    }

    #[inline]
    pub fn is_valid(&self, layer: usize, x: u32, y: u32) -> bool {
        self.valid[self.idx(layer, x, y)]
    }

    pub fn depths_raw(&self) -> &[f32] {
        &self.depths
    }

    pub fn valid_raw(&self) -> &[bool] {
        &self.valid
    }

    /// Rebuilds a volume from its serialized tensor plus rig context.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        depths: Vec<f32>,
        valid: Vec<bool>,
        offsets: Vec<f64>,
        view_ids: Vec<String>,
        input_cameras: &[CameraModel],
        novel_camera: CameraModel,
        width: u32,
        height: u32,
    ) -> MpcDepthVolume {
        assert_eq!(view_ids.len(), input_cameras.len());
        assert_eq!(
            depths.len(),
            view_ids.len() * offsets.len() * (width as usize) * (height as usize)
        );
        assert_eq!(depths.len(), valid.len());
        MpcDepthVolume {
            depths,
            valid,
            offsets,
            view_ids,
            view_origins: input_cameras.iter().map(|c| c.center()).collect(),
            view_forwards: input_cameras
                .iter()
                .map(|c| c.pose.direction_to_world(&Vector3::z()))
                .collect(),
            novel_camera,
            width,
            height,
        }
    }
}

impl CandidateVolume for MpcDepthVolume {
    fn num_layers(&self) -> usize {
        self.view_ids.len() * self.offsets.len()
    }

    fn width(&self) -> u32 {
        self.width
    }

    fn height(&self) -> u32 {
        self.height
    }

    fn novel_camera(&self) -> &CameraModel {
        &self.novel_camera
    }

    #[inline]
    fn depth_at(&self, layer: usize, x: u32, y: u32) -> Option<f64> {
        let i = self.idx(layer, x, y);
        self.valid[i].then(|| self.depths[i] as f64)
    }

    fn provenance(&self, layer: usize) -> Provenance {
        Provenance::InputView {
            view: (layer / self.offsets.len()) as u32,
            offset: (layer % self.offsets.len()) as u32,
        }
    }

    fn generator_origin(&self, layer: usize) -> Point3<f64> {
        self.view_origins[layer / self.offsets.len()]
    }

    fn generator_forward(&self, layer: usize) -> Vector3<f64> {
        self.view_forwards[layer / self.offsets.len()]
    }
}

/// M x H x W sweep volume around an averaged novel-view depth map.
#[derive(Clone, Debug)]
pub struct SweepDepthVolume {
    depths: Vec<f32>,
    valid: Vec<bool>,
    center: DepthMap,
    step: f64,
    num_planes: u32,
    novel_camera: CameraModel,
}

impl SweepDepthVolume {
    pub fn center(&self) -> &DepthMap {
        &self.center
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn num_planes(&self) -> u32 {
        self.num_planes
    }

    /// Plane offsets relative to the center map: `(m - (M-1)/2) * step`,
    /// symmetric about the center.
    pub fn plane_offset(&self, layer: usize) -> f64 {
        (layer as f64 - (self.num_planes as f64 - 1.0) / 2.0) * self.step
    }

    #[inline]
    fn idx(&self, layer: usize, x: u32, y: u32) -> usize {
        (layer * self.center.height() as usize + y as usize) * self.center.width() as usize
            + x as usize
    }
}

impl CandidateVolume for SweepDepthVolume {
    fn num_layers(&self) -> usize {
        self.num_planes as usize
    }

    fn width(&self) -> u32 {
        self.center.width()
    }

    fn height(&self) -> u32 {
        self.center.height()
    }

    fn novel_camera(&self) -> &CameraModel {
        &self.novel_camera
    }

    #[inline]
    fn depth_at(&self, layer: usize, x: u32, y: u32) -> Option<f64> {
        let i = self.idx(layer, x, y);
        self.valid[i].then(|| self.depths[i] as f64)
    }

    fn provenance(&self, layer: usize) -> Provenance {
        Provenance::SweepPlane {
            layer: layer as u32,
        }
    }

    fn generator_origin(&self, _layer: usize) -> Point3<f64> {
        self.novel_camera.center()
    }

    fn generator_forward(&self, _layer: usize) -> Vector3<f64> {
        self.novel_camera.pose.direction_to_world(&Vector3::z())
    }
}

fn check_views(depths: &[DepthMap], cameras: &[CameraModel]) -> Result<(), VolumeError> {
    if depths.len() != cameras.len() || cameras.is_empty() {
        return Err(VolumeError::ViewCountMismatch {
            depths: depths.len(),
            cameras: cameras.len(),
        });
    }
    Ok(())
}

fn perturbed(depth: &DepthMap, delta: f64) -> DepthMap {
    let mut out = depth.clone();
    for v in out.data_mut() {
        if depth_is_valid(*v) {
            let d = *v as f64 + delta;
            *v = if d > 0.0 { d as f32 } else { INVALID_DEPTH };
        } else {
            *v = INVALID_DEPTH;
        }
    }
    out
}

/// Builds the MPC volume: each input depth map is perturbed by every offset
/// (along its own rays), lifted, and rasterized into the novel view. Layer
/// `k * N + n` holds view k's map perturbed by `offsets[n]`.
pub fn build_mpc(
    input_depths: &[DepthMap],
    input_cameras: &[CameraModel],
    novel: &CameraModel,
    offsets: &[f64],
    splat_radius: u32,
) -> Result<MpcDepthVolume, VolumeError> {
    check_views(input_depths, input_cameras)?;
    if offsets.is_empty() || offsets.windows(2).any(|w| w[0] > w[1]) {
        return Err(VolumeError::BadOffsets);
    }
    for (d, c) in input_depths.iter().zip(input_cameras) {
        if d.width() != c.width() || d.height() != c.height() {
            return Err(GeometryError::SizeMismatch {
                got_w: d.width(),
                got_h: d.height(),
                want_w: c.width(),
                want_h: c.height(),
            }
            .into());
        }
    }

    let k = input_cameras.len();
    let n = offsets.len();
    let jobs: Vec<(usize, usize)> = (0..k)
        .flat_map(|ki| (0..n).map(move |ni| (ki, ni)))
        .collect();
    let layers: Vec<DepthMap> = jobs
        .par_iter()
        .map(|&(ki, ni)| {
            let shifted = perturbed(&input_depths[ki], offsets[ni]);
            let cloud = lift_depth_map(&input_cameras[ki], &shifted, ki as u32)
                .expect("sizes already checked");
            rasterize(&cloud, novel, splat_radius)
        })
        .collect();

    let (w, h) = (novel.width(), novel.height());
    let plane = w as usize * h as usize;
    let mut depths = Vec::with_capacity(k * n * plane);
    let mut valid = Vec::with_capacity(k * n * plane);
    for layer in &layers {
        depths.extend_from_slice(layer.data());
        valid.extend(layer.data().iter().map(|d| depth_is_valid(*d)));
    }

    Ok(MpcDepthVolume {
        depths,
        valid,
        offsets: offsets.to_vec(),
        view_ids: input_cameras.iter().map(|c| c.id.clone()).collect(),
        view_origins: input_cameras.iter().map(|c| c.center()).collect(),
        view_forwards: input_cameras
            .iter()
            .map(|c| c.pose.direction_to_world(&Vector3::z()))
            .collect(),
        novel_camera: novel.clone(),
        width: w,
        height: h,
    })
}

/// Builds the conventional novel-view sweep volume: rasterize every input
/// view into the novel camera, average the valid depths per pixel, and place
/// `num_planes` planes spaced `step` apart symmetrically around the average.
pub fn build_novel_view_sweep(
    input_depths: &[DepthMap],
    input_cameras: &[CameraModel],
    novel: &CameraModel,
    num_planes: u32,
    step: f64,
    splat_radius: u32,
) -> Result<SweepDepthVolume, VolumeError> {
    check_views(input_depths, input_cameras)?;
    if num_planes == 0 || !(step > 0.0) {
        return Err(VolumeError::BadSweep);
    }

    let rasterized: Vec<DepthMap> = input_depths
        .par_iter()
        .zip(input_cameras.par_iter())
        .enumerate()
        .map(|(ki, (d, c))| {
            let cloud = lift_depth_map(c, d, ki as u32)?;
            Ok(rasterize(&cloud, novel, splat_radius))
        })
        .collect::<Result<_, GeometryError>>()?;

    let (w, h) = (novel.width(), novel.height());
    let mut center = DepthMap::new_invalid(w, h);
    for y in 0..h {
        for x in 0..w {
            let mut sum = 0.0f64;
            let mut cnt = 0u32;
            for r in &rasterized {
                let d = r.get(x, y);
                if depth_is_valid(d) {
                    sum += d as f64;
                    cnt += 1;
                }
            }
            if cnt > 0 {
                center.set(x, y, (sum / cnt as f64) as f32);
            }
        }
    }

    let m = num_planes as usize;
    let plane = w as usize * h as usize;
    let mut depths = vec![INVALID_DEPTH; m * plane];
    let mut valid = vec![false; m * plane];
    for layer in 0..m {
        let offset = (layer as f64 - (num_planes as f64 - 1.0) / 2.0) * step;
        for (i, c) in center.data().iter().enumerate() {
            if depth_is_valid(*c) {
                let d = *c as f64 + offset;
                if d > 0.0 {
                    depths[layer * plane + i] = d as f32;
                    valid[layer * plane + i] = true;
                }
            }
        }
    }

    Ok(SweepDepthVolume {
        depths,
        valid,
        center,
        step,
        num_planes,
        novel_camera: novel.clone(),
    })
}

/// Distance from a candidate point to the nearest scene surface crossing of
/// the ray from `origin` through the candidate, measured in the generating
/// camera's depth units (projection onto `forward`). `None` when the ray
/// never meets the scene.
fn along_ray_surface_distance(
    scene: &Scene,
    origin: &Point3<f64>,
    forward: &Vector3<f64>,
    candidate: &Point3<f64>,
) -> Option<f64> {
    let dir = candidate - origin;
    let len = dir.norm();
    if len < 1e-12 {
        return None;
    }
    let unit = dir / len;
    // Candidate offsets are depth offsets, so residuals are compared after
    // projecting onto the camera's forward axis.
    let z_per_t = unit.dot(forward).abs().max(1e-9);
    // Walk the surface crossings along the ray; the candidate only needs to
    // be near one of them.
    let mut best: Option<f64> = None;
    let mut from = 0.0f64;
    for _ in 0..8 {
        let probe = origin + unit * (from + 1e-7);
        match raycast(scene, &probe, &unit) {
            Some(hit) => {
                let t = from + 1e-7 + hit.depth;
                let d = (t - len).abs() * z_per_t;
                if best.map_or(true, |b| d < b) {
                    best = Some(d);
                }
                if t > len {
                    break;
                }
                from = t;
            }
            None => break,
        }
    }
    best
}

/// Fraction of novel-view pixels (restricted to those whose ray hits the true
/// scene) for which some candidate lies within `tol` meters of the true
/// surface along the candidate's generating ray.
pub fn coverage_fraction(
    volume: &dyn CandidateVolume,
    scene: &Scene,
    novel: &CameraModel,
    tol: f64,
) -> f64 {
    coverage_fraction_masked(volume, scene, novel, tol, None)
}

/// [`coverage_fraction`] restricted to pixels where `mask` is true.
pub fn coverage_fraction_masked(
    volume: &dyn CandidateVolume,
    scene: &Scene,
    novel: &CameraModel,
    tol: f64,
    mask: Option<&[bool]>,
) -> f64 {
    assert!(tol > 0.0, "tolerance must be positive");
    let w = novel.width();
    let h = novel.height();
    if let Some(m) = mask {
        assert_eq!(m.len(), w as usize * h as usize);
    }
    let rows: Vec<(u64, u64)> = (0..h)
        .into_par_iter()
        .map(|y| {
            let mut hit_pixels = 0u64;
            let mut covered = 0u64;
            for x in 0..w {
                if let Some(m) = mask {
                    if !m[y as usize * w as usize + x as usize] {
                        continue;
                    }
                }
                let (o, d) = novel.pixel_ray(x as f64 + 0.5, y as f64 + 0.5);
                if raycast(scene, &o, &d).is_none() {
                    continue;
                }
                hit_pixels += 1;
                let mut is_covered = false;
                for layer in 0..volume.num_layers() {
                    let Some(depth) = volume.depth_at(layer, x, y) else {
                        continue;
                    };
                    let Ok(point) = novel.unproject(x as f64 + 0.5, y as f64 + 0.5, depth) else {
                        continue;
                    };
                    let origin = volume.generator_origin(layer);
                    let forward = volume.generator_forward(layer);
                    if let Some(dist) =
                        along_ray_surface_distance(scene, &origin, &forward, &point)
                    {
                        if dist <= tol {
                            is_covered = true;
                            break;
                        }
                    }
                }
                if is_covered {
                    covered += 1;
                }
            }
            (hit_pixels, covered)
        })
        .collect();
    let (hits, covered) = rows
        .iter()
        .fold((0u64, 0u64), |(a, b), (h, c)| (a + h, b + c));
    if hits == 0 {
        0.0
    } else {
        covered as f64 / hits as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Intrinsics, Pose};
    use crate::simulator::{
        capture_sequence, raycast_depth, BiasModel, CameraRole, RigCamera, Scene, ScenePrimitive,
        SensorModel, Shading, Shape, Texture,
    };
    use nalgebra::Vector3;

    const W: u32 = 192;
    const H: u32 = 144;

    fn cam_at(
        eye: (f64, f64, f64),
        target: (f64, f64, f64),
        w: u32,
        h: u32,
        id: &str,
    ) -> CameraModel {
        CameraModel::new(
            Intrinsics {
                fx: 300.0,
                fy: 300.0,
                cx: w as f64 / 2.0,
                cy: h as f64 / 2.0,
                width: w,
                height: h,
            },
            Pose::look_at(
                Point3::new(eye.0, eye.1, eye.2),
                Point3::new(target.0, target.1, target.2),
                Vector3::new(0.0, 1.0, 0.0),
            )
            .unwrap(),
            id,
        )
    }

    fn plane_scene(z: f64) -> Scene {
        Scene {
            primitives: vec![ScenePrimitive {
                shape: Shape::Plane {
                    normal: [0.0, 0.0, 1.0],
                    offset: z,
                },
                albedo: [0.8, 0.2, 0.2],
                texture: Texture::Solid,
                foreground: false,
            }],
            background: None,
            miss_color: [0.0; 3],
            shading: Shading::None,
        }
    }

    fn small_rig() -> Vec<CameraModel> {
        vec![
            cam_at((-0.3, 0.0, 0.0), (0.0, 0.0, 2.0), W, H, "in0"),
            cam_at((0.3, 0.0, 0.0), (0.0, 0.0, 2.0), W, H, "in1"),
            cam_at((0.0, -0.25, 0.0), (0.0, 0.0, 2.0), W, H, "in2"),
            cam_at((0.0, 0.25, 0.0), (0.0, 0.0, 2.0), W, H, "in3"),
        ]
    }

    fn capture_depths(scene: &Scene, rig: &[CameraModel], sensor: &SensorModel) -> Vec<DepthMap> {
        let rig_cams: Vec<RigCamera> = rig
            .iter()
            .map(|c| RigCamera {
                camera: c.clone(),
                role: CameraRole::Input,
            })
            .collect();
        let seq = capture_sequence(scene, &rig_cams, sensor, 1, None).unwrap();
        seq.frames[0]
            .inputs
            .iter()
            .map(|v| v.depth.clone())
            .collect()
    }

    #[test]
    fn mpc_has_k_times_n_layers() {
        let rig = small_rig();
        let scene = plane_scene(2.0);
        let depths = capture_depths(&scene, &rig, &SensorModel::ideal());
        let novel = cam_at((0.0, 0.0, -0.1), (0.0, 0.0, 2.0), W, H, "novel");
        let vol = build_mpc(&depths, &rig, &novel, &[-0.01, 0.0, 0.01], 1).unwrap();
        assert_eq!(vol.num_layers(), 12);
        assert_eq!(vol.num_views(), 4);
        assert_eq!(vol.num_offsets(), 3);
        assert_eq!(
            vol.provenance(7),
            Provenance::InputView { view: 2, offset: 1 }
        );
    }

    #[test]
    fn single_view_zero_offset_matches_input() {
        let cam = cam_at((0.0, 0.0, 0.0), (0.0, 0.0, 2.0), W, H, "in0");
        let scene = plane_scene(2.0);
        let depth = raycast_depth(&scene, &cam);
        let vol = build_mpc(
            std::slice::from_ref(&depth),
            std::slice::from_ref(&cam),
            &cam,
            &[0.0],
            0,
        )
        .unwrap();
        for y in 0..H {
            for x in 0..W {
                if depth.is_valid(x, y) {
                    let d = vol.depth_at(0, x, y).expect("covered");
                    assert!((d - depth.get(x, y) as f64).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn mismatched_views_rejected() {
        let rig = small_rig();
        let scene = plane_scene(2.0);
        let depths = capture_depths(&scene, &rig, &SensorModel::ideal());
        let novel = cam_at((0.0, 0.0, -0.1), (0.0, 0.0, 2.0), W, H, "novel");
        assert!(matches!(
            build_mpc(&depths[..3], &rig, &novel, &[0.0], 1),
            Err(VolumeError::ViewCountMismatch { .. })
        ));
        assert!(matches!(
            build_mpc(&depths, &rig, &novel, &[], 1),
            Err(VolumeError::BadOffsets)
        ));
        assert!(matches!(
            build_mpc(&depths, &rig, &novel, &[0.01, -0.01], 1),
            Err(VolumeError::BadOffsets)
        ));
    }

    /// Slanted plane, biased capture: each view's candidate segment along its
    /// own ray straddles the true plane when |bias| stays inside the offset
    /// span.
    #[test]
    fn biased_candidate_segments_straddle_plane() {
        let rig = small_rig();
        let a = 35f64.to_radians();
        let scene = Scene {
            primitives: vec![ScenePrimitive {
                shape: Shape::Plane {
                    normal: [a.sin(), 0.0, a.cos()],
                    offset: 2.0 * a.cos(),
                },
                albedo: [0.8; 3],
                texture: Texture::Solid,
                foreground: false,
            }],
            background: None,
            miss_color: [0.0; 3],
            shading: Shading::None,
        };
        let sensor = SensorModel {
            bias: BiasModel::constant(0.005), // inside the +-1 cm span
            noise_sigma: 0.0,
            seed: 0,
        };
        let depths = capture_depths(&scene, &rig, &sensor);
        let novel = cam_at((0.1, 0.05, -0.05), (0.0, 0.0, 2.0), W, H, "novel");
        let vol = build_mpc(&depths, &rig, &novel, &[-0.01, 0.0, 0.01], 1).unwrap();

        let plane_n = Vector3::new(a.sin(), 0.0, a.cos());
        let plane_d = 2.0 * a.cos();
        let mut tested = 0u64;
        let mut straddles = 0u64;
        for y in 0..H {
            for x in 0..W {
                for view in 0..4usize {
                    let first = vol.depth_at(view * 3, x, y);
                    let last = vol.depth_at(view * 3 + 2, x, y);
                    let (Some(d0), Some(d1)) = (first, last) else {
                        continue;
                    };
                    let u = x as f64 + 0.5;
                    let v = y as f64 + 0.5;
                    let p0 = novel.unproject(u, v, d0).unwrap();
                    let p1 = novel.unproject(u, v, d1).unwrap();
                    let s0 = plane_n.dot(&p0.coords) - plane_d;
                    let s1 = plane_n.dot(&p1.coords) - plane_d;
                    tested += 1;
                    if s0.min(s1) <= 1e-4 && s0.max(s1) >= -1e-4 {
                        straddles += 1;
                    }
                }
            }
        }
        assert!(tested > 1000);
        let frac = straddles as f64 / tested as f64;
        assert!(frac >= 0.99, "straddle fraction {frac}");
    }

    #[test]
    fn sweep_offsets_span_six_centimeters() {
        let rig = small_rig();
        let scene = plane_scene(2.0);
        let depths = capture_depths(&scene, &rig, &SensorModel::ideal());
        let novel = cam_at((0.0, 0.0, -0.1), (0.0, 0.0, 2.0), W, H, "novel");
        let vol = build_novel_view_sweep(&depths, &rig, &novel, 12, 0.01, 1).unwrap();
        assert_eq!(vol.num_layers(), 12);
        assert!((vol.plane_offset(0) + 0.055).abs() < 1e-12);
        assert!((vol.plane_offset(11) - 0.055).abs() < 1e-12);
        // Arithmetic layers wherever the center is valid.
        for y in (0..H).step_by(5) {
            for x in (0..W).step_by(7) {
                if vol.center().is_valid(x, y) {
                    for m in 0..12usize {
                        let expect = (vol.center().get(x, y) as f64 + vol.plane_offset(m)) as f32;
                        assert_eq!(vol.depth_at(m, x, y).unwrap() as f32, expect);
                    }
                }
            }
        }
    }

    #[test]
    fn single_view_sweep_center_is_rasterized_depth() {
        let cam = cam_at((0.0, 0.0, 0.0), (0.0, 0.0, 2.0), W, H, "in0");
        let scene = plane_scene(2.0);
        let depth = raycast_depth(&scene, &cam);
        let vol = build_novel_view_sweep(
            std::slice::from_ref(&depth),
            std::slice::from_ref(&cam),
            &cam,
            1,
            0.01,
            0,
        )
        .unwrap();
        for y in 0..H {
            for x in 0..W {
                if depth.is_valid(x, y) {
                    assert!((vol.center().get(x, y) - depth.get(x, y)).abs() < 1e-6);
                    assert!(
                        (vol.depth_at(0, x, y).unwrap() - depth.get(x, y) as f64).abs() < 1e-6
                    );
                }
            }
        }
    }

    #[test]
    fn unbiased_coverage_is_high_for_both_volumes() {
        let rig = small_rig();
        let scene = plane_scene(2.0);
        let depths = capture_depths(&scene, &rig, &SensorModel::ideal());
        let novel = cam_at((0.05, 0.02, -0.08), (0.0, 0.0, 2.0), W, H, "novel");
        let mpc = build_mpc(&depths, &rig, &novel, &[-0.01, 0.0, 0.01], 1).unwrap();
        let cov_mpc = coverage_fraction(&mpc, &scene, &novel, 0.002);
        assert!(cov_mpc >= 0.99, "mpc coverage {cov_mpc}");

        // The symmetric even-count schedule has no zero-offset plane (nearest
        // candidates sit at half a step), so the tight-tolerance check uses an
        // odd plane count; the default 12-plane sweep is covered at half the
        // plane spacing.
        let sweep13 = build_novel_view_sweep(&depths, &rig, &novel, 13, 0.01, 1).unwrap();
        let cov_sweep13 = coverage_fraction(&sweep13, &scene, &novel, 0.002);
        assert!(cov_sweep13 >= 0.99, "13-plane sweep coverage {cov_sweep13}");

        let sweep12 = build_novel_view_sweep(&depths, &rig, &novel, 12, 0.01, 1).unwrap();
        let cov_sweep12 = coverage_fraction(&sweep12, &scene, &novel, 0.0055);
        assert!(cov_sweep12 >= 0.99, "12-plane sweep coverage {cov_sweep12}");
    }

    #[test]
    fn empty_volume_covers_nothing() {
        let cam = cam_at((0.0, 0.0, 0.0), (0.0, 0.0, 2.0), 32, 24, "in0");
        let scene = plane_scene(2.0);
        let vol = MpcDepthVolume::from_parts(
            vec![INVALID_DEPTH; 32 * 24],
            vec![false; 32 * 24],
            vec![0.0],
            vec!["in0".into()],
            std::slice::from_ref(&cam),
            cam.clone(),
            32,
            24,
        );
        assert_eq!(coverage_fraction(&vol, &scene, &cam, 0.01), 0.0);
    }

    #[test]
    fn coverage_monotone_in_tolerance_and_candidates() {
        let rig = small_rig();
        let scene = plane_scene(2.0);
        let sensor = SensorModel {
            bias: BiasModel::constant(0.012),
            noise_sigma: 0.0,
            seed: 1,
        };
        let depths = capture_depths(&scene, &rig, &sensor);
        let novel = cam_at((0.05, 0.0, -0.1), (0.0, 0.0, 2.0), W, H, "novel");
        let wide = build_mpc(&depths, &rig, &novel, &[-0.01, 0.0, 0.01], 1).unwrap();
        let narrow = build_mpc(&depths, &rig, &novel, &[0.0], 1).unwrap();

        let c_small = coverage_fraction(&wide, &scene, &novel, 0.001);
        let c_big = coverage_fraction(&wide, &scene, &novel, 0.01);
        assert!(c_big >= c_small);

        let c_narrow = coverage_fraction(&narrow, &scene, &novel, 0.004);
        let c_wide = coverage_fraction(&wide, &scene, &novel, 0.004);
        assert!(c_wide >= c_narrow);
        // With 1.2 cm bias, the zero-offset layer alone misses at 4 mm but
        // the -1 cm layer recovers it.
        assert!(c_narrow < 0.05, "narrow coverage {c_narrow}");
        assert!(c_wide > 0.95, "wide coverage {c_wide}");
    }

    #[test]
    fn layers_carry_only_their_views_depths() {
        // Two views of fronto planes at different distances; handcrafted maps
        // keep per-view depths disjoint so provenance is visible in values.
        let cam0 = cam_at((0.0, 0.0, 0.0), (0.0, 0.0, 2.0), W, H, "in0");
        let cam1 = cam_at((0.05, 0.0, 0.0), (0.05, 0.0, 2.0), W, H, "in1");
        let d0 = DepthMap::constant(W, H, 2.0);
        let d1 = DepthMap::constant(W, H, 3.0);
        let novel = cam_at((0.02, 0.0, -0.05), (0.02, 0.0, 2.0), W, H, "novel");
        let vol = build_mpc(
            &[d0, d1],
            &[cam0, cam1],
            &novel,
            &[0.0],
            1,
        )
        .unwrap();
        assert_eq!(vol.num_layers(), 2);
        for y in 0..H {
            for x in 0..W {
                if let Some(d) = vol.depth_at(0, x, y) {
                    assert!((d - 2.05).abs() < 0.02, "layer 0 depth {d}");
                }
                if let Some(d) = vol.depth_at(1, x, y) {
                    assert!((d - 3.05).abs() < 0.02, "layer 1 depth {d}");
                }
            }
        }
    }

    #[test]
    fn offset_layers_are_monotone_at_fixed_source() {
        // Novel camera == input camera keeps the rasterized source pixel
        // stable, so candidate depth must be non-decreasing in the offset.
        let cam = cam_at((0.0, 0.0, 0.0), (0.0, 0.0, 2.0), W, H, "in0");
        let scene = plane_scene(2.0);
        let depth = raycast_depth(&scene, &cam);
        let vol = build_mpc(
            std::slice::from_ref(&depth),
            std::slice::from_ref(&cam),
            &cam,
            &[-0.01, 0.0, 0.01],
            0,
        )
        .unwrap();
        for y in 0..H {
            for x in 0..W {
                let ds: Vec<f64> = (0..3).filter_map(|n| vol.depth_at(n, x, y)).collect();
                for w in ds.windows(2) {
                    assert!(w[1] >= w[0] - 1e-9);
                }
            }
        }
    }
}
