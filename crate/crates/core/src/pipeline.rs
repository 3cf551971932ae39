//! End-to-end pipelines: synthetic capture, per-frame rendering with phase
//! timings, metric evaluation and the MPC-vs-sweep coverage experiment.
//!
//! Everything here is deterministic for a fixed configuration: noise comes
//! from counter-based keys, per-pixel reductions run in fixed order, and the
//! worker-thread count only partitions work, so outputs are bit-identical
//! across `jobs` settings.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

use crate::aggregate::{aggregate_candidates, estimate_density, AggregateError};
use crate::config::{
    CompareConfig, ConfigError, RigRef, RunConfig, SceneConfig, VolumeConfig, VolumeKind,
};
use crate::geometry::{depth_is_valid, CameraModel, DepthMap};
use crate::image::FeatureImage;
use crate::io::{
    self, read_pfm, read_ppm, read_sequence, write_pfm, write_ppm, IoError, SequencePaths,
    StoredSequence,
};
use crate::metrics::{self, MetricReport, MetricsError};
use crate::render::{
    composite, render_background, render_highres, sort_by_depth, temporal_average, volume_render,
    BlendResult, RenderError,
};
use crate::simulator::{
    capture_sequence, raycast, render_color, CameraRole, RigCamera, SimulatorError, ViewCapture,
};
use crate::volume::{
    build_mpc, build_novel_view_sweep, coverage_fraction_masked, CandidateVolume, VolumeError,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error(transparent)]
    Simulator(#[from] SimulatorError),
    #[error(transparent)]
    Volume(#[from] VolumeError),
    #[error(transparent)]
    Aggregate(#[from] AggregateError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("frame {frame}, camera {camera}: {message}")]
    Frame {
        frame: u32,
        camera: String,
        message: String,
    },
    #[error("{0}")]
    Other(String),
}

/// Runs `f` inside a rayon pool with `jobs` threads (0 = library default).
pub fn with_jobs<T: Send>(jobs: u32, f: impl FnOnce() -> T + Send) -> T {
    if jobs == 0 {
        f()
    } else {
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs as usize)
            .build()
            .expect("thread pool")
            .install(f)
    }
}

/// Per-frame wall-clock phase breakdown, milliseconds.
#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct PhaseTimings {
    pub volume_ms: f64,
    pub aggregate_ms: f64,
    pub density_ms: f64,
    pub render_ms: f64,
    pub background_ms: f64,
    pub highres_ms: f64,
    pub total_ms: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct FrameRecord {
    pub frame: u32,
    pub camera: String,
    pub timings: PhaseTimings,
}

#[derive(Clone, Debug, Serialize)]
pub struct RenderSummary {
    pub output_dir: PathBuf,
    pub records: Vec<FrameRecord>,
}

/// Simulates a scene config into a sequence directory. Writes `scene.json`
/// alongside the captured data so downstream experiments can re-derive the
/// analytic oracle.
pub fn run_simulate(cfg: &SceneConfig, root: &Path) -> Result<SequencePaths, PipelineError> {
    cfg.validate()?;
    let rig: Vec<RigCamera> = match &cfg.rig {
        RigRef::Path(p) => io::read_rig(p)?,
        RigRef::Inline(file) => file.to_rig()?,
    };
    let seq = capture_sequence(
        &cfg.scene,
        &rig,
        &cfg.sensor,
        cfg.num_frames,
        cfg.motion.as_ref(),
    )?;
    let hash = crate::io::sequence_content_hash(&cfg.canonical_bytes());
    let paths = io::write_sequence(root, &seq, cfg.sensor.seed, &hash)?;
    let scene_path = root.join("scene.json");
    std::fs::write(&scene_path, serde_json::to_vec_pretty(cfg).map_err(IoError::Json)?)
        .map_err(|e| IoError::io(&scene_path, e))?;
    Ok(paths)
}

fn build_volume(
    cfg: &VolumeConfig,
    input_depths: &[DepthMap],
    input_cameras: &[CameraModel],
    target: &CameraModel,
) -> Result<Box<dyn CandidateVolume>, VolumeError> {
    Ok(match cfg.kind {
        VolumeKind::Mpc => Box::new(build_mpc(
            input_depths,
            input_cameras,
            target,
            &cfg.offsets,
            cfg.splat_radius,
        )?),
        VolumeKind::Sweep => Box::new(build_novel_view_sweep(
            input_depths,
            input_cameras,
            target,
            cfg.sweep_planes,
            cfg.sweep_step,
            cfg.splat_radius,
        )?),
    })
}

/// One rendered frame: composited image, blend state and optional 2x pass.
pub struct FrameOutput {
    pub full: FeatureImage,
    pub blend: BlendResult,
    pub full_hi: Option<FeatureImage>,
    pub timings: PhaseTimings,
}

/// Renders a single frame of captured inputs into `target`. The full
/// pipeline: candidate volume, occlusion-aware aggregation, analytic density,
/// depth-sorted compositing, background warp and alpha blend.
#[allow(clippy::too_many_arguments)]
pub fn render_frame(
    run: &RunConfig,
    input_cameras: &[CameraModel],
    input_depths: &[DepthMap],
    input_colors: &[FeatureImage],
    background: &[ViewCapture],
    target: &CameraModel,
) -> Result<FrameOutput, PipelineError> {
    let t0 = Instant::now();
    let mut timings = PhaseTimings::default();

    let t = Instant::now();
    let volume = build_volume(&run.volume, input_depths, input_cameras, target)?;
    timings.volume_ms = t.elapsed().as_secs_f64() * 1e3;

    let t = Instant::now();
    let (features, costs) = aggregate_candidates(
        volume.as_ref(),
        input_cameras,
        input_colors,
        input_depths,
        run.density.eps_occ,
    )?;
    timings.aggregate_ms = t.elapsed().as_secs_f64() * 1e3;

    let t = Instant::now();
    let density = estimate_density(&features, &costs, run.density)?;
    timings.density_ms = t.elapsed().as_secs_f64() * 1e3;

    let t = Instant::now();
    let bg_depths: Vec<DepthMap> = background.iter().map(|v| v.depth.clone()).collect();
    let bg_colors: Vec<FeatureImage> = background.iter().map(|v| v.color.clone()).collect();
    let bgd = render_background(
        &bg_depths,
        input_cameras,
        target,
        &bg_colors,
        run.density.eps_occ,
        run.volume.splat_radius,
        &run.render.background_fill,
    );
    timings.background_ms = t.elapsed().as_secs_f64() * 1e3;

    let t = Instant::now();
    let sorted = sort_by_depth(volume.as_ref(), &features, &density)?;
    let blend = volume_render(&sorted);
    let full = composite(&blend, &bgd)?;
    timings.render_ms = t.elapsed().as_secs_f64() * 1e3;

    let full_hi = if run.render.highres {
        let t = Instant::now();
        let target_hi = target.scaled(2);
        let volume_hi = build_volume(&run.volume, input_depths, input_cameras, &target_hi)?;
        let (features_hi, _) = aggregate_candidates(
            volume_hi.as_ref(),
            input_cameras,
            input_colors,
            input_depths,
            run.density.eps_occ,
        )?;
        let bgd_hi = render_background(
            &bg_depths,
            input_cameras,
            &target_hi,
            &bg_colors,
            run.density.eps_occ,
            run.volume.splat_radius * 2 + 1,
            &run.render.background_fill,
        );
        let (full_hi, _) = render_highres(&density, volume_hi.as_ref(), &features_hi, &bgd_hi)?;
        timings.highres_ms = t.elapsed().as_secs_f64() * 1e3;
        Some(full_hi)
    } else {
        None
    };

    timings.total_ms = t0.elapsed().as_secs_f64() * 1e3;
    Ok(FrameOutput {
        full,
        blend,
        full_hi,
        timings,
    })
}

fn target_cameras(seq: &StoredSequence, cfg: &RunConfig) -> Vec<CameraModel> {
    use crate::config::RenderTargets;
    let mut out = Vec::new();
    for c in &seq.rig {
        let wanted = match cfg.render.targets {
            RenderTargets::Novel => c.role == CameraRole::Novel,
            RenderTargets::Groundtruth => c.role == CameraRole::Groundtruth,
            RenderTargets::Both => {
                c.role == CameraRole::Novel || c.role == CameraRole::Groundtruth
            }
        };
        if wanted {
            out.push(c.camera.clone());
        }
    }
    out
}

/// Renders every frame of a stored sequence at every target camera, writing
/// images, weight maps and peak-depth maps under `<output_dir>/renders/` and
/// a phase-timing log under `<output_dir>/logs/`. On failure a `_FAILED`
/// marker naming the offending frame is left in the output directory.
pub fn run_render(cfg: &RunConfig) -> Result<RenderSummary, PipelineError> {
    cfg.validate()?;
    std::fs::create_dir_all(&cfg.output_dir)
        .map_err(|e| IoError::io(&cfg.output_dir, e))?;
    match with_jobs(cfg.jobs, || render_all(cfg)) {
        Ok(summary) => Ok(summary),
        Err(err) => {
            let marker = cfg.output_dir.join("_FAILED");
            let _ = std::fs::write(&marker, format!("{err}\n"));
            Err(err)
        }
    }
}

fn render_all(cfg: &RunConfig) -> Result<RenderSummary, PipelineError> {
    let seq = read_sequence(&cfg.sequence_dir)?;
    let input_cameras = seq.input_cameras();
    let targets = target_cameras(&seq, cfg);
    if targets.is_empty() {
        return Err(PipelineError::Other(
            "rig has no camera matching render.targets".into(),
        ));
    }

    let renders_dir = cfg.output_dir.join("renders");
    let logs_dir = cfg.output_dir.join("logs");
    std::fs::create_dir_all(&renders_dir).map_err(|e| IoError::io(&renders_dir, e))?;
    std::fs::create_dir_all(&logs_dir).map_err(|e| IoError::io(&logs_dir, e))?;

    let mut records = Vec::new();
    for target in &targets {
        let cam_dir = renders_dir.join(&target.id);
        std::fs::create_dir_all(&cam_dir).map_err(|e| IoError::io(&cam_dir, e))?;
        let hi_dir = renders_dir.join(format!("{}_hi", target.id));
        if cfg.render.highres {
            std::fs::create_dir_all(&hi_dir).map_err(|e| IoError::io(&hi_dir, e))?;
        }

        let mut lowres = Vec::with_capacity(seq.frames.len());
        let mut highres = Vec::with_capacity(seq.frames.len());
        for frame in &seq.frames {
            let depths: Vec<DepthMap> = frame.inputs.iter().map(|v| v.depth.clone()).collect();
            let colors: Vec<FeatureImage> =
                frame.inputs.iter().map(|v| v.color.clone()).collect();
            let out = render_frame(
                cfg,
                &input_cameras,
                &depths,
                &colors,
                &seq.background,
                target,
            )
            .map_err(|e| PipelineError::Frame {
                frame: frame.t,
                camera: target.id.clone(),
                message: e.to_string(),
            })?;

            let weight = DepthMap::from_data(
                out.full.width(),
                out.full.height(),
                out.blend.weight_map.clone(),
            );
            write_pfm(&cam_dir.join(format!("weight_{}.pfm", frame.t)), &weight)?;
            write_pfm(
                &cam_dir.join(format!("depth_{}.pfm", frame.t)),
                &out.blend.peak_depth,
            )?;
            if cfg.render.dump_volumes {
                // Volumes are large; rebuilt here only when explicitly asked.
                let vol = build_mpc(
                    &depths,
                    &input_cameras,
                    target,
                    &cfg.volume.offsets,
                    cfg.volume.splat_radius,
                )?;
                io::write_mpc_volume(&cam_dir.join(format!("volume_{}.mpcv", frame.t)), &vol)?;
            }
            records.push(FrameRecord {
                frame: frame.t,
                camera: target.id.clone(),
                timings: out.timings,
            });
            lowres.push(out.full);
            if let Some(hi) = out.full_hi {
                highres.push(hi);
            }
        }

        let lowres = temporal_average(&lowres, cfg.render.temporal_window)?;
        for (frame, img) in seq.frames.iter().zip(&lowres) {
            write_ppm(&cam_dir.join(format!("frame_{}.ppm", frame.t)), img)?;
            if cfg.render.dump_float {
                for (ch, name) in ["r", "g", "b"].iter().enumerate() {
                    let plane: Vec<f32> = img
                        .data()
                        .chunks_exact(img.channels() as usize)
                        .map(|px| px[ch])
                        .collect();
                    write_pfm(
                        &cam_dir.join(format!("frame_{}_{}.pfm", frame.t, name)),
                        &DepthMap::from_data(img.width(), img.height(), plane),
                    )?;
                }
            }
        }
        if cfg.render.highres {
            let highres = temporal_average(&highres, cfg.render.temporal_window)?;
            for (frame, img) in seq.frames.iter().zip(&highres) {
                write_ppm(&hi_dir.join(format!("frame_{}.ppm", frame.t)), img)?;
            }
        }
    }

    let timing_csv = logs_dir.join("timings.csv");
    let mut csv = String::from(
        "frame,camera,volume_ms,aggregate_ms,density_ms,render_ms,background_ms,highres_ms,total_ms\n",
    );
    for r in &records {
        csv.push_str(&format!(
            "{},{},{:.3},{:.3},{:.3},{:.3},{:.3},{:.3},{:.3}\n",
            r.frame,
            r.camera,
            r.timings.volume_ms,
            r.timings.aggregate_ms,
            r.timings.density_ms,
            r.timings.render_ms,
            r.timings.background_ms,
            r.timings.highres_ms,
            r.timings.total_ms
        ));
    }
    std::fs::write(&timing_csv, csv).map_err(|e| IoError::io(&timing_csv, e))?;

    let echo = cfg.output_dir.join("run_config.json");
    cfg.save(&echo)?;

    Ok(RenderSummary {
        output_dir: cfg.output_dir.clone(),
        records,
    })
}

/// Foreground mask: accumulated blend weight above the configured threshold.
pub fn foreground_mask(weight: &DepthMap, threshold: f32) -> Vec<bool> {
    weight
        .data()
        .iter()
        .map(|w| depth_is_valid(*w).then_some(*w).unwrap_or(0.0) > threshold)
        .collect()
}

/// Pixels whose ground-truth color never changes across the sequence.
pub fn static_mask(frames: &[FeatureImage]) -> Vec<bool> {
    if frames.is_empty() {
        return Vec::new();
    }
    let len = frames[0].data().len();
    let pixels = frames[0].width() as usize * frames[0].height() as usize;
    let c = frames[0].channels() as usize;
    let mut mask = vec![true; pixels];
    for f in &frames[1..] {
        assert_eq!(f.data().len(), len);
        for p in 0..pixels {
            if !mask[p] {
                continue;
            }
            for ch in 0..c {
                if f.data()[p * c + ch] != frames[0].data()[p * c + ch] {
                    mask[p] = false;
                    break;
                }
            }
        }
    }
    mask
}

#[derive(Clone, Debug, Serialize)]
pub struct EvalRow {
    pub frame: u32,
    pub camera: String,
    pub psnr: f64,
    pub ssim: f64,
    pub psnr_foreground: f64,
    pub ssim_foreground: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct EvalSummary {
    pub rows: Vec<EvalRow>,
    /// Per-frame metrics averaged over frames and ground-truth cameras,
    /// plus sequence-level flicker.
    pub report: MetricReport,
}

/// Compares rendered ground-truth-camera frames against the captured clean
/// color, writing `metrics.json` and `metrics.csv` into the output directory.
pub fn run_eval(cfg: &RunConfig) -> Result<EvalSummary, PipelineError> {
    cfg.validate()?;
    let seq = read_sequence(&cfg.sequence_dir)?;
    let gt_cams = seq.cameras_with_role(CameraRole::Groundtruth);
    if gt_cams.is_empty() {
        return Err(PipelineError::Other(
            "sequence has no ground-truth cameras to evaluate against".into(),
        ));
    }
    let renders_dir = cfg.output_dir.join("renders");

    let mut rows = Vec::new();
    let mut report = MetricReport::default();
    let mut psnr_acc = Vec::new();
    let mut ssim_acc = Vec::new();
    let mut psnr_fg_acc = Vec::new();
    let mut ssim_fg_acc = Vec::new();
    let mut flicker_acc = Vec::new();

    for (g, cam) in gt_cams.iter().enumerate() {
        let cam_dir = renders_dir.join(&cam.id);
        let mut rendered_seq = Vec::with_capacity(seq.frames.len());
        let mut gt_seq = Vec::with_capacity(seq.frames.len());
        for frame in &seq.frames {
            let rendered = read_ppm(&cam_dir.join(format!("frame_{}.ppm", frame.t)))?;
            let weight = read_pfm(&cam_dir.join(format!("weight_{}.pfm", frame.t)))?;
            let gt = frame.gt_colors[g].clone();
            let fg = foreground_mask(&weight, cfg.metrics.foreground_threshold);

            let psnr = metrics::psnr(&rendered, &gt, None)?;
            let ssim = metrics::ssim(&rendered, &gt, None)?;
            let (psnr_fg, ssim_fg) = if fg.iter().any(|x| *x) {
                (
                    metrics::psnr(&rendered, &gt, Some(&fg))?,
                    metrics::ssim(&rendered, &gt, Some(&fg)).unwrap_or(f64::NAN),
                )
            } else {
                (f64::NAN, f64::NAN)
            };
            rows.push(EvalRow {
                frame: frame.t,
                camera: cam.id.clone(),
                psnr,
                ssim,
                psnr_foreground: psnr_fg,
                ssim_foreground: ssim_fg,
            });
            psnr_acc.push(psnr);
            ssim_acc.push(ssim);
            if psnr_fg.is_finite() {
                psnr_fg_acc.push(psnr_fg);
            }
            if ssim_fg.is_finite() {
                ssim_fg_acc.push(ssim_fg);
            }
            rendered_seq.push(rendered);
            gt_seq.push(gt);
        }
        if rendered_seq.len() >= 2 {
            let mask = static_mask(&gt_seq);
            if mask.iter().any(|x| *x) {
                let f = metrics::flicker(&rendered_seq, Some(&mask))?;
                report.push("flicker", f, format!("static:{}", cam.id));
                flicker_acc.push(f);
            }
        }
    }

    let mean = |v: &[f64]| -> f64 {
        if v.is_empty() {
            f64::NAN
        } else if v.iter().any(|x| x.is_infinite()) {
            f64::INFINITY
        } else {
            v.iter().sum::<f64>() / v.len() as f64
        }
    };
    report.push("psnr", mean(&psnr_acc), "full");
    report.push("ssim", mean(&ssim_acc), "full");
    report.push("psnr", mean(&psnr_fg_acc), "foreground");
    report.push("ssim", mean(&ssim_fg_acc), "foreground");
    if !flicker_acc.is_empty() {
        report.push("flicker", mean(&flicker_acc), "static");
    }

    let json_path = cfg.output_dir.join("metrics.json");
    std::fs::write(
        &json_path,
        serde_json::to_vec_pretty(&report).map_err(IoError::Json)?,
    )
    .map_err(|e| IoError::io(&json_path, e))?;

    let csv_path = cfg.output_dir.join("metrics.csv");
    let mut csv = String::from("frame,camera,psnr,ssim,psnr_foreground,ssim_foreground\n");
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.frame, r.camera, r.psnr, r.ssim, r.psnr_foreground, r.ssim_foreground
        ));
    }
    std::fs::write(&csv_path, csv).map_err(|e| IoError::io(&csv_path, e))?;

    Ok(EvalSummary { rows, report })
}

/// The slant-sweep suite: a tilted textured patch watched by a frontal
/// 4-camera rig while the novel camera orbits to a grazing angle.
pub mod preset {
    use super::*;
    use crate::geometry::{Intrinsics, Pose};
    use crate::io::RigFile;
    use crate::simulator::{
        BiasModel, Scene, ScenePrimitive, SensorModel, Shading, Shape, Texture,
    };
    use nalgebra::{Point3, Vector3};

    pub const SLANT_ANGLES_DEG: [u32; 18] = [
        0, 5, 10, 15, 20, 25, 30, 35, 40, 45, 50, 55, 60, 65, 70, 75, 80, 85,
    ];

    /// Sensor used by the slant-sweep suite: a constant 1.45 cm depth bias,
    /// no noise. The magnitude sits inside the +-1 cm MPC layer reach
    /// (residual 4.5 mm) while its novel-ray projection exceeds the sweep
    /// reach beyond ~79 degrees of slant, even after rasterization pulls the
    /// sweep's center map toward the camera.
    pub fn slant_sweep_sensor() -> SensorModel {
        SensorModel {
            bias: BiasModel::constant(0.0145),
            noise_sigma: 0.0,
            seed: 11,
        }
    }

    fn look_at(eye: Point3<f64>, target: Point3<f64>, intr: Intrinsics, id: &str) -> CameraModel {
        CameraModel::new(
            intr,
            Pose::look_at(eye, target, Vector3::new(0.0, 1.0, 0.0)).unwrap(),
            id,
        )
    }

    fn default_intrinsics(width: u32, height: u32) -> Intrinsics {
        // Field of view kept scale-invariant. The focal length sets how much
        // grazing-angle rasterization pulls depth toward the camera (about
        // 1.5 px of local depth slope); at 840 px per 640 the sweep volume's
        // coverage transition lands just above 80 degrees of slant.
        let f = 840.0 * width as f64 / 640.0;
        Intrinsics {
            fx: f,
            fy: f,
            cx: width as f64 / 2.0,
            cy: height as f64 / 2.0,
            width,
            height,
        }
    }

    /// One slant-suite scene: the patch center sits 2 m in front of the rig
    /// and the novel camera orbits by `angle_deg` in the x-z plane.
    pub fn slant_scene(angle_deg: u32, width: u32, height: u32) -> SceneConfig {
        let target = Point3::new(0.0, 0.0, 2.0);
        let intr = default_intrinsics(width, height);
        let mut cameras = vec![
            look_at(Point3::new(-0.35, 0.0, 0.0), target, intr, "in0"),
            look_at(Point3::new(0.35, 0.0, 0.0), target, intr, "in1"),
            look_at(Point3::new(0.0, -0.22, 0.0), target, intr, "in2"),
            look_at(Point3::new(0.0, 0.22, 0.0), target, intr, "in3"),
        ];
        let a = (angle_deg as f64).to_radians();
        let eye = Point3::new(-2.0 * a.sin(), 0.0, 2.0 - 2.0 * a.cos());
        cameras.push(look_at(eye, target, intr, "novel"));

        let mut rig: Vec<RigCamera> = cameras[..4]
            .iter()
            .map(|c| RigCamera {
                camera: c.clone(),
                role: CameraRole::Input,
            })
            .collect();
        rig.push(RigCamera {
            camera: cameras[4].clone(),
            role: CameraRole::Novel,
        });

        let scene = Scene {
            primitives: vec![ScenePrimitive {
                shape: Shape::Disk {
                    center: [0.0, 0.0, 2.0],
                    normal: [0.0, 0.0, -1.0],
                    radius: 0.15,
                },
                albedo: [0.85, 0.55, 0.30],
                texture: Texture::SineGrid {
                    amplitude: 0.7,
                    period: 0.08,
                },
                foreground: true,
            }],
            background: None,
            miss_color: [0.0; 3],
            shading: Shading::None,
        };
        SceneConfig {
            scene,
            sensor: slant_sweep_sensor(),
            rig: RigRef::Inline(RigFile::from_rig(&rig)),
            num_frames: 1,
            motion: None,
        }
    }

    /// Simulates the whole angle suite under `root/angle_<a>/`.
    pub fn generate_slant_sweep(
        root: &Path,
        width: u32,
        height: u32,
    ) -> Result<Vec<(u32, PathBuf)>, PipelineError> {
        let mut out = Vec::new();
        for a in SLANT_ANGLES_DEG {
            let dir = root.join(format!("angle_{a:02}"));
            let cfg = slant_scene(a, width, height);
            run_simulate(&cfg, &dir)?;
            out.push((a, dir));
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct AngleResult {
    pub angle_deg: u32,
    pub coverage_mpc: f64,
    pub coverage_sweep: f64,
    pub psnr_foreground_mpc: f64,
    pub psnr_foreground_sweep: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CompareSummary {
    pub rows: Vec<AngleResult>,
    pub mpc_covers_at_least_sweep_everywhere: bool,
}

fn suite_angle_dirs(root: &Path) -> Result<Vec<(u32, PathBuf)>, PipelineError> {
    let mut dirs = Vec::new();
    for entry in std::fs::read_dir(root).map_err(|e| IoError::io(root, e))? {
        let entry = entry.map_err(|e| IoError::io(root, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if let Some(rest) = name.strip_prefix("angle_") {
            if let Ok(angle) = rest.parse::<u32>() {
                dirs.push((angle, entry.path()));
            }
        }
    }
    if dirs.is_empty() {
        return Err(PipelineError::Other(format!(
            "{} holds no angle_<deg> sequence directories",
            root.display()
        )));
    }
    dirs.sort_by_key(|(a, _)| *a);
    Ok(dirs)
}

/// Runs the coverage experiment over a slant suite: per angle, build both
/// volumes from the same biased capture, measure surface coverage against the
/// analytic scene, render both pipelines and compare foreground PSNR against
/// the ray-cast ground truth. Writes `coverage.csv` and `summary.json`.
pub fn run_compare_sweep(cmp: &CompareConfig) -> Result<CompareSummary, PipelineError> {
    cmp.validate()?;
    std::fs::create_dir_all(&cmp.output_dir).map_err(|e| IoError::io(&cmp.output_dir, e))?;
    let dirs = suite_angle_dirs(&cmp.suite_dir)?;

    let rows = with_jobs(cmp.jobs, || -> Result<Vec<AngleResult>, PipelineError> {
        let mut rows = Vec::new();
        for (angle, dir) in &dirs {
            rows.push(compare_one_angle(cmp, *angle, dir)?);
        }
        Ok(rows)
    })?;

    let csv_path = cmp.output_dir.join("coverage.csv");
    let mut csv = String::from(
        "angle_deg,coverage_mpc,coverage_sweep,psnr_foreground_mpc,psnr_foreground_sweep\n",
    );
    for r in &rows {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            r.angle_deg, r.coverage_mpc, r.coverage_sweep, r.psnr_foreground_mpc, r.psnr_foreground_sweep
        ));
    }
    std::fs::write(&csv_path, csv).map_err(|e| IoError::io(&csv_path, e))?;

    let summary = CompareSummary {
        mpc_covers_at_least_sweep_everywhere: rows
            .iter()
            .all(|r| r.coverage_mpc >= r.coverage_sweep),
        rows,
    };
    let json_path = cmp.output_dir.join("summary.json");
    std::fs::write(
        &json_path,
        serde_json::to_vec_pretty(&summary).map_err(IoError::Json)?,
    )
    .map_err(|e| IoError::io(&json_path, e))?;
    Ok(summary)
}

fn compare_one_angle(
    cmp: &CompareConfig,
    angle: u32,
    dir: &Path,
) -> Result<AngleResult, PipelineError> {
    let seq = read_sequence(dir)?;
    let scene_path = dir.join("scene.json");
    let scene_cfg = SceneConfig::load(&scene_path)?;
    let scene = &scene_cfg.scene;

    let novel = seq
        .cameras_with_role(CameraRole::Novel)
        .into_iter()
        .next()
        .ok_or_else(|| PipelineError::Other(format!("{}: no novel camera", dir.display())))?;
    let input_cameras = seq.input_cameras();
    let frame = &seq.frames[0];
    let depths: Vec<DepthMap> = frame.inputs.iter().map(|v| v.depth.clone()).collect();
    let colors: Vec<FeatureImage> = frame.inputs.iter().map(|v| v.color.clone()).collect();

    let mpc = build_mpc(
        &depths,
        &input_cameras,
        &novel,
        &cmp.volume.offsets,
        cmp.volume.splat_radius,
    )?;
    let sweep = build_novel_view_sweep(
        &depths,
        &input_cameras,
        &novel,
        cmp.volume.sweep_planes,
        cmp.volume.sweep_step,
        cmp.volume.splat_radius,
    )?;

    // Oracle foreground mask, eroded so the 2 px silhouette band (inherently
    // quantized by splatting) is excluded from both coverage and PSNR. Both
    // volumes are judged on the same pixels.
    let (w, h) = (novel.width(), novel.height());
    let mut fg = vec![false; w as usize * h as usize];
    for y in 0..h {
        for x in 0..w {
            let (o, d) = novel.pixel_ray(x as f64 + 0.5, y as f64 + 0.5);
            if let Some(hit) = raycast(scene, &o, &d) {
                if hit.foreground {
                    fg[y as usize * w as usize + x as usize] = true;
                }
            }
        }
    }
    let fg = metrics::erode_mask(&fg, w, h, 2);
    if !fg.iter().any(|x| *x) {
        return Err(PipelineError::Other(format!(
            "angle {angle}: foreground mask empty after silhouette erosion"
        )));
    }

    let coverage_mpc = coverage_fraction_masked(&mpc, scene, &novel, cmp.tolerance, Some(&fg));
    let coverage_sweep = coverage_fraction_masked(&sweep, scene, &novel, cmp.tolerance, Some(&fg));
    let gt_color = render_color(scene, &novel);

    let mut run = RunConfig {
        sequence_dir: dir.to_path_buf(),
        output_dir: cmp.output_dir.clone(),
        volume: cmp.volume.clone(),
        density: cmp.density,
        render: crate::config::RenderConfig::default(),
        metrics: crate::config::MetricsConfig::default(),
        jobs: 0,
    };
    run.volume.kind = VolumeKind::Mpc;
    let out_mpc = render_frame(&run, &input_cameras, &depths, &colors, &seq.background, &novel)?;
    run.volume.kind = VolumeKind::Sweep;
    let out_sweep =
        render_frame(&run, &input_cameras, &depths, &colors, &seq.background, &novel)?;

    let psnr_mpc = metrics::psnr(&out_mpc.full, &gt_color, Some(&fg))?;
    let psnr_sweep = metrics::psnr(&out_sweep.full, &gt_color, Some(&fg))?;

    Ok(AngleResult {
        angle_deg: angle,
        coverage_mpc,
        coverage_sweep,
        psnr_foreground_mpc: psnr_mpc,
        psnr_foreground_sweep: psnr_sweep,
    })
}
