//! Sequence directory layout:
//!
//! ```text
//! <root>/
//!   rig.json                     calibration (all roles)
//!   meta.json                    {frames, seed, scene_hash}
//!   scene.json                   scene description (provenance, optional)
//!   background/view_<k>.pfm/.ppm background pre-capture per input view
//!   frames/<t>/view_<k>.pfm/.ppm sensor-perturbed input captures
//!   frames/<t>/gt_<g>.ppm        clean ground-truth color
//! ```
//!
//! `<k>` indexes input cameras in rig order, `<g>` ground-truth cameras.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{read_pfm, read_ppm, read_rig, write_pfm, write_ppm, write_rig, IoError};
use crate::image::FeatureImage;
use crate::simulator::{CameraRole, FrameSequence, RigCamera, ViewCapture};

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SequenceMeta {
    pub frames: u32,
    pub seed: u64,
    pub scene_hash: String,
}

/// Filesystem locations of a written sequence.
#[derive(Clone, Debug)]
pub struct SequencePaths {
    pub root: PathBuf,
    pub rig: PathBuf,
    pub meta: PathBuf,
}

/// A sequence reloaded from disk. Ground-truth views carry color only (the
/// on-disk layout stores no ground-truth depth).
#[derive(Clone, Debug)]
pub struct StoredFrame {
    pub t: u32,
    pub inputs: Vec<ViewCapture>,
    pub gt_colors: Vec<FeatureImage>,
}

#[derive(Clone, Debug)]
pub struct StoredSequence {
    pub rig: Vec<RigCamera>,
    pub background: Vec<ViewCapture>,
    pub frames: Vec<StoredFrame>,
    pub meta: SequenceMeta,
}

impl StoredSequence {
    pub fn input_cameras(&self) -> Vec<crate::geometry::CameraModel> {
        self.rig
            .iter()
            .filter(|c| c.role == CameraRole::Input)
            .map(|c| c.camera.clone())
            .collect()
    }

    pub fn cameras_with_role(&self, role: CameraRole) -> Vec<crate::geometry::CameraModel> {
        self.rig
            .iter()
            .filter(|c| c.role == role)
            .map(|c| c.camera.clone())
            .collect()
    }
}

/// FNV-1a over canonical scene bytes; enough to detect config drift.
pub fn sequence_content_hash(bytes: &[u8]) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    format!("{h:016x}")
}

/// Writes a captured sequence to `root`, creating the directory tree.
pub fn write_sequence(
    root: &Path,
    seq: &FrameSequence,
    seed: u64,
    scene_hash: &str,
) -> Result<SequencePaths, IoError> {
    std::fs::create_dir_all(root).map_err(|e| IoError::io(root, e))?;
    let rig_path = root.join("rig.json");
    write_rig(&rig_path, &seq.rig)?;

    let bg_dir = root.join("background");
    std::fs::create_dir_all(&bg_dir).map_err(|e| IoError::io(&bg_dir, e))?;
    for (k, view) in seq.background.iter().enumerate() {
        write_pfm(&bg_dir.join(format!("view_{k}.pfm")), &view.depth)?;
        write_ppm(&bg_dir.join(format!("view_{k}.ppm")), &view.color)?;
    }

    for frame in &seq.frames {
        let dir = root.join("frames").join(frame.t.to_string());
        std::fs::create_dir_all(&dir).map_err(|e| IoError::io(&dir, e))?;
        for (k, view) in frame.inputs.iter().enumerate() {
            write_pfm(&dir.join(format!("view_{k}.pfm")), &view.depth)?;
            write_ppm(&dir.join(format!("view_{k}.ppm")), &view.color)?;
        }
        for (g, view) in frame.groundtruth.iter().enumerate() {
            write_ppm(&dir.join(format!("gt_{g}.ppm")), &view.color)?;
        }
    }

    let meta = SequenceMeta {
        frames: seq.frames.len() as u32,
        seed,
        scene_hash: scene_hash.to_string(),
    };
    let meta_path = root.join("meta.json");
    std::fs::write(&meta_path, serde_json::to_string_pretty(&meta)?)
        .map_err(|e| IoError::io(&meta_path, e))?;

    Ok(SequencePaths {
        root: root.to_path_buf(),
        rig: rig_path,
        meta: meta_path,
    })
}

/// Reads a sequence tree back, validating that every frame directory holds
/// all input views and that meta.json agrees with the directory count.
pub fn read_sequence(root: &Path) -> Result<StoredSequence, IoError> {
    let rig = read_rig(&root.join("rig.json"))?;
    let meta_path = root.join("meta.json");
    let meta: SequenceMeta = serde_json::from_str(
        &std::fs::read_to_string(&meta_path).map_err(|e| IoError::io(&meta_path, e))?,
    )?;

    let num_inputs = rig.iter().filter(|c| c.role == CameraRole::Input).count();
    let num_gt = rig
        .iter()
        .filter(|c| c.role == CameraRole::Groundtruth)
        .count();

    let bg_dir = root.join("background");
    let mut background = Vec::with_capacity(num_inputs);
    for k in 0..num_inputs {
        background.push(ViewCapture {
            depth: read_pfm(&bg_dir.join(format!("view_{k}.pfm")))?,
            color: read_ppm(&bg_dir.join(format!("view_{k}.ppm")))?,
        });
    }

    let frames_dir = root.join("frames");
    let mut indices: Vec<u32> = std::fs::read_dir(&frames_dir)
        .map_err(|e| IoError::io(&frames_dir, e))?
        .filter_map(|entry| entry.ok())
        .filter_map(|entry| entry.file_name().to_string_lossy().parse::<u32>().ok())
        .collect();
    indices.sort_unstable();
    if indices.len() != meta.frames as usize {
        return Err(IoError::BadLayout(format!(
            "meta.json declares {} frames but {} frame directories exist",
            meta.frames,
            indices.len()
        )));
    }

    let mut frames = Vec::with_capacity(indices.len());
    for t in indices {
        let dir = frames_dir.join(t.to_string());
        let mut inputs = Vec::with_capacity(num_inputs);
        for k in 0..num_inputs {
            let pfm = dir.join(format!("view_{k}.pfm"));
            if !pfm.exists() {
                return Err(IoError::BadLayout(format!(
                    "frame {t} is missing input view {k}"
                )));
            }
            inputs.push(ViewCapture {
                depth: read_pfm(&pfm)?,
                color: read_ppm(&dir.join(format!("view_{k}.ppm")))?,
            });
        }
        let mut gt_colors = Vec::with_capacity(num_gt);
        for g in 0..num_gt {
            gt_colors.push(read_ppm(&dir.join(format!("gt_{g}.ppm")))?);
        }
        frames.push(StoredFrame { t, inputs, gt_colors });
    }

    Ok(StoredSequence {
        rig,
        background,
        frames,
        meta,
    })
}
