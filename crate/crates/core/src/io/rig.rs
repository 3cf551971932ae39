//! JSON rig calibration files.
//!
//! Schema: `{"cameras": [{id, fx, fy, cx, cy, width, height,
//! rotation: [9 row-major numbers], translation: [3], role}]}` with roles
//! `input`, `novel` or `groundtruth`. Units are pixels and meters. Values
//! round-trip exactly (serde_json emits shortest-round-trip decimals).

use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::IoError;
use crate::geometry::{CameraModel, Intrinsics, Pose};
use crate::simulator::{CameraRole, RigCamera};

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct RigEntry {
    pub id: String,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
    /// Row-major camera-to-world rotation.
    pub rotation: [f64; 9],
    /// Camera origin in world coordinates, meters.
    pub translation: [f64; 3],
    pub role: CameraRole,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct RigFile {
    pub cameras: Vec<RigEntry>,
}

impl RigEntry {
    pub fn from_camera(camera: &CameraModel, role: CameraRole) -> RigEntry {
        let r = camera.pose.rotation();
        let t = camera.pose.translation();
        RigEntry {
            id: camera.id.clone(),
            fx: camera.intrinsics.fx,
            fy: camera.intrinsics.fy,
            cx: camera.intrinsics.cx,
            cy: camera.intrinsics.cy,
            width: camera.intrinsics.width,
            height: camera.intrinsics.height,
            rotation: [
                r[(0, 0)],
                r[(0, 1)],
                r[(0, 2)],
                r[(1, 0)],
                r[(1, 1)],
                r[(1, 2)],
                r[(2, 0)],
                r[(2, 1)],
                r[(2, 2)],
            ],
            translation: [t.x, t.y, t.z],
            role,
        }
    }

    pub fn to_camera(&self) -> Result<RigCamera, IoError> {
        let intr = Intrinsics {
            fx: self.fx,
            fy: self.fy,
            cx: self.cx,
            cy: self.cy,
            width: self.width,
            height: self.height,
        };
        intr.validate().map_err(|e| IoError::BadCamera {
            id: self.id.clone(),
            message: e.to_string(),
        })?;
        let r = self.rotation;
        let rotation = Matrix3::new(r[0], r[1], r[2], r[3], r[4], r[5], r[6], r[7], r[8]);
        let pose = Pose::new(rotation, Vector3::from_column_slice(&self.translation)).map_err(
            |e| IoError::BadCamera {
                id: self.id.clone(),
                message: e.to_string(),
            },
        )?;
        Ok(RigCamera {
            camera: CameraModel::new(intr, pose, self.id.clone()),
            role: self.role,
        })
    }
}

impl RigFile {
    pub fn from_rig(rig: &[RigCamera]) -> RigFile {
        RigFile {
            cameras: rig
                .iter()
                .map(|c| RigEntry::from_camera(&c.camera, c.role))
                .collect(),
        }
    }

    pub fn to_rig(&self) -> Result<Vec<RigCamera>, IoError> {
        self.cameras.iter().map(|e| e.to_camera()).collect()
    }
}

pub fn read_rig(path: &Path) -> Result<Vec<RigCamera>, IoError> {
    let text = std::fs::read_to_string(path).map_err(|e| IoError::io(path, e))?;
    let file: RigFile = serde_json::from_str(&text)?;
    file.to_rig()
}

pub fn write_rig(path: &Path, rig: &[RigCamera]) -> Result<(), IoError> {
    let file = RigFile::from_rig(rig);
    let text = serde_json::to_string_pretty(&file)?;
    std::fs::write(path, text).map_err(|e| IoError::io(path, e))
}
