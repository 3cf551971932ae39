//! Bit-exact file formats: PFM depth maps, PPM color images, JSON rig
//! calibration, binary volume containers and the sequence directory layout.
//!
//! This module is the single authority on byte layouts. All binary formats
//! are little-endian with explicit magic and version fields. Readers never
//! trust header-declared sizes beyond a configurable cap (default 1 GiB), so
//! malformed input cannot trigger unbounded allocation.

mod container;
mod pfm;
mod ppm;
mod rig;
mod sequence;

pub use container::{
    read_volume, write_cost_volume, write_density_volume, write_feature_volume, write_mpc_volume,
    MpcVolumeParts, VolumeFile, COST_KIND, DENSITY_KIND, FEATURE_KIND,
};
pub use pfm::{read_pfm, write_pfm};
pub use ppm::{read_ppm, write_ppm};
pub use rig::{read_rig, write_rig, RigEntry, RigFile};
pub use sequence::{
    read_sequence, sequence_content_hash, write_sequence, SequenceMeta, SequencePaths,
    StoredFrame, StoredSequence,
};

use thiserror::Error;

/// Upper bound on any single payload a reader will allocate.
pub const MAX_PAYLOAD_BYTES: u64 = 1 << 30;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    File {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}: format error at byte {offset}: {message}")]
    Format {
        path: String,
        offset: u64,
        message: String,
    },
    #[error("{path}: declared payload of {declared} bytes exceeds the {cap} byte cap")]
    TooLarge { path: String, declared: u64, cap: u64 },
    #[error("camera {id}: {message}")]
    BadCamera { id: String, message: String },
    #[error("{0}")]
    BadLayout(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl IoError {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> IoError {
        IoError::File {
            path: path.display().to_string(),
            source,
        }
    }

    pub(crate) fn format(path: &std::path::Path, offset: u64, message: impl Into<String>) -> IoError {
        IoError::Format {
            path: path.display().to_string(),
            offset,
            message: message.into(),
        }
    }
}

/// Guards payload allocations against hostile headers.
pub(crate) fn check_payload(path: &std::path::Path, declared: u64) -> Result<(), IoError> {
    if declared > MAX_PAYLOAD_BYTES {
        return Err(IoError::TooLarge {
            path: path.display().to_string(),
            declared,
            cap: MAX_PAYLOAD_BYTES,
        });
    }
    Ok(())
}
