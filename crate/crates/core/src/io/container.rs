//! Binary volume containers, little-endian throughout.
//!
//! Depth volumes (magic `MPCV`, version 1):
//! `magic[4] | version u32 | K u32 | N u32 | H u32 | W u32 | offsets f32[N]`
//! followed by row-major f32 depths (layer-major, K*N*H*W) and bit-packed
//! validity (LSB-first within each byte, padded to a whole byte).
//!
//! Feature/cost/density volumes (magic `FCV1`, version 1):
//! `magic[4] | version u32 | kind u32 | L u32 | H u32 | W u32 | F u32`
//! followed by f32 values (L*H*W*F); cost volumes append u32 view counts
//! (L*H*W). Kinds: 1 = feature, 2 = cost, 3 = density.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::{check_payload, IoError};
use crate::aggregate::{CostVolume, DensityVolume, FeatureVolume};
use crate::volume::{CandidateVolume, MpcDepthVolume};

pub const FEATURE_KIND: u32 = 1;
pub const COST_KIND: u32 = 2;
pub const DENSITY_KIND: u32 = 3;

const MPC_MAGIC: &[u8; 4] = b"MPCV";
const FCV_MAGIC: &[u8; 4] = b"FCV1";
const VERSION: u32 = 1;

/// The serialized tensor of an MPC depth volume. Rig context (cameras, view
/// ids) lives in the rig file, not the container; reattach it via
/// [`MpcDepthVolume::from_parts`].
#[derive(Clone, Debug, PartialEq)]
pub struct MpcVolumeParts {
    pub views: u32,
    pub offsets: Vec<f32>,
    pub width: u32,
    pub height: u32,
    pub depths: Vec<f32>,
    pub valid: Vec<bool>,
}

/// Any volume the container format can hold.
#[derive(Clone, Debug)]
pub enum VolumeFile {
    Mpc(MpcVolumeParts),
    Feature(FeatureVolume),
    Cost(CostVolume),
    Density(DensityVolume),
}

struct Counter<W: Write> {
    inner: W,
}

impl<W: Write> Counter<W> {
    fn put(&mut self, path: &Path, bytes: &[u8]) -> Result<(), IoError> {
        self.inner.write_all(bytes).map_err(|e| IoError::io(path, e))
    }

    fn put_u32(&mut self, path: &Path, v: u32) -> Result<(), IoError> {
        self.put(path, &v.to_le_bytes())
    }
}

fn pack_bits(valid: &[bool]) -> Vec<u8> {
    let mut out = vec![0u8; valid.len().div_ceil(8)];
    for (i, v) in valid.iter().enumerate() {
        if *v {
            out[i / 8] |= 1 << (i % 8);
        }
    }
    out
}

fn unpack_bits(bytes: &[u8], count: usize) -> Vec<bool> {
    (0..count)
        .map(|i| bytes[i / 8] & (1 << (i % 8)) != 0)
        .collect()
}

/// Writes an MPC depth volume (tensor part only; see [`MpcVolumeParts`]).
pub fn write_mpc_volume(path: &Path, volume: &MpcDepthVolume) -> Result<(), IoError> {
    let file = File::create(path).map_err(|e| IoError::io(path, e))?;
    let mut w = Counter {
        inner: BufWriter::new(file),
    };
    w.put(path, MPC_MAGIC)?;
    w.put_u32(path, VERSION)?;
    w.put_u32(path, volume.num_views() as u32)?;
    w.put_u32(path, volume.num_offsets() as u32)?;
    w.put_u32(path, volume.height())?;
    w.put_u32(path, volume.width())?;
    for off in volume.offsets() {
        w.put(path, &(*off as f32).to_le_bytes())?;
    }
    for d in volume.depths_raw() {
        w.put(path, &d.to_le_bytes())?;
    }
    w.put(path, &pack_bits(volume.valid_raw()))?;
    w.inner.flush().map_err(|e| IoError::io(path, e))
}

fn write_fcv(
    path: &Path,
    kind: u32,
    layers: u32,
    height: u32,
    width: u32,
    channels: u32,
    values: &[f32],
    counts: Option<&[u32]>,
) -> Result<(), IoError> {
    let file = File::create(path).map_err(|e| IoError::io(path, e))?;
    let mut w = Counter {
        inner: BufWriter::new(file),
    };
    w.put(path, FCV_MAGIC)?;
    w.put_u32(path, VERSION)?;
    w.put_u32(path, kind)?;
    w.put_u32(path, layers)?;
    w.put_u32(path, height)?;
    w.put_u32(path, width)?;
    w.put_u32(path, channels)?;
    for v in values {
        w.put(path, &v.to_le_bytes())?;
    }
    if let Some(counts) = counts {
        for c in counts {
            w.put(path, &c.to_le_bytes())?;
        }
    }
    w.inner.flush().map_err(|e| IoError::io(path, e))
}

pub fn write_feature_volume(path: &Path, volume: &FeatureVolume) -> Result<(), IoError> {
    write_fcv(
        path,
        FEATURE_KIND,
        volume.layers,
        volume.height,
        volume.width,
        volume.channels,
        &volume.values,
        None,
    )
}

pub fn write_cost_volume(path: &Path, volume: &CostVolume) -> Result<(), IoError> {
    write_fcv(
        path,
        COST_KIND,
        volume.layers,
        volume.height,
        volume.width,
        1,
        &volume.values,
        Some(&volume.view_count),
    )
}

pub fn write_density_volume(path: &Path, volume: &DensityVolume) -> Result<(), IoError> {
    write_fcv(
        path,
        DENSITY_KIND,
        volume.layers,
        volume.height,
        volume.width,
        1,
        &volume.values,
        None,
    )
}

struct Reader<R: Read> {
    inner: R,
    offset: u64,
}

impl<R: Read> Reader<R> {
    fn exact(&mut self, path: &Path, buf: &mut [u8]) -> Result<(), IoError> {
        self.inner.read_exact(buf).map_err(|e| {
            if e.kind() == std::io::ErrorKind::UnexpectedEof {
                IoError::format(
                    path,
                    self.offset,
                    format!("truncated: expected {} more bytes", buf.len()),
                )
            } else {
                IoError::io(path, e)
            }
        })?;
        self.offset += buf.len() as u64;
        Ok(())
    }

    fn u32(&mut self, path: &Path) -> Result<u32, IoError> {
        let mut b = [0u8; 4];
        self.exact(path, &mut b)?;
        Ok(u32::from_le_bytes(b))
    }

    fn f32_vec(&mut self, path: &Path, count: u64) -> Result<Vec<f32>, IoError> {
        check_payload(path, count.saturating_mul(4))?;
        let mut bytes = vec![0u8; count as usize * 4];
        self.exact(path, &mut bytes)?;
        Ok(bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect())
    }
}

/// Reads any volume container, dispatching on the magic.
pub fn read_volume(path: &Path) -> Result<VolumeFile, IoError> {
    let file = File::open(path).map_err(|e| IoError::io(path, e))?;
    let mut r = Reader {
        inner: BufReader::new(file),
        offset: 0,
    };
    let mut magic = [0u8; 4];
    r.exact(path, &mut magic)?;
    let version = r.u32(path)?;
    if version != VERSION {
        return Err(IoError::format(
            path,
            4,
            format!("unsupported version {version}"),
        ));
    }
    match &magic {
        m if m == MPC_MAGIC => {
            let views = r.u32(path)?;
            let offsets_len = r.u32(path)?;
            let height = r.u32(path)?;
            let width = r.u32(path)?;
            if views == 0 || offsets_len == 0 {
                return Err(IoError::format(path, 8, "zero views or offsets"));
            }
            let count = views as u64 * offsets_len as u64 * height as u64 * width as u64;
            check_payload(path, count.saturating_mul(4))?;
            let offsets = r.f32_vec(path, offsets_len as u64)?;
            let depths = r.f32_vec(path, count)?;
            let mut bits = vec![0u8; (count as usize).div_ceil(8)];
            r.exact(path, &mut bits)?;
            Ok(VolumeFile::Mpc(MpcVolumeParts {
                views,
                offsets,
                width,
                height,
                depths,
                valid: unpack_bits(&bits, count as usize),
            }))
        }
        m if m == FCV_MAGIC => {
            let kind = r.u32(path)?;
            let layers = r.u32(path)?;
            let height = r.u32(path)?;
            let width = r.u32(path)?;
            let channels = r.u32(path)?;
            let cells = layers as u64 * height as u64 * width as u64;
            let values = r.f32_vec(path, cells.saturating_mul(channels as u64))?;
            match kind {
                FEATURE_KIND => Ok(VolumeFile::Feature(FeatureVolume {
                    values,
                    layers,
                    width,
                    height,
                    channels,
                })),
                COST_KIND => {
                    check_payload(path, cells.saturating_mul(4))?;
                    let mut bytes = vec![0u8; cells as usize * 4];
                    r.exact(path, &mut bytes)?;
                    let view_count = bytes
                        .chunks_exact(4)
                        .map(|c| u32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                        .collect();
                    Ok(VolumeFile::Cost(CostVolume {
                        values,
                        view_count,
                        layers,
                        width,
                        height,
                    }))
                }
                DENSITY_KIND => Ok(VolumeFile::Density(DensityVolume {
                    values,
                    layers,
                    width,
                    height,
                })),
                other => Err(IoError::format(path, 8, format!("unknown kind {other}"))),
            }
        }
        other => Err(IoError::format(
            path,
            0,
            format!("unknown magic {:?}", String::from_utf8_lossy(other)),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{CameraModel, Intrinsics, Pose, INVALID_DEPTH};

    fn tmp(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join("mpcview-container-tests");
        std::fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    fn sample_volume() -> MpcDepthVolume {
        let cam = CameraModel::new(
            Intrinsics {
                fx: 10.0,
                fy: 10.0,
                cx: 2.0,
                cy: 1.5,
                width: 4,
                height: 3,
            },
            Pose::identity(),
            "novel",
        );
        let mut depths = vec![INVALID_DEPTH; 2 * 2 * 4 * 3];
        let mut valid = vec![false; depths.len()];
        for (i, d) in depths.iter_mut().enumerate() {
            if i % 3 != 0 {
                *d = 1.0 + i as f32 * 0.01;
                valid[i] = true;
            }
        }
        let cam_b = CameraModel::new(cam.intrinsics, cam.pose, "b");
        MpcDepthVolume::from_parts(
            depths,
            valid,
            vec![-0.01, 0.01],
            vec!["a".into(), "b".into()],
            &[cam.clone(), cam_b],
            cam,
            4,
            3,
        )
    }

    #[test]
    fn mpc_round_trip_bit_exact() {
        let vol = sample_volume();
        let p = tmp("vol.mpcv");
        write_mpc_volume(&p, &vol).unwrap();
        match read_volume(&p).unwrap() {
            VolumeFile::Mpc(parts) => {
                assert_eq!(parts.views, 2);
                assert_eq!(parts.offsets, vec![-0.01f32, 0.01]);
                assert_eq!(parts.width, 4);
                assert_eq!(parts.height, 3);
                for (a, b) in parts.depths.iter().zip(vol.depths_raw()) {
                    assert_eq!(a.to_bits(), b.to_bits());
                }
                assert_eq!(parts.valid, vol.valid_raw());
            }
            other => panic!("wrong variant {other:?}"),
        }
    }

    #[test]
    fn mpc_file_size_is_header_plus_payload() {
        let vol = sample_volume();
        let p = tmp("size.mpcv");
        write_mpc_volume(&p, &vol).unwrap();
        let entries = 2 * 2 * 4 * 3u64;
        let expect = 4 + 4 + 4 * 4 // magic, version, K/N/H/W
            + 2 * 4               // offsets
            + entries * 4         // depths
            + entries.div_ceil(8); // validity bits
        assert_eq!(std::fs::metadata(&p).unwrap().len(), expect);
    }

    #[test]
    fn fcv_round_trips() {
        let feature = FeatureVolume {
            values: (0..2 * 3 * 4 * 3).map(|i| i as f32 * 0.25).collect(),
            layers: 2,
            width: 4,
            height: 3,
            channels: 3,
        };
        let p = tmp("f.fcv");
        write_feature_volume(&p, &feature).unwrap();
        match read_volume(&p).unwrap() {
            VolumeFile::Feature(f) => {
                assert_eq!(f.values, feature.values);
                assert_eq!(f.channels, 3);
            }
            other => panic!("wrong variant {other:?}"),
        }

        let cost = CostVolume {
            values: (0..24).map(|i| i as f32 * 0.5).collect(),
            view_count: (0..24).map(|i| i % 5).collect(),
            layers: 2,
            width: 4,
            height: 3,
        };
        let p = tmp("c.fcv");
        write_cost_volume(&p, &cost).unwrap();
        match read_volume(&p).unwrap() {
            VolumeFile::Cost(c) => {
                assert_eq!(c.values, cost.values);
                assert_eq!(c.view_count, cost.view_count);
            }
            other => panic!("wrong variant {other:?}"),
        }

        let density = DensityVolume {
            values: (0..24).map(|i| i as f32 * 0.1).collect(),
            layers: 2,
            width: 4,
            height: 3,
        };
        let p = tmp("d.fcv");
        write_density_volume(&p, &density).unwrap();
        match read_volume(&p).unwrap() {
            VolumeFile::Density(d) => assert_eq!(d.values, density.values),
            other => panic!("wrong variant {other:?}"),
        }
    }

    #[test]
    fn wrong_magic_and_truncation_rejected() {
        let p = tmp("bad.bin");
        std::fs::write(&p, b"NOPE\x01\x00\x00\x00").unwrap();
        assert!(matches!(read_volume(&p), Err(IoError::Format { .. })));

        let vol = sample_volume();
        let p2 = tmp("trunc.mpcv");
        write_mpc_volume(&p2, &vol).unwrap();
        let bytes = std::fs::read(&p2).unwrap();
        std::fs::write(&p2, &bytes[..bytes.len() / 2]).unwrap();
        assert!(matches!(read_volume(&p2), Err(IoError::Format { .. })));
    }

    #[test]
    fn oversized_header_rejected() {
        let p = tmp("huge.mpcv");
        let mut bytes = Vec::new();
        bytes.extend_from_slice(b"MPCV");
        bytes.extend_from_slice(&1u32.to_le_bytes());
        bytes.extend_from_slice(&1000u32.to_le_bytes());
        bytes.extend_from_slice(&1000u32.to_le_bytes());
        bytes.extend_from_slice(&1000u32.to_le_bytes());
        bytes.extend_from_slice(&1000u32.to_le_bytes());
        std::fs::write(&p, bytes).unwrap();
        assert!(matches!(read_volume(&p), Err(IoError::TooLarge { .. })));
    }
}
