//! Run and scene configuration files (JSON), shared by the pipeline and the
//! CLI. Configs round-trip losslessly through serde and validate their
//! numeric ranges up front.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aggregate::DensityParams;
use crate::io::RigFile;
use crate::simulator::{Motion, Scene, SensorModel};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config rejected: {0}")]
    Invalid(String),
    #[error("{path}: {source}")]
    File {
        path: String,
        source: std::io::Error,
    },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

fn read_text(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|e| ConfigError::File {
        path: path.display().to_string(),
        source: e,
    })
}

/// Which volume construction the render pipeline uses.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum VolumeKind {
    #[default]
    Mpc,
    Sweep,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VolumeConfig {
    pub kind: VolumeKind,
    /// MPC depth offsets in meters, ascending.
    pub offsets: Vec<f64>,
    /// Sweep plane count and spacing (baseline volume).
    pub sweep_planes: u32,
    pub sweep_step: f64,
    pub splat_radius: u32,
}

impl Default for VolumeConfig {
    fn default() -> VolumeConfig {
        VolumeConfig {
            kind: VolumeKind::Mpc,
            offsets: vec![-0.01, 0.0, 0.01],
            sweep_planes: 12,
            sweep_step: 0.01,
            splat_radius: 1,
        }
    }
}

/// Which rig cameras the renderer targets.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RenderTargets {
    Novel,
    Groundtruth,
    #[default]
    Both,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenderConfig {
    /// Render a 2x-resolution pass with the upsampled density volume.
    pub highres: bool,
    /// Odd sliding-window size for output stabilization (1 = off).
    pub temporal_window: u32,
    pub background_fill: [f32; 3],
    pub targets: RenderTargets,
    /// Also persist the per-frame volumes next to the images.
    pub dump_volumes: bool,
    /// Also write rendered images as per-channel float PFMs.
    #[serde(default)]
    pub dump_float: bool,
}

impl Default for RenderConfig {
    fn default() -> RenderConfig {
        RenderConfig {
            highres: false,
            temporal_window: 1,
            background_fill: [0.0; 3],
            targets: RenderTargets::Both,
            dump_volumes: false,
            dump_float: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsConfig {
    /// Accumulated-weight threshold for the foreground mask.
    pub foreground_threshold: f32,
    /// Pixels eroded from pixel-exact comparisons at silhouettes.
    pub silhouette_band: u32,
}

impl Default for MetricsConfig {
    fn default() -> MetricsConfig {
        MetricsConfig {
            foreground_threshold: 0.5,
            silhouette_band: 2,
        }
    }
}

/// Top-level run configuration consumed by `render`, `eval` and
/// `compare-sweep`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, Default)]
pub struct RunConfig {
    pub sequence_dir: PathBuf,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub volume: VolumeConfig,
    #[serde(default)]
    pub density: DensityParams,
    #[serde(default)]
    pub render: RenderConfig,
    #[serde(default)]
    pub metrics: MetricsConfig,
    /// Worker threads (0 = library default).
    #[serde(default)]
    pub jobs: u32,
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.volume.offsets.is_empty()
            || self.volume.offsets.windows(2).any(|w| w[0] > w[1])
        {
            return Err(ConfigError::Invalid(
                "volume.offsets must be non-empty and ascending".into(),
            ));
        }
        if self.volume.sweep_planes == 0 || !(self.volume.sweep_step > 0.0) {
            return Err(ConfigError::Invalid(
                "volume.sweep_planes must be >= 1 with a positive step".into(),
            ));
        }
        if self.volume.splat_radius > 8 {
            return Err(ConfigError::Invalid(
                "volume.splat_radius above 8 is unsupported".into(),
            ));
        }
        self.density
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.render.temporal_window == 0 || self.render.temporal_window % 2 == 0 {
            return Err(ConfigError::Invalid(
                "render.temporal_window must be odd".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.metrics.foreground_threshold) {
            return Err(ConfigError::Invalid(
                "metrics.foreground_threshold must be in [0,1]".into(),
            ));
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
        let cfg: RunConfig = serde_json::from_str(&read_text(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn save(&self, path: &Path) -> Result<(), ConfigError> {
        std::fs::write(path, serde_json::to_string_pretty(self)?).map_err(|e| {
            ConfigError::File {
                path: path.display().to_string(),
                source: e,
            }
        })
    }
}

/// Configuration of the MPC-vs-sweep coverage experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareConfig {
    /// Root holding `angle_<deg>/` sequence directories.
    pub suite_dir: PathBuf,
    pub output_dir: PathBuf,
    /// Coverage tolerance in meters.
    pub tolerance: f64,
    #[serde(default)]
    pub volume: VolumeConfig,
    #[serde(default)]
    pub density: DensityParams,
    #[serde(default)]
    pub jobs: u32,
}

impl CompareConfig {
    pub fn new(suite_dir: PathBuf, output_dir: PathBuf) -> CompareConfig {
        CompareConfig {
            suite_dir,
            output_dir,
            tolerance: 0.005,
            volume: VolumeConfig::default(),
            density: DensityParams::default(),
            jobs: 0,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.tolerance > 0.0) {
            return Err(ConfigError::Invalid("tolerance must be positive".into()));
        }
        if self.volume.offsets.is_empty() {
            return Err(ConfigError::Invalid("volume.offsets must be non-empty".into()));
        }
        self.density
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))
    }
}

/// Rig reference inside a scene config: a path to a calibration file or an
/// inline camera list.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RigRef {
    Path(PathBuf),
    Inline(RigFile),
}

/// Scene description consumed by `simulate`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneConfig {
    #[serde(flatten)]
    pub scene: Scene,
    pub sensor: SensorModel,
    pub rig: RigRef,
    pub num_frames: u32,
    #[serde(default)]
    pub motion: Option<Motion>,
}

impl SceneConfig {
    pub fn load(path: &Path) -> Result<SceneConfig, ConfigError> {
        let cfg: SceneConfig = serde_json::from_str(&read_text(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.num_frames == 0 {
            return Err(ConfigError::Invalid("num_frames must be >= 1".into()));
        }
        self.scene
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if !(self.sensor.noise_sigma >= 0.0) {
            return Err(ConfigError::Invalid("noise_sigma must be >= 0".into()));
        }
        Ok(())
    }

    /// Canonical JSON bytes used for the scene hash in meta.json.
    pub fn canonical_bytes(&self) -> Vec<u8> {
        serde_json::to_vec(self).expect("scene config serializes")
    }
}
