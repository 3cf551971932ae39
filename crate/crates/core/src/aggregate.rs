//! Occlusion-aware multi-view aggregation.
//!
//! Each depth candidate is unprojected from the novel view and projected into
//! every input view. A view contributes only when the projection lands in
//! bounds and the candidate's projected depth is consistent with that view's
//! depth map (one-sided test with tolerance `eps_occ`: the candidate may sit
//! at or in front of the measured surface, not behind it). Features are
//! averaged and their cross-view variance recorded; low variance signals
//! multi-view photo-consistency. A pluggable estimator turns variance into
//! per-candidate opacity; the analytic default is `sigma = s * exp(-C/tau)`.
//!
//! Views are accumulated in ascending view-id order so results are invariant
//! to the order input views are supplied in.

pub use crate::image::FeatureImage;

use rayon::prelude::*;
use thiserror::Error;

use crate::geometry::{CameraModel, DepthMap};
use crate::volume::CandidateVolume;

#[derive(Debug, Error)]
pub enum AggregateError {
    #[error("{features} feature images / {depths} depth maps for {cameras} cameras")]
    ViewCountMismatch {
        features: usize,
        depths: usize,
        cameras: usize,
    },
    #[error("feature images must share one channel count")]
    MixedChannels,
    #[error("eps_occ must be positive, got {0}")]
    BadEpsOcc(f64),
    #[error("density parameters rejected: {0}")]
    BadDensityParams(String),
}

/// Per-candidate averaged features, aligned to the volume's layer order.
#[derive(Clone, Debug)]
pub struct FeatureVolume {
    pub values: Vec<f32>,
    pub layers: u32,
    pub width: u32,
    pub height: u32,
    pub channels: u32,
}

impl FeatureVolume {
    pub fn zeros(layers: u32, width: u32, height: u32, channels: u32) -> FeatureVolume {
        FeatureVolume {
            values: vec![
                0.0;
                layers as usize * width as usize * height as usize * channels as usize
            ],
            layers,
            width,
            height,
            channels,
        }
    }

    #[inline]
    pub fn index(&self, layer: usize, x: u32, y: u32) -> usize {
        ((layer * self.height as usize + y as usize) * self.width as usize + x as usize)
            * self.channels as usize
    }

    #[inline]
    pub fn feature(&self, layer: usize, x: u32, y: u32) -> &[f32] {
        let i = self.index(layer, x, y);
        &self.values[i..i + self.channels as usize]
    }
}

/// Per-candidate cross-view variance (mean over channels, population
/// normalization) plus the number of unoccluded views. Variance is defined
/// only where `view_count >= 2`; other entries hold zero and are masked by
/// the count.
#[derive(Clone, Debug)]
pub struct CostVolume {
    pub values: Vec<f32>,
    pub view_count: Vec<u32>,
    pub layers: u32,
    pub width: u32,
    pub height: u32,
}

impl CostVolume {
    #[inline]
    pub fn index(&self, layer: usize, x: u32, y: u32) -> usize {
        (layer * self.height as usize + y as usize) * self.width as usize + x as usize
    }

    #[inline]
    pub fn cost(&self, layer: usize, x: u32, y: u32) -> Option<f64> {
        let i = self.index(layer, x, y);
        (self.view_count[i] >= 2).then(|| self.values[i] as f64)
    }

    #[inline]
    pub fn views(&self, layer: usize, x: u32, y: u32) -> u32 {
        self.view_count[self.index(layer, x, y)]
    }
}

/// Non-negative per-candidate opacities, zero on invalid/masked candidates.
#[derive(Clone, Debug)]
pub struct DensityVolume {
    pub values: Vec<f32>,
    pub layers: u32,
    pub width: u32,
    pub height: u32,
}

impl DensityVolume {
    #[inline]
    pub fn index(&self, layer: usize, x: u32, y: u32) -> usize {
        (layer * self.height as usize + y as usize) * self.width as usize + x as usize
    }

    #[inline]
    pub fn sigma(&self, layer: usize, x: u32, y: u32) -> f32 {
        self.values[self.index(layer, x, y)]
    }
}

/// Depth-map lookup mode for the occlusion test (bilinear by default,
/// nearest available for ablation).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum DepthLookup {
    #[default]
    Bilinear,
    Nearest,
}

/// One-sided visibility decision: a view is unoccluded for a candidate iff
/// the candidate's depth in that view does not exceed the view's measured
/// depth by more than `eps_occ`.
#[inline]
pub fn occlusion_test(candidate_depth: f64, measured_depth: f64, eps_occ: f64) -> bool {
    candidate_depth <= measured_depth + eps_occ
}

/// Aggregates features and cross-view variance for every valid candidate of
/// `volume`. Candidates with no unoccluded view yield zeroed, masked entries.
pub fn aggregate_candidates(
    volume: &dyn CandidateVolume,
    input_cameras: &[CameraModel],
    input_features: &[FeatureImage],
    input_depths: &[DepthMap],
    eps_occ: f64,
) -> Result<(FeatureVolume, CostVolume), AggregateError> {
    aggregate_candidates_with(
        volume,
        input_cameras,
        input_features,
        input_depths,
        eps_occ,
        DepthLookup::Bilinear,
    )
}

/// [`aggregate_candidates`] with an explicit depth-lookup mode.
pub fn aggregate_candidates_with(
    volume: &dyn CandidateVolume,
    input_cameras: &[CameraModel],
    input_features: &[FeatureImage],
    input_depths: &[DepthMap],
    eps_occ: f64,
    lookup: DepthLookup,
) -> Result<(FeatureVolume, CostVolume), AggregateError> {
    if input_cameras.len() != input_features.len() || input_cameras.len() != input_depths.len() {
        return Err(AggregateError::ViewCountMismatch {
            features: input_features.len(),
            depths: input_depths.len(),
            cameras: input_cameras.len(),
        });
    }
    if !(eps_occ > 0.0) {
        return Err(AggregateError::BadEpsOcc(eps_occ));
    }
    let channels = input_features
        .first()
        .map(|f| f.channels())
        .unwrap_or(0);
    if input_features.iter().any(|f| f.channels() != channels) {
        return Err(AggregateError::MixedChannels);
    }

    let layers = volume.num_layers();
    let (w, h) = (volume.width(), volume.height());
    let novel = volume.novel_camera();
    let c = channels as usize;

    // Fixed accumulation order, independent of the supplied view order.
    let mut view_order: Vec<usize> = (0..input_cameras.len()).collect();
    view_order.sort_by(|a, b| input_cameras[*a].id.cmp(&input_cameras[*b].id));

    let mut features = FeatureVolume::zeros(layers as u32, w, h, channels);
    let mut costs = CostVolume {
        values: vec![0.0; layers * w as usize * h as usize],
        view_count: vec![0; layers * w as usize * h as usize],
        layers: layers as u32,
        width: w,
        height: h,
    };

    // Parallel over (layer, row) stripes; each stripe owns disjoint output.
    let row_feat = w as usize * c;
    let row_cost = w as usize;
    features
        .values
        .par_chunks_mut(row_feat)
        .zip(costs.values.par_chunks_mut(row_cost))
        .zip(costs.view_count.par_chunks_mut(row_cost))
        .enumerate()
        .for_each(|(stripe, ((feat_row, cost_row), count_row))| {
            let layer = stripe / h as usize;
            let y = (stripe % h as usize) as u32;
            let mut sample = vec![0.0f32; c];
            let mut sum = vec![0.0f64; c];
            let mut sumsq = vec![0.0f64; c];
            for x in 0..w {
                let Some(depth) = volume.depth_at(layer, x, y) else {
                    continue;
                };
                let Ok(world) = novel.unproject(x as f64 + 0.5, y as f64 + 0.5, depth) else {
                    continue;
                };
                sum.iter_mut().for_each(|v| *v = 0.0);
                sumsq.iter_mut().for_each(|v| *v = 0.0);
                let mut count = 0u32;
                for &vi in &view_order {
                    let cam = &input_cameras[vi];
                    let proj = cam.project(&world);
                    if !proj.in_front() {
                        continue;
                    }
                    let measured = match lookup {
                        DepthLookup::Bilinear => input_depths[vi].sample_bilinear(proj.u, proj.v),
                        DepthLookup::Nearest => {
                            let x = proj.u.floor();
                            let y = proj.v.floor();
                            if x < 0.0
                                || y < 0.0
                                || x >= input_depths[vi].width() as f64
                                || y >= input_depths[vi].height() as f64
                            {
                                None
                            } else {
                                let d = input_depths[vi].get(x as u32, y as u32);
                                crate::geometry::depth_is_valid(d).then_some(d as f64)
                            }
                        }
                    };
                    let Some(measured) = measured else {
                        continue;
                    };
                    if !occlusion_test(proj.z, measured, eps_occ) {
                        continue;
                    }
                    if !input_features[vi].sample_bilinear(proj.u, proj.v, &mut sample) {
                        continue;
                    }
                    for ch in 0..c {
                        let s = sample[ch] as f64;
                        sum[ch] += s;
                        sumsq[ch] += s * s;
                    }
                    count += 1;
                }
                if count == 0 {
                    continue;
                }
                let inv = 1.0 / count as f64;
                let base = x as usize * c;
                for ch in 0..c {
                    feat_row[base + ch] = (sum[ch] * inv) as f32;
                }
                count_row[x as usize] = count;
                if count >= 2 {
                    let mut var = 0.0f64;
                    for ch in 0..c {
                        let mean = sum[ch] * inv;
                        var += (sumsq[ch] * inv - mean * mean).max(0.0);
                    }
                    cost_row[x as usize] = (var / c as f64) as f32;
                }
            }
        });

    Ok((features, costs))
}

/// Parameters of the analytic density estimator.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DensityParams {
    /// Peak opacity assigned at zero variance.
    pub s: f64,
    /// Variance scale of the exponential falloff.
    pub tau: f64,
    /// Minimum unoccluded views for a candidate to carry opacity.
    pub min_views: u32,
    /// Occlusion-test tolerance in meters.
    pub eps_occ: f64,
}

impl Default for DensityParams {
    fn default() -> DensityParams {
        DensityParams {
            s: 10.0,
            tau: 0.005,
            min_views: 2,
            eps_occ: 0.02,
        }
    }
}

impl DensityParams {
    pub fn validate(&self) -> Result<(), AggregateError> {
        if !(self.s > 0.0) || !self.s.is_finite() {
            return Err(AggregateError::BadDensityParams(format!(
                "s must be positive, got {}",
                self.s
            )));
        }
        if !(self.tau > 0.0) || !self.tau.is_finite() {
            return Err(AggregateError::BadDensityParams(format!(
                "tau must be positive, got {}",
                self.tau
            )));
        }
        if self.min_views < 2 {
            return Err(AggregateError::BadDensityParams(format!(
                "min_views must be >= 2, got {}",
                self.min_views
            )));
        }
        if !(self.eps_occ > 0.0) {
            return Err(AggregateError::BadDensityParams(format!(
                "eps_occ must be positive, got {}",
                self.eps_occ
            )));
        }
        Ok(())
    }
}

mod sealed {
    pub trait Sealed {}
}

/// Variance-to-opacity estimator slot. Sealed: the analytic estimator is the
/// one implementation; a learned model would replace it behind this trait.
pub trait DensityEstimator: sealed::Sealed {
    fn estimate(
        &self,
        features: &FeatureVolume,
        costs: &CostVolume,
    ) -> Result<DensityVolume, AggregateError>;
}

/// `sigma = s * exp(-C / tau)` wherever the candidate has enough unoccluded
/// views; zero elsewhere. Monotone decreasing in the cost and bounded by `s`.
#[derive(Clone, Copy, Debug)]
pub struct AnalyticDensity {
    pub params: DensityParams,
}

impl sealed::Sealed for AnalyticDensity {}

impl DensityEstimator for AnalyticDensity {
    fn estimate(
        &self,
        _features: &FeatureVolume,
        costs: &CostVolume,
    ) -> Result<DensityVolume, AggregateError> {
        self.params.validate()?;
        let s = self.params.s;
        let tau = self.params.tau;
        let min_views = self.params.min_views;
        let values: Vec<f32> = costs
            .values
            .par_iter()
            .zip(costs.view_count.par_iter())
            .map(|(c, n)| {
                if *n >= min_views {
                    (s * (-*c as f64 / tau).exp()) as f32
                } else {
                    0.0
                }
            })
            .collect();
        Ok(DensityVolume {
            values,
            layers: costs.layers,
            width: costs.width,
            height: costs.height,
        })
    }
}

/// Estimates the density volume with the analytic default.
pub fn estimate_density(
    features: &FeatureVolume,
    costs: &CostVolume,
    params: DensityParams,
) -> Result<DensityVolume, AggregateError> {
    AnalyticDensity { params }.estimate(features, costs)
}
