//! Depth-sorted volumetric compositing and background blending.
//!
//! Candidates are sorted per pixel by depth (stable, invalid slots last with
//! zero opacity) and composited front to back with the standard transmittance
//! recursion: `T_1 = 1`, `T_i = exp(-sum_{j<i} sigma_j)`, contribution
//! `T_i * (1 - exp(-sigma_i)) * f_i`. The accumulated blend weight serves as
//! the foreground alpha when compositing over the warped background.

use rayon::prelude::*;
use thiserror::Error;

use crate::aggregate::{DensityVolume, FeatureVolume};
use crate::geometry::{
    depth_is_valid, lift_depth_map, rasterize_merged, CameraModel, DepthMap, INVALID_DEPTH,
};
use crate::image::FeatureImage;
use crate::volume::CandidateVolume;

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("volume and {what} shapes disagree: {got} vs {want}")]
    ShapeMismatch {
        what: &'static str,
        got: String,
        want: String,
    },
    #[error("temporal window must be odd, got {0}")]
    EvenWindow(u32),
    #[error("high-resolution inputs must be exactly 2x the density volume")]
    ResolutionMismatch,
}

/// Per-pixel depth-ascending candidate permutation with the feature and
/// density volumes pre-gathered in that order.
#[derive(Clone, Debug)]
pub struct SortedVolumes {
    /// Candidate index per (pixel, rank), `perm[pixel * layers + rank]`.
    pub perm: Vec<u32>,
    /// Number of valid candidates per pixel; invalid ones rank last.
    pub valid_count: Vec<u32>,
    pub depths: Vec<f32>,
    pub sigmas: Vec<f32>,
    pub features: Vec<f32>,
    pub layers: u32,
    pub width: u32,
    pub height: u32,
    pub channels: u32,
}

/// Blended foreground feature image plus the accumulated blend weight map.
#[derive(Clone, Debug)]
pub struct BlendResult {
    pub feature_image: FeatureImage,
    pub weight_map: Vec<f32>,
    /// Depth of the candidate with the largest blend weight per pixel;
    /// invalid where no candidate contributed.
    pub peak_depth: DepthMap,
}

fn check_aligned(
    volume: &dyn CandidateVolume,
    features: &FeatureVolume,
    density: &DensityVolume,
) -> Result<(), RenderError> {
    let want = (
        volume.num_layers() as u32,
        volume.width(),
        volume.height(),
    );
    let got_f = (features.layers, features.width, features.height);
    if got_f != want {
        return Err(RenderError::ShapeMismatch {
            what: "feature volume",
            got: format!("{got_f:?}"),
            want: format!("{want:?}"),
        });
    }
    let got_d = (density.layers, density.width, density.height);
    if got_d != want {
        return Err(RenderError::ShapeMismatch {
            what: "density volume",
            got: format!("{got_d:?}"),
            want: format!("{want:?}"),
        });
    }
    Ok(())
}

/// Stable per-pixel sort of candidates by ascending depth. Ties keep the
/// camera-then-offset layer order; invalid candidates append after the valid
/// prefix with zero opacity.
pub fn sort_by_depth(
    volume: &dyn CandidateVolume,
    features: &FeatureVolume,
    density: &DensityVolume,
) -> Result<SortedVolumes, RenderError> {
    check_aligned(volume, features, density)?;
    let layers = volume.num_layers();
    let (w, h) = (volume.width(), volume.height());
    let c = features.channels as usize;
    let pixels = w as usize * h as usize;

    let mut out = SortedVolumes {
        perm: vec![0; pixels * layers],
        valid_count: vec![0; pixels],
        depths: vec![INVALID_DEPTH; pixels * layers],
        sigmas: vec![0.0; pixels * layers],
        features: vec![0.0; pixels * layers * c],
        layers: layers as u32,
        width: w,
        height: h,
        channels: features.channels,
    };

    let plane = pixels;
    let feat_values = &features.values;
    let sig_values = &density.values;

    out.perm
        .par_chunks_mut(layers)
        .zip(out.depths.par_chunks_mut(layers))
        .zip(out.sigmas.par_chunks_mut(layers))
        .zip(out.features.par_chunks_mut(layers * c))
        .zip(out.valid_count.par_iter_mut())
        .enumerate()
        .for_each(|(pixel, ((((perm, depths), sigmas), feats), valid_count))| {
            let x = (pixel % w as usize) as u32;
            let y = (pixel / w as usize) as u32;
            let mut order: Vec<(f32, u32)> = Vec::with_capacity(layers);
            let mut invalid: Vec<u32> = Vec::new();
            for l in 0..layers {
                match volume.depth_at(l, x, y) {
                    Some(d) => order.push((d as f32, l as u32)),
                    None => invalid.push(l as u32),
                }
            }
            order.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
            *valid_count = order.len() as u32;
            for (rank, (d, l)) in order.iter().enumerate() {
                perm[rank] = *l;
                depths[rank] = *d;
                let li = *l as usize;
                sigmas[rank] = sig_values[li * plane + pixel];
                let src = (li * plane + pixel) * c;
                feats[rank * c..rank * c + c].copy_from_slice(&feat_values[src..src + c]);
            }
            for (i, l) in invalid.iter().enumerate() {
                let rank = order.len() + i;
                perm[rank] = *l;
                // depth stays sentinel, sigma stays zero: invalid candidates
                // cannot contribute to the composite.
            }
        });

    Ok(out)
}

/// Front-to-back volumetric compositing of the sorted candidates.
pub fn volume_render(sorted: &SortedVolumes) -> BlendResult {
    let (w, h) = (sorted.width, sorted.height);
    let c = sorted.channels as usize;
    let layers = sorted.layers as usize;
    let pixels = w as usize * h as usize;

    let mut feature_image = FeatureImage::zeros(w, h, sorted.channels);
    let mut weight_map = vec![0.0f32; pixels];
    let mut peak_depth = DepthMap::new_invalid(w, h);

    feature_image
        .data_mut()
        .par_chunks_mut(c)
        .zip(weight_map.par_iter_mut())
        .zip(peak_depth.data_mut().par_iter_mut())
        .enumerate()
        .for_each(|(pixel, ((px, weight), peak))| {
            let valid = sorted.valid_count[pixel] as usize;
            let mut transmittance = 1.0f64;
            let mut total = 0.0f64;
            let mut acc = [0.0f64; 8];
            let acc = &mut acc[..c];
            let mut best_w = 0.0f64;
            for rank in 0..valid.min(layers) {
                let sigma = sorted.sigmas[pixel * layers + rank] as f64;
                if sigma <= 0.0 {
                    continue;
                }
                let alpha = 1.0 - (-sigma).exp();
                let wgt = transmittance * alpha;
                let f = &sorted.features[(pixel * layers + rank) * c..][..c];
                for (a, v) in acc.iter_mut().zip(f) {
                    *a += wgt * *v as f64;
                }
                total += wgt;
                if wgt > best_w {
                    best_w = wgt;
                    *peak = sorted.depths[pixel * layers + rank];
                }
                transmittance *= 1.0 - alpha;
                if transmittance < 1e-12 {
                    break;
                }
            }
            for (o, a) in px.iter_mut().zip(acc.iter()) {
                *o = *a as f32;
            }
            *weight = total as f32;
        });

    BlendResult {
        feature_image,
        weight_map,
        peak_depth,
    }
}

/// Warps input-view features through the rasterized background geometry into
/// the novel view, averaging over unoccluded views. Pixels with no background
/// coverage get `fill`.
pub fn render_background(
    bg_depths: &[DepthMap],
    input_cameras: &[CameraModel],
    novel: &CameraModel,
    input_features: &[FeatureImage],
    eps_occ: f64,
    splat_radius: u32,
    fill: &[f32],
) -> FeatureImage {
    let channels = input_features.first().map(|f| f.channels()).unwrap_or(fill.len() as u32);
    let (w, h) = (novel.width(), novel.height());
    let mut out = FeatureImage::filled(w, h, fill);
    if bg_depths.is_empty() || input_cameras.is_empty() {
        return out;
    }
    debug_assert_eq!(channels as usize, fill.len());

    let clouds: Vec<_> = bg_depths
        .iter()
        .zip(input_cameras)
        .enumerate()
        .filter_map(|(k, (d, c))| lift_depth_map(c, d, k as u32).ok())
        .collect();
    let bg_novel = rasterize_merged(&clouds, novel, splat_radius);

    let c = channels as usize;
    out.data_mut()
        .par_chunks_mut(w as usize * c)
        .enumerate()
        .for_each(|(y, row)| {
            let mut sample = vec![0.0f32; c];
            let mut acc = vec![0.0f64; c];
            for x in 0..w as usize {
                let d = bg_novel.get(x as u32, y as u32);
                if !depth_is_valid(d) {
                    continue;
                }
                let Ok(world) = novel.unproject(x as f64 + 0.5, y as f64 + 0.5, d as f64) else {
                    continue;
                };
                acc.iter_mut().for_each(|a| *a = 0.0);
                let mut count = 0u32;
                for (k, cam) in input_cameras.iter().enumerate() {
                    let proj = cam.project(&world);
                    if !proj.in_front() {
                        continue;
                    }
                    let Some(measured) = bg_depths[k].sample_bilinear(proj.u, proj.v) else {
                        continue;
                    };
                    if proj.z > measured + eps_occ {
                        continue;
                    }
                    if !input_features[k].sample_bilinear(proj.u, proj.v, &mut sample) {
                        continue;
                    }
                    for (a, s) in acc.iter_mut().zip(&sample) {
                        *a += *s as f64;
                    }
                    count += 1;
                }
                if count > 0 {
                    for (o, a) in row[x * c..x * c + c].iter_mut().zip(&acc) {
                        *o = (*a / count as f64) as f32;
                    }
                }
            }
        });
    out
}

/// Alpha-composites the premultiplied foreground over the background:
/// `out = fgd.feature + (1 - fgd.weight) * bgd`.
pub fn composite(fgd: &BlendResult, bgd: &FeatureImage) -> Result<FeatureImage, RenderError> {
    let fg = &fgd.feature_image;
    if fg.width() != bgd.width() || fg.height() != bgd.height() || fg.channels() != bgd.channels()
    {
        return Err(RenderError::ShapeMismatch {
            what: "background image",
            got: format!("{}x{}x{}", bgd.width(), bgd.height(), bgd.channels()),
            want: format!("{}x{}x{}", fg.width(), fg.height(), fg.channels()),
        });
    }
    let c = fg.channels() as usize;
    let mut out = FeatureImage::zeros(fg.width(), fg.height(), fg.channels());
    out.data_mut()
        .par_chunks_mut(c)
        .enumerate()
        .for_each(|(pixel, px)| {
            let w = fgd.weight_map[pixel] as f64;
            let residual = (1.0 - w).max(0.0);
            let base = pixel * c;
            for (ch, o) in px.iter_mut().enumerate() {
                *o = (fg.data()[base + ch] as f64 + residual * bgd.data()[base + ch] as f64) as f32;
            }
        });
    Ok(out)
}

/// Bilinear 2x spatial upsampling of a density volume, layer by layer.
pub fn upsample_density_2x(density: &DensityVolume) -> DensityVolume {
    let (w, h) = (density.width, density.height);
    let (w2, h2) = (w * 2, h * 2);
    let plane = w as usize * h as usize;
    let mut values = vec![0.0f32; density.layers as usize * w2 as usize * h2 as usize];
    values
        .par_chunks_mut(w2 as usize * h2 as usize)
        .enumerate()
        .for_each(|(layer, out_plane)| {
            let src = FeatureImage::from_data(
                w,
                h,
                1,
                density.values[layer * plane..(layer + 1) * plane].to_vec(),
            );
            let up = src.upsample_bilinear(2);
            out_plane.copy_from_slice(up.data());
        });
    DensityVolume {
        values,
        layers: density.layers,
        width: w2,
        height: h2,
    }
}

/// High-resolution render path: upsamples a low-resolution density volume to
/// the 2x candidate grid, then sorts, composites and blends over the
/// high-resolution background. Avoids estimating density at full resolution.
pub fn render_highres(
    density_low: &DensityVolume,
    volume_high: &dyn CandidateVolume,
    features_high: &FeatureVolume,
    bgd_high: &FeatureImage,
) -> Result<(FeatureImage, BlendResult), RenderError> {
    if volume_high.width() != density_low.width * 2
        || volume_high.height() != density_low.height * 2
        || volume_high.num_layers() as u32 != density_low.layers
    {
        return Err(RenderError::ResolutionMismatch);
    }
    let density_high = upsample_density_2x(density_low);
    let sorted = sort_by_depth(volume_high, features_high, &density_high)?;
    let blend = volume_render(&sorted);
    let full = composite(&blend, bgd_high)?;
    Ok((full, blend))
}

/// Centered sliding-window mean over a rendered sequence; windows truncate at
/// the sequence boundaries.
pub fn temporal_average(
    frames: &[FeatureImage],
    window: u32,
) -> Result<Vec<FeatureImage>, RenderError> {
    if window % 2 == 0 {
        return Err(RenderError::EvenWindow(window));
    }
    if window == 1 || frames.len() <= 1 {
        return Ok(frames.to_vec());
    }
    let half = (window / 2) as i64;
    let n = frames.len() as i64;
    let out: Vec<FeatureImage> = (0..n)
        .into_par_iter()
        .map(|t| {
            let lo = (t - half).max(0) as usize;
            let hi = ((t + half).min(n - 1)) as usize;
            let count = (hi - lo + 1) as f64;
            let mut acc = vec![0.0f64; frames[0].data().len()];
            for f in &frames[lo..=hi] {
                for (a, v) in acc.iter_mut().zip(f.data()) {
                    *a += *v as f64;
                }
            }
            let mut img = FeatureImage::zeros(
                frames[0].width(),
                frames[0].height(),
                frames[0].channels(),
            );
            for (o, a) in img.data_mut().iter_mut().zip(&acc) {
                *o = (*a / count) as f32;
            }
            img
        })
        .collect();
    Ok(out)
}
