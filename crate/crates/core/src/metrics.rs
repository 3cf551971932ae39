//! Image fidelity, depth accuracy and temporal-stability metrics.
//!
//! All metrics run on float images with channels in [0,1] and use fixed-order
//! reductions, so identical inputs give bit-identical reports.

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::geometry::{depth_is_valid, DepthMap};
use crate::image::FeatureImage;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("image sizes disagree: {0}x{1} vs {2}x{3}")]
    SizeMismatch(u32, u32, u32, u32),
    #[error("mask selects no pixels")]
    EmptyMask,
    #[error("no jointly valid depth pixels under the mask")]
    NoValidDepth,
    #[error("sequence needs at least 2 frames, got {0}")]
    TooFewFrames(usize),
}

/// One metric value tagged with the mask it was computed under.
/// Non-finite values serialize as strings ("inf") so reports stay valid JSON.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricValue {
    pub metric: String,
    pub value: f64,
    pub mask: String,
}

impl Serialize for MetricValue {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("MetricValue", 3)?;
        s.serialize_field("metric", &self.metric)?;
        if self.value.is_finite() {
            s.serialize_field("value", &self.value)?;
        } else if self.value.is_infinite() && self.value > 0.0 {
            s.serialize_field("value", "inf")?;
        } else {
            s.serialize_field("value", &self.value.to_string())?;
        }
        s.serialize_field("mask", &self.mask)?;
        s.end()
    }
}

/// A labelled collection of metric values.
#[derive(Clone, Debug, Default, Serialize)]
pub struct MetricReport {
    pub entries: Vec<MetricValue>,
}

impl MetricReport {
    pub fn push(&mut self, metric: impl Into<String>, value: f64, mask: impl Into<String>) {
        self.entries.push(MetricValue {
            metric: metric.into(),
            value,
            mask: mask.into(),
        });
    }

    pub fn get(&self, metric: &str, mask: &str) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| e.metric == metric && e.mask == mask)
            .map(|e| e.value)
    }
}

fn check_sizes(a: &FeatureImage, b: &FeatureImage) -> Result<(), MetricsError> {
    if a.width() != b.width() || a.height() != b.height() || a.channels() != b.channels() {
        return Err(MetricsError::SizeMismatch(
            a.width(),
            a.height(),
            b.width(),
            b.height(),
        ));
    }
    Ok(())
}

fn check_mask(mask: Option<&[bool]>, len: usize) -> Result<(), MetricsError> {
    if let Some(m) = mask {
        assert_eq!(m.len(), len, "mask length");
        if !m.iter().any(|x| *x) {
            return Err(MetricsError::EmptyMask);
        }
    }
    Ok(())
}

/// Peak signal-to-noise ratio in dB over masked pixels, +inf for identical
/// inputs. Channels are assumed in [0,1] (peak = 1).
pub fn psnr(a: &FeatureImage, b: &FeatureImage, mask: Option<&[bool]>) -> Result<f64, MetricsError> {
    check_sizes(a, b)?;
    let pixels = a.width() as usize * a.height() as usize;
    check_mask(mask, pixels)?;
    let c = a.channels() as usize;
    let mut se = 0.0f64;
    let mut n = 0u64;
    for p in 0..pixels {
        if let Some(m) = mask {
            if !m[p] {
                continue;
            }
        }
        for ch in 0..c {
            let d = a.data()[p * c + ch] as f64 - b.data()[p * c + ch] as f64;
            se += d * d;
            n += 1;
        }
    }
    if n == 0 {
        return Err(MetricsError::EmptyMask);
    }
    let mse = se / n as f64;
    if mse == 0.0 {
        Ok(f64::INFINITY)
    } else {
        Ok(-10.0 * mse.log10())
    }
}

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

fn gaussian_kernel() -> [f64; SSIM_WINDOW] {
    let mut k = [0.0; SSIM_WINDOW];
    let half = (SSIM_WINDOW / 2) as f64;
    let mut sum = 0.0;
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - half;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
        sum += *v;
    }
    for v in &mut k {
        *v /= sum;
    }
    k
}

/// Structural similarity with the canonical 11x11 Gaussian window
/// (sigma 1.5, k1=0.01, k2=0.03, dynamic range 1). Window centers must have
/// full support; the mean runs over masked centers, averaged across channels.
pub fn ssim(a: &FeatureImage, b: &FeatureImage, mask: Option<&[bool]>) -> Result<f64, MetricsError> {
    check_sizes(a, b)?;
    let (w, h) = (a.width() as usize, a.height() as usize);
    check_mask(mask, w * h)?;
    let half = SSIM_WINDOW / 2;
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(MetricsError::SizeMismatch(
            a.width(),
            a.height(),
            SSIM_WINDOW as u32,
            SSIM_WINDOW as u32,
        ));
    }
    let kernel = gaussian_kernel();
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let c = a.channels() as usize;

    let mut total = 0.0f64;
    let mut count = 0u64;
    for cy in half..h - half {
        for cx in half..w - half {
            if let Some(m) = mask {
                if !m[cy * w + cx] {
                    continue;
                }
            }
            for ch in 0..c {
                let mut mu_a = 0.0;
                let mut mu_b = 0.0;
                let mut aa = 0.0;
                let mut bb = 0.0;
                let mut ab = 0.0;
                for ky in 0..SSIM_WINDOW {
                    let wy = kernel[ky];
                    let y = cy + ky - half;
                    for kx in 0..SSIM_WINDOW {
                        let wgt = wy * kernel[kx];
                        let x = cx + kx - half;
                        let va = a.data()[(y * w + x) * c + ch] as f64;
                        let vb = b.data()[(y * w + x) * c + ch] as f64;
                        mu_a += wgt * va;
                        mu_b += wgt * vb;
                        aa += wgt * va * va;
                        bb += wgt * vb * vb;
                        ab += wgt * va * vb;
                    }
                }
                let var_a = aa - mu_a * mu_a;
                let var_b = bb - mu_b * mu_b;
                let cov = ab - mu_a * mu_b;
                let v = ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2))
                    / ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
                total += v;
                count += 1;
            }
        }
    }
    if count == 0 {
        return Err(MetricsError::EmptyMask);
    }
    Ok(total / count as f64)
}

/// Mean absolute depth error over jointly valid, masked pixels.
pub fn depth_mae(
    rendered: &DepthMap,
    gt: &DepthMap,
    mask: Option<&[bool]>,
) -> Result<f64, MetricsError> {
    if rendered.width() != gt.width() || rendered.height() != gt.height() {
        return Err(MetricsError::SizeMismatch(
            rendered.width(),
            rendered.height(),
            gt.width(),
            gt.height(),
        ));
    }
    let pixels = rendered.data().len();
    check_mask(mask, pixels)?;
    let mut sum = 0.0f64;
    let mut n = 0u64;
    for p in 0..pixels {
        if let Some(m) = mask {
            if !m[p] {
                continue;
            }
        }
        let r = rendered.data()[p];
        let g = gt.data()[p];
        if depth_is_valid(r) && depth_is_valid(g) {
            sum += (r as f64 - g as f64).abs();
            n += 1;
        }
    }
    if n == 0 {
        return Err(MetricsError::NoValidDepth);
    }
    Ok(sum / n as f64)
}

/// Mean (over masked pixels) of the temporal population standard deviation of
/// the luminance channel.
pub fn flicker(sequence: &[FeatureImage], static_mask: Option<&[bool]>) -> Result<f64, MetricsError> {
    if sequence.len() < 2 {
        return Err(MetricsError::TooFewFrames(sequence.len()));
    }
    let first = &sequence[0];
    for f in sequence {
        check_sizes(first, f)?;
    }
    let (w, h) = (first.width(), first.height());
    let pixels = w as usize * h as usize;
    check_mask(static_mask, pixels)?;
    let n = sequence.len() as f64;
    let mut total = 0.0f64;
    let mut count = 0u64;
    for p in 0..pixels {
        if let Some(m) = static_mask {
            if !m[p] {
                continue;
            }
        }
        let x = (p % w as usize) as u32;
        let y = (p / w as usize) as u32;
        let mut sum = 0.0;
        let mut sumsq = 0.0;
        for f in sequence {
            let l = f.luminance(x, y);
            sum += l;
            sumsq += l * l;
        }
        let mean = sum / n;
        let var = (sumsq / n - mean * mean).max(0.0);
        total += var.sqrt();
        count += 1;
    }
    if count == 0 {
        return Err(MetricsError::EmptyMask);
    }
    Ok(total / count as f64)
}

/// Mean squared gradient magnitude of the luminance channel (forward
/// differences); an edge-sharpness score for the high-resolution path.
pub fn gradient_energy(img: &FeatureImage) -> f64 {
    let (w, h) = (img.width(), img.height());
    if w < 2 || h < 2 {
        return 0.0;
    }
    let mut total = 0.0f64;
    let mut n = 0u64;
    for y in 0..h - 1 {
        for x in 0..w - 1 {
            let c = img.luminance(x, y);
            let dx = img.luminance(x + 1, y) - c;
            let dy = img.luminance(x, y + 1) - c;
            total += dx * dx + dy * dy;
            n += 1;
        }
    }
    total / n as f64
}

/// Erodes a boolean mask by `radius` pixels (8-neighborhood), the tool used
/// to drop silhouette bands from pixel-exact comparisons.
pub fn erode_mask(mask: &[bool], width: u32, height: u32, radius: u32) -> Vec<bool> {
    let mut cur = mask.to_vec();
    let (w, h) = (width as i64, height as i64);
    for _ in 0..radius {
        let prev = cur.clone();
        for y in 0..h {
            for x in 0..w {
                let idx = (y * w + x) as usize;
                if !prev[idx] {
                    continue;
                }
                let mut keep = true;
                'scan: for dy in -1..=1i64 {
                    for dx in -1..=1i64 {
                        let (nx, ny) = (x + dx, y + dy);
                        if nx < 0 || ny < 0 || nx >= w || ny >= h {
                            keep = false;
                            break 'scan;
                        }
                        if !prev[(ny * w + nx) as usize] {
                            keep = false;
                            break 'scan;
                        }
                    }
                }
                cur[idx] = keep;
            }
        }
    }
    cur
}
