//! Multi-channel float images shared by the simulator, aggregation and
//! rendering stages. The analytic pipeline uses 3 channels (RGB in [0,1]);
//! the container accepts any channel count so a learned encoder could be
//! slotted in.

use crate::geometry::bilinear_setup;

/// Row-major H×W×F float image.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureImage {
    width: u32,
    height: u32,
    channels: u32,
    data: Vec<f32>,
}

impl FeatureImage {
    pub fn zeros(width: u32, height: u32, channels: u32) -> FeatureImage {
        FeatureImage {
            width,
            height,
            channels,
            data: vec![0.0; width as usize * height as usize * channels as usize],
        }
    }

    pub fn filled(width: u32, height: u32, fill: &[f32]) -> FeatureImage {
        let channels = fill.len() as u32;
        let mut img = FeatureImage::zeros(width, height, channels);
        for px in img.data.chunks_exact_mut(channels as usize) {
            px.copy_from_slice(fill);
        }
        img
    }

    pub fn from_data(width: u32, height: u32, channels: u32, data: Vec<f32>) -> FeatureImage {
        assert_eq!(
            data.len(),
            width as usize * height as usize * channels as usize
        );
        FeatureImage {
            width,
            height,
            channels,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> u32 {
        self.width
    }

    #[inline]
    pub fn height(&self) -> u32 {
        self.height
    }

    #[inline]
    pub fn channels(&self) -> u32 {
        self.channels
    }

    #[inline]
    fn index(&self, x: u32, y: u32) -> usize {
        (y as usize * self.width as usize + x as usize) * self.channels as usize
    }

    #[inline]
    pub fn pixel(&self, x: u32, y: u32) -> &[f32] {
        let i = self.index(x, y);
        &self.data[i..i + self.channels as usize]
    }

    #[inline]
    pub fn pixel_mut(&mut self, x: u32, y: u32) -> &mut [f32] {
        let i = self.index(x, y);
        let c = self.channels as usize;
        &mut self.data[i..i + c]
    }

    #[inline]
    pub fn data(&self) -> &[f32] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    /// Border-clamped bilinear sample; `out` must hold `channels` values.
    /// Returns false when `(u, v)` falls outside the image.
    pub fn sample_bilinear(&self, u: f64, v: f64, out: &mut [f32]) -> bool {
        let Some((x0, y0, wx, wy)) = bilinear_setup(u, v, self.width, self.height) else {
            return false;
        };
        let c = self.channels as usize;
        debug_assert_eq!(out.len(), c);
        let mut acc = [0.0f64; 8];
        let acc = &mut acc[..c.min(8)];
        let mut spill = vec![];
        let acc: &mut [f64] = if c <= 8 {
            acc
        } else {
            spill.resize(c, 0.0);
            &mut spill
        };
        for (dy, fy) in [(0u32, 1.0 - wy), (1u32, wy)] {
            for (dx, fx) in [(0u32, 1.0 - wx), (1u32, wx)] {
                let w = fx * fy;
                if w == 0.0 {
                    continue;
                }
                let px = self.pixel(
                    (x0 + dx).min(self.width - 1),
                    (y0 + dy).min(self.height - 1),
                );
                for (o, s) in acc.iter_mut().zip(px) {
                    *o += w * *s as f64;
                }
            }
        }
        for (o, a) in out.iter_mut().zip(acc.iter()) {
            *o = *a as f32;
        }
        true
    }

    /// Rec.709 luma for 3-channel images, channel mean otherwise.
    pub fn luminance(&self, x: u32, y: u32) -> f64 {
        let px = self.pixel(x, y);
        if self.channels == 3 {
            0.2126 * px[0] as f64 + 0.7152 * px[1] as f64 + 0.0722 * px[2] as f64
        } else {
            px.iter().map(|v| *v as f64).sum::<f64>() / self.channels.max(1) as f64
        }
    }

    /// 2x2 box downsample (both dimensions must be even).
    pub fn box_downsample_2x(&self) -> FeatureImage {
        assert!(self.width % 2 == 0 && self.height % 2 == 0);
        let mut out = FeatureImage::zeros(self.width / 2, self.height / 2, self.channels);
        for y in 0..out.height {
            for x in 0..out.width {
                for c in 0..self.channels as usize {
                    let mut acc = 0.0f64;
                    for (dx, dy) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                        acc += self.pixel(2 * x + dx, 2 * y + dy)[c] as f64;
                    }
                    out.pixel_mut(x, y)[c] = (acc / 4.0) as f32;
                }
            }
        }
        out
    }

    /// Center-aligned bilinear upsample to `factor` times the resolution.
    pub fn upsample_bilinear(&self, factor: u32) -> FeatureImage {
        let mut out = FeatureImage::zeros(self.width * factor, self.height * factor, self.channels);
        let f = factor as f64;
        let mut buf = vec![0.0f32; self.channels as usize];
        for y in 0..out.height {
            for x in 0..out.width {
                let u = (x as f64 + 0.5) / f;
                let v = (y as f64 + 0.5) / f;
                let ok = self.sample_bilinear(u, v, &mut buf);
                debug_assert!(ok);
                out.pixel_mut(x, y).copy_from_slice(&buf);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bilinear_at_pixel_center_is_exact() {
        let mut img = FeatureImage::zeros(4, 4, 2);
        img.pixel_mut(2, 1).copy_from_slice(&[0.25, 0.75]);
        let mut out = [0.0f32; 2];
        assert!(img.sample_bilinear(2.5, 1.5, &mut out));
        assert_eq!(out, [0.25, 0.75]);
    }

    #[test]
    fn bilinear_midpoint_averages() {
        let mut img = FeatureImage::zeros(2, 1, 1);
        img.pixel_mut(0, 0)[0] = 0.0;
        img.pixel_mut(1, 0)[0] = 1.0;
        let mut out = [0.0f32];
        assert!(img.sample_bilinear(1.0, 0.5, &mut out));
        assert!((out[0] - 0.5).abs() < 1e-7);
    }

    #[test]
    fn bilinear_rejects_outside() {
        let img = FeatureImage::zeros(2, 2, 1);
        let mut out = [0.0f32];
        assert!(!img.sample_bilinear(-0.1, 0.5, &mut out));
        assert!(!img.sample_bilinear(0.5, 2.3, &mut out));
    }

    #[test]
    fn upsample_of_constant_is_constant() {
        let img = FeatureImage::filled(3, 2, &[0.4, 0.6, 0.8]);
        let up = img.upsample_bilinear(2);
        assert_eq!(up.width(), 6);
        for y in 0..2 {
            for x in 0..6 {
                assert_eq!(up.pixel(x, y), &[0.4, 0.6, 0.8]);
            }
        }
    }

    #[test]
    fn downsample_averages_quads() {
        let mut img = FeatureImage::zeros(2, 2, 1);
        img.pixel_mut(0, 0)[0] = 1.0;
        img.pixel_mut(1, 0)[0] = 2.0;
        img.pixel_mut(0, 1)[0] = 3.0;
        img.pixel_mut(1, 1)[0] = 4.0;
        let down = img.box_downsample_2x();
        assert_eq!(down.pixel(0, 0)[0], 2.5);
    }
}
