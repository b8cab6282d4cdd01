//! RGB raster images and the fixed resampling kernels used by the
//! coarse-to-fine pyramid: bilinear for 2x enlargement, antialiased
//! Catmull-Rom (bicubic) for power-of-two reduction. Both preserve constants
//! exactly and clamp results to [0, 1].

use ndarray::{Array3, Axis};

use crate::error::{Error, Result};

/// An H x W x 3 raster with channel values in [0, 1] (sRGB interpretation).
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    data: Array3<f32>,
}

impl Image {
    /// Wraps an H x W x 3 array. Values must be finite; callers are expected
    /// to keep them in [0, 1] but only finiteness is enforced here.
    pub fn new(data: Array3<f32>) -> Result<Self> {
        if data.shape()[2] != 3 {
            return Err(Error::invalid(format!(
                "image must have 3 channels, got {}",
                data.shape()[2]
            )));
        }
        if data.shape()[0] == 0 || data.shape()[1] == 0 {
            return Err(Error::invalid("image has zero extent"));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("image contains non-finite values"));
        }
        Ok(Image { data })
    }

    pub fn constant(height: usize, width: usize, rgb: [f32; 3]) -> Self {
        let mut data = Array3::zeros((height, width, 3));
        for c in 0..3 {
            data.index_axis_mut(Axis(2), c).fill(rgb[c]);
        }
        Image { data }
    }

    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize, usize) -> f32) -> Self {
        Image {
            data: Array3::from_shape_fn((height, width, 3), |(y, x, c)| f(y, x, c)),
        }
    }

    pub fn height(&self) -> usize {
        self.data.shape()[0]
    }

    pub fn width(&self) -> usize {
        self.data.shape()[1]
    }

    pub fn data(&self) -> &Array3<f32> {
        &self.data
    }

    pub fn into_data(self) -> Array3<f32> {
        self.data
    }

    /// Per-channel means.
    pub fn channel_means(&self) -> [f32; 3] {
        let n = (self.height() * self.width()) as f32;
        let mut m = [0.0f32; 3];
        for (i, v) in m.iter_mut().enumerate() {
            *v = self.data.index_axis(Axis(2), i).sum() / n;
        }
        m
    }

    /// Per-channel population standard deviations.
    pub fn channel_stds(&self) -> [f32; 3] {
        let means = self.channel_means();
        let n = (self.height() * self.width()) as f32;
        let mut s = [0.0f32; 3];
        for (i, v) in s.iter_mut().enumerate() {
            let ch = self.data.index_axis(Axis(2), i);
            *v = (ch.iter().map(|x| (x - means[i]).powi(2)).sum::<f32>() / n).sqrt();
        }
        s
    }

    /// Axis-aligned crop; the rectangle must lie fully inside the image.
    pub fn crop(&self, top: usize, left: usize, height: usize, width: usize) -> Result<Image> {
        if top + height > self.height() || left + width > self.width() {
            return Err(Error::invalid(format!(
                "crop {}x{}+{}+{} exceeds image {}x{}",
                height,
                width,
                top,
                left,
                self.height(),
                self.width()
            )));
        }
        Ok(Image {
            data: self
                .data
                .slice(ndarray::s![top..top + height, left..left + width, ..])
                .to_owned(),
        })
    }
}

fn clamp01(v: f32) -> f32 {
    v.clamp(0.0, 1.0)
}

/// Catmull-Rom cubic kernel (a = -0.5), support [-2, 2].
fn catmull_rom(t: f32) -> f32 {
    let t = t.abs();
    if t < 1.0 {
        1.5 * t * t * t - 2.5 * t * t + 1.0
    } else if t < 2.0 {
        -0.5 * t * t * t + 2.5 * t * t - 4.0 * t + 2.0
    } else {
        0.0
    }
}

/// Precomputed source taps for one output coordinate along one axis.
struct Taps {
    start: isize,
    weights: Vec<f32>,
}

/// Taps for bicubic reduction by `factor`: the kernel is stretched by the
/// scale factor (antialiasing) and weights are renormalized so constants are
/// preserved exactly.
fn bicubic_taps(out_len: usize, factor: usize) -> Vec<Taps> {
    let s = factor as f32;
    let support = 2.0 * s;
    (0..out_len)
        .map(|i| {
            let center = (i as f32 + 0.5) * s - 0.5;
            let start = (center - support).ceil() as isize;
            let end = (center + support).floor() as isize;
            let mut weights: Vec<f32> = (start..=end)
                .map(|j| catmull_rom((j as f32 - center) / s))
                .collect();
            let sum: f32 = weights.iter().sum();
            for w in &mut weights {
                *w /= sum;
            }
            Taps { start, weights }
        })
        .collect()
}

/// Taps for 2x bilinear enlargement with half-pixel (align_corners = false)
/// coordinates; interior weights alternate 0.75/0.25.
fn bilinear2_taps(out_len: usize) -> Vec<Taps> {
    (0..out_len)
        .map(|i| {
            let src = (i as f32 + 0.5) / 2.0 - 0.5;
            let i0 = src.floor();
            let frac = src - i0;
            Taps {
                start: i0 as isize,
                weights: vec![1.0 - frac, frac],
            }
        })
        .collect()
}

/// Applies per-output-row taps along the height axis (clamped indexing).
fn resample_rows(src: &Array3<f32>, taps: &[Taps]) -> Array3<f32> {
    let (h, w, c) = src.dim();
    let mut out = Array3::zeros((taps.len(), w, c));
    for (i, t) in taps.iter().enumerate() {
        let mut row = out.index_axis_mut(Axis(0), i);
        for (k, &wgt) in t.weights.iter().enumerate() {
            if wgt == 0.0 {
                continue;
            }
            let j = (t.start + k as isize).clamp(0, h as isize - 1) as usize;
            row.scaled_add(wgt, &src.index_axis(Axis(0), j));
        }
    }
    out
}

fn transpose_hw(src: &Array3<f32>) -> Array3<f32> {
    src.view().permuted_axes([1, 0, 2]).as_standard_layout().into_owned()
}

fn resample_separable(img: &Image, taps_y: Vec<Taps>, taps_x: Vec<Taps>) -> Image {
    let pass1 = resample_rows(img.data(), &taps_y);
    let pass1t = transpose_hw(&pass1);
    let pass2t = resample_rows(&pass1t, &taps_x);
    let mut data = transpose_hw(&pass2t);
    data.mapv_inplace(clamp01);
    Image { data }
}

/// Bicubic (Catmull-Rom, antialiased) reduction by a power-of-two factor that
/// must divide both image dimensions. A factor of 1 returns a copy.
pub fn downsample(img: &Image, factor: usize) -> Result<Image> {
    if factor == 0 || !factor.is_power_of_two() {
        return Err(Error::invalid(format!(
            "downsample factor must be a power of two, got {factor}"
        )));
    }
    if img.height() % factor != 0 || img.width() % factor != 0 {
        return Err(Error::invalid(format!(
            "downsample factor {} does not divide image {}x{}",
            factor,
            img.height(),
            img.width()
        )));
    }
    if factor == 1 {
        return Ok(img.clone());
    }
    let taps_y = bicubic_taps(img.height() / factor, factor);
    let taps_x = bicubic_taps(img.width() / factor, factor);
    Ok(resample_separable(img, taps_y, taps_x))
}

/// Bilinear 2x enlargement.
pub fn upsample2(img: &Image) -> Image {
    let taps_y = bilinear2_taps(img.height() * 2);
    let taps_x = bilinear2_taps(img.width() * 2);
    resample_separable(img, taps_y, taps_x)
}
