//! Image containers and pixel-level kernels shared by the whole crate:
//! grayscale conversion, Gaussian filtering, gradients, image pyramids,
//! subpixel sampling, HSL conversion and unsharp sharpening.
//!
//! Luminance is stored as `f32` in `[0, 1]` rather than 8-bit so the
//! least-squares solves downstream stay well conditioned.

use crate::{Error, Result};

/// 8-bit RGB raster, row-major triples.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RgbImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParameter(
                "image dimensions must be at least 1x1".into(),
            ));
        }
        if data.len() != width * height * 3 {
            return Err(Error::InvalidParameter(format!(
                "rgb data length {} does not match {}x{}x3",
                data.len(),
                width,
                height
            )));
        }
        Ok(RgbImage {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height {
            data.extend_from_slice(&rgb);
        }
        RgbImage {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }
}

/// Luminance raster with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<f32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParameter(
                "image dimensions must be at least 1x1".into(),
            ));
        }
        if data.len() != width * height {
            return Err(Error::InvalidParameter(format!(
                "gray data length {} does not match {}x{}",
                data.len(),
                width,
                height
            )));
        }
        Ok(GrayImage {
            width,
            height,
            data,
        })
    }

    pub fn constant(width: usize, height: usize, value: f32) -> Self {
        GrayImage {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f32) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        GrayImage {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f32) {
        self.data[y * self.width + x] = v;
    }

    /// Bilinear interpolation of the four surrounding pixels. Returns `None`
    /// when `(x, y)` lies outside `[0, width-1] x [0, height-1]`; callers
    /// treat that as losing the point.
    #[inline]
    pub fn sample_bilinear(&self, x: f64, y: f64) -> Option<f32> {
        if !(x >= 0.0 && x <= (self.width - 1) as f64 && y >= 0.0 && y <= (self.height - 1) as f64)
        {
            return None;
        }
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let tx = (x - x0 as f64) as f32;
        let ty = (y - y0 as f64) as f32;
        // At the far edge floor(x) == width-1 and tx == 0, so the x1 column
        // carries zero weight; clamping keeps the index in range.
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let p00 = self.get(x0, y0);
        let p10 = self.get(x1, y0);
        let p01 = self.get(x0, y1);
        let p11 = self.get(x1, y1);
        let top = p00 + tx * (p10 - p00);
        let bot = p01 + tx * (p11 - p01);
        Some(top + ty * (bot - top))
    }
}

/// Binary raster used for edge maps.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<bool>,
}

impl BinaryImage {
    pub fn filled(width: usize, height: usize, value: bool) -> Self {
        BinaryImage {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.data[y * self.width + x] = v;
    }

    pub fn count_set(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }
}

/// HSL raster; H in degrees `[0, 360)`, S and L in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct HslImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<[f32; 3]>,
}

impl HslImage {
    /// Mean of the lightness channel.
    pub fn mean_lightness(&self) -> f32 {
        let sum: f64 = self.data.iter().map(|p| p[2] as f64).sum();
        (sum / self.data.len() as f64) as f32
    }
}

/// Coarse-to-fine stack of images; level 0 is full resolution and every
/// subsequent level halves both dimensions (floor).
#[derive(Debug, Clone)]
pub struct Pyramid {
    pub levels: Vec<GrayImage>,
}

impl Pyramid {
    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn level(&self, k: usize) -> &GrayImage {
        &self.levels[k]
    }
}

/// Rec.601 luma conversion to the unit interval.
pub fn to_grayscale(img: &RgbImage) -> GrayImage {
    let mut data = Vec::with_capacity(img.width * img.height);
    for px in img.data.chunks_exact(3) {
        let luma = 0.299 * px[0] as f32 + 0.587 * px[1] as f32 + 0.114 * px[2] as f32;
        data.push(luma / 255.0);
    }
    GrayImage {
        width: img.width,
        height: img.height,
        data,
    }
}

/// Normalized 1-D Gaussian taps for the given sigma and radius.
fn gaussian_kernel(sigma: f64, radius: usize) -> Vec<f32> {
    let mut taps = Vec::with_capacity(2 * radius + 1);
    let denom = 2.0 * sigma * sigma;
    let mut sum = 0.0;
    for i in -(radius as i64)..=(radius as i64) {
        let v = (-(i * i) as f64 / denom).exp();
        taps.push(v);
        sum += v;
    }
    taps.into_iter().map(|v| (v / sum) as f32).collect()
}

/// Separable convolution with edge replication. Interior pixels take an
/// unclamped fast path; only the border band pays for index clamping.
fn convolve_separable(img: &GrayImage, taps: &[f32]) -> GrayImage {
    let radius = taps.len() / 2;
    let (w, h) = (img.width, img.height);
    let mut tmp = vec![0.0f32; w * h];
    // Horizontal pass.
    for y in 0..h {
        let row = &img.data[y * w..(y + 1) * w];
        let dst = &mut tmp[y * w..(y + 1) * w];
        if w > 2 * radius {
            for x in radius..w - radius {
                let mut acc = 0.0f32;
                let window = &row[x - radius..x + radius + 1];
                for (v, t) in window.iter().zip(taps.iter()) {
                    acc += t * v;
                }
                dst[x] = acc;
            }
        }
        let border = (0..radius.min(w)).chain(w.saturating_sub(radius).max(radius.min(w))..w);
        for x in border {
            let mut acc = 0.0f32;
            for (k, &t) in taps.iter().enumerate() {
                let xi = (x as i64 + k as i64 - radius as i64).clamp(0, w as i64 - 1) as usize;
                acc += t * row[xi];
            }
            dst[x] = acc;
        }
    }
    // Vertical pass.
    let mut out = vec![0.0f32; w * h];
    for y in 0..h {
        let interior = y >= radius && y + radius < h;
        if interior {
            let base = (y - radius) * w;
            let dst = &mut out[y * w..(y + 1) * w];
            for (k, &t) in taps.iter().enumerate() {
                let src = &tmp[base + k * w..base + k * w + w];
                for (d, &s) in dst.iter_mut().zip(src.iter()) {
                    *d += t * s;
                }
            }
        } else {
            for x in 0..w {
                let mut acc = 0.0f32;
                for (k, &t) in taps.iter().enumerate() {
                    let yi =
                        (y as i64 + k as i64 - radius as i64).clamp(0, h as i64 - 1) as usize;
                    acc += t * tmp[yi * w + x];
                }
                out[y * w + x] = acc;
            }
        }
    }
    GrayImage {
        width: w,
        height: h,
        data: out,
    }
}

/// Gaussian blur with kernel radius `ceil(3*sigma)` and edge replication.
pub fn gaussian_blur(img: &GrayImage, sigma: f64) -> Result<GrayImage> {
    if !(sigma > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "gaussian sigma must be positive, got {sigma}"
        )));
    }
    let radius = (3.0 * sigma).ceil() as usize;
    Ok(convolve_separable(img, &gaussian_kernel(sigma, radius)))
}

/// Gaussian smoothing with an explicit odd kernel width (`dim` taps per axis).
/// Used by the structure tensor where the filter dimension is the parameter.
pub(crate) fn gaussian_smooth_fixed(img: &GrayImage, dim: usize, sigma: f64) -> GrayImage {
    convolve_separable(img, &gaussian_kernel(sigma, dim / 2))
}

/// Central-difference gradients; border pixels use one-sided differences.
pub fn gradient(img: &GrayImage) -> Result<(GrayImage, GrayImage)> {
    let (w, h) = (img.width, img.height);
    if w < 3 || h < 3 {
        return Err(Error::InvalidParameter(format!(
            "gradient needs at least a 3x3 image, got {w}x{h}"
        )));
    }
    let mut gx = vec![0.0f32; w * h];
    let mut gy = vec![0.0f32; w * h];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            gx[i] = if x == 0 {
                img.data[i + 1] - img.data[i]
            } else if x == w - 1 {
                img.data[i] - img.data[i - 1]
            } else {
                0.5 * (img.data[i + 1] - img.data[i - 1])
            };
            gy[i] = if y == 0 {
                img.data[i + w] - img.data[i]
            } else if y == h - 1 {
                img.data[i] - img.data[i - w]
            } else {
                0.5 * (img.data[i + w] - img.data[i - w])
            };
        }
    }
    Ok((
        GrayImage {
            width: w,
            height: h,
            data: gx,
        },
        GrayImage {
            width: w,
            height: h,
            data: gy,
        },
    ))
}

/// Build an `np`-level pyramid. Level 0 is the input; each next level is the
/// previous one blurred with sigma 1 and decimated by taking even coordinates,
/// so dimensions halve (floor) exactly.
pub fn build_pyramid(img: &GrayImage, np: usize) -> Result<Pyramid> {
    if np < 1 {
        return Err(Error::InvalidParameter(
            "pyramid must have at least one level".into(),
        ));
    }
    let (mut w, mut h) = (img.width, img.height);
    for _ in 1..np {
        w /= 2;
        h /= 2;
        if w < 8 || h < 8 {
            return Err(Error::InvalidParameter(format!(
                "{np} pyramid levels would shrink a {}x{} image below 8x8",
                img.width, img.height
            )));
        }
    }
    let mut levels = Vec::with_capacity(np);
    levels.push(img.clone());
    for _ in 1..np {
        let prev = levels.last().unwrap();
        let blurred = gaussian_blur(prev, 1.0)?;
        let (nw, nh) = (prev.width / 2, prev.height / 2);
        let mut data = Vec::with_capacity(nw * nh);
        for y in 0..nh {
            for x in 0..nw {
                data.push(blurred.get(2 * x, 2 * y));
            }
        }
        levels.push(GrayImage {
            width: nw,
            height: nh,
            data,
        });
    }
    Ok(Pyramid { levels })
}

/// `clamp(img + amount * (img - blur(img, sigma)), 0, 1)`.
pub fn unsharp_sharpen(img: &GrayImage, sigma: f64, amount: f32) -> Result<GrayImage> {
    if amount < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "sharpen amount must be nonnegative, got {amount}"
        )));
    }
    let blurred = gaussian_blur(img, sigma)?;
    let data = img
        .data
        .iter()
        .zip(blurred.data.iter())
        .map(|(&v, &b)| (v + amount * (v - b)).clamp(0.0, 1.0))
        .collect();
    Ok(GrayImage {
        width: img.width,
        height: img.height,
        data,
    })
}

pub fn rgb_to_hsl(img: &RgbImage) -> HslImage {
    let mut data = Vec::with_capacity(img.width * img.height);
    for px in img.data.chunks_exact(3) {
        data.push(pixel_to_hsl(px[0], px[1], px[2]));
    }
    HslImage {
        width: img.width,
        height: img.height,
        data,
    }
}

pub fn hsl_to_rgb(img: &HslImage) -> RgbImage {
    let mut data = Vec::with_capacity(img.width * img.height * 3);
    for &[h, s, l] in &img.data {
        let rgb = hsl_to_pixel(h, s, l);
        data.extend_from_slice(&rgb);
    }
    RgbImage {
        width: img.width,
        height: img.height,
        data,
    }
}

fn pixel_to_hsl(r: u8, g: u8, b: u8) -> [f32; 3] {
    let r = r as f32 / 255.0;
    let g = g as f32 / 255.0;
    let b = b as f32 / 255.0;
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let l = 0.5 * (max + min);
    if max == min {
        return [0.0, 0.0, l];
    }
    let d = max - min;
    let s = if l > 0.5 {
        d / (2.0 - max - min)
    } else {
        d / (max + min)
    };
    let mut h = if max == r {
        (g - b) / d % 6.0
    } else if max == g {
        (b - r) / d + 2.0
    } else {
        (r - g) / d + 4.0
    } * 60.0;
    if h < 0.0 {
        h += 360.0;
    }
    [h, s, l]
}

fn hsl_to_pixel(h: f32, s: f32, l: f32) -> [u8; 3] {
    let c = (1.0 - (2.0 * l - 1.0).abs()) * s;
    let hp = (h.rem_euclid(360.0)) / 60.0;
    let x = c * (1.0 - (hp % 2.0 - 1.0).abs());
    let (r1, g1, b1) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = l - 0.5 * c;
    let to_byte = |v: f32| ((v + m).clamp(0.0, 1.0) * 255.0).round() as u8;
    [to_byte(r1), to_byte(g1), to_byte(b1)]
}
