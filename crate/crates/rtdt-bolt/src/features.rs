//! Shi-Tomasi minimum-eigenvalue corner detection restricted to regions of
//! interest, producing the feature points the tracker consumes.

use serde::{Deserialize, Serialize};

use crate::img::{self, GrayImage};
use crate::{Error, Result};

/// Subpixel corner location with its minimum-eigenvalue response.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeaturePoint {
    pub x: f64,
    pub y: f64,
    pub quality: f32,
}

/// Axis-aligned region of interest around a detected bolt.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Roi {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
    #[serde(default = "default_confidence")]
    pub confidence: f64,
}

fn default_confidence() -> f64 {
    1.0
}

impl Roi {
    pub fn new(x: usize, y: usize, w: usize, h: usize, confidence: f64) -> Self {
        Roi {
            x,
            y,
            w,
            h,
            confidence,
        }
    }

    /// Check the box lies within a `frame_w` x `frame_h` frame and meets the
    /// minimum 8x8 size.
    pub fn validate(&self, frame_w: usize, frame_h: usize) -> Result<()> {
        if self.w < 8 || self.h < 8 {
            return Err(Error::InvalidParameter(format!(
                "roi {}x{} is below the 8x8 minimum",
                self.w, self.h
            )));
        }
        if self.x + self.w > frame_w || self.y + self.h > frame_h {
            return Err(Error::InvalidParameter(format!(
                "roi ({}, {}, {}, {}) exceeds the {}x{} frame",
                self.x, self.y, self.w, self.h, frame_w, frame_h
            )));
        }
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(Error::InvalidParameter(format!(
                "roi confidence {} outside [0, 1]",
                self.confidence
            )));
        }
        Ok(())
    }

    pub fn center(&self) -> (f64, f64) {
        (
            self.x as f64 + (self.w as f64 - 1.0) / 2.0,
            self.y as f64 + (self.h as f64 - 1.0) / 2.0,
        )
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x as f64
            && y >= self.y as f64
            && x <= (self.x + self.w - 1) as f64
            && y <= (self.y + self.h - 1) as f64
    }

    /// Intersection over union with another box.
    pub fn iou(&self, other: &Roi) -> f64 {
        let x0 = self.x.max(other.x);
        let y0 = self.y.max(other.y);
        let x1 = (self.x + self.w).min(other.x + other.w);
        let y1 = (self.y + self.h).min(other.y + other.h);
        if x1 <= x0 || y1 <= y0 {
            return 0.0;
        }
        let inter = ((x1 - x0) * (y1 - y0)) as f64;
        let union = (self.w * self.h + other.w * other.h) as f64 - inter;
        inter / union
    }
}

/// Parameters for corner detection inside a region of interest.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CornerParams {
    /// Minimum response as a fraction of the ROI's maximum response.
    pub min_quality: f32,
    /// Odd width of the Gaussian used to smooth the structure tensor.
    pub filter_dim: usize,
    /// Cap on the number of returned points per ROI.
    pub max_points: usize,
}

impl Default for CornerParams {
    fn default() -> Self {
        CornerParams {
            min_quality: 0.2,
            filter_dim: 5,
            max_points: 200,
        }
    }
}

/// Per-pixel minimum eigenvalue of the Gaussian-smoothed structure tensor,
/// clamped at zero. The smoothing sigma is `(filter_dim - 1) / 4` so two
/// standard deviations fit inside the kernel.
pub fn min_eig_response(img: &GrayImage, filter_dim: usize) -> Result<GrayImage> {
    if filter_dim % 2 == 0 || filter_dim < 3 {
        return Err(Error::InvalidParameter(format!(
            "structure tensor filter dimension must be odd and >= 3, got {filter_dim}"
        )));
    }
    let (gx, gy) = img::gradient(img)?;
    let n = img.width * img.height;
    let mut gxx = vec![0.0f32; n];
    let mut gyy = vec![0.0f32; n];
    let mut gxy = vec![0.0f32; n];
    for i in 0..n {
        gxx[i] = gx.data[i] * gx.data[i];
        gyy[i] = gy.data[i] * gy.data[i];
        gxy[i] = gx.data[i] * gy.data[i];
    }
    let sigma = (filter_dim - 1) as f64 / 4.0;
    let wrap = |data: Vec<f32>| GrayImage {
        width: img.width,
        height: img.height,
        data,
    };
    let sxx = img::gaussian_smooth_fixed(&wrap(gxx), filter_dim, sigma);
    let syy = img::gaussian_smooth_fixed(&wrap(gyy), filter_dim, sigma);
    let sxy = img::gaussian_smooth_fixed(&wrap(gxy), filter_dim, sigma);
    let mut resp = vec![0.0f32; n];
    for i in 0..n {
        let half_trace = 0.5 * (sxx.data[i] + syy.data[i]);
        let half_diff = 0.5 * (sxx.data[i] - syy.data[i]);
        let disc = (half_diff * half_diff + sxy.data[i] * sxy.data[i]).sqrt();
        resp[i] = (half_trace - disc).max(0.0);
    }
    Ok(GrayImage {
        width: img.width,
        height: img.height,
        data: resp,
    })
}

/// Detect corners inside a region of interest: 3x3 non-max suppressed local
/// maxima of the minimum-eigenvalue response at or above
/// `min_quality * (ROI max response)`, refined to subpixel by a quadratic fit
/// and returned sorted by descending quality.
pub fn detect_corners(
    img: &GrayImage,
    roi: &Roi,
    params: &CornerParams,
) -> Result<Vec<FeaturePoint>> {
    roi.validate(img.width, img.height)?;
    if !(params.min_quality > 0.0 && params.min_quality < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "min_quality must be in (0, 1), got {}",
            params.min_quality
        )));
    }
    let resp = min_eig_response(img, params.filter_dim)?;

    let mut roi_max = 0.0f32;
    for y in roi.y..roi.y + roi.h {
        for x in roi.x..roi.x + roi.w {
            roi_max = roi_max.max(resp.get(x, y));
        }
    }
    if roi_max <= 0.0 {
        return Ok(Vec::new());
    }
    let threshold = params.min_quality * roi_max;

    let mut points = Vec::new();
    // The 3x3 neighborhood must fit inside the ROI.
    for y in roi.y + 1..roi.y + roi.h - 1 {
        for x in roi.x + 1..roi.x + roi.w - 1 {
            let v = resp.get(x, y);
            if v < threshold {
                continue;
            }
            let mut is_max = true;
            'nms: for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let nv = resp.get((x as i64 + dx) as usize, (y as i64 + dy) as usize);
                    if nv >= v {
                        is_max = false;
                        break 'nms;
                    }
                }
            }
            if !is_max {
                continue;
            }
            let (sx, sy) = subpixel_refine(&resp, x, y);
            points.push(FeaturePoint {
                x: sx,
                y: sy,
                quality: v,
            });
        }
    }
    points.sort_by(|a, b| b.quality.partial_cmp(&a.quality).unwrap());
    points.truncate(params.max_points);
    Ok(points)
}

/// One-dimensional quadratic peak refinement along each axis, clamped to
/// half a pixel so points stay next to their integer maximum.
fn subpixel_refine(resp: &GrayImage, x: usize, y: usize) -> (f64, f64) {
    let refine = |minus: f32, center: f32, plus: f32| -> f64 {
        let denom = (minus - 2.0 * center + plus) as f64;
        if denom >= 0.0 || denom.abs() < 1e-20 {
            return 0.0;
        }
        (0.5 * (minus - plus) as f64 / denom).clamp(-0.5, 0.5)
    };
    let dx = refine(resp.get(x - 1, y), resp.get(x, y), resp.get(x + 1, y));
    let dy = refine(resp.get(x, y - 1), resp.get(x, y), resp.get(x, y + 1));
    (x as f64 + dx, y as f64 + dy)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn full_roi(img: &GrayImage) -> Roi {
        Roi::new(0, 0, img.width, img.height, 1.0)
    }

    #[test]
    fn response_of_constant_image_is_zero() {
        let img = GrayImage::constant(32, 32, 0.5);
        let resp = min_eig_response(&img, 5).unwrap();
        assert!(resp.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn response_rejects_even_filter_dim() {
        let img = GrayImage::constant(16, 16, 0.5);
        assert!(min_eig_response(&img, 4).is_err());
        assert!(min_eig_response(&img, 1).is_err());
    }

    #[test]
    fn straight_edge_has_near_zero_response() {
        // A vertical step edge: the structure tensor is rank one along the
        // edge, so the smaller eigenvalue stays near zero.
        let img = GrayImage::from_fn(40, 40, |x, _| if x < 20 { 0.1 } else { 0.9 });
        let resp = min_eig_response(&img, 5).unwrap();
        let edge_max = (10..30)
            .map(|y| resp.get(20, y))
            .fold(0.0f32, |m, v| m.max(v));
        // Compare against a genuine corner response on a checkerboard.
        let board = GrayImage::from_fn(40, 40, |x, y| if (x < 20) ^ (y < 20) { 0.9 } else { 0.1 });
        let corner_resp = min_eig_response(&board, 5).unwrap();
        let corner_max = corner_resp.data.iter().fold(0.0f32, |m, &v| m.max(v));
        assert!(edge_max < 0.05 * corner_max, "{edge_max} vs {corner_max}");
    }

    #[test]
    fn checkerboard_corner_peaks_within_one_pixel() {
        let board = GrayImage::from_fn(41, 41, |x, y| if (x < 20) ^ (y < 20) { 0.9 } else { 0.1 });
        let resp = min_eig_response(&board, 5).unwrap();
        let mut best = (0usize, 0usize, 0.0f32);
        for y in 2..39 {
            for x in 2..39 {
                if resp.get(x, y) > best.2 {
                    best = (x, y, resp.get(x, y));
                }
            }
        }
        // The four-quadrant meeting point sits between pixels 19 and 20.
        assert!((best.0 as f64 - 19.5).abs() <= 1.0);
        assert!((best.1 as f64 - 19.5).abs() <= 1.0);
    }

    #[test]
    fn constant_roi_yields_no_corners() {
        let img = GrayImage::constant(32, 32, 0.7);
        let pts = detect_corners(&img, &full_roi(&img), &CornerParams::default()).unwrap();
        assert!(pts.is_empty());
    }

    #[test]
    fn white_square_yields_its_four_corners() {
        let img = GrayImage::from_fn(48, 48, |x, y| {
            if (14..=33).contains(&x) && (14..=33).contains(&y) {
                1.0
            } else {
                0.0
            }
        });
        let pts = detect_corners(&img, &full_roi(&img), &CornerParams::default()).unwrap();
        assert_eq!(pts.len(), 4, "{pts:?}");
        let vertices = [
            (14.0, 14.0),
            (33.0, 14.0),
            (14.0, 33.0),
            (33.0, 33.0),
        ];
        for v in vertices {
            let close = pts
                .iter()
                .any(|p| ((p.x - v.0).powi(2) + (p.y - v.1).powi(2)).sqrt() <= 1.0 + 1e-9);
            assert!(close, "no corner within 1 px of {v:?}: {pts:?}");
        }
    }

    #[test]
    fn near_unity_quality_keeps_at_most_the_global_max() {
        // Asymmetric texture so the global maximum is unique.
        let img = GrayImage::from_fn(48, 48, |x, y| {
            let h = (x.wrapping_mul(92821).wrapping_add(y.wrapping_mul(68917))) % 251;
            h as f32 / 251.0
        });
        let img = crate::img::gaussian_blur(&img, 1.0).unwrap();
        let params = CornerParams {
            min_quality: 0.9999,
            ..CornerParams::default()
        };
        let pts = detect_corners(&img, &full_roi(&img), &params).unwrap();
        assert!(pts.len() <= 1, "{pts:?}");
    }

    #[test]
    fn returned_points_meet_quality_floor_and_nms_spacing() {
        let img = GrayImage::from_fn(64, 64, |x, y| {
            let h = (x.wrapping_mul(2654435761).wrapping_add(y.wrapping_mul(40503))) % 255;
            h as f32 / 255.0
        });
        let smooth = crate::img::gaussian_blur(&img, 1.0).unwrap();
        let roi = Roi::new(8, 8, 48, 48, 1.0);
        let params = CornerParams::default();
        let pts = detect_corners(&smooth, &roi, &params).unwrap();
        assert!(!pts.is_empty());
        let resp = min_eig_response(&smooth, params.filter_dim).unwrap();
        let mut roi_max = 0.0f32;
        for y in roi.y..roi.y + roi.h {
            for x in roi.x..roi.x + roi.w {
                roi_max = roi_max.max(resp.get(x, y));
            }
        }
        for p in &pts {
            assert!(p.quality >= params.min_quality * roi_max);
            assert!(roi.contains(p.x, p.y));
        }
        for (i, a) in pts.iter().enumerate() {
            for b in pts.iter().skip(i + 1) {
                assert!(
                    (a.x - b.x).abs() > 1.0 || (a.y - b.y).abs() > 1.0,
                    "adjacent maxima survived nms: {a:?} {b:?}"
                );
            }
        }
    }

    #[test]
    fn detection_is_translation_equivariant() {
        let pattern = |x: i64, y: i64| -> f32 {
            let h = ((x * 31 + y * 57) % 13) as f32 / 13.0;
            h
        };
        let base = GrayImage::from_fn(80, 80, |x, y| pattern(x as i64, y as i64));
        let base = crate::img::gaussian_blur(&base, 1.0).unwrap();
        let (sx, sy) = (7i64, 4i64);
        let shifted = GrayImage::from_fn(80, 80, |x, y| pattern(x as i64 - sx, y as i64 - sy));
        let shifted = crate::img::gaussian_blur(&shifted, 1.0).unwrap();
        let roi_a = Roi::new(20, 20, 30, 30, 1.0);
        let roi_b = Roi::new(20 + sx as usize, 20 + sy as usize, 30, 30, 1.0);
        let params = CornerParams::default();
        let a = detect_corners(&base, &roi_a, &params).unwrap();
        let b = detect_corners(&shifted, &roi_b, &params).unwrap();
        assert_eq!(a.len(), b.len());
        for (pa, pb) in a.iter().zip(b.iter()) {
            assert!((pa.x + sx as f64 - pb.x).abs() < 1e-4);
            assert!((pa.y + sy as f64 - pb.y).abs() < 1e-4);
        }
    }

    #[test]
    fn roi_validation_and_iou() {
        assert!(Roi::new(0, 0, 8, 8, 1.0).validate(32, 32).is_ok());
        assert!(Roi::new(0, 0, 7, 8, 1.0).validate(32, 32).is_err());
        assert!(Roi::new(28, 0, 8, 8, 1.0).validate(32, 32).is_err());
        let a = Roi::new(0, 0, 10, 10, 1.0);
        let b = Roi::new(5, 5, 10, 10, 1.0);
        let expected = 25.0 / 175.0;
        assert!((a.iou(&b) - expected).abs() < 1e-12);
        assert_eq!(a.iou(&Roi::new(20, 20, 10, 10, 1.0)), 0.0);
        assert!((a.iou(&a) - 1.0).abs() < 1e-12);
    }
}
