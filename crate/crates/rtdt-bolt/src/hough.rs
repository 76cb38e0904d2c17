//! Edge-based baseline: Canny / Prewitt / Laplacian-of-Gaussian edge maps
//! plus a rho-theta Hough transform for straight lines. Thresholds are
//! fractions of the per-image maximum response.

use serde::{Deserialize, Serialize};

use crate::img::{gaussian_blur, gradient, BinaryImage, GrayImage};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EdgeMethod {
    Canny,
    Prewitt,
    Log,
}

/// Edge sensitivity thresholds, each relative to the image's maximum
/// response for the method.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EdgeThresholds {
    pub canny_low: f64,
    pub canny_high: f64,
    pub prewitt: f64,
    pub log: f64,
}

impl Default for EdgeThresholds {
    fn default() -> Self {
        EdgeThresholds {
            canny_low: 0.1,
            canny_high: 0.8,
            prewitt: 0.05,
            log: 0.004,
        }
    }
}

impl EdgeThresholds {
    pub fn validate(&self) -> Result<()> {
        let in_unit = |v: f64| v > 0.0 && v < 1.0;
        if !in_unit(self.canny_low)
            || !in_unit(self.canny_high)
            || !in_unit(self.prewitt)
            || !in_unit(self.log)
        {
            return Err(Error::InvalidParameter(
                "edge thresholds must lie in (0, 1)".into(),
            ));
        }
        if self.canny_low >= self.canny_high {
            return Err(Error::InvalidParameter(
                "canny low threshold must be below the high threshold".into(),
            ));
        }
        Ok(())
    }
}

/// A detected line in polar form: `rho = x cos(theta) + y sin(theta)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Line {
    /// Signed distance from the origin, pixels.
    pub rho: f64,
    /// Line angle in degrees, `[0, 180)`.
    pub theta_deg: f64,
    pub votes: u32,
}

/// Binary edge map of the image with the chosen method.
pub fn edge_map(
    img: &GrayImage,
    method: EdgeMethod,
    thresholds: &EdgeThresholds,
) -> Result<BinaryImage> {
    thresholds.validate()?;
    match method {
        EdgeMethod::Canny => canny(img, thresholds.canny_low, thresholds.canny_high),
        EdgeMethod::Prewitt => prewitt(img, thresholds.prewitt),
        EdgeMethod::Log => log_zero_crossings(img, thresholds.log),
    }
}

fn canny(img: &GrayImage, low_frac: f64, high_frac: f64) -> Result<BinaryImage> {
    let smoothed = gaussian_blur(img, 1.4)?;
    let (gx, gy) = gradient(&smoothed)?;
    let (w, h) = (img.width, img.height);
    let mut mag = vec![0.0f32; w * h];
    let mut max_mag = 0.0f32;
    for i in 0..w * h {
        mag[i] = gx.data[i].hypot(gy.data[i]);
        max_mag = max_mag.max(mag[i]);
    }
    if max_mag <= 0.0 {
        return Ok(BinaryImage::filled(w, h, false));
    }

    // Non-maximum suppression along the quantized gradient direction.
    let mut thin = vec![0.0f32; w * h];
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let i = y * w + x;
            if mag[i] == 0.0 {
                continue;
            }
            let mut angle = (gy.data[i]).atan2(gx.data[i]).to_degrees();
            if angle < 0.0 {
                angle += 180.0;
            }
            let (a, b) = if !(22.5..157.5).contains(&angle) {
                (mag[i - 1], mag[i + 1])
            } else if angle < 67.5 {
                (mag[i - w - 1], mag[i + w + 1])
            } else if angle < 112.5 {
                (mag[i - w], mag[i + w])
            } else {
                (mag[i - w + 1], mag[i + w - 1])
            };
            // Ties break toward the later pixel so plateau edges stay one
            // pixel wide.
            if mag[i] >= a && mag[i] > b {
                thin[i] = mag[i];
            }
        }
    }

    // Hysteresis from strong pixels through weak neighbors.
    let low = low_frac as f32 * max_mag;
    let high = high_frac as f32 * max_mag;
    let mut out = BinaryImage::filled(w, h, false);
    let mut stack = Vec::new();
    for start in 0..w * h {
        if thin[start] < high || out.data[start] {
            continue;
        }
        out.data[start] = true;
        stack.push(start);
        while let Some(i) = stack.pop() {
            let (x, y) = (i % w, i / w);
            for dy in -1i64..=1 {
                for dx in -1i64..=1 {
                    let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                    if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                        continue;
                    }
                    let ni = ny as usize * w + nx as usize;
                    if !out.data[ni] && thin[ni] >= low {
                        out.data[ni] = true;
                        stack.push(ni);
                    }
                }
            }
        }
    }
    Ok(out)
}

fn prewitt(img: &GrayImage, frac: f64) -> Result<BinaryImage> {
    let (w, h) = (img.width, img.height);
    if w < 3 || h < 3 {
        return Err(Error::InvalidParameter(
            "prewitt needs at least a 3x3 image".into(),
        ));
    }
    let mut mag = vec![0.0f32; w * h];
    let mut max_mag = 0.0f32;
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let v = |dx: i64, dy: i64| img.get((x as i64 + dx) as usize, (y as i64 + dy) as usize);
            let gx = (v(1, -1) + v(1, 0) + v(1, 1)) - (v(-1, -1) + v(-1, 0) + v(-1, 1));
            let gy = (v(-1, 1) + v(0, 1) + v(1, 1)) - (v(-1, -1) + v(0, -1) + v(1, -1));
            let m = gx.hypot(gy);
            mag[y * w + x] = m;
            max_mag = max_mag.max(m);
        }
    }
    let mut out = BinaryImage::filled(w, h, false);
    if max_mag <= 0.0 {
        return Ok(out);
    }
    let threshold = frac as f32 * max_mag;
    for i in 0..w * h {
        out.data[i] = mag[i] >= threshold && mag[i] > 0.0;
    }
    Ok(out)
}

fn log_zero_crossings(img: &GrayImage, frac: f64) -> Result<BinaryImage> {
    let smoothed = gaussian_blur(img, 2.0)?;
    let (w, h) = (img.width, img.height);
    if w < 3 || h < 3 {
        return Err(Error::InvalidParameter(
            "log needs at least a 3x3 image".into(),
        ));
    }
    let mut lap = vec![0.0f32; w * h];
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let i = y * w + x;
            lap[i] = smoothed.data[i - 1]
                + smoothed.data[i + 1]
                + smoothed.data[i - w]
                + smoothed.data[i + w]
                - 4.0 * smoothed.data[i];
        }
    }
    // Zero crossings between 4-neighbors; slope is the jump across the pair.
    let mut slope = vec![0.0f32; w * h];
    let mut max_slope = 0.0f32;
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let i = y * w + x;
            for &j in &[i + 1, i + w] {
                if lap[i] * lap[j] < 0.0 {
                    let s = (lap[i] - lap[j]).abs();
                    let k = if lap[i].abs() <= lap[j].abs() { i } else { j };
                    slope[k] = slope[k].max(s);
                    max_slope = max_slope.max(s);
                }
            }
        }
    }
    let mut out = BinaryImage::filled(w, h, false);
    if max_slope <= 0.0 {
        return Ok(out);
    }
    let threshold = frac as f32 * max_slope;
    for i in 0..w * h {
        out.data[i] = slope[i] > threshold;
    }
    Ok(out)
}

/// Accumulate Hough votes over 1-pixel rho bins and 1-degree theta bins and
/// return the `n_peaks` strongest 3x3 non-max-suppressed accumulator cells.
pub fn hough_lines(edges: &BinaryImage, n_peaks: usize) -> Result<Vec<Line>> {
    if n_peaks < 1 {
        return Err(Error::InvalidParameter(
            "n_peaks must be at least 1".into(),
        ));
    }
    let (w, h) = (edges.width, edges.height);
    let n_theta = 180usize;
    let max_rho = (((w - 1) * (w - 1) + (h - 1) * (h - 1)) as f64).sqrt().ceil() as i64;
    let n_rho = (2 * max_rho + 1) as usize;
    let trig: Vec<(f64, f64)> = (0..n_theta)
        .map(|t| (t as f64).to_radians().sin_cos())
        .collect();
    let mut acc = vec![0u32; n_theta * n_rho];
    for y in 0..h {
        for x in 0..w {
            if !edges.get(x, y) {
                continue;
            }
            for (t, &(s, c)) in trig.iter().enumerate() {
                let rho = x as f64 * c + y as f64 * s;
                let bin = (rho.round() as i64 + max_rho) as usize;
                acc[t * n_rho + bin] += 1;
            }
        }
    }

    let mut peaks: Vec<Line> = Vec::new();
    for t in 0..n_theta {
        for r in 0..n_rho {
            let votes = acc[t * n_rho + r];
            if votes == 0 {
                continue;
            }
            let mut is_peak = true;
            'nms: for dt in -1i64..=1 {
                for dr in -1i64..=1 {
                    if dt == 0 && dr == 0 {
                        continue;
                    }
                    let (nt, nr) = (t as i64 + dt, r as i64 + dr);
                    if nt < 0 || nr < 0 || nt >= n_theta as i64 || nr >= n_rho as i64 {
                        continue;
                    }
                    let nv = acc[nt as usize * n_rho + nr as usize];
                    if nv > votes || (nv == votes && (nt, nr) < (t as i64, r as i64)) {
                        is_peak = false;
                        break 'nms;
                    }
                }
            }
            if is_peak {
                peaks.push(Line {
                    rho: (r as i64 - max_rho) as f64,
                    theta_deg: t as f64,
                    votes,
                });
            }
        }
    }
    peaks.sort_by(|a, b| {
        b.votes
            .cmp(&a.votes)
            .then(a.theta_deg.partial_cmp(&b.theta_deg).unwrap())
            .then(a.rho.partial_cmp(&b.rho).unwrap())
    });
    peaks.truncate(n_peaks);
    Ok(peaks)
}

/// CSV dump of detected lines.
pub fn lines_to_csv(lines: &[Line]) -> String {
    let mut out = String::from("rho,theta_deg,votes\n");
    for l in lines {
        out.push_str(&format!("{:.1},{:.1},{}\n", l.rho, l.theta_deg, l.votes));
    }
    out
}
