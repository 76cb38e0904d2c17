//! Pyramidal Kanade-Lucas-Tomasi point tracking between consecutive frames
//! with forward-backward (bidirectional) error rejection.
//!
//! Per point, a translation-only Lucas-Kanade solve is run coarse-to-fine
//! over the pyramid: at each level iterate `d <- d + G^-1 * b`, where `G` is
//! the window structure tensor of the source frame and `b` the
//! image-difference moment vector. Gradients are evaluated on the source
//! frame only, so `G` is fixed per level and only the difference image is
//! resampled each iteration.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::img::{self, GrayImage, Pyramid};
use crate::{Error, Result};

/// Minimum eigenvalue of the window structure tensor below which a patch is
/// considered textureless and the point is dropped.
const MIN_EIG_FLOOR: f64 = 1e-6;

/// The four studied tracker parameters plus the convergence threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackerConfig {
    /// Number of pyramid levels (NP).
    pub np: usize,
    /// Bidirectional error threshold in pixels (BE).
    pub be: f64,
    /// Search block size, odd, in pixels (BS).
    pub bs: usize,
    /// Maximum iterations per pyramid level (NI).
    pub ni: usize,
    /// Convergence threshold on the update norm, in pixels.
    pub eps: f64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            np: 3,
            be: 6.0,
            bs: 5,
            ni: 30,
            eps: 0.03,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.np < 1 {
            return Err(Error::InvalidParameter("np must be at least 1".into()));
        }
        if !(self.be > 0.0) {
            return Err(Error::InvalidParameter("be must be positive".into()));
        }
        if self.bs < 3 || self.bs % 2 == 0 {
            return Err(Error::InvalidParameter(format!(
                "bs must be odd and >= 3, got {}",
                self.bs
            )));
        }
        if self.ni < 1 {
            return Err(Error::InvalidParameter("ni must be at least 1".into()));
        }
        if !(self.eps > 0.0) {
            return Err(Error::InvalidParameter("eps must be positive".into()));
        }
        Ok(())
    }
}

/// Why a point was dropped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossReason {
    /// The tracking window left the frame.
    OutOfBounds,
    /// The window structure tensor was near singular (textureless patch).
    Singular,
    /// The iteration at level 0 still moved more than a pixel when it ran out
    /// of iterations.
    NoConvergence,
    /// Forward-backward validation failed (error above BE, or the backward
    /// track was itself lost).
    ForwardBackward,
}

/// Outcome of tracking one point between two frames.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TrackOutcome {
    Tracked { x: f64, y: f64, fb_error: f64 },
    Lost(LossReason),
}

impl TrackOutcome {
    pub fn is_tracked(&self) -> bool {
        matches!(self, TrackOutcome::Tracked { .. })
    }

    pub fn position(&self) -> Option<(f64, f64)> {
        match *self {
            TrackOutcome::Tracked { x, y, .. } => Some((x, y)),
            TrackOutcome::Lost(_) => None,
        }
    }
}

/// Per-level source-frame gradients, computed once per tracking call.
struct Gradients {
    levels: Vec<(GrayImage, GrayImage)>,
}

impl Gradients {
    fn of(pyr: &Pyramid) -> Result<Gradients> {
        let levels = pyr
            .levels
            .iter()
            .map(img::gradient)
            .collect::<Result<Vec<_>>>()?;
        Ok(Gradients { levels })
    }
}

fn check_pyramids(prev: &Pyramid, next: &Pyramid, cfg: &TrackerConfig) -> Result<()> {
    cfg.validate()?;
    if prev.num_levels() != cfg.np || next.num_levels() != cfg.np {
        return Err(Error::InvalidParameter(format!(
            "pyramid level count ({}, {}) does not match np = {}",
            prev.num_levels(),
            next.num_levels(),
            cfg.np
        )));
    }
    if prev.level(0).width != next.level(0).width || prev.level(0).height != next.level(0).height {
        return Err(Error::InvalidParameter(
            "pyramids were built from frames of different sizes".into(),
        ));
    }
    Ok(())
}

/// Track points from `prev` to `next`, validating each survivor by tracking
/// it back and comparing against its original location. A point is `Tracked`
/// only if the backward pass succeeds and the bidirectional error is within
/// `cfg.be`.
pub fn track_points(
    prev: &Pyramid,
    next: &Pyramid,
    points: &[(f64, f64)],
    cfg: &TrackerConfig,
) -> Result<Vec<TrackOutcome>> {
    check_pyramids(prev, next, cfg)?;
    let grads_prev = Gradients::of(prev)?;
    let grads_next = Gradients::of(next)?;
    Ok(points
        .par_iter()
        .map(|&(x, y)| {
            match lk_pyramidal(prev, &grads_prev, next, (x, y), cfg) {
                Err(reason) => TrackOutcome::Lost(reason),
                Ok((nx, ny)) => {
                    match lk_pyramidal(next, &grads_next, prev, (nx, ny), cfg) {
                        Err(_) => TrackOutcome::Lost(LossReason::ForwardBackward),
                        Ok((bx, by)) => {
                            let fb = ((bx - x).powi(2) + (by - y).powi(2)).sqrt();
                            if fb <= cfg.be {
                                TrackOutcome::Tracked {
                                    x: nx,
                                    y: ny,
                                    fb_error: fb,
                                }
                            } else {
                                TrackOutcome::Lost(LossReason::ForwardBackward)
                            }
                        }
                    }
                }
            }
        })
        .collect())
}

/// Re-track a forward landing point from `next` back to `prev` and return the
/// Euclidean distance to the original location. Returns infinity when the
/// backward track is itself lost.
pub fn forward_backward_check(
    prev: &Pyramid,
    next: &Pyramid,
    point: (f64, f64),
    forward: (f64, f64),
    cfg: &TrackerConfig,
) -> Result<f64> {
    check_pyramids(prev, next, cfg)?;
    let grads_next = Gradients::of(next)?;
    Ok(
        match lk_pyramidal(next, &grads_next, prev, forward, cfg) {
            Err(_) => f64::INFINITY,
            Ok((bx, by)) => ((bx - point.0).powi(2) + (by - point.1).powi(2)).sqrt(),
        },
    )
}

/// Coarse-to-fine translation-only Lucas-Kanade for a single point.
fn lk_pyramidal(
    from: &Pyramid,
    from_grads: &Gradients,
    to: &Pyramid,
    start: (f64, f64),
    cfg: &TrackerConfig,
) -> std::result::Result<(f64, f64), LossReason> {
    let r = (cfg.bs / 2) as i64;
    let win = cfg.bs * cfg.bs;
    let mut template = vec![0.0f64; win];
    let mut grad_x = vec![0.0f64; win];
    let mut grad_y = vec![0.0f64; win];

    let mut d = (0.0f64, 0.0f64);
    for level in (0..cfg.np).rev() {
        let scale = (1u64 << level) as f64;
        let u = (start.0 / scale, start.1 / scale);
        let from_img = from.level(level);
        let to_img = to.level(level);
        let (gx, gy) = &from_grads.levels[level];

        if !window_in_bounds(from_img, u, r) {
            return Err(LossReason::OutOfBounds);
        }
        // Template and gradients are fixed for the whole level.
        let mut k = 0;
        for dy in -r..=r {
            for dx in -r..=r {
                let (sx, sy) = (u.0 + dx as f64, u.1 + dy as f64);
                template[k] = from_img.sample_bilinear(sx, sy).unwrap() as f64;
                grad_x[k] = gx.sample_bilinear(sx, sy).unwrap() as f64;
                grad_y[k] = gy.sample_bilinear(sx, sy).unwrap() as f64;
                k += 1;
            }
        }
        let (mut gxx, mut gxy, mut gyy) = (0.0f64, 0.0f64, 0.0f64);
        for k in 0..win {
            gxx += grad_x[k] * grad_x[k];
            gxy += grad_x[k] * grad_y[k];
            gyy += grad_y[k] * grad_y[k];
        }
        let half_trace = 0.5 * (gxx + gyy);
        let disc = (0.25 * (gxx - gyy).powi(2) + gxy * gxy).sqrt();
        if half_trace - disc < MIN_EIG_FLOOR {
            return Err(LossReason::Singular);
        }
        let det = gxx * gyy - gxy * gxy;

        let mut last_update = f64::INFINITY;
        for _ in 0..cfg.ni {
            let center = (u.0 + d.0, u.1 + d.1);
            if !window_in_bounds(to_img, center, r) {
                return Err(LossReason::OutOfBounds);
            }
            let (mut bx, mut by) = (0.0f64, 0.0f64);
            let mut k = 0;
            for dy in -r..=r {
                for dx in -r..=r {
                    let v = to_img
                        .sample_bilinear(center.0 + dx as f64, center.1 + dy as f64)
                        .unwrap() as f64;
                    let diff = template[k] - v;
                    bx += diff * grad_x[k];
                    by += diff * grad_y[k];
                    k += 1;
                }
            }
            let ux = (gyy * bx - gxy * by) / det;
            let uy = (gxx * by - gxy * bx) / det;
            d.0 += ux;
            d.1 += uy;
            last_update = (ux * ux + uy * uy).sqrt();
            if last_update < cfg.eps {
                break;
            }
        }
        if level > 0 {
            d.0 *= 2.0;
            d.1 *= 2.0;
        } else if last_update > 1.0 {
            return Err(LossReason::NoConvergence);
        }
    }
    let landing = (start.0 + d.0, start.1 + d.1);
    let base = to.level(0);
    if landing.0 < 0.0
        || landing.1 < 0.0
        || landing.0 > (base.width - 1) as f64
        || landing.1 > (base.height - 1) as f64
    {
        return Err(LossReason::OutOfBounds);
    }
    Ok(landing)
}

fn window_in_bounds(img: &GrayImage, center: (f64, f64), r: i64) -> bool {
    center.0 - r as f64 >= 0.0
        && center.1 - r as f64 >= 0.0
        && center.0 + r as f64 <= (img.width - 1) as f64
        && center.1 + r as f64 <= (img.height - 1) as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::img::build_pyramid;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Smooth seeded random texture; `shift` moves the content by (+sx, +sy).
    fn textured(w: usize, h: usize, seed: u64, shift: (i64, i64), blur: f64) -> GrayImage {
        let margin = 16i64;
        let big_w = w as i64 + 2 * margin;
        let big_h = h as i64 + 2 * margin;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let base = GrayImage::from_fn(big_w as usize, big_h as usize, |_, _| rng.gen::<f32>());
        let base = crate::img::gaussian_blur(&base, blur).unwrap();
        GrayImage::from_fn(w, h, |x, y| {
            let sx = (x as i64 - shift.0 + margin) as usize;
            let sy = (y as i64 - shift.1 + margin) as usize;
            base.get(sx, sy)
        })
    }

    fn grid_points(w: usize, h: usize, margin: usize, step: usize) -> Vec<(f64, f64)> {
        let mut pts = Vec::new();
        let mut y = margin;
        while y < h - margin {
            let mut x = margin;
            while x < w - margin {
                pts.push((x as f64, y as f64));
                x += step;
            }
            y += step;
        }
        pts
    }

    #[test]
    fn identical_frames_track_in_place() {
        let img = textured(96, 96, 1, (0, 0), 1.2);
        let cfg = TrackerConfig::default();
        let pyr = build_pyramid(&img, cfg.np).unwrap();
        let pts = grid_points(96, 96, 12, 8);
        let outcomes = track_points(&pyr, &pyr, &pts, &cfg).unwrap();
        for (p, o) in pts.iter().zip(outcomes.iter()) {
            let (x, y) = o.position().expect("point lost on identical frames");
            assert!((x - p.0).abs() < cfg.eps && (y - p.1).abs() < cfg.eps);
            if let TrackOutcome::Tracked { fb_error, .. } = o {
                assert!(*fb_error < cfg.eps);
            }
        }
    }

    #[test]
    fn integer_translation_is_recovered_to_a_tenth_pixel() {
        let (dx, dy) = (3i64, -2i64);
        let a = textured(96, 96, 2, (0, 0), 1.2);
        let b = textured(96, 96, 2, (dx, dy), 1.2);
        let cfg = TrackerConfig::default();
        let pa = build_pyramid(&a, cfg.np).unwrap();
        let pb = build_pyramid(&b, cfg.np).unwrap();
        let pts = grid_points(96, 96, 14, 8);
        let outcomes = track_points(&pa, &pb, &pts, &cfg).unwrap();
        let mut good = 0;
        for (p, o) in pts.iter().zip(outcomes.iter()) {
            if let Some((x, y)) = o.position() {
                let err = ((x - p.0 - dx as f64).powi(2) + (y - p.1 - dy as f64).powi(2)).sqrt();
                if err < 0.1 {
                    good += 1;
                }
            }
        }
        assert!(
            good as f64 >= 0.9 * pts.len() as f64,
            "only {good}/{} points within 0.1 px",
            pts.len()
        );
    }

    #[test]
    fn forward_and_backward_displacements_cancel() {
        let (dx, dy) = (2i64, 3i64);
        let a = textured(96, 96, 4, (0, 0), 1.2);
        let b = textured(96, 96, 4, (dx, dy), 1.2);
        let cfg = TrackerConfig::default();
        let pa = build_pyramid(&a, cfg.np).unwrap();
        let pb = build_pyramid(&b, cfg.np).unwrap();
        let pts = grid_points(96, 96, 14, 10);
        let fwd = track_points(&pa, &pb, &pts, &cfg).unwrap();
        for (p, o) in pts.iter().zip(fwd.iter()) {
            let Some((fx, fy)) = o.position() else { continue };
            let back = track_points(&pb, &pa, &[(fx, fy)], &cfg).unwrap();
            let Some((bx, by)) = back[0].position() else { continue };
            let fwd_d = (fx - p.0, fy - p.1);
            let back_d = (bx - fx, by - fy);
            assert!(
                (fwd_d.0 + back_d.0).abs() < 0.2 && (fwd_d.1 + back_d.1).abs() < 0.2,
                "forward {fwd_d:?} vs backward {back_d:?}"
            );
        }
    }

    #[test]
    fn point_near_border_is_lost_out_of_bounds() {
        let a = textured(64, 64, 5, (0, 0), 1.2);
        let b = textured(64, 64, 5, (5, 0), 1.2);
        let cfg = TrackerConfig::default();
        let pa = build_pyramid(&a, cfg.np).unwrap();
        let pb = build_pyramid(&b, cfg.np).unwrap();
        // Tracking moves the point to x ~ 62.5; a bs=5 window there leaves the frame.
        let outcomes = track_points(&pa, &pb, &[(57.5, 32.0)], &cfg).unwrap();
        assert_eq!(outcomes[0], TrackOutcome::Lost(LossReason::OutOfBounds));
    }

    #[test]
    fn flat_patch_is_lost_as_singular() {
        let flat = GrayImage::constant(64, 64, 0.5);
        let cfg = TrackerConfig::default();
        let p = build_pyramid(&flat, cfg.np).unwrap();
        let outcomes = track_points(&p, &p, &[(32.0, 32.0)], &cfg).unwrap();
        assert_eq!(outcomes[0], TrackOutcome::Lost(LossReason::Singular));
    }

    #[test]
    fn corrupted_landing_region_fails_the_bidirectional_check() {
        let a = textured(96, 96, 6, (0, 0), 1.2);
        let mut b = a.clone();
        // Replace a disk around the target with fresh noise.
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let (cx, cy) = (48i64, 48i64);
        for y in 0..96i64 {
            for x in 0..96i64 {
                if (x - cx).pow(2) + (y - cy).pow(2) <= 12 * 12 {
                    b.set(x as usize, y as usize, rng.gen::<f32>());
                }
            }
        }
        let cfg = TrackerConfig {
            be: 2.0,
            ..TrackerConfig::default()
        };
        let pa = build_pyramid(&a, cfg.np).unwrap();
        let pb = build_pyramid(&b, cfg.np).unwrap();
        let outcomes = track_points(&pa, &pb, &[(48.0, 48.0)], &cfg).unwrap();
        assert!(
            !outcomes[0].is_tracked(),
            "point in corrupted region should be rejected: {:?}",
            outcomes[0]
        );
        // Where the forward track lands at all, the measured error is large.
        if let Ok((fx, fy)) = super::lk_pyramidal(
            &pa,
            &Gradients::of(&pa).unwrap(),
            &pb,
            (48.0, 48.0),
            &cfg,
        ) {
            let fb = forward_backward_check(&pa, &pb, (48.0, 48.0), (fx, fy), &cfg).unwrap();
            assert!(fb > 2.0, "fb error {fb} unexpectedly small");
        }
    }

    #[test]
    fn brightness_step_loses_points_instead_of_drifting() {
        let a = textured(96, 96, 7, (0, 0), 1.2);
        let b = GrayImage {
            width: a.width,
            height: a.height,
            data: a.data.iter().map(|&v| (v * 1.5).min(1.0)).collect(),
        };
        let cfg = TrackerConfig::default();
        let pa = build_pyramid(&a, cfg.np).unwrap();
        let pb = build_pyramid(&b, cfg.np).unwrap();
        let pts = grid_points(96, 96, 14, 8);
        let outcomes = track_points(&pa, &pb, &pts, &cfg).unwrap();
        for (p, o) in pts.iter().zip(outcomes.iter()) {
            if let TrackOutcome::Tracked { x, y, fb_error } = o {
                assert!(*fb_error <= cfg.be);
                // The scene is static: anything tracked must not have drifted
                // beyond the bidirectional threshold.
                let drift = ((x - p.0).powi(2) + (y - p.1).powi(2)).sqrt();
                assert!(drift <= cfg.be, "silent drift of {drift} px");
            }
        }
    }

    #[test]
    fn large_motion_needs_the_pyramid() {
        let (dx, dy) = (4i64, -3i64); // 5 px, beyond bs/2 at level 0
        let a = textured(96, 96, 8, (0, 0), 1.0);
        let b = textured(96, 96, 8, (dx, dy), 1.0);
        let pts = grid_points(96, 96, 14, 8);

        let single = TrackerConfig {
            np: 1,
            be: 2.0,
            ..TrackerConfig::default()
        };
        let pa1 = build_pyramid(&a, 1).unwrap();
        let pb1 = build_pyramid(&b, 1).unwrap();
        let flat = track_points(&pa1, &pb1, &pts, &single).unwrap();
        let flat_good = pts
            .iter()
            .zip(flat.iter())
            .filter(|(p, o)| match o.position() {
                Some((x, y)) => {
                    ((x - p.0 - dx as f64).powi(2) + (y - p.1 - dy as f64).powi(2)).sqrt() < 0.1
                }
                None => false,
            })
            .count();

        let multi = TrackerConfig {
            np: 3,
            be: 2.0,
            ..TrackerConfig::default()
        };
        let pa3 = build_pyramid(&a, 3).unwrap();
        let pb3 = build_pyramid(&b, 3).unwrap();
        let pyr = track_points(&pa3, &pb3, &pts, &multi).unwrap();
        let pyr_good = pts
            .iter()
            .zip(pyr.iter())
            .filter(|(p, o)| match o.position() {
                Some((x, y)) => {
                    ((x - p.0 - dx as f64).powi(2) + (y - p.1 - dy as f64).powi(2)).sqrt() < 0.1
                }
                None => false,
            })
            .count();

        assert!(
            pyr_good as f64 >= 0.9 * pts.len() as f64,
            "pyramid recovered only {pyr_good}/{}",
            pts.len()
        );
        assert!(
            (flat_good as f64) < 0.5 * pts.len() as f64,
            "single level unexpectedly recovered {flat_good}/{}",
            pts.len()
        );
    }

    #[test]
    fn level_count_mismatch_is_rejected() {
        let img = textured(64, 64, 9, (0, 0), 1.2);
        let cfg = TrackerConfig::default(); // np = 3
        let p2 = build_pyramid(&img, 2).unwrap();
        let p3 = build_pyramid(&img, 3).unwrap();
        assert!(track_points(&p2, &p3, &[(32.0, 32.0)], &cfg).is_err());
    }
}
