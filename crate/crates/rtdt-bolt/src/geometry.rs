//! Rigid 2-D transform estimation from point correspondences (closed-form
//! least squares and MSAC), rotation-angle extraction, and accumulation of
//! per-frame increments into a total rotation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Rotation by `theta` about the origin followed by a translation, under the
/// row-vector convention `[x y 1] * T`:
///
/// ```text
///     | cos(theta)  sin(theta)  0 |
/// T = | -sin(theta) cos(theta)  0 |
///     | tx          ty          1 |
/// ```
///
/// In image coordinates (x right, y down) a positive `theta` renders as a
/// clockwise rotation on screen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform {
    pub theta: f64,
    pub tx: f64,
    pub ty: f64,
}

/// Wrap an angle into `(-pi, pi]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let w = (theta + std::f64::consts::PI).rem_euclid(2.0 * std::f64::consts::PI)
        - std::f64::consts::PI;
    if w == -std::f64::consts::PI {
        std::f64::consts::PI
    } else {
        w
    }
}

impl RigidTransform {
    pub fn new(theta: f64, tx: f64, ty: f64) -> Self {
        RigidTransform {
            theta: wrap_angle(theta),
            tx,
            ty,
        }
    }

    pub fn identity() -> Self {
        RigidTransform {
            theta: 0.0,
            tx: 0.0,
            ty: 0.0,
        }
    }

    /// The 3x3 matrix in the row-vector layout shown on the type.
    pub fn matrix(&self) -> [[f64; 3]; 3] {
        let (s, c) = self.theta.sin_cos();
        [[c, s, 0.0], [-s, c, 0.0], [self.tx, self.ty, 1.0]]
    }

    /// Apply to a point: `[x y 1] * T`.
    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        let (s, c) = self.theta.sin_cos();
        (x * c - y * s + self.tx, x * s + y * c + self.ty)
    }

    pub fn inverse(&self) -> Self {
        let (s, c) = self.theta.sin_cos();
        // Inverse rotation applied to the negated translation.
        let tx = -(self.tx * c + self.ty * s);
        let ty = -(-self.tx * s + self.ty * c);
        RigidTransform::new(-self.theta, tx, ty)
    }
}

/// Read the rotation angle back out of the transformation matrix.
pub fn extract_angle(t: &RigidTransform) -> f64 {
    let m = t.matrix();
    m[0][1].atan2(m[0][0])
}

/// Re-express a transform about an arbitrary point `(a, b)`:
/// the first two rows equal those of `T`, only the translation row changes,
/// and `(a, b)` is a fixed point whenever `tx = ty = 0`.
pub fn transform_about_point(t: &RigidTransform, a: f64, b: f64) -> [[f64; 3]; 3] {
    let m = t.matrix();
    let row2 = [
        a - a * m[0][0] - b * m[1][0] + m[2][0],
        b - a * m[0][1] - b * m[1][1] + m[2][1],
        1.0,
    ];
    [m[0], m[1], row2]
}

/// Apply a 3x3 row-vector matrix to a point.
pub fn apply_matrix(m: &[[f64; 3]; 3], x: f64, y: f64) -> (f64, f64) {
    (
        x * m[0][0] + y * m[1][0] + m[2][0],
        x * m[0][1] + y * m[1][1] + m[2][1],
    )
}

/// Paired point sets between two frames.
#[derive(Debug, Clone, Default)]
pub struct Correspondences {
    pub src: Vec<[f64; 2]>,
    pub dst: Vec<[f64; 2]>,
}

impl Correspondences {
    pub fn new(src: Vec<[f64; 2]>, dst: Vec<[f64; 2]>) -> Result<Self> {
        if src.len() != dst.len() {
            return Err(Error::InvalidParameter(format!(
                "correspondence lists differ in length: {} vs {}",
                src.len(),
                dst.len()
            )));
        }
        if src
            .iter()
            .chain(dst.iter())
            .any(|p| !p[0].is_finite() || !p[1].is_finite())
        {
            return Err(Error::InvalidParameter(
                "correspondences must be finite".into(),
            ));
        }
        Ok(Correspondences { src, dst })
    }

    pub fn len(&self) -> usize {
        self.src.len()
    }

    pub fn is_empty(&self) -> bool {
        self.src.is_empty()
    }

    fn subset(&self, mask: &[bool]) -> Correspondences {
        let mut src = Vec::new();
        let mut dst = Vec::new();
        for (i, &keep) in mask.iter().enumerate() {
            if keep {
                src.push(self.src[i]);
                dst.push(self.dst[i]);
            }
        }
        Correspondences { src, dst }
    }
}

/// Closed-form 2-D Procrustes fit without scale: rotation plus translation
/// minimizing the sum of squared residuals.
pub fn fit_rigid_lsq(c: &Correspondences) -> Result<RigidTransform> {
    let n = c.len();
    if n < 2 {
        return Err(Error::DegenerateInput(format!(
            "rigid fit needs at least 2 correspondences, got {n}"
        )));
    }
    let centroid = |pts: &[[f64; 2]]| {
        let (mut cx, mut cy) = (0.0, 0.0);
        for p in pts {
            cx += p[0];
            cy += p[1];
        }
        (cx / pts.len() as f64, cy / pts.len() as f64)
    };
    let (sx, sy) = centroid(&c.src);
    let (dx, dy) = centroid(&c.dst);
    if c.src
        .iter()
        .all(|p| (p[0] - sx).abs() < 1e-12 && (p[1] - sy).abs() < 1e-12)
    {
        return Err(Error::DegenerateInput(
            "source points are all coincident".into(),
        ));
    }
    let mut cross = 0.0;
    let mut dot = 0.0;
    for (s, d) in c.src.iter().zip(c.dst.iter()) {
        let (xs, ys) = (s[0] - sx, s[1] - sy);
        let (xd, yd) = (d[0] - dx, d[1] - dy);
        cross += xs * yd - ys * xd;
        dot += xs * xd + ys * yd;
    }
    let theta = cross.atan2(dot);
    let (sin, cos) = theta.sin_cos();
    let tx = dx - (sx * cos - sy * sin);
    let ty = dy - (sx * sin + sy * cos);
    Ok(RigidTransform { theta, tx, ty })
}

/// Sum of squared residuals of a transform over correspondences.
pub fn residual_sum(t: &RigidTransform, c: &Correspondences) -> f64 {
    c.src
        .iter()
        .zip(c.dst.iter())
        .map(|(s, d)| {
            let (px, py) = t.apply(s[0], s[1]);
            (px - d[0]).powi(2) + (py - d[1]).powi(2)
        })
        .sum()
}

/// Configuration for the MSAC robust fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MsacConfig {
    /// Residual threshold in pixels for a correspondence to count as an inlier.
    pub inlier_threshold: f64,
    /// Desired probability of having sampled at least one all-inlier pair.
    pub confidence: f64,
    /// Hard cap on the number of random samples.
    pub max_trials: usize,
    pub seed: u64,
}

impl Default for MsacConfig {
    fn default() -> Self {
        MsacConfig {
            inlier_threshold: 1.5,
            confidence: 0.99,
            max_trials: 500,
            seed: 0,
        }
    }
}

impl MsacConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.inlier_threshold > 0.0) {
            return Err(Error::InvalidParameter(
                "msac inlier threshold must be positive".into(),
            ));
        }
        if !(self.confidence > 0.0 && self.confidence < 1.0) {
            return Err(Error::InvalidParameter(
                "msac confidence must be in (0, 1)".into(),
            ));
        }
        if self.max_trials < 1 {
            return Err(Error::InvalidParameter(
                "msac needs at least one trial".into(),
            ));
        }
        Ok(())
    }
}

/// MSAC rigid fit: seeded 2-point minimal samples scored with a truncated
/// quadratic loss, adaptive trial count, final least-squares refit on the
/// best model's inliers. Deterministic for a fixed seed.
pub fn fit_rigid_msac(c: &Correspondences, cfg: &MsacConfig) -> Result<(RigidTransform, Vec<bool>)> {
    cfg.validate()?;
    let n = c.len();
    if n < 2 {
        return Err(Error::EstimationFailure(format!(
            "msac needs at least 2 correspondences, got {n}"
        )));
    }
    let thr2 = cfg.inlier_threshold * cfg.inlier_threshold;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut best_score = f64::INFINITY;
    let mut best_mask: Option<Vec<bool>> = None;
    let mut trials = cfg.max_trials;
    let mut t = 0usize;
    while t < trials {
        t += 1;
        let i = rng.gen_range(0..n);
        let mut j = rng.gen_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        let pair = Correspondences {
            src: vec![c.src[i], c.src[j]],
            dst: vec![c.dst[i], c.dst[j]],
        };
        let Ok(model) = fit_rigid_lsq(&pair) else {
            continue; // coincident sample
        };
        let mut score = 0.0;
        let mut mask = vec![false; n];
        let mut inliers = 0usize;
        for (k, (s, d)) in c.src.iter().zip(c.dst.iter()).enumerate() {
            let (px, py) = model.apply(s[0], s[1]);
            let r2 = (px - d[0]).powi(2) + (py - d[1]).powi(2);
            if r2 <= thr2 {
                score += r2;
                mask[k] = true;
                inliers += 1;
            } else {
                score += thr2;
            }
        }
        if score < best_score {
            best_score = score;
            best_mask = Some(mask);
            // Adaptive number of trials from the observed inlier ratio.
            let w = inliers as f64 / n as f64;
            let needed = if w >= 1.0 {
                1
            } else {
                let denom = (1.0 - w * w).ln();
                if denom >= 0.0 {
                    cfg.max_trials
                } else {
                    ((1.0 - cfg.confidence).ln() / denom).ceil() as usize
                }
            };
            trials = trials.min(needed.max(t)).min(cfg.max_trials);
        }
    }
    let mask = best_mask.ok_or_else(|| {
        Error::EstimationFailure("msac found no non-degenerate sample".into())
    })?;
    if mask.iter().filter(|&&b| b).count() < 2 {
        return Err(Error::EstimationFailure(
            "msac found no model with at least 2 inliers".into(),
        ));
    }
    let refit = fit_rigid_lsq(&c.subset(&mask))?;
    Ok((refit, mask))
}

/// Result of summing per-interval rotation increments.
#[derive(Debug, Clone, PartialEq)]
pub struct Accumulated {
    /// Plain sum; totals may exceed a full turn, no modular wrap.
    pub total: f64,
    /// Indices of increments at or beyond 60 degrees in magnitude, where the
    /// per-interval guarantee no longer holds.
    pub violations: Vec<usize>,
}

/// Sum rotation increments. Increments of magnitude >= pi/3 are summed anyway
/// but flagged, since the per-interval validity bound is 60 degrees.
pub fn accumulate(increments: &[f64]) -> Accumulated {
    let limit = std::f64::consts::FRAC_PI_3;
    let mut total = 0.0;
    let mut violations = Vec::new();
    for (i, &inc) in increments.iter().enumerate() {
        if inc.abs() >= limit {
            violations.push(i);
        }
        total += inc;
    }
    Accumulated { total, violations }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use std::f64::consts::PI;

    fn apply_all(t: &RigidTransform, pts: &[[f64; 2]]) -> Vec<[f64; 2]> {
        pts.iter()
            .map(|p| {
                let (x, y) = t.apply(p[0], p[1]);
                [x, y]
            })
            .collect()
    }

    fn random_points(rng: &mut impl rand::Rng, n: usize, span: f64) -> Vec<[f64; 2]> {
        (0..n)
            .map(|_| [rng.gen::<f64>() * span, rng.gen::<f64>() * span])
            .collect()
    }

    #[test]
    fn lsq_identity() {
        let pts = vec![[0.0, 0.0], [4.0, 1.0], [2.0, 5.0]];
        let c = Correspondences::new(pts.clone(), pts).unwrap();
        let t = fit_rigid_lsq(&c).unwrap();
        assert!(t.theta.abs() < 1e-12);
        assert!(t.tx.abs() < 1e-12 && t.ty.abs() < 1e-12);
    }

    #[test]
    fn lsq_exact_quarter_turn() {
        let src = vec![[1.0, 0.0], [0.0, 1.0]];
        let truth = RigidTransform::new(PI / 2.0, 0.0, 0.0);
        let dst = apply_all(&truth, &src);
        let t = fit_rigid_lsq(&Correspondences::new(src, dst).unwrap()).unwrap();
        assert!((t.theta - PI / 2.0).abs() < 1e-12);
        assert!(t.tx.abs() < 1e-12 && t.ty.abs() < 1e-12);
    }

    #[test]
    fn lsq_recovers_known_transform() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let src = random_points(&mut rng, 50, 100.0);
        let truth = RigidTransform::new(0.3, 2.0, -1.0);
        let dst = apply_all(&truth, &src);
        let t = fit_rigid_lsq(&Correspondences::new(src, dst).unwrap()).unwrap();
        assert!((t.theta - 0.3).abs() < 1e-9);
        assert!((t.tx - 2.0).abs() < 1e-9);
        assert!((t.ty + 1.0).abs() < 1e-9);
    }

    #[test]
    fn lsq_rejects_degenerate_input() {
        let c = Correspondences::new(vec![[1.0, 1.0]], vec![[2.0, 2.0]]).unwrap();
        assert!(fit_rigid_lsq(&c).is_err());
        let coincident =
            Correspondences::new(vec![[1.0, 1.0], [1.0, 1.0]], vec![[0.0, 0.0], [5.0, 5.0]])
                .unwrap();
        assert!(fit_rigid_lsq(&coincident).is_err());
    }

    #[test]
    fn lsq_theta_is_a_residual_minimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let src = random_points(&mut rng, 12, 50.0);
            let truth = RigidTransform::new(rng.gen::<f64>() * 2.0 - 1.0, 3.0, -2.0);
            let mut dst = apply_all(&truth, &src);
            for d in dst.iter_mut() {
                d[0] += rng.gen::<f64>() * 0.2 - 0.1;
                d[1] += rng.gen::<f64>() * 0.2 - 0.1;
            }
            let c = Correspondences::new(src, dst).unwrap();
            let t = fit_rigid_lsq(&c).unwrap();
            let base = residual_sum(&t, &c);
            for delta in [-1e-3, 1e-3] {
                // Re-solve the translation for the perturbed angle so only
                // the rotation is being probed.
                let perturbed = best_translation_for(t.theta + delta, &c);
                assert!(residual_sum(&perturbed, &c) > base);
            }
        }
    }

    fn best_translation_for(theta: f64, c: &Correspondences) -> RigidTransform {
        let n = c.len() as f64;
        let (sin, cos) = theta.sin_cos();
        let (mut tx, mut ty) = (0.0, 0.0);
        for (s, d) in c.src.iter().zip(c.dst.iter()) {
            tx += d[0] - (s[0] * cos - s[1] * sin);
            ty += d[1] - (s[0] * sin + s[1] * cos);
        }
        RigidTransform {
            theta,
            tx: tx / n,
            ty: ty / n,
        }
    }

    #[test]
    fn composition_of_fits_is_consistent() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_points(&mut rng, 30, 80.0);
        let t_ab = RigidTransform::new(0.21, 1.0, 2.0);
        let t_bc = RigidTransform::new(-0.4, -3.0, 0.5);
        let b = apply_all(&t_ab, &a);
        let c_pts = apply_all(&t_bc, &b);
        let ab = fit_rigid_lsq(&Correspondences::new(a.clone(), b.clone()).unwrap()).unwrap();
        let bc = fit_rigid_lsq(&Correspondences::new(b, c_pts.clone()).unwrap()).unwrap();
        let ac = fit_rigid_lsq(&Correspondences::new(a, c_pts).unwrap()).unwrap();
        let composed = extract_angle(&ab) + extract_angle(&bc);
        assert!((composed - extract_angle(&ac)).abs() < 1e-6);
    }

    #[test]
    fn extract_angle_round_trips() {
        assert_eq!(extract_angle(&RigidTransform::identity()), 0.0);
        let t = RigidTransform::new(0.3, 9.0, -4.0);
        assert!((extract_angle(&t) - 0.3).abs() < 1e-12);
        let near_pi = PI - 1e-9;
        let t = RigidTransform::new(near_pi, 0.0, 0.0);
        let got = extract_angle(&t);
        assert!(got > 0.0, "no wrap to negative near pi");
        assert!((got - near_pi).abs() < 1e-12);
    }

    #[test]
    fn about_point_matches_direct_matrix_at_origin() {
        let t = RigidTransform::new(0.7, 3.0, -2.0);
        assert_eq!(transform_about_point(&t, 0.0, 0.0), t.matrix());
    }

    #[test]
    fn about_point_with_zero_rotation_is_same_translation() {
        let t = RigidTransform::new(0.0, 5.0, 7.0);
        let m = transform_about_point(&t, 10.0, 20.0);
        let (x, y) = apply_matrix(&m, 1.0, 2.0);
        assert!((x - 6.0).abs() < 1e-12 && (y - 9.0).abs() < 1e-12);
    }

    #[test]
    fn about_point_fixes_the_center_without_translation() {
        let t = RigidTransform::new(0.4, 0.0, 0.0);
        let m = transform_about_point(&t, 10.0, 20.0);
        let (x, y) = apply_matrix(&m, 10.0, 20.0);
        assert!((x - 10.0).abs() < 1e-12 && (y - 20.0).abs() < 1e-12);
        // First two rows are unchanged from T.
        let tm = t.matrix();
        assert_eq!(m[0], tm[0]);
        assert_eq!(m[1], tm[1]);
    }

    #[test]
    fn msac_without_outliers_equals_lsq() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let src = random_points(&mut rng, 40, 60.0);
        let truth = RigidTransform::new(0.15, 4.0, -2.5);
        let dst = apply_all(&truth, &src);
        let c = Correspondences::new(src, dst).unwrap();
        let lsq = fit_rigid_lsq(&c).unwrap();
        let (msac, mask) = fit_rigid_msac(&c, &MsacConfig::default()).unwrap();
        assert!((msac.theta - lsq.theta).abs() < 1e-9);
        assert!((msac.tx - lsq.tx).abs() < 1e-9);
        assert!((msac.ty - lsq.ty).abs() < 1e-9);
        assert!(mask.iter().all(|&b| b));
    }

    #[test]
    fn msac_rejects_below_minimal_sample() {
        let c = Correspondences::new(vec![[0.0, 0.0]], vec![[1.0, 1.0]]).unwrap();
        assert!(matches!(
            fit_rigid_msac(&c, &MsacConfig::default()),
            Err(Error::EstimationFailure(_))
        ));
    }

    #[test]
    fn msac_recovers_rotation_under_outliers() {
        let truth = RigidTransform::new(0.2, 1.0, -3.0);
        let mut ok = 0;
        for seed in 0..40u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed * 7 + 1);
            let src = random_points(&mut rng, 100, 200.0);
            let mut dst = apply_all(&truth, &src);
            for d in dst.iter_mut().take(30) {
                *d = [rng.gen::<f64>() * 200.0, rng.gen::<f64>() * 200.0];
            }
            let c = Correspondences::new(src, dst).unwrap();
            let cfg = MsacConfig {
                seed,
                ..MsacConfig::default()
            };
            if let Ok((t, _)) = fit_rigid_msac(&c, &cfg) {
                if (t.theta - 0.2).abs() < 1e-3 {
                    ok += 1;
                }
            }
        }
        assert!(ok >= 39, "msac recovered theta in only {ok}/40 runs");
    }

    #[test]
    fn accumulate_sums_and_flags() {
        assert_eq!(accumulate(&[]).total, 0.0);
        let ten = accumulate(&[0.1; 10]);
        assert!((ten.total - 1.0).abs() < 1e-12);
        assert!(ten.violations.is_empty());
        let mixed = accumulate(&[0.2, -0.05, 0.2]);
        assert!((mixed.total - 0.35).abs() < 1e-12);
        let over = accumulate(&[0.2, 1.1, -0.1]);
        assert_eq!(over.violations, vec![1]);
        assert!((over.total - 1.2).abs() < 1e-12);
    }

    #[test]
    fn accumulate_allows_totals_beyond_full_turns() {
        let incs = vec![0.5; 26]; // 13.0 rad total
        let acc = accumulate(&incs);
        assert!((acc.total - 13.0).abs() < 1e-12);
        assert!(acc.violations.is_empty());
    }

    proptest! {
        #[test]
        fn fit_round_trips_random_rigid_transforms(
            seed in 0u64..500,
            theta in -3.14f64..3.14,
            tx in -50.0f64..50.0,
            ty in -50.0f64..50.0,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let src = random_points(&mut rng, 20, 120.0);
            let truth = RigidTransform::new(theta, tx, ty);
            let dst = apply_all(&truth, &src);
            let t = fit_rigid_lsq(&Correspondences::new(src, dst).unwrap()).unwrap();
            prop_assert!((t.theta - theta).abs() < 1e-9);
        }

        #[test]
        fn msac_mask_is_translation_invariant(seed in 0u64..50) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let src = random_points(&mut rng, 30, 100.0);
            let truth = RigidTransform::new(0.1, 0.5, -0.5);
            let mut dst = apply_all(&truth, &src);
            for d in dst.iter_mut().take(8) {
                *d = [rng.gen::<f64>() * 100.0, rng.gen::<f64>() * 100.0];
            }
            let shift = [37.0, -12.0];
            let src2: Vec<_> = src.iter().map(|p| [p[0] + shift[0], p[1] + shift[1]]).collect();
            let dst2: Vec<_> = dst.iter().map(|p| [p[0] + shift[0], p[1] + shift[1]]).collect();
            let cfg = MsacConfig { seed, ..MsacConfig::default() };
            let a = fit_rigid_msac(&Correspondences::new(src, dst).unwrap(), &cfg);
            let b = fit_rigid_msac(&Correspondences::new(src2, dst2).unwrap(), &cfg);
            match (a, b) {
                (Ok((_, ma)), Ok((_, mb))) => prop_assert_eq!(ma, mb),
                (Err(_), Err(_)) => {}
                _ => prop_assert!(false, "one run failed where the other succeeded"),
            }
        }
    }
}
