//! Rigid-transform estimation from noisy point correspondences: the
//! closed-form least-squares fit versus the outlier-robust MSAC fit.
//!
//! Run with: `cargo run --release --example rigid_fit`

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rtdt_bolt::geometry::{
    extract_angle, fit_rigid_lsq, fit_rigid_msac, Correspondences, MsacConfig, RigidTransform,
};

fn main() -> rtdt_bolt::Result<()> {
    let truth = RigidTransform::new(0.2, 1.0, -3.0);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let src: Vec<[f64; 2]> = (0..100)
        .map(|_| [rng.gen::<f64>() * 200.0, rng.gen::<f64>() * 200.0])
        .collect();
    let mut dst: Vec<[f64; 2]> = src
        .iter()
        .map(|p| {
            let (x, y) = truth.apply(p[0], p[1]);
            [x, y]
        })
        .collect();
    // Corrupt 30% of the matches.
    for d in dst.iter_mut().take(30) {
        *d = [rng.gen::<f64>() * 200.0, rng.gen::<f64>() * 200.0];
    }
    let c = Correspondences::new(src, dst)?;

    let lsq = fit_rigid_lsq(&c)?;
    let (msac, inliers) = fit_rigid_msac(&c, &MsacConfig::default())?;
    let kept = inliers.iter().filter(|&&b| b).count();

    println!("true rotation:          {:+.4} rad", truth.theta);
    println!("plain least squares:    {:+.4} rad (thrown off by the outliers)", extract_angle(&lsq));
    println!(
        "msac + inlier refit:    {:+.4} rad ({kept}/100 inliers)",
        extract_angle(&msac)
    );
    Ok(())
}
