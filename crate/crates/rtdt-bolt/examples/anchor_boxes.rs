//! Estimate detector anchor-box dimensions from a set of labeled bounding
//! boxes with IoU k-means.
//!
//! Run with: `cargo run --release --example anchor_boxes`

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rtdt_bolt::detect::estimate_anchor_boxes;

fn main() -> rtdt_bolt::Result<()> {
    // Simulated label statistics: three size groups of bolt boxes.
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut boxes = Vec::new();
    for (w, h, n) in [(52.0, 41.0, 120), (37.0, 36.0, 200), (30.0, 31.0, 90)] {
        for _ in 0..n {
            boxes.push((
                w + rng.gen::<f64>() * 6.0 - 3.0,
                h + rng.gen::<f64>() * 6.0 - 3.0,
            ));
        }
    }
    for k in [2usize, 3, 6] {
        let anchors = estimate_anchor_boxes(&boxes, k, 99)?;
        print!("k = {k}:");
        for a in &anchors {
            print!("  {:.0}x{:.0}", a.width, a.height);
        }
        println!();
    }
    Ok(())
}
