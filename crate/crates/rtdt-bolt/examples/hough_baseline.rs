//! The edge-based baseline: run Canny, Prewitt and Laplacian-of-Gaussian
//! edge maps over a rendered bolt frame (original, smoothed, sharpened) and
//! report the strongest Hough lines found in each.
//!
//! On frames with washers, speckles and clutter the straight hexagon edges
//! rarely dominate the vote table, which is the baseline's weakness.
//!
//! Run with: `cargo run --release --example hough_baseline`

use rtdt_bolt::hough::{edge_map, hough_lines, EdgeMethod, EdgeThresholds};
use rtdt_bolt::img::{gaussian_blur, unsharp_sharpen};
use rtdt_bolt::synth::{render_frame, scenes};

fn main() -> rtdt_bolt::Result<()> {
    let scene = scenes::clean_rotation(0.3, 30);
    let (frame, _) = render_frame(&scene, 0.5)?;
    let smoothed = gaussian_blur(&frame, 2.0)?;
    let sharpened = unsharp_sharpen(&frame, 2.0, 1.0)?;

    let thresholds = EdgeThresholds::default();
    for (name, img) in [
        ("original", &frame),
        ("smoothed", &smoothed),
        ("sharpened", &sharpened),
    ] {
        println!("{name} image:");
        for method in [EdgeMethod::Canny, EdgeMethod::Prewitt, EdgeMethod::Log] {
            let edges = edge_map(img, method, &thresholds)?;
            let lines = hough_lines(&edges, 3)?;
            print!("  {method:?}: {} edge px;", edges.count_set());
            for line in &lines {
                print!(
                    " (rho {:.0}, theta {:.0} deg, {} votes)",
                    line.rho, line.theta_deg, line.votes
                );
            }
            println!();
        }
    }
    Ok(())
}
