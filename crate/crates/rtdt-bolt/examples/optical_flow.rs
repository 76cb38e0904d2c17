//! Pyramidal Lucas-Kanade tracking between two frames of a rotating bolt,
//! with the forward-backward validation that rejects unreliable tracks.
//!
//! Run with: `cargo run --release --example optical_flow`

use rtdt_bolt::features::{detect_corners, CornerParams};
use rtdt_bolt::img::build_pyramid;
use rtdt_bolt::klt::{track_points, TrackOutcome, TrackerConfig};
use rtdt_bolt::synth::{render_frame, scenes};

fn main() -> rtdt_bolt::Result<()> {
    let scene = scenes::clean_rotation(8.45, 200);
    let dt = 1.0 / scene.fps;
    let (frame_a, theta_a) = render_frame(&scene, 10.0 * dt)?;
    let (frame_b, theta_b) = render_frame(&scene, 11.0 * dt)?;
    println!(
        "bolt rotates {:.4} rad between the frames",
        theta_b[0] - theta_a[0]
    );

    let roi = scene.initial_rois()[0];
    let points = detect_corners(&frame_a, &roi, &CornerParams::default())?;
    let coords: Vec<(f64, f64)> = points.iter().map(|p| (p.x, p.y)).collect();

    let cfg = TrackerConfig::default();
    let pyr_a = build_pyramid(&frame_a, cfg.np)?;
    let pyr_b = build_pyramid(&frame_b, cfg.np)?;
    let outcomes = track_points(&pyr_a, &pyr_b, &coords, &cfg)?;

    let tracked = outcomes.iter().filter(|o| o.is_tracked()).count();
    println!("{tracked}/{} points tracked", outcomes.len());
    for (p, o) in coords.iter().zip(outcomes.iter()).take(8) {
        match o {
            TrackOutcome::Tracked { x, y, fb_error } => println!(
                "  ({:6.1}, {:6.1}) -> ({x:6.2}, {y:6.2})  displacement ({:+.2}, {:+.2})  fb {fb_error:.3} px",
                p.0,
                p.1,
                x - p.0,
                y - p.1
            ),
            TrackOutcome::Lost(reason) => println!("  ({:6.1}, {:6.1}) lost: {reason:?}", p.0, p.1),
        }
    }
    Ok(())
}
