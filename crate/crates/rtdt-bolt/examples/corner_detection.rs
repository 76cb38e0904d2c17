//! Seed Shi-Tomasi feature points inside a bolt's region of interest and
//! print the strongest ones.
//!
//! Run with: `cargo run --release --example corner_detection`

use rtdt_bolt::features::{detect_corners, min_eig_response, CornerParams};
use rtdt_bolt::synth::{render_frame, scenes};

fn main() -> rtdt_bolt::Result<()> {
    let scene = scenes::clean_rotation(0.0, 30);
    let (frame, _) = render_frame(&scene, 0.0)?;
    let roi = scene.initial_rois()[0];

    let params = CornerParams::default();
    let points = detect_corners(&frame, &roi, &params)?;
    let response = min_eig_response(&frame, params.filter_dim)?;
    let max_response = response.data.iter().cloned().fold(0.0f32, f32::max);

    println!(
        "{} corners inside roi ({}, {}, {}x{}), frame max response {max_response:.5}",
        points.len(),
        roi.x,
        roi.y,
        roi.w,
        roi.h
    );
    for (i, p) in points.iter().take(10).enumerate() {
        println!("  #{i}: ({:7.2}, {:7.2}) quality {:.5}", p.x, p.y, p.quality);
    }
    Ok(())
}
