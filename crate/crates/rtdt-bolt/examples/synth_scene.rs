//! Generate a synthetic rotating-bolt scene on disk: PGM frames, a manifest
//! with the initial bolt boxes, and the exact per-frame ground truth.
//!
//! Run with: `cargo run --release --example synth_scene`

use rtdt_bolt::synth::{self, scenes};

fn main() -> rtdt_bolt::Result<()> {
    let scene = scenes::clean_rotation(8.45, 120);
    let out = std::env::temp_dir().join("rtdt_bolt_example_scene");
    let generated = synth::generate(&scene, &out)?;
    println!(
        "scene: {}x{} at {} fps, {} frames, bolt rotating to {:.2} rad",
        scene.width,
        scene.height,
        scene.fps,
        scene.num_frames(),
        scene.bolts[0].profile.last().unwrap().1
    );
    println!("frames:   {}/frame_000000.pgm ...", generated.dir.display());
    println!("manifest: {}", generated.manifest_path.display());
    println!("gt:       {}", generated.gt_path.display());
    Ok(())
}
