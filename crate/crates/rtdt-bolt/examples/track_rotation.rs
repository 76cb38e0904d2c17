//! Run the full detect-track pipeline on a synthetic rotating bolt and
//! compare the accumulated rotation against the exact ground truth.
//!
//! Run with: `cargo run --release --example track_rotation`

use rtdt_bolt::detect::{AnnotationDetector, Manifest, ManifestFrame};
use rtdt_bolt::eval::accuracy;
use rtdt_bolt::pipeline::{self, PipelineConfig};
use rtdt_bolt::synth::{self, scenes, GroundTruthTable};

fn main() -> rtdt_bolt::Result<()> {
    let scene = scenes::clean_rotation(8.45, 200);
    println!("rendering {} frames...", scene.num_frames());
    let frames = synth::render_all(&scene)?;

    // Detector fed by the scene's initial annotations (carried forward).
    let manifest = Manifest {
        fps: scene.fps,
        frames: (0..frames.len())
            .map(|k| ManifestFrame {
                file: format!("frame_{k:06}.pgm"),
                rois: (k == 0).then(|| scene.initial_rois()),
            })
            .collect(),
    };
    let detector = AnnotationDetector::from_manifest(&manifest, scene.width, scene.height)?;

    let cfg = PipelineConfig::default();
    let out = pipeline::run_frames(&detector, &cfg, scene.fps, &frames, true)?;

    let gt = GroundTruthTable::of_scene(&scene);
    for bolt in &out.summary.bolts {
        let phi = bolt.final_phi_rad;
        let gt_total = gt.total_rotation(bolt.bolt_id).unwrap_or(0.0);
        print!(
            "bolt {}: estimated {:.4} rad over {} frames (mean {:.0} live points)",
            bolt.bolt_id, phi, out.summary.frames, bolt.mean_live_fps
        );
        match accuracy(phi, gt_total) {
            Ok(acc) => println!(", ground truth {gt_total:.4} rad, accuracy {acc:.4}"),
            Err(_) => println!(", ground truth is zero"),
        }
    }
    Ok(())
}
