//! The illumination-change scenario: the light toggles every ten seconds
//! while the bolt keeps rotating. With re-detection the tracker re-seeds and
//! carries on; without it the first switch ends the track.
//!
//! Run with: `cargo run --release --example lighting_switch`

use rtdt_bolt::detect::{AnnotationDetector, Manifest, ManifestFrame};
use rtdt_bolt::eval::accuracy;
use rtdt_bolt::pipeline::{self, PipelineConfig, RowEvent};
use rtdt_bolt::synth::{self, scenes, GroundTruthTable};

fn main() -> rtdt_bolt::Result<()> {
    let scene = scenes::lighting_switch(12.68, 900, 10.0, 1.5);
    println!("rendering {} frames...", scene.num_frames());
    let frames = synth::render_all(&scene)?;
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
    let gt = GroundTruthTable::of_scene(&scene).total_rotation(0).unwrap();

    let with = pipeline::run_frames(&detector, &cfg, scene.fps, &frames, true)?;
    let phi = with.history.final_phi(0).unwrap();
    let redetects: Vec<usize> = with
        .history
        .rows_for(0)
        .filter(|r| r.event == RowEvent::Redetect)
        .map(|r| r.frame)
        .collect();
    println!(
        "with re-detection:    {:.3} rad of {gt:.3} (accuracy {:.4}), re-detections at frames {redetects:?}",
        phi,
        accuracy(phi, gt)?
    );

    let without = pipeline::run_frames(&detector, &cfg, scene.fps, &frames, false)?;
    let b = &without.summary.bolts[0];
    println!(
        "without re-detection: {:.3} rad, tracking lost for good after frame {:?}",
        b.final_phi_rad, b.last_active_frame
    );
    Ok(())
}
