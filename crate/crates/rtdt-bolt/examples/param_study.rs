//! A reduced parameter sweep over the four tracker parameters (pyramid
//! levels, bidirectional error, block size, iterations) on the stress scene,
//! printing per-parameter marginal mean accuracies.
//!
//! The full 4x4x4x4 grid is available through the `study` CLI subcommand;
//! this example trims each axis to keep the runtime short.
//!
//! Run with: `cargo run --release --example param_study`

use rtdt_bolt::eval::{run_param_study, StudyGrid, StudyInput};
use rtdt_bolt::pipeline::PipelineConfig;
use rtdt_bolt::synth::{self, scenes, GroundTruthTable};

fn main() -> rtdt_bolt::Result<()> {
    let scene = scenes::study_scene(160);
    println!("rendering {} frames...", scene.num_frames());
    let frames = synth::render_all(&scene)?;
    let detector = scenes::blob_detector_for(&scene);
    let gt = GroundTruthTable::of_scene(&scene).total_rotation(0).unwrap();

    let grid = StudyGrid {
        np_values: vec![1, 4],
        be_values: vec![2.0, 20.0],
        bs_values: vec![5, 31],
        ni_values: vec![10, 30],
    };
    let input = StudyInput {
        frames: &frames,
        fps: scene.fps,
        detector: &detector,
        gt_total: gt,
        bolt_id: 0,
    };
    let results = run_param_study(&grid, &input, &PipelineConfig::default())?;
    println!("{} cells, ground truth {gt:.2} rad", results.cells.len());
    for &np in &grid.np_values {
        println!("  pyramid levels {np}: mean accuracy {:.4}", results.marginal_np(np));
    }
    for &bs in &grid.bs_values {
        println!("  block size {bs}: mean accuracy {:.4}", results.marginal_bs(bs));
    }
    for &be in &grid.be_values {
        println!("  bidirectional error {be}: mean accuracy {:.4}", results.marginal_be(be));
    }
    for &ni in &grid.ni_values {
        println!("  max iterations {ni}: mean accuracy {:.4}", results.marginal_ni(ni));
    }
    Ok(())
}
