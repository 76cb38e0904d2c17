//! Command-line front end: synthetic scene generation, tracking runs,
//! parameter studies, accuracy evaluation, and the Hough-line baseline.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use rtdt_bolt::detect::{AnnotationDetector, BlobDetector, BoltDetector, Manifest};
use rtdt_bolt::eval::{accuracy, run_param_study, StudyGrid, StudyInput};
use rtdt_bolt::hough::{edge_map, hough_lines, lines_to_csv, EdgeMethod, EdgeThresholds};
use rtdt_bolt::pipeline::{self, DirFrames, FrameSource, PipelineConfig};
use rtdt_bolt::runconfig::{DetectorChoice, RunConfig};
use rtdt_bolt::synth::{self, scenes, GroundTruthTable, SceneConfig};
use rtdt_bolt::{io, Error};

/// Environment variable consulted for the default seed.
const SEED_ENV: &str = "RTDT_BOLT_SEED";

#[derive(Parser)]
#[command(
    name = "rtdt-bolt",
    about = "Detect-and-track bolt rotation monitoring on video frame sequences",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic rotating-bolt scene (frames, manifest, ground truth).
    Synth {
        /// Scene configuration JSON; omit to use a preset.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Built-in scene preset.
        #[arg(long, value_enum)]
        preset: Option<Preset>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Track bolts over a frame sequence and write the rotation history.
    Track {
        /// Directory holding the frame files (default: the manifest's directory).
        #[arg(long)]
        frames: Option<PathBuf>,
        /// Manifest JSON describing the sequence.
        #[arg(long)]
        manifest: PathBuf,
        /// Run configuration JSON (pipeline parameters, detector, seed).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output rotation-history CSV.
        #[arg(long)]
        out: PathBuf,
        /// Optional per-bolt summary JSON.
        #[arg(long)]
        summary: Option<PathBuf>,
        /// Optional flat text dump of the time history for gnuplot.
        #[arg(long)]
        plot: Option<PathBuf>,
        /// Report counterclockwise-on-screen rotation as positive.
        #[arg(long)]
        ccw_positive: bool,
        /// Disable re-detection: tracking loss becomes permanent.
        #[arg(long)]
        no_redetect: bool,
        /// Detector override.
        #[arg(long, value_enum)]
        detector: Option<DetectorKind>,
        /// Seed override for the robust fit.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the NP x BE x BS x NI parameter study over a generated scene.
    Study {
        /// Grid JSON; omit for the standard four-value grid per parameter.
        #[arg(long)]
        grid: Option<PathBuf>,
        /// Directory of a generated scene (manifest.json + gt.csv + frames).
        #[arg(long)]
        scene: PathBuf,
        /// Output study CSV.
        #[arg(long)]
        out: PathBuf,
        /// Marginal-means summary JSON (default: study_summary.json next to the CSV).
        #[arg(long)]
        summary: Option<PathBuf>,
        #[arg(long, value_enum)]
        detector: Option<DetectorKind>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Compare an estimated rotation history against ground truth.
    Eval {
        /// Rotation-history CSV produced by `track`.
        #[arg(long)]
        pred: PathBuf,
        /// Ground-truth CSV (`frame,time_s,bolt_id,theta_rad`).
        #[arg(long)]
        gt: PathBuf,
        /// Also print angles in degrees.
        #[arg(long)]
        degrees: bool,
    },
    /// Edge maps and Hough line detection on a single image.
    Hough {
        /// Input image (PGM or PNG).
        #[arg(long)]
        image: PathBuf,
        #[arg(long, value_enum, default_value = "canny")]
        method: MethodArg,
        /// Number of line peaks to report.
        #[arg(long, default_value_t = 5)]
        peaks: usize,
        /// Output path for the binary edge raster (default: <image>.edges.pgm).
        #[arg(long)]
        out_edges: Option<PathBuf>,
        /// Output path for the detected-lines CSV (default: <image>.lines.csv).
        #[arg(long)]
        out_lines: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    /// Single bolt, 8.45 rad over 441 frames, constant lighting.
    Clean,
    /// Five static bolts.
    Static,
    /// Rotating bolt with the light toggling every ten seconds.
    Lighting,
    /// The parameter-study stress scene.
    Study,
}

#[derive(Clone, Copy, ValueEnum)]
enum DetectorKind {
    Annotation,
    Blob,
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Canny,
    Prewitt,
    Log,
}

impl From<MethodArg> for EdgeMethod {
    fn from(m: MethodArg) -> EdgeMethod {
        match m {
            MethodArg::Canny => EdgeMethod::Canny,
            MethodArg::Prewitt => EdgeMethod::Prewitt,
            MethodArg::Log => EdgeMethod::Log,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code(&err))
        }
    }
}

/// 2 = configuration error, 3 = I/O error, 4 = evaluation undefined.
fn exit_code(err: &Error) -> u8 {
    match err {
        Error::InvalidParameter(_)
        | Error::InvalidConfig(_)
        | Error::DegenerateInput(_)
        | Error::EstimationFailure(_) => 2,
        Error::Io { .. } | Error::Malformed { .. } => 3,
        Error::UndefinedMetric(_) => 4,
    }
}

fn env_seed() -> Option<u64> {
    std::env::var(SEED_ENV).ok().and_then(|s| s.parse().ok())
}

fn run(cli: Cli) -> rtdt_bolt::Result<()> {
    match cli.command {
        Command::Synth {
            config,
            preset,
            out,
        } => cmd_synth(config, preset, out),
        Command::Track {
            frames,
            manifest,
            config,
            out,
            summary,
            plot,
            ccw_positive,
            no_redetect,
            detector,
            seed,
        } => cmd_track(
            frames,
            manifest,
            config,
            out,
            summary,
            plot,
            ccw_positive,
            no_redetect,
            detector,
            seed,
        ),
        Command::Study {
            grid,
            scene,
            out,
            summary,
            detector,
            seed,
        } => cmd_study(grid, scene, out, summary, detector, seed),
        Command::Eval { pred, gt, degrees } => cmd_eval(pred, gt, degrees),
        Command::Hough {
            image,
            method,
            peaks,
            out_edges,
            out_lines,
        } => cmd_hough(image, method, peaks, out_edges, out_lines),
    }
}

fn cmd_synth(
    config: Option<PathBuf>,
    preset: Option<Preset>,
    out: PathBuf,
) -> rtdt_bolt::Result<()> {
    let scene = match (config, preset) {
        (Some(path), _) => SceneConfig::load(&path)?,
        (None, Some(p)) => match p {
            Preset::Clean => scenes::clean_rotation(8.45, 441),
            Preset::Static => scenes::static_bolts(5, 420),
            Preset::Lighting => scenes::lighting_switch(12.68, 1200, 10.0, 1.5),
            Preset::Study => scenes::study_scene(160),
        },
        (None, None) => {
            return Err(Error::InvalidConfig(
                "either --config or --preset is required".into(),
            ))
        }
    };
    let generated = synth::generate(&scene, &out)?;
    scene.save(out.join("scene.json"))?;
    println!(
        "wrote {} frames, {} and {}",
        generated.frame_files.len(),
        generated.manifest_path.display(),
        generated.gt_path.display()
    );
    Ok(())
}

fn build_detector(
    choice: &DetectorChoice,
    manifest: &Manifest,
    frame_w: usize,
    frame_h: usize,
) -> rtdt_bolt::Result<Box<dyn BoltDetector>> {
    Ok(match choice {
        DetectorChoice::Annotation => {
            Box::new(AnnotationDetector::from_manifest(manifest, frame_w, frame_h)?)
        }
        DetectorChoice::Blob {
            luminance_threshold,
            min_area,
            max_area,
        } => Box::new(BlobDetector::new(*luminance_threshold, *min_area, *max_area)?),
    })
}

#[allow(clippy::too_many_arguments)]
fn cmd_track(
    frames_dir: Option<PathBuf>,
    manifest_path: PathBuf,
    config: Option<PathBuf>,
    out: PathBuf,
    summary_path: Option<PathBuf>,
    plot_path: Option<PathBuf>,
    ccw_positive: bool,
    no_redetect: bool,
    detector_kind: Option<DetectorKind>,
    seed: Option<u64>,
) -> rtdt_bolt::Result<()> {
    let mut run_cfg = match config {
        Some(path) => RunConfig::load(&path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = seed.or_else(env_seed).or(run_cfg.seed) {
        run_cfg.pipeline.msac.seed = seed;
    }
    if ccw_positive {
        run_cfg.ccw_positive = true;
    }
    if let Some(kind) = detector_kind {
        run_cfg.detector = match kind {
            DetectorKind::Annotation => DetectorChoice::Annotation,
            DetectorKind::Blob => DetectorChoice::Blob {
                luminance_threshold: 0.47,
                min_area: 800,
                max_area: 200_000,
            },
        };
    }

    let manifest = Manifest::load(&manifest_path)?;
    let mut source = DirFrames::from_manifest(&manifest, &manifest_path, frames_dir.as_deref());
    if source.len() < 2 {
        return Err(Error::InvalidConfig(
            "the manifest must list at least two frames".into(),
        ));
    }
    let first = source.frame(0)?;
    let detector = build_detector(&run_cfg.detector, &manifest, first.width, first.height)?;
    let output = pipeline::run(
        detector.as_ref(),
        &run_cfg.pipeline,
        &mut source,
        !no_redetect,
    )?;

    let history = if run_cfg.ccw_positive {
        output.history.negated()
    } else {
        output.history
    };
    io::write_text_atomic(&out, &history.to_csv())?;
    println!("wrote {}", out.display());
    if let Some(path) = plot_path {
        io::write_text_atomic(&path, &history.to_gnuplot())?;
        println!("wrote {}", path.display());
    }
    if let Some(path) = summary_path.or(run_cfg.out_summary) {
        let mut summary = output.summary;
        if run_cfg.ccw_positive {
            for b in summary.bolts.iter_mut() {
                b.final_phi_rad = -b.final_phi_rad;
            }
        }
        io::write_text_atomic(&path, &summary.to_json())?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn cmd_study(
    grid_path: Option<PathBuf>,
    scene_dir: PathBuf,
    out: PathBuf,
    summary: Option<PathBuf>,
    detector_kind: Option<DetectorKind>,
    seed: Option<u64>,
) -> rtdt_bolt::Result<()> {
    let grid = match grid_path {
        Some(path) => StudyGrid::load(&path)?,
        None => StudyGrid::default(),
    };
    let manifest_path = scene_dir.join("manifest.json");
    let manifest = Manifest::load(&manifest_path)?;
    let mut source = DirFrames::from_manifest(&manifest, &manifest_path, None);
    let mut frames = Vec::with_capacity(source.len());
    for k in 0..source.len() {
        frames.push(source.frame(k)?);
    }
    if frames.is_empty() {
        return Err(Error::InvalidConfig("scene has no frames".into()));
    }
    let gt = GroundTruthTable::load(scene_dir.join("gt.csv"))?;
    // The studied bolt is the one with the largest net ground-truth rotation.
    let (bolt_id, gt_total) = gt
        .bolt_ids()
        .into_iter()
        .filter_map(|id| gt.total_rotation(id).map(|r| (id, r)))
        .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
        .ok_or_else(|| Error::InvalidParameter("ground truth is empty".into()))?;

    let mut base = PipelineConfig::default();
    if let Some(seed) = seed.or_else(env_seed) {
        base.msac.seed = seed;
    }
    let detector: Box<dyn BoltDetector> = match detector_kind {
        Some(DetectorKind::Annotation) => Box::new(AnnotationDetector::from_manifest(
            &manifest,
            frames[0].width,
            frames[0].height,
        )?),
        Some(DetectorKind::Blob) | None => Box::new(BlobDetector {
            luminance_threshold: 0.47,
            min_area: 800,
            max_area: 200_000,
        }),
    };
    let input = StudyInput {
        frames: &frames,
        fps: manifest.fps,
        detector: detector.as_ref(),
        gt_total,
        bolt_id,
    };
    let results = run_param_study(&grid, &input, &base)?;
    io::write_text_atomic(&out, &results.to_csv())?;
    println!("wrote {} ({} cells)", out.display(), results.cells.len());
    let summary_path = summary.unwrap_or_else(|| {
        out.parent()
            .unwrap_or(Path::new("."))
            .join("study_summary.json")
    });
    io::write_text_atomic(&summary_path, &results.summary_json(&grid))?;
    println!("wrote {}", summary_path.display());
    Ok(())
}

fn cmd_eval(pred: PathBuf, gt_path: PathBuf, degrees: bool) -> rtdt_bolt::Result<()> {
    let history = pipeline::RotationHistory::load(&pred)?;
    let gt = GroundTruthTable::load(&gt_path)?;
    let mut any_defined = false;
    let mut printed = 0usize;
    for bolt_id in history.bolt_ids() {
        let Some(phi) = history.final_phi(bolt_id) else {
            continue;
        };
        let Some(gt_total) = gt.total_rotation(bolt_id) else {
            println!(
                "bolt {bolt_id}: no ground truth, estimated {}",
                fmt_angle(phi, degrees)
            );
            printed += 1;
            continue;
        };
        match accuracy(phi, gt_total) {
            Ok(acc) => {
                any_defined = true;
                println!(
                    "bolt {bolt_id}: accuracy {:.5} (estimated {}, ground truth {})",
                    acc,
                    fmt_angle(phi, degrees),
                    fmt_angle(gt_total, degrees)
                );
            }
            Err(_) => {
                println!(
                    "bolt {bolt_id}: ground truth is zero, raw estimate {}",
                    fmt_angle(phi.abs(), degrees)
                );
            }
        }
        printed += 1;
    }
    if printed == 0 {
        return Err(Error::InvalidParameter(
            "prediction file has no bolts".into(),
        ));
    }
    if !any_defined {
        return Err(Error::UndefinedMetric(
            "all ground-truth rotations are zero; accuracy is undefined".into(),
        ));
    }
    Ok(())
}

fn fmt_angle(rad: f64, degrees: bool) -> String {
    if degrees {
        format!("{:.4} rad ({:.2} deg)", rad, rad.to_degrees())
    } else {
        format!("{rad:.4} rad")
    }
}

fn cmd_hough(
    image: PathBuf,
    method: MethodArg,
    peaks: usize,
    out_edges: Option<PathBuf>,
    out_lines: Option<PathBuf>,
) -> rtdt_bolt::Result<()> {
    let img = io::read_gray(&image)?;
    let edges = edge_map(&img, method.into(), &EdgeThresholds::default())?;
    let lines = hough_lines(&edges, peaks)?;

    let edges_path = out_edges.unwrap_or_else(|| with_suffix(&image, "edges.pgm"));
    let edge_img = rtdt_bolt::img::GrayImage {
        width: edges.width,
        height: edges.height,
        data: edges
            .data
            .iter()
            .map(|&b| if b { 1.0 } else { 0.0 })
            .collect(),
    };
    io::write_gray(&edges_path, &edge_img)?;
    let lines_path = out_lines.unwrap_or_else(|| with_suffix(&image, "lines.csv"));
    io::write_text_atomic(&lines_path, &lines_to_csv(&lines))?;

    println!(
        "wrote {} and {}",
        edges_path.display(),
        lines_path.display()
    );
    for line in &lines {
        println!(
            "rho {:7.1} px, theta {:5.1} deg, {} votes",
            line.rho, line.theta_deg, line.votes
        );
    }
    Ok(())
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "out".into());
    path.with_file_name(format!("{stem}.{suffix}"))
}
