//! Synthetic rotating-bolt scene generator: frames with exact per-frame
//! ground-truth rotation, a controllable illumination schedule, and seeded
//! noise. Each bolt is a washer disk with a flat-top hexagon on top, covered
//! by a seeded speckle field that rotates rigidly with the hexagon (plain
//! hexagons are too feature-poor to track).

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detect::{Manifest, ManifestFrame};
use crate::features::Roi;
use crate::img::GrayImage;
use crate::{io, Error, Result};

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Luminance palette and speckle layout of a bolt face.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TextureParams {
    /// Number of speckle disks per bolt.
    pub speckle_count: usize,
    /// Fraction of speckles drawn from the bright range; the rest are dark.
    pub bright_fraction: f64,
    /// Luminance range of bright speckles.
    pub bright_lum: (f32, f32),
    /// Luminance range of dark speckles.
    pub dark_lum: (f32, f32),
    /// Hexagon face luminance.
    pub base_lum: f32,
    /// Washer disk luminance.
    pub washer_lum: f32,
    /// Washer disk radius as a multiple of the hexagon circumradius.
    pub washer_outer_ratio: f64,
    /// Speckle radius range as a fraction of the circumradius.
    pub speckle_radius: (f64, f64),
    /// When set, speckles are confined to a radial band (fractions of the
    /// circumradius), like markings on a bolt flank.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speckle_annulus: Option<(f64, f64)>,
    /// Amplitude of concentric machining rings around the face center
    /// (0 disables them). Rings look identical under rotation, so they feed
    /// gradients into large search blocks without offering trackable
    /// corners.
    #[serde(default)]
    pub ring_amplitude: f32,
    /// Radial period of the rings in pixels.
    #[serde(default = "default_ring_period")]
    pub ring_period: f64,
    /// Outer radius of the ring pattern as a fraction of the circumradius.
    #[serde(default)]
    pub ring_extent: f64,
}

fn default_ring_period() -> f64 {
    7.0
}

impl Default for TextureParams {
    fn default() -> Self {
        TextureParams {
            speckle_count: 64,
            bright_fraction: 0.6,
            bright_lum: (0.8, 0.95),
            dark_lum: (0.05, 0.2),
            base_lum: 0.55,
            washer_lum: 0.35,
            washer_outer_ratio: 1.35,
            speckle_radius: (0.05, 0.09),
            speckle_annulus: None,
            ring_amplitude: 0.0,
            ring_period: default_ring_period(),
            ring_extent: 0.0,
        }
    }
}

/// One bolt: center, hexagon circumradius, texture seed, the rotation
/// profile as piecewise-linear `(time, radians)` knots, and an optional
/// translation profile modeling relative camera-bolt motion (for example
/// under shaking).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoltSpec {
    pub center: (f64, f64),
    pub circumradius: f64,
    pub texture_seed: u64,
    pub profile: Vec<(f64, f64)>,
    /// Piecewise-linear `(time, offset)` knots added to `center`; empty
    /// means the bolt never translates.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub drift: Vec<(f64, (f64, f64))>,
}

fn piecewise_linear(knots: &[(f64, f64)], t: f64) -> f64 {
    if knots.is_empty() {
        return 0.0;
    }
    if t <= knots[0].0 {
        return knots[0].1;
    }
    for pair in knots.windows(2) {
        let (t0, a0) = pair[0];
        let (t1, a1) = pair[1];
        if t <= t1 {
            if t1 <= t0 {
                return a1;
            }
            return a0 + (a1 - a0) * (t - t0) / (t1 - t0);
        }
    }
    knots.last().unwrap().1
}

impl BoltSpec {
    /// Rotation angle at time `t`, clamped to the profile's ends.
    pub fn theta_at(&self, t: f64) -> f64 {
        piecewise_linear(&self.profile, t)
    }

    /// Bolt center at time `t`, including any drift.
    pub fn center_at(&self, t: f64) -> (f64, f64) {
        if self.drift.is_empty() {
            return self.center;
        }
        let xs: Vec<(f64, f64)> = self.drift.iter().map(|&(t, (x, _))| (t, x)).collect();
        let ys: Vec<(f64, f64)> = self.drift.iter().map(|&(t, (_, y))| (t, y)).collect();
        (
            self.center.0 + piecewise_linear(&xs, t),
            self.center.1 + piecewise_linear(&ys, t),
        )
    }
}

/// Piecewise-constant global luminance multiplier: active from `from_t`
/// until the next step.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LightingStep {
    pub from_t: f64,
    pub multiplier: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ClutterRect {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
    pub level: f32,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Background {
    pub level: f32,
    #[serde(default)]
    pub clutter: Vec<ClutterRect>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SceneConfig {
    pub width: usize,
    pub height: usize,
    pub fps: f64,
    pub duration: f64,
    pub bolts: Vec<BoltSpec>,
    /// Empty list means a constant multiplier of one.
    #[serde(default)]
    pub lighting: Vec<LightingStep>,
    pub noise_sigma: f32,
    pub background: Background,
    pub supersample: usize,
    #[serde(default)]
    pub texture: TextureParams,
    pub seed: u64,
}

impl SceneConfig {
    pub fn num_frames(&self) -> usize {
        (self.fps * self.duration).round() as usize
    }

    pub fn frame_time(&self, frame: usize) -> f64 {
        frame as f64 / self.fps
    }

    pub fn last_frame_time(&self) -> f64 {
        self.frame_time(self.num_frames().saturating_sub(1))
    }

    pub fn multiplier_at(&self, t: f64) -> f64 {
        let mut m = 1.0;
        for step in &self.lighting {
            if step.from_t <= t {
                m = step.multiplier;
            } else {
                break;
            }
        }
        m
    }

    pub fn validate(&self) -> Result<()> {
        if self.width < 16 || self.height < 16 {
            return Err(Error::InvalidConfig("frame must be at least 16x16".into()));
        }
        if !(self.fps > 0.0) || !(self.duration > 0.0) || self.num_frames() < 1 {
            return Err(Error::InvalidConfig(
                "fps and duration must yield at least one frame".into(),
            ));
        }
        if self.supersample < 1 {
            return Err(Error::InvalidConfig("supersample must be at least 1".into()));
        }
        if self.noise_sigma < 0.0 {
            return Err(Error::InvalidConfig("noise sigma must be nonnegative".into()));
        }
        for (i, step) in self.lighting.iter().enumerate() {
            if !(step.multiplier > 0.0 && step.multiplier <= 2.0) {
                return Err(Error::InvalidConfig(format!(
                    "lighting multiplier {} at step {i} outside (0, 2]",
                    step.multiplier
                )));
            }
            if i > 0 && step.from_t < self.lighting[i - 1].from_t {
                return Err(Error::InvalidConfig("lighting steps must be sorted".into()));
            }
        }
        for (i, bolt) in self.bolts.iter().enumerate() {
            if bolt.circumradius < 12.0 {
                return Err(Error::InvalidConfig(format!(
                    "bolt {i} circumradius {} below the 12 px minimum",
                    bolt.circumradius
                )));
            }
            // The washer disk plus a margin of one circumradius must stay
            // inside the frame, at every drift knot (the path between knots
            // is linear, so the knots are the extremes).
            let reach = bolt.circumradius * (self.texture.washer_outer_ratio + 1.0);
            let mut knot_times: Vec<f64> = vec![0.0, self.duration];
            knot_times.extend(bolt.drift.iter().map(|&(t, _)| t));
            for &t in &knot_times {
                let (cx, cy) = bolt.center_at(t.clamp(0.0, self.duration));
                if cx - reach < 0.0
                    || cy - reach < 0.0
                    || cx + reach > (self.width - 1) as f64
                    || cy + reach > (self.height - 1) as f64
                {
                    return Err(Error::InvalidConfig(format!(
                        "bolt {i} at ({cx}, {cy}) does not leave a margin of one \
                         circumradius inside the {}x{} frame",
                        self.width, self.height
                    )));
                }
            }
            if bolt.profile.is_empty() {
                return Err(Error::InvalidConfig(format!(
                    "bolt {i} needs at least one profile knot"
                )));
            }
            if bolt.profile.windows(2).any(|p| p[1].0 < p[0].0)
                || bolt.drift.windows(2).any(|p| p[1].0 < p[0].0)
            {
                return Err(Error::InvalidConfig(format!(
                    "bolt {i} profile knots must be sorted by time"
                )));
            }
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<SceneConfig> {
        let path = path.as_ref();
        let text = io::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("scene config serializes");
        io::write_text_atomic(path, &text)
    }

    /// Manifest ROIs for frame 0, from the bolt geometry (hexagon bounding
    /// box plus a 2 px pad).
    pub fn initial_rois(&self) -> Vec<Roi> {
        self.bolts
            .iter()
            .map(|b| {
                let (cx, cy) = b.center_at(0.0);
                let pad = b.circumradius + 2.0;
                let x0 = (cx - pad).floor().max(0.0) as usize;
                let y0 = (cy - pad).floor().max(0.0) as usize;
                let x1 = ((cx + pad).ceil() as usize).min(self.width - 1);
                let y1 = ((cy + pad).ceil() as usize).min(self.height - 1);
                Roi::new(x0, y0, x1 - x0 + 1, y1 - y0 + 1, 1.0)
            })
            .collect()
    }
}

/// Flat-top hexagon membership test in bolt-local coordinates.
fn in_hexagon(x: f64, y: f64, r: f64) -> bool {
    let half_height = SQRT3 * 0.5 * r;
    y.abs() <= half_height
        && (SQRT3 * x + y).abs() <= SQRT3 * r
        && (SQRT3 * x - y).abs() <= SQRT3 * r
}

#[derive(Debug, Clone, Copy)]
struct Speckle {
    x: f64,
    y: f64,
    radius: f64,
    lum: f32,
}

/// Precomputed per-bolt rendering state (everything time-independent).
struct BoltLayer {
    circumradius: f64,
    washer_outer: f64,
    speckles: Vec<Speckle>,
}

impl BoltLayer {
    fn build(bolt: &BoltSpec, tex: &TextureParams) -> BoltLayer {
        let mut rng = ChaCha8Rng::seed_from_u64(bolt.texture_seed);
        let r = bolt.circumradius;
        let bright_count =
            (tex.speckle_count as f64 * tex.bright_fraction).round() as usize;
        let mut speckles = Vec::with_capacity(tex.speckle_count);
        for i in 0..tex.speckle_count {
            let radius = (tex.speckle_radius.0
                + (tex.speckle_radius.1 - tex.speckle_radius.0) * rng.gen::<f64>())
                * r;
            // Keep the whole disk inside the hexagon face (and inside the
            // annulus when one is configured).
            let fit = r - radius - 1.0;
            let band = tex
                .speckle_annulus
                .map(|(lo, hi)| (lo * r, (hi * r).min(fit)));
            let (mut x, mut y);
            loop {
                x = (rng.gen::<f64>() * 2.0 - 1.0) * fit;
                y = (rng.gen::<f64>() * 2.0 - 1.0) * fit;
                if !in_hexagon(x, y, fit) {
                    continue;
                }
                if let Some((lo, hi)) = band {
                    let d = (x * x + y * y).sqrt();
                    if d < lo || d > hi {
                        continue;
                    }
                }
                break;
            }
            let range = if i < bright_count {
                tex.bright_lum
            } else {
                tex.dark_lum
            };
            let lum = range.0 + (range.1 - range.0) * rng.gen::<f32>();
            speckles.push(Speckle { x, y, radius, lum });
        }
        BoltLayer {
            circumradius: r,
            washer_outer: r * tex.washer_outer_ratio,
            speckles,
        }
    }

    /// Luminance contribution at frame point `(px, py)` for rotation `theta`
    /// about `center`, or `None` outside the washer disk.
    fn shade(
        &self,
        px: f64,
        py: f64,
        theta: f64,
        center: (f64, f64),
        tex: &TextureParams,
    ) -> Option<f32> {
        let dx = px - center.0;
        let dy = py - center.1;
        if dx * dx + dy * dy > self.washer_outer * self.washer_outer {
            return None;
        }
        let mut lum = tex.washer_lum;
        // Rotate the query point back into the bolt's local frame.
        let (s, c) = theta.sin_cos();
        let lx = c * dx + s * dy;
        let ly = -s * dx + c * dy;
        if in_hexagon(lx, ly, self.circumradius) {
            lum = tex.base_lum;
            if tex.ring_amplitude > 0.0 {
                let d = (lx * lx + ly * ly).sqrt();
                if d < tex.ring_extent * self.circumradius {
                    let phase = 2.0 * std::f64::consts::PI * d / tex.ring_period;
                    lum += tex.ring_amplitude * phase.sin() as f32;
                }
            }
            for sp in &self.speckles {
                let ddx = lx - sp.x;
                let ddy = ly - sp.y;
                if ddx * ddx + ddy * ddy <= sp.radius * sp.radius {
                    lum = sp.lum;
                }
            }
        }
        Some(lum)
    }
}

fn clutter_level(bg: &Background, x: f64, y: f64) -> f32 {
    let mut level = bg.level;
    for rect in &bg.clutter {
        if x >= rect.x && x < rect.x + rect.w && y >= rect.y && y < rect.y + rect.h {
            level = rect.level;
        }
    }
    level
}

/// Time-independent rendering state: bolt layers plus the background
/// rasterized once at supersample resolution.
struct RenderContext {
    layers: Vec<BoltLayer>,
    bg_super: Vec<f32>,
    super_w: usize,
}

impl RenderContext {
    fn build(scene: &SceneConfig) -> RenderContext {
        let layers = scene
            .bolts
            .iter()
            .map(|b| BoltLayer::build(b, &scene.texture))
            .collect();
        let s = scene.supersample;
        let inv = 1.0 / s as f64;
        let super_w = scene.width * s;
        let super_h = scene.height * s;
        let mut bg_super = Vec::with_capacity(super_w * super_h);
        for sy in 0..super_h {
            let py = (sy / s) as f64 - 0.5 + ((sy % s) as f64 + 0.5) * inv;
            for sx in 0..super_w {
                let px = (sx / s) as f64 - 0.5 + ((sx % s) as f64 + 0.5) * inv;
                bg_super.push(clutter_level(&scene.background, px, py));
            }
        }
        RenderContext {
            layers,
            bg_super,
            super_w,
        }
    }
}

/// Standard normal deviate via Box-Muller.
fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = rng.gen::<f64>().max(1e-300);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Render the scene at time `t`. Returns the frame and each bolt's exact
/// rotation angle at that time.
pub fn render_frame(scene: &SceneConfig, t: f64) -> Result<(GrayImage, Vec<f64>)> {
    scene.validate()?;
    if !(0.0..=scene.duration).contains(&t) {
        return Err(Error::InvalidParameter(format!(
            "render time {t} outside [0, {}]",
            scene.duration
        )));
    }
    let ctx = RenderContext::build(scene);
    let thetas: Vec<f64> = scene.bolts.iter().map(|b| b.theta_at(t)).collect();
    Ok((render_with_context(scene, &ctx, &thetas, t), thetas))
}

fn render_with_context(
    scene: &SceneConfig,
    ctx: &RenderContext,
    thetas: &[f64],
    t: f64,
) -> GrayImage {
    let s = scene.supersample;
    let inv = 1.0 / s as f64;
    let mult = scene.multiplier_at(t) as f32;
    let centers: Vec<(f64, f64)> = scene.bolts.iter().map(|b| b.center_at(t)).collect();
    // Bounding boxes (in output pixels) where each bolt can contribute.
    let bboxes: Vec<(usize, usize, usize, usize)> = ctx
        .layers
        .iter()
        .zip(centers.iter())
        .map(|(layer, &(cx, cy))| {
            let r = layer.washer_outer + 1.0;
            (
                (cx - r).floor().max(0.0) as usize,
                (cy - r).floor().max(0.0) as usize,
                ((cx + r).ceil() as usize).min(scene.width - 1),
                ((cy + r).ceil() as usize).min(scene.height - 1),
            )
        })
        .collect();
    let frame_index = (t * scene.fps).round() as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(
        scene
            .seed
            .wrapping_add(frame_index.wrapping_mul(0x9E37_79B9_7F4A_7C15)),
    );
    let mut data = Vec::with_capacity(scene.width * scene.height);
    for y in 0..scene.height {
        for x in 0..scene.width {
            let near: Vec<usize> = (0..ctx.layers.len())
                .filter(|&i| {
                    let (x0, y0, x1, y1) = bboxes[i];
                    x >= x0 && x <= x1 && y >= y0 && y <= y1
                })
                .collect();
            let mut acc = 0.0f32;
            for sy in 0..s {
                for sx in 0..s {
                    let mut lum = ctx.bg_super[(y * s + sy) * ctx.super_w + (x * s + sx)];
                    if !near.is_empty() {
                        let px = x as f64 - 0.5 + (sx as f64 + 0.5) * inv;
                        let py = y as f64 - 0.5 + (sy as f64 + 0.5) * inv;
                        for &i in &near {
                            if let Some(v) = ctx.layers[i].shade(
                                px,
                                py,
                                thetas[i],
                                centers[i],
                                &scene.texture,
                            ) {
                                lum = v;
                            }
                        }
                    }
                    acc += lum;
                }
            }
            let mut v = acc / (s * s) as f32 * mult;
            if scene.noise_sigma > 0.0 {
                v += scene.noise_sigma * normal(&mut rng) as f32;
            }
            data.push(v.clamp(0.0, 1.0));
        }
    }
    GrayImage {
        width: scene.width,
        height: scene.height,
        data,
    }
}

/// Exact rotation samples for every (frame, bolt) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthTable {
    pub rows: Vec<GtRow>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GtRow {
    pub frame: usize,
    pub time_s: f64,
    pub bolt_id: usize,
    pub theta_rad: f64,
}

impl GroundTruthTable {
    pub fn of_scene(scene: &SceneConfig) -> GroundTruthTable {
        let mut rows = Vec::with_capacity(scene.num_frames() * scene.bolts.len());
        for frame in 0..scene.num_frames() {
            let t = scene.frame_time(frame);
            for (bolt_id, bolt) in scene.bolts.iter().enumerate() {
                rows.push(GtRow {
                    frame,
                    time_s: t,
                    bolt_id,
                    theta_rad: bolt.theta_at(t),
                });
            }
        }
        GroundTruthTable { rows }
    }

    /// Net rotation of one bolt from the first to the last frame.
    pub fn total_rotation(&self, bolt_id: usize) -> Option<f64> {
        let mut first = None;
        let mut last = None;
        for row in &self.rows {
            if row.bolt_id == bolt_id {
                if first.is_none() {
                    first = Some(row.theta_rad);
                }
                last = Some(row.theta_rad);
            }
        }
        Some(last? - first?)
    }

    pub fn bolt_ids(&self) -> Vec<usize> {
        let mut ids: Vec<usize> = self.rows.iter().map(|r| r.bolt_id).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("frame,time_s,bolt_id,theta_rad\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{:.6},{},{:.12}\n",
                r.frame, r.time_s, r.bolt_id, r.theta_rad
            ));
        }
        out
    }

    pub fn from_csv(text: &str, path: &Path) -> Result<GroundTruthTable> {
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if i == 0 || line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 4 {
                return Err(Error::malformed(path, format!("bad gt row {i}: {line:?}")));
            }
            let parse_err = |e: String| Error::malformed(path, format!("gt row {i}: {e}"));
            rows.push(GtRow {
                frame: fields[0].parse().map_err(|e: std::num::ParseIntError| parse_err(e.to_string()))?,
                time_s: fields[1].parse().map_err(|e: std::num::ParseFloatError| parse_err(e.to_string()))?,
                bolt_id: fields[2].parse().map_err(|e: std::num::ParseIntError| parse_err(e.to_string()))?,
                theta_rad: fields[3].parse().map_err(|e: std::num::ParseFloatError| parse_err(e.to_string()))?,
            });
        }
        Ok(GroundTruthTable { rows })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<GroundTruthTable> {
        let path = path.as_ref();
        Self::from_csv(&io::read_to_string(path)?, path)
    }
}

/// Paths produced by [`generate`].
#[derive(Debug, Clone)]
pub struct GeneratedScene {
    pub dir: PathBuf,
    pub manifest_path: PathBuf,
    pub gt_path: PathBuf,
    pub frame_files: Vec<String>,
}

/// Render every frame of the scene into `out_dir` as zero-padded PGM files,
/// along with `manifest.json` (fps, file list, frame-0 ROIs) and `gt.csv`.
pub fn generate(scene: &SceneConfig, out_dir: impl AsRef<Path>) -> Result<GeneratedScene> {
    scene.validate()?;
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let ctx = RenderContext::build(scene);
    let frames: Vec<(usize, GrayImage)> = (0..scene.num_frames())
        .into_par_iter()
        .map(|k| {
            let t = scene.frame_time(k);
            let thetas: Vec<f64> = scene.bolts.iter().map(|b| b.theta_at(t)).collect();
            (k, render_with_context(scene, &ctx, &thetas, t))
        })
        .collect();

    let mut frame_files = Vec::with_capacity(frames.len());
    for (k, frame) in &frames {
        let name = format!("frame_{k:06}.pgm");
        io::write_gray(out_dir.join(&name), frame)?;
        frame_files.push(name);
    }

    let manifest = Manifest {
        fps: scene.fps,
        frames: frame_files
            .iter()
            .enumerate()
            .map(|(k, file)| ManifestFrame {
                file: file.clone(),
                rois: if k == 0 {
                    Some(scene.initial_rois())
                } else {
                    None
                },
            })
            .collect(),
    };
    let manifest_path = out_dir.join("manifest.json");
    manifest.save(&manifest_path)?;

    let gt = GroundTruthTable::of_scene(scene);
    let gt_path = out_dir.join("gt.csv");
    io::write_text_atomic(&gt_path, &gt.to_csv())?;

    Ok(GeneratedScene {
        dir: out_dir.to_path_buf(),
        manifest_path,
        gt_path,
        frame_files,
    })
}

/// Render all frames in memory (no files); used by tests and the study
/// harness where the same frames are shared across many runs.
pub fn render_all(scene: &SceneConfig) -> Result<Vec<GrayImage>> {
    scene.validate()?;
    let ctx = RenderContext::build(scene);
    Ok((0..scene.num_frames())
        .into_par_iter()
        .map(|k| {
            let t = scene.frame_time(k);
            let thetas: Vec<f64> = scene.bolts.iter().map(|b| b.theta_at(t)).collect();
            render_with_context(scene, &ctx, &thetas, t)
        })
        .collect())
}

/// Ready-made scene configurations used by the examples, the CLI presets and
/// the verification suite.
pub mod scenes {
    use super::*;

    /// Single bolt rotating linearly from 0 to `total_rad` over `frames`
    /// frames at 30 fps under constant lighting.
    pub fn clean_rotation(total_rad: f64, frames: usize) -> SceneConfig {
        let fps = 30.0;
        let duration = frames as f64 / fps;
        let t_last = (frames - 1) as f64 / fps;
        SceneConfig {
            width: 256,
            height: 256,
            fps,
            duration,
            bolts: vec![BoltSpec {
                center: (128.0, 128.0),
                circumradius: 40.0,
                texture_seed: 11,
                profile: vec![(0.0, 0.0), (t_last, total_rad)],
                drift: Vec::new(),
            }],
            lighting: Vec::new(),
            noise_sigma: 0.003,
            background: Background {
                level: 0.22,
                clutter: vec![
                    ClutterRect {
                        x: 8.0,
                        y: 8.0,
                        w: 40.0,
                        h: 26.0,
                        level: 0.45,
                    },
                    ClutterRect {
                        x: 200.0,
                        y: 214.0,
                        w: 44.0,
                        h: 30.0,
                        level: 0.12,
                    },
                ],
            },
            supersample: 4,
            texture: TextureParams::default(),
            seed: 4242,
        }
    }

    /// Several non-rotating bolts; used for the zero-rotation floor.
    pub fn static_bolts(count: usize, frames: usize) -> SceneConfig {
        let fps = 30.0;
        let duration = frames as f64 / fps;
        let positions = [
            (104.0, 104.0),
            (312.0, 104.0),
            (104.0, 312.0),
            (312.0, 312.0),
            (208.0, 208.0),
            (208.0, 104.0),
        ];
        let bolts = (0..count.min(positions.len()))
            .map(|i| BoltSpec {
                center: positions[i],
                circumradius: 34.0,
                texture_seed: 100 + i as u64,
                profile: vec![(0.0, 0.0)],
                drift: Vec::new(),
            })
            .collect();
        SceneConfig {
            width: 416,
            height: 416,
            fps,
            duration,
            bolts,
            lighting: Vec::new(),
            noise_sigma: 0.003,
            background: Background {
                level: 0.22,
                clutter: Vec::new(),
            },
            supersample: 4,
            texture: TextureParams::default(),
            seed: 777,
        }
    }

    /// Continuous rotation with the global luminance multiplier toggling
    /// between 1.0 and `bright` every `period_s` seconds.
    ///
    /// The texture is tuned so that the bright phase saturates the hexagon
    /// face and the bright speckles (killing the corners that were seeded in
    /// the normal phase) while a handful of low-contrast dark dots become the
    /// only seedable structure; losing the live points below the re-detection
    /// threshold at each switch is what this scene is for.
    pub fn lighting_switch(total_rad: f64, frames: usize, period_s: f64, bright: f64) -> SceneConfig {
        let fps = 30.0;
        let duration = frames as f64 / fps;
        let t_last = (frames - 1) as f64 / fps;
        let mut lighting = Vec::new();
        let mut t = period_s;
        let mut on = true;
        while t < duration {
            lighting.push(LightingStep {
                from_t: t,
                multiplier: if on { bright } else { 1.0 },
            });
            on = !on;
            t += period_s;
        }
        SceneConfig {
            width: 256,
            height: 256,
            fps,
            duration,
            bolts: vec![BoltSpec {
                center: (128.0, 128.0),
                circumradius: 40.0,
                texture_seed: 23,
                profile: vec![(0.0, 0.0), (t_last, total_rad)],
                drift: Vec::new(),
            }],
            lighting,
            noise_sigma: 0.002,
            background: Background {
                level: 0.2,
                clutter: Vec::new(),
            },
            supersample: 4,
            texture: TextureParams {
                speckle_count: 44,
                bright_fraction: 0.88,
                bright_lum: (0.85, 0.95),
                dark_lum: (0.6, 0.63),
                base_lum: 0.7,
                washer_lum: 0.65,
                washer_outer_ratio: 1.35,
                speckle_radius: (0.05, 0.09),
                speckle_annulus: None,
                ring_amplitude: 0.0,
                ring_period: default_ring_period(),
                ring_extent: 0.0,
            },
            seed: 9090,
        }
    }

    /// The scene used by the parameter-study harness: one bolt spinning
    /// quickly (8.45 rad over the whole clip) with its speckles confined to
    /// the outer band of the face, like flank markings.
    ///
    /// Two properties are deliberate. The per-frame rim displacement exceeds
    /// what a single resolution level can lock onto, so shallow pyramids
    /// lose tracking while deeper ones follow. And large search blocks
    /// around rim points take in the face boundary and washer, whose
    /// apparent motion under rotation is nearly zero, dragging the estimate
    /// low. The frame is large enough that a 31-pixel search block still
    /// fits the coarsest level of a four-level pyramid.
    pub fn study_scene(frames: usize) -> SceneConfig {
        let fps = 30.0;
        let duration = frames as f64 / fps;
        let t_last = (frames - 1) as f64 / fps;
        // Two-frame 16 px/frame translation bursts (relative camera-bolt
        // motion) every 21 frames, zig-zagging between two rest positions.
        let mut drift: Vec<(f64, (f64, f64))> = vec![(0.0, (0.0, 0.0))];
        let rest_a = (0.0, 0.0);
        let rest_b = (32.0, 0.0);
        let mut at_b = false;
        let mut start = 25.0;
        while start + 2.0 < frames as f64 - 8.0 && drift.len() < 21 {
            let from = if at_b { rest_b } else { rest_a };
            let to = if at_b { rest_a } else { rest_b };
            drift.push((start / fps, from));
            drift.push(((start + 2.0) / fps, to));
            at_b = !at_b;
            start += 21.0;
        }
        SceneConfig {
            width: 512,
            height: 512,
            fps,
            duration,
            bolts: vec![BoltSpec {
                center: (256.0, 256.0),
                circumradius: 44.0,
                texture_seed: 31,
                profile: vec![(0.0, 0.0), (t_last, 8.45)],
                drift,
            }],
            lighting: Vec::new(),
            noise_sigma: 0.003,
            background: Background {
                level: 0.22,
                clutter: Vec::new(),
            },
            supersample: 4,
            texture: TextureParams {
                speckle_annulus: Some((0.55, 0.92)),
                ring_amplitude: 0.22,
                ring_extent: 0.5,
                ..TextureParams::default()
            },
            seed: 31415,
        }
    }

    /// Blob-detector settings matched to the synthetic scenes: the hexagon
    /// face is the only region brighter than this threshold.
    pub fn blob_detector_for(scene: &SceneConfig) -> crate::detect::BlobDetector {
        let _ = scene;
        crate::detect::BlobDetector {
            luminance_threshold: 0.47,
            min_area: 800,
            max_area: 200_000,
        }
    }
}
