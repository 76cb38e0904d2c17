//! Measurement procedures: ground-truth rotation from labeled line edges,
//! the clamped relative-error accuracy metric, and the NP x BE x BS x NI
//! parameter-study harness with marginal means.

use std::collections::BTreeMap;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detect::BoltDetector;
use crate::img::GrayImage;
use crate::pipeline::{self, PipelineConfig};
use crate::{io, Error, Result};

/// Hand-labeled line-edge angles (degrees, mod 180) at the start and end of
/// each interval. Within an interval every edge is the same physical edge,
/// so its wrapped delta is the interval's rotation as seen by that edge.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EdgeLabelSet {
    pub intervals: Vec<EdgeInterval>,
}

/// One labeling interval: per-edge `(start_deg, end_deg)` pairs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EdgeInterval {
    pub edges: Vec<(f64, f64)>,
}

/// Ground-truth total with per-interval bound violations flagged.
#[derive(Debug, Clone, PartialEq)]
pub struct GtRotation {
    pub radians: f64,
    /// `(interval, edge)` indices whose wrapped delta reached 60 degrees,
    /// where the labeling procedure's guarantee no longer holds.
    pub violations: Vec<(usize, usize)>,
}

/// Wrap a line-angle delta (degrees) into `(-90, 90]`, resolving the mod-180
/// ambiguity of undirected lines.
fn wrap_line_delta_deg(delta: f64) -> f64 {
    let d = delta.rem_euclid(180.0);
    if d > 90.0 {
        d - 180.0
    } else {
        d
    }
}

/// Sum per-interval mean edge rotations into the total ground-truth rotation.
pub fn gt_from_edges(labels: &EdgeLabelSet) -> Result<GtRotation> {
    let mut total_deg = 0.0;
    let mut violations = Vec::new();
    for (i, interval) in labels.intervals.iter().enumerate() {
        if interval.edges.is_empty() {
            return Err(Error::InvalidParameter(format!(
                "interval {i} has no labeled edges"
            )));
        }
        let mut sum = 0.0;
        for (j, &(start, end)) in interval.edges.iter().enumerate() {
            let delta = wrap_line_delta_deg(end - start);
            if delta.abs() >= 60.0 {
                violations.push((i, j));
            }
            sum += delta;
        }
        total_deg += sum / interval.edges.len() as f64;
    }
    Ok(GtRotation {
        radians: total_deg.to_radians(),
        violations,
    })
}

/// Clamped relative-error accuracy: `max(0, 1 - |phi - phi_gt| / |phi_gt|)`.
/// Undefined when the ground truth is (numerically) zero; callers report the
/// raw estimate instead in that case.
pub fn accuracy(phi: f64, phi_gt: f64) -> Result<f64> {
    if phi_gt.abs() <= 1e-6 {
        return Err(Error::UndefinedMetric(
            "accuracy is undefined for zero ground-truth rotation".into(),
        ));
    }
    Ok((1.0 - ((phi - phi_gt) / phi_gt).abs()).max(0.0))
}

/// The four value lists of the parameter study.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct StudyGrid {
    pub np_values: Vec<usize>,
    pub be_values: Vec<f64>,
    pub bs_values: Vec<usize>,
    pub ni_values: Vec<usize>,
}

impl Default for StudyGrid {
    fn default() -> Self {
        StudyGrid {
            np_values: vec![1, 2, 3, 4],
            be_values: vec![2.0, 6.0, 10.0, 20.0],
            bs_values: vec![5, 11, 21, 31],
            ni_values: vec![10, 20, 30, 40],
        }
    }
}

impl StudyGrid {
    pub fn size(&self) -> usize {
        self.np_values.len() * self.be_values.len() * self.bs_values.len() * self.ni_values.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.size() == 0 {
            return Err(Error::InvalidConfig("study grid has an empty axis".into()));
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<StudyGrid> {
        let path = path.as_ref();
        let text = io::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
    }
}

/// One grid cell's outcome. `accuracy` and `final_phi` are NaN for cells
/// whose pipeline run aborted.
#[derive(Debug, Clone, Copy)]
pub struct StudyCell {
    pub np: usize,
    pub be: f64,
    pub bs: usize,
    pub ni: usize,
    pub accuracy: f64,
    pub final_phi: f64,
    pub redetects: usize,
}

#[derive(Debug, Clone)]
pub struct StudyResults {
    pub cells: Vec<StudyCell>,
    pub gt_total: f64,
}

/// Everything a study needs besides the grid: the shared rendered frames,
/// the detector, and the scene's known total rotation.
pub struct StudyInput<'a> {
    pub frames: &'a [GrayImage],
    pub fps: f64,
    pub detector: &'a dyn BoltDetector,
    /// Ground-truth net rotation of the studied bolt; must be nonzero.
    pub gt_total: f64,
    pub bolt_id: usize,
}

/// Run the full pipeline once per grid cell over the shared frames. Cells
/// differ only in the four tracker parameters; detector and seed are fixed.
/// Cell order is the nested np, be, bs, ni loop; failed cells are recorded
/// as NaN and do not stop the sweep.
pub fn run_param_study(
    grid: &StudyGrid,
    input: &StudyInput,
    base: &PipelineConfig,
) -> Result<StudyResults> {
    grid.validate()?;
    base.validate()?;
    if input.gt_total.abs() <= 1e-6 {
        return Err(Error::InvalidParameter(
            "parameter study needs a scene with nonzero ground-truth rotation".into(),
        ));
    }
    let mut combos = Vec::with_capacity(grid.size());
    for &np in &grid.np_values {
        for &be in &grid.be_values {
            for &bs in &grid.bs_values {
                for &ni in &grid.ni_values {
                    combos.push((np, be, bs, ni));
                }
            }
        }
    }
    let cells: Vec<StudyCell> = combos
        .par_iter()
        .map(|&(np, be, bs, ni)| {
            let mut cfg = base.clone();
            cfg.tracker.np = np;
            cfg.tracker.be = be;
            cfg.tracker.bs = bs;
            cfg.tracker.ni = ni;
            match pipeline::run_frames(input.detector, &cfg, input.fps, input.frames, true) {
                Ok(out) => {
                    let phi = out.history.final_phi(input.bolt_id).unwrap_or(f64::NAN);
                    let acc = accuracy(phi, input.gt_total).unwrap_or(f64::NAN);
                    let redetects = out
                        .summary
                        .bolts
                        .iter()
                        .find(|b| b.bolt_id == input.bolt_id)
                        .map(|b| b.redetect_events)
                        .unwrap_or(0);
                    StudyCell {
                        np,
                        be,
                        bs,
                        ni,
                        accuracy: acc,
                        final_phi: phi,
                        redetects,
                    }
                }
                Err(_) => StudyCell {
                    np,
                    be,
                    bs,
                    ni,
                    accuracy: f64::NAN,
                    final_phi: f64::NAN,
                    redetects: 0,
                },
            }
        })
        .collect();
    Ok(StudyResults {
        cells,
        gt_total: input.gt_total,
    })
}

impl StudyResults {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("np,be,bs,ni,accuracy,final_phi,redetects\n");
        for c in &self.cells {
            out.push_str(&format!(
                "{},{},{},{},{:.6},{:.9},{}\n",
                c.np, c.be, c.bs, c.ni, c.accuracy, c.final_phi, c.redetects
            ));
        }
        out
    }

    fn mean<F: Fn(&StudyCell) -> bool>(&self, pred: F) -> f64 {
        let vals: Vec<f64> = self
            .cells
            .iter()
            .filter(|c| pred(c) && c.accuracy.is_finite())
            .map(|c| c.accuracy)
            .collect();
        if vals.is_empty() {
            f64::NAN
        } else {
            vals.iter().sum::<f64>() / vals.len() as f64
        }
    }

    pub fn marginal_np(&self, np: usize) -> f64 {
        self.mean(|c| c.np == np)
    }
    pub fn marginal_be(&self, be: f64) -> f64 {
        self.mean(|c| c.be == be)
    }
    pub fn marginal_bs(&self, bs: usize) -> f64 {
        self.mean(|c| c.bs == bs)
    }
    pub fn marginal_ni(&self, ni: usize) -> f64 {
        self.mean(|c| c.ni == ni)
    }

    /// Mean accuracy over cells with a given block size and pyramid depth.
    pub fn mean_at_bs_np(&self, bs: usize, np: usize) -> f64 {
        self.mean(|c| c.bs == bs && c.np == np)
    }

    /// Per-parameter marginal means, serialized as the study summary.
    pub fn summary_json(&self, grid: &StudyGrid) -> String {
        let mut summary: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
        summary.insert(
            "np".into(),
            grid.np_values
                .iter()
                .map(|&v| (v.to_string(), self.marginal_np(v)))
                .collect(),
        );
        summary.insert(
            "be".into(),
            grid.be_values
                .iter()
                .map(|&v| (v.to_string(), self.marginal_be(v)))
                .collect(),
        );
        summary.insert(
            "bs".into(),
            grid.bs_values
                .iter()
                .map(|&v| (v.to_string(), self.marginal_bs(v)))
                .collect(),
        );
        summary.insert(
            "ni".into(),
            grid.ni_values
                .iter()
                .map(|&v| (v.to_string(), self.marginal_ni(v)))
                .collect(),
        );
        serde_json::to_string_pretty(&summary).expect("summary serializes")
    }
}
