//! The pluggable bolt-detector boundary, plus two detector-adjacent
//! procedures: anchor-box dimension estimation by IoU k-means, and
//! lighting-condition data augmentation in HSL space.
//!
//! The pipeline only depends on the [`BoltDetector`] trait; any object
//! detector can sit behind it. Two reference implementations are provided:
//! one replaying per-frame annotations from a manifest, and one doing simple
//! luminance blob detection for synthetic scenes.

use std::collections::BTreeMap;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::features::Roi;
use crate::img::{hsl_to_rgb, rgb_to_hsl, GrayImage, RgbImage};
use crate::{io, Error, Result};

/// A bolt localizer: maps a frame to regions of interest.
///
/// Returned boxes are validated (clipped to the frame, undersized boxes
/// dropped) at the pipeline boundary rather than trusted.
pub trait BoltDetector: Send + Sync {
    fn detect(&self, frame_index: usize, frame: &GrayImage) -> Vec<Roi>;
}

/// Clip detections to the frame and drop everything that no longer meets the
/// ROI invariants afterwards.
pub fn sanitize_rois(rois: Vec<Roi>, frame_w: usize, frame_h: usize) -> Vec<Roi> {
    rois.into_iter()
        .filter_map(|r| {
            let x0 = r.x.min(frame_w);
            let y0 = r.y.min(frame_h);
            let x1 = (r.x + r.w).min(frame_w);
            let y1 = (r.y + r.h).min(frame_h);
            let (w, h) = (x1.saturating_sub(x0), y1.saturating_sub(y0));
            if w < 8 || h < 8 {
                return None;
            }
            Some(Roi::new(x0, y0, w, h, r.confidence.clamp(0.0, 1.0)))
        })
        .collect()
}

/// On-disk description of a frame sequence: frame rate, file names, and
/// (sparse) per-frame ROI annotations. Files are resolved relative to the
/// manifest's directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub fps: f64,
    pub frames: Vec<ManifestFrame>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestFrame {
    pub file: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rois: Option<Vec<Roi>>,
}

impl Manifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Manifest> {
        let path = path.as_ref();
        let text = io::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::malformed(path, e.to_string()))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        io::write_text_atomic(path, &text)
    }
}

/// Detector that replays manifest annotations; frames without an entry reuse
/// the nearest earlier frame's ROIs.
pub struct AnnotationDetector {
    by_frame: BTreeMap<usize, Vec<Roi>>,
}

impl AnnotationDetector {
    /// Build from a manifest, validating every annotated box against the
    /// frame dimensions up front.
    pub fn from_manifest(manifest: &Manifest, frame_w: usize, frame_h: usize) -> Result<Self> {
        let mut by_frame = BTreeMap::new();
        for (index, frame) in manifest.frames.iter().enumerate() {
            if let Some(rois) = &frame.rois {
                for roi in rois {
                    roi.validate(frame_w, frame_h)
                        .map_err(|e| Error::InvalidConfig(format!("manifest frame {index}: {e}")))?;
                }
                let mut rois = rois.clone();
                for r in rois.iter_mut() {
                    r.confidence = 1.0;
                }
                by_frame.insert(index, rois);
            }
        }
        Ok(AnnotationDetector { by_frame })
    }
}

impl BoltDetector for AnnotationDetector {
    fn detect(&self, frame_index: usize, _frame: &GrayImage) -> Vec<Roi> {
        self.by_frame
            .range(..=frame_index)
            .next_back()
            .map(|(_, rois)| rois.clone())
            .unwrap_or_default()
    }
}

/// Bright-blob detector: binarize at a luminance threshold, label 8-connected
/// components, keep those with area inside `[min_area, max_area]`, and return
/// their bounding boxes expanded by two pixels.
pub struct BlobDetector {
    pub luminance_threshold: f32,
    pub min_area: usize,
    pub max_area: usize,
}

impl BlobDetector {
    pub fn new(luminance_threshold: f32, min_area: usize, max_area: usize) -> Result<Self> {
        if !(luminance_threshold > 0.0 && luminance_threshold < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "luminance threshold must be in (0, 1), got {luminance_threshold}"
            )));
        }
        Ok(BlobDetector {
            luminance_threshold,
            min_area,
            max_area,
        })
    }
}

impl BoltDetector for BlobDetector {
    fn detect(&self, _frame_index: usize, frame: &GrayImage) -> Vec<Roi> {
        let (w, h) = (frame.width, frame.height);
        let mut labeled = vec![false; w * h];
        let mut rois = Vec::new();
        let mut stack = Vec::new();
        for start in 0..w * h {
            if labeled[start] || frame.data[start] < self.luminance_threshold {
                continue;
            }
            // Flood-fill one 8-connected component.
            let mut area = 0usize;
            let (mut min_x, mut min_y, mut max_x, mut max_y) = (w, h, 0usize, 0usize);
            labeled[start] = true;
            stack.push(start);
            while let Some(i) = stack.pop() {
                area += 1;
                let (x, y) = (i % w, i / w);
                min_x = min_x.min(x);
                min_y = min_y.min(y);
                max_x = max_x.max(x);
                max_y = max_y.max(y);
                for dy in -1i64..=1 {
                    for dx in -1i64..=1 {
                        if dx == 0 && dy == 0 {
                            continue;
                        }
                        let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                        if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                            continue;
                        }
                        let ni = ny as usize * w + nx as usize;
                        if !labeled[ni] && frame.data[ni] >= self.luminance_threshold {
                            labeled[ni] = true;
                            stack.push(ni);
                        }
                    }
                }
            }
            if area < self.min_area || area > self.max_area {
                continue;
            }
            let x0 = min_x.saturating_sub(2);
            let y0 = min_y.saturating_sub(2);
            let x1 = (max_x + 3).min(w);
            let y1 = (max_y + 3).min(h);
            rois.push(Roi::new(x0, y0, x1 - x0, y1 - y0, 1.0));
        }
        rois.sort_by_key(|r| (r.y, r.x));
        rois
    }
}

/// Candidate bounding-box prior, output of the k-means estimation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnchorBox {
    pub width: f64,
    pub height: f64,
}

impl AnchorBox {
    pub fn area(&self) -> f64 {
        self.width * self.height
    }
}

/// IoU of two boxes co-centered at the origin.
fn centered_iou(a: &AnchorBox, b: &AnchorBox) -> f64 {
    let inter = a.width.min(b.width) * a.height.min(b.height);
    inter / (a.area() + b.area() - inter)
}

fn anchor_distance(a: &AnchorBox, b: &AnchorBox) -> f64 {
    1.0 - centered_iou(a, b)
}

/// k-means over box dimensions with `1 - IoU` as the distance, k-means++
/// initialization, component-wise mean centroid updates, and iteration to an
/// assignment fixpoint (or 100 rounds). Output sorted by descending area.
pub fn estimate_anchor_boxes(boxes: &[(f64, f64)], k: usize, seed: u64) -> Result<Vec<AnchorBox>> {
    if boxes.iter().any(|&(w, h)| !(w > 0.0 && h > 0.0)) {
        return Err(Error::InvalidParameter(
            "anchor boxes must have positive dimensions".into(),
        ));
    }
    let mut distinct: Vec<(f64, f64)> = Vec::new();
    for &b in boxes {
        if !distinct.contains(&b) {
            distinct.push(b);
        }
    }
    if k < 1 || k > distinct.len() {
        return Err(Error::InvalidParameter(format!(
            "k = {k} must be between 1 and the number of distinct boxes ({})",
            distinct.len()
        )));
    }
    let items: Vec<AnchorBox> = boxes
        .iter()
        .map(|&(w, h)| AnchorBox {
            width: w,
            height: h,
        })
        .collect();

    // k-means++ seeding on the same distance.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids: Vec<AnchorBox> = vec![items[rng.gen_range(0..items.len())]];
    while centroids.len() < k {
        let d2: Vec<f64> = items
            .iter()
            .map(|b| {
                centroids
                    .iter()
                    .map(|c| anchor_distance(b, c))
                    .fold(f64::INFINITY, f64::min)
                    .powi(2)
            })
            .collect();
        let total: f64 = d2.iter().sum();
        let next = if total <= 0.0 {
            // Every remaining box coincides with a centroid; take any distinct one.
            *items
                .iter()
                .find(|b| !centroids.iter().any(|c| anchor_distance(b, c) < 1e-12))
                .unwrap()
        } else {
            let mut target = rng.gen::<f64>() * total;
            let mut chosen = items.len() - 1;
            for (i, &w) in d2.iter().enumerate() {
                if target < w {
                    chosen = i;
                    break;
                }
                target -= w;
            }
            items[chosen]
        };
        centroids.push(next);
    }

    let mut assignment = vec![usize::MAX; items.len()];
    for _ in 0..100 {
        let mut changed = false;
        for (i, b) in items.iter().enumerate() {
            let mut best = (0usize, f64::INFINITY);
            for (c, centroid) in centroids.iter().enumerate() {
                let d = anchor_distance(b, centroid);
                if d < best.1 {
                    best = (c, d);
                }
            }
            if assignment[i] != best.0 {
                assignment[i] = best.0;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        for (c, centroid) in centroids.iter_mut().enumerate() {
            let mut n = 0usize;
            let (mut sw, mut sh) = (0.0, 0.0);
            for (b, &a) in items.iter().zip(assignment.iter()) {
                if a == c {
                    n += 1;
                    sw += b.width;
                    sh += b.height;
                }
            }
            if n > 0 {
                centroid.width = sw / n as f64;
                centroid.height = sh / n as f64;
            }
        }
    }
    centroids.sort_by(|a, b| b.area().partial_cmp(&a.area()).unwrap());
    Ok(centroids)
}

/// Total `1 - IoU` clustering cost of boxes against their nearest centroid.
pub fn anchor_cost(boxes: &[(f64, f64)], centroids: &[AnchorBox]) -> f64 {
    boxes
        .iter()
        .map(|&(w, h)| {
            let b = AnchorBox {
                width: w,
                height: h,
            };
            centroids
                .iter()
                .map(|c| anchor_distance(&b, c))
                .fold(f64::INFINITY, f64::min)
        })
        .sum()
}

/// Result of the lighting augmentation pass.
#[derive(Debug)]
pub struct AugmentedSet {
    /// Three images per input, in input order: the original followed by its
    /// two lightness-rescaled copies.
    pub images: Vec<RgbImage>,
    /// Indices of inputs whose mean lightness was zero; their copies were
    /// emitted unscaled.
    pub zero_lightness: Vec<usize>,
}

/// Generate two extra lighting conditions per image: the histogram of mean
/// lightness over the set is split into three equal-width sections, and each
/// image is rescaled so its mean lightness matches the mean of each of the
/// other two sections.
pub fn lighting_augment(images: &[RgbImage]) -> Result<AugmentedSet> {
    if images.is_empty() {
        return Err(Error::InvalidParameter(
            "lighting augmentation needs at least one image".into(),
        ));
    }
    let hsl: Vec<_> = images.iter().map(rgb_to_hsl).collect();
    let means: Vec<f32> = hsl.iter().map(|h| h.mean_lightness()).collect();
    let lo = means.iter().cloned().fold(f32::INFINITY, f32::min);
    let hi = means.iter().cloned().fold(f32::NEG_INFINITY, f32::max);
    let width = (hi - lo) / 3.0;
    let section = |m: f32| -> usize {
        if width <= 0.0 {
            0
        } else {
            (((m - lo) / width) as usize).min(2)
        }
    };
    // Per-section mean of member means; empty sections fall back to their
    // midpoint so every image still gets two targets.
    let mut sums = [0.0f64; 3];
    let mut counts = [0usize; 3];
    for &m in &means {
        let s = section(m);
        sums[s] += m as f64;
        counts[s] += 1;
    }
    let targets: Vec<f32> = (0..3)
        .map(|s| {
            if counts[s] > 0 {
                (sums[s] / counts[s] as f64) as f32
            } else {
                lo + (s as f32 + 0.5) * width
            }
        })
        .collect();

    let mut out = Vec::with_capacity(images.len() * 3);
    let mut zero_lightness = Vec::new();
    for (i, (img, hsl_img)) in images.iter().zip(hsl.iter()).enumerate() {
        out.push(img.clone());
        let own = section(means[i]);
        let zero = means[i] <= 0.0;
        if zero {
            zero_lightness.push(i);
        }
        for s in 0..3 {
            if s == own {
                continue;
            }
            let scale = if zero { 1.0 } else { targets[s] / means[i] };
            let mut scaled = hsl_img.clone();
            for px in scaled.data.iter_mut() {
                px[2] = (px[2] * scale).clamp(0.0, 1.0);
            }
            out.push(hsl_to_rgb(&scaled));
        }
    }
    Ok(AugmentedSet {
        images: out,
        zero_lightness,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn annotation_detector_carries_forward() {
        let manifest = Manifest {
            fps: 30.0,
            frames: (0..40)
                .map(|i| ManifestFrame {
                    file: format!("frame_{i:06}.pgm"),
                    rois: if i == 0 {
                        Some(vec![Roi::new(4, 4, 16, 16, 1.0)])
                    } else {
                        None
                    },
                })
                .collect(),
        };
        let det = AnnotationDetector::from_manifest(&manifest, 64, 64).unwrap();
        let frame = GrayImage::constant(64, 64, 0.0);
        let rois = det.detect(37, &frame);
        assert_eq!(rois.len(), 1);
        assert_eq!((rois[0].x, rois[0].y), (4, 4));
    }

    #[test]
    fn empty_manifest_detects_nothing() {
        let manifest = Manifest {
            fps: 30.0,
            frames: vec![ManifestFrame {
                file: "frame_000000.pgm".into(),
                rois: None,
            }],
        };
        let det = AnnotationDetector::from_manifest(&manifest, 32, 32).unwrap();
        let frame = GrayImage::constant(32, 32, 0.0);
        assert!(det.detect(0, &frame).is_empty());
        assert!(det.detect(100, &frame).is_empty());
    }

    #[test]
    fn out_of_bounds_manifest_roi_is_rejected_at_load() {
        let manifest = Manifest {
            fps: 30.0,
            frames: vec![ManifestFrame {
                file: "frame_000000.pgm".into(),
                rois: Some(vec![Roi::new(60, 0, 16, 16, 1.0)]),
            }],
        };
        assert!(AnnotationDetector::from_manifest(&manifest, 64, 64).is_err());
    }

    #[test]
    fn blob_detector_on_dark_frame_is_empty() {
        let det = BlobDetector::new(0.5, 10, 10_000).unwrap();
        let frame = GrayImage::constant(64, 64, 0.1);
        assert!(det.detect(0, &frame).is_empty());
    }

    #[test]
    fn blob_detector_finds_two_separated_blobs() {
        let mut frame = GrayImage::constant(96, 96, 0.05);
        for y in 10..30 {
            for x in 10..30 {
                frame.set(x, y, 0.9);
            }
        }
        for y in 60..80 {
            for x in 55..85 {
                frame.set(x, y, 0.9);
            }
        }
        let det = BlobDetector::new(0.5, 50, 10_000).unwrap();
        let rois = det.detect(0, &frame);
        assert_eq!(rois.len(), 2);
        // Tight bounds expanded by 2 px per side.
        assert_eq!((rois[0].x, rois[0].y, rois[0].w, rois[0].h), (8, 8, 24, 24));
    }

    #[test]
    fn sanitize_clips_and_drops() {
        let rois = vec![
            Roi::new(0, 0, 16, 16, 2.0),
            Roi::new(40, 40, 20, 20, 0.5),
            Roi::new(62, 0, 16, 16, 1.0),
        ];
        let clean = sanitize_rois(rois, 64, 64);
        assert_eq!(clean.len(), 2);
        assert_eq!(clean[0].confidence, 1.0);
        assert_eq!((clean[1].x, clean[1].y, clean[1].w, clean[1].h), (40, 40, 20, 20));
    }

    #[test]
    fn anchor_kmeans_identity_cases() {
        let boxes = vec![(50.0, 40.0); 10];
        let anchors = estimate_anchor_boxes(&boxes, 1, 7).unwrap();
        assert_eq!(anchors.len(), 1);
        assert!((anchors[0].width - 50.0).abs() < 1e-9);
        assert!((anchors[0].height - 40.0).abs() < 1e-9);

        let distinct = vec![(53.0, 42.0), (36.0, 38.0), (29.0, 30.0)];
        let anchors = estimate_anchor_boxes(&distinct, 3, 7).unwrap();
        assert_eq!(anchors.len(), 3);
        for (w, h) in distinct {
            assert!(anchors
                .iter()
                .any(|a| (a.width - w).abs() < 1e-9 && (a.height - h).abs() < 1e-9));
        }
    }

    #[test]
    fn anchor_kmeans_recovers_two_clusters() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut boxes = Vec::new();
        for _ in 0..40 {
            boxes.push((
                50.0 + rng.gen::<f64>() * 2.0 - 1.0,
                40.0 + rng.gen::<f64>() * 2.0 - 1.0,
            ));
        }
        for _ in 0..40 {
            boxes.push((
                30.0 + rng.gen::<f64>() * 2.0 - 1.0,
                30.0 + rng.gen::<f64>() * 2.0 - 1.0,
            ));
        }
        let anchors = estimate_anchor_boxes(&boxes, 2, 3).unwrap();
        assert_eq!(anchors.len(), 2);
        // Sorted by descending area: big cluster first.
        assert!((anchors[0].width - 50.0).abs() < 2.0);
        assert!((anchors[0].height - 40.0).abs() < 2.0);
        assert!((anchors[1].width - 30.0).abs() < 2.0);
        assert!((anchors[1].height - 30.0).abs() < 2.0);
    }

    #[test]
    fn anchor_kmeans_cost_not_worse_than_init() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let boxes: Vec<(f64, f64)> = (0..60)
            .map(|_| (10.0 + rng.gen::<f64>() * 60.0, 10.0 + rng.gen::<f64>() * 60.0))
            .collect();
        let anchors = estimate_anchor_boxes(&boxes, 4, 5).unwrap();
        // The converged centroids must beat using any single input box as
        // the lone centroid (a crude upper bound on the initial cost).
        let single = estimate_anchor_boxes(&boxes, 1, 5).unwrap();
        assert!(anchor_cost(&boxes, &anchors) <= anchor_cost(&boxes, &single));
    }

    #[test]
    fn anchor_kmeans_rejects_excess_k() {
        let boxes = vec![(10.0, 10.0), (10.0, 10.0), (20.0, 20.0)];
        assert!(estimate_anchor_boxes(&boxes, 3, 0).is_err());
        assert!(estimate_anchor_boxes(&boxes, 2, 0).is_ok());
    }

    #[test]
    fn augmentation_triples_the_set() {
        let imgs = vec![
            RgbImage::filled(8, 8, [40, 40, 40]),
            RgbImage::filled(8, 8, [120, 120, 120]),
            RgbImage::filled(8, 8, [220, 220, 220]),
        ];
        let out = lighting_augment(&imgs).unwrap();
        assert_eq!(out.images.len(), 9);
        assert!(out.zero_lightness.is_empty());
    }

    #[test]
    fn single_image_set_still_triples() {
        let imgs = vec![RgbImage::filled(8, 8, [100, 150, 200])];
        let out = lighting_augment(&imgs).unwrap();
        assert_eq!(out.images.len(), 3);
        // Degenerate histogram: all targets equal the image's own mean, so
        // the copies keep their mean lightness.
        let base_mean = rgb_to_hsl(&imgs[0]).mean_lightness();
        for img in &out.images {
            let m = rgb_to_hsl(img).mean_lightness();
            assert!((m - base_mean).abs() <= 1.0 / 255.0);
        }
    }

    #[test]
    fn rescaled_copies_hit_their_section_means() {
        let imgs = vec![
            RgbImage::filled(16, 16, [30, 30, 30]),
            RgbImage::filled(16, 16, [50, 50, 50]),
            RgbImage::filled(16, 16, [120, 120, 120]),
            RgbImage::filled(16, 16, [130, 130, 130]),
            RgbImage::filled(16, 16, [210, 210, 210]),
        ];
        let hsl_means: Vec<f32> = imgs.iter().map(|i| rgb_to_hsl(i).mean_lightness()).collect();
        let lo = hsl_means.iter().cloned().fold(f32::INFINITY, f32::min);
        let hi = hsl_means.iter().cloned().fold(f32::NEG_INFINITY, f32::max);
        let width = (hi - lo) / 3.0;
        let section = |m: f32| (((m - lo) / width) as usize).min(2);
        let mut sums = [0.0f32; 3];
        let mut counts = [0usize; 3];
        for &m in &hsl_means {
            sums[section(m)] += m;
            counts[section(m)] += 1;
        }
        let out = lighting_augment(&imgs).unwrap();
        for (i, _) in imgs.iter().enumerate() {
            let own = section(hsl_means[i]);
            let mut expect: Vec<f32> = (0..3)
                .filter(|&s| s != own)
                .map(|s| {
                    if counts[s] > 0 {
                        sums[s] / counts[s] as f32
                    } else {
                        lo + (s as f32 + 0.5) * width
                    }
                })
                .collect();
            for copy_idx in 0..2 {
                let img = &out.images[i * 3 + 1 + copy_idx];
                let m = rgb_to_hsl(img).mean_lightness();
                let target = expect.remove(0);
                assert!(
                    (m - target).abs() <= 2.0 / 255.0,
                    "image {i} copy {copy_idx}: mean {m} vs target {target}"
                );
            }
        }
    }

    #[test]
    fn zero_lightness_images_are_copied_with_warning() {
        let imgs = vec![
            RgbImage::filled(8, 8, [0, 0, 0]),
            RgbImage::filled(8, 8, [200, 200, 200]),
        ];
        let out = lighting_augment(&imgs).unwrap();
        assert_eq!(out.images.len(), 6);
        assert_eq!(out.zero_lightness, vec![0]);
        assert_eq!(out.images[1].data, out.images[0].data);
    }
}
