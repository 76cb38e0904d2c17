//! Serializable description of a full tracking run: pipeline parameters,
//! detector selection, seed, and output paths. Round-trips losslessly
//! through its JSON file representation.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::pipeline::PipelineConfig;
use crate::{io, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DetectorChoice {
    /// Replay the manifest's ROI annotations.
    Annotation,
    /// Luminance blob detection, for synthetic scenes.
    Blob {
        luminance_threshold: f32,
        min_area: usize,
        max_area: usize,
    },
}

impl Default for DetectorChoice {
    fn default() -> Self {
        DetectorChoice::Annotation
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RunConfig {
    #[serde(default)]
    pub pipeline: PipelineConfig,
    #[serde(default)]
    pub detector: DetectorChoice,
    /// Base seed for the robust fit; flag and environment overrides apply
    /// on top of this.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Report angles with the counterclockwise-on-screen direction positive.
    #[serde(default)]
    pub ccw_positive: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_history: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_summary: Option<PathBuf>,
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<RunConfig> {
        let path = path.as_ref();
        let text = io::read_to_string(path)?;
        serde_json::from_str(&text)
            .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("run config serializes");
        io::write_text_atomic(path, &text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_losslessly_through_json() {
        let cfg = RunConfig {
            pipeline: PipelineConfig {
                redetect_fraction: Some(0.5),
                periodic_redetect_every: Some(150),
                ..PipelineConfig::default()
            },
            detector: DetectorChoice::Blob {
                luminance_threshold: 0.4,
                min_area: 100,
                max_area: 50_000,
            },
            seed: Some(99),
            ccw_positive: true,
            out_history: Some(PathBuf::from("history.csv")),
            out_summary: None,
        };
        let text = serde_json::to_string_pretty(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn empty_object_uses_defaults() {
        let cfg: RunConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.pipeline.redetect_min_fp, 7);
        assert_eq!(cfg.pipeline.tracker.np, 3);
        assert_eq!(cfg.pipeline.tracker.bs, 5);
    }

    #[test]
    fn file_round_trip() {
        let dir = std::env::temp_dir().join("rtdt_bolt_runconfig");
        let path = dir.join("run.json");
        let cfg = RunConfig {
            seed: Some(5),
            ..RunConfig::default()
        };
        cfg.save(&path).unwrap();
        assert_eq!(RunConfig::load(&path).unwrap(), cfg);
        std::fs::remove_dir_all(&dir).ok();
    }
}
