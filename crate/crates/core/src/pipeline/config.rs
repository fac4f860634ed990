//! Run configuration, stored as TOML with one table per subsystem.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Result, TvgError};
use crate::geom::CameraIntrinsics;
use crate::mapping::MappingConfig;
use crate::matching::ParallaxFilter;
use crate::sim::{NoiseModel, SceneSpec, TrajectoryKind, TrajectoryParams};
use crate::splat::RenderOptions;
use crate::tracking::TrackerConfig;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputSource {
    /// Generate scene, images and matches in memory.
    #[default]
    Simulate,
    /// Read a directory written by `tvg simulate` (or laid out the same way).
    Dataset,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MappingMode {
    /// Insert and refine as soon as a keyframe is declared.
    #[default]
    Synchronous,
    /// Queue insertions and refine once every `defer_batch` frames.
    Deferred,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub source: InputSource,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset_dir: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    pub frames: usize,
    /// Master seed for per-pair match streams and the mapper's window sampling.
    pub seed: u64,
    pub mapping_mode: MappingMode,
    pub defer_batch: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            source: InputSource::Simulate,
            dataset_dir: None,
            output_dir: None,
            frames: 60,
            seed: 0,
            mapping_mode: MappingMode::Synchronous,
            defer_batch: 8,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrajectorySection {
    pub kind: TrajectoryKind,
    pub params: TrajectoryParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MatchingSection {
    /// Largest frame-`k` pixel distance at which two records are joined.
    pub join_tol: f64,
    pub filter: ParallaxFilter,
}

impl Default for MatchingSection {
    fn default() -> Self {
        MatchingSection {
            join_tol: 1.0,
            filter: ParallaxFilter::default(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Ablation {
    pub disable_l2d: bool,
    pub disable_l3d: bool,
    /// Holds the photometric weight at `w_max`.
    pub disable_dart: bool,
    /// Seeds primitives with the fixed plain scale and opacity.
    pub disable_tugi: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub run: RunSection,
    pub camera: CameraIntrinsics,
    pub scene: SceneSpec,
    pub trajectory: TrajectorySection,
    pub noise: NoiseModel,
    pub matching: MatchingSection,
    pub tracker: TrackerConfig,
    pub mapping: MappingConfig,
    pub render: RenderOptions,
    pub ablation: Ablation,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.camera.validate()?;
        self.tracker.validate()?;
        self.noise.validate()?;
        self.scene.validate()?;
        if self.run.frames < 2 {
            return Err(TvgError::Config("run.frames must be at least 2".into()));
        }
        if self.run.defer_batch == 0 {
            return Err(TvgError::Config("run.defer_batch must be positive".into()));
        }
        if !(self.matching.join_tol > 0.0) {
            return Err(TvgError::Config(
                "matching.join_tol must be positive".into(),
            ));
        }
        if self.run.source == InputSource::Dataset {
            match &self.run.dataset_dir {
                Some(d) if d.is_dir() => {}
                Some(d) => {
                    return Err(TvgError::Config(format!(
                        "dataset directory {} does not exist",
                        d.display()
                    )))
                }
                None => {
                    return Err(TvgError::Config(
                        "run.dataset_dir is required for the dataset source".into(),
                    ))
                }
            }
        }
        Ok(())
    }

    /// Tracker settings with the ablation toggles applied.
    pub fn effective_tracker(&self) -> TrackerConfig {
        let mut t = self.tracker.clone();
        t.use_2d &= !self.ablation.disable_l2d;
        t.use_3d &= !self.ablation.disable_l3d;
        t.dart.enabled &= !self.ablation.disable_dart;
        t
    }

    pub fn effective_mapping(&self) -> MappingConfig {
        let mut m = self.mapping.clone();
        m.use_tugi &= !self.ablation.disable_tugi;
        m
    }
}

pub fn config_string(cfg: &RunConfig) -> Result<String> {
    toml::to_string(cfg).map_err(|e| TvgError::Config(e.to_string()))
}

/// Parses TOML text. Errors carry the 1-based line of the offending key.
pub fn parse_config(text: &str, path: &Path) -> Result<RunConfig> {
    toml::from_str(text).map_err(|e| {
        let line = e
            .span()
            .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
            .unwrap_or(0);
        TvgError::parse(path, line, e.message().trim().to_string())
    })
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| TvgError::io(path, e))?;
    parse_config(&text, path)
}

pub fn save_config(cfg: &RunConfig, path: &Path) -> Result<()> {
    super::io::write_atomic(path, config_string(cfg)?.as_bytes())
}
