//! Where frames and pairwise matches come from: the in-memory simulator or a
//! dataset directory.
//!
//! Dataset layout (as written by [`write_dataset`]):
//!
//! ```text
//! manifest.toml          frame count, camera, seeds, artifact list
//! groundtruth.tum        optional, enables evaluation
//! gt_map.ply             optional
//! images/000000.tvgf     float images (PNG copies alongside for viewing)
//! matches/000000_000001.tvgm
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::tum::{read_tum, write_tum, Trajectory};
use crate::error::{Result, TvgError};
use crate::geom::{CameraIntrinsics, Pose};
use crate::matching::{load_matches, save_matches, PairwiseMatchSet};
use crate::sim::{
    gen_pair_matches, gen_scene, gen_trajectory, pair_seed, render_ground_truth, NoiseModel, Scene,
};
use crate::splat::{write_ply, Image};

pub trait FrameSource {
    fn frame_count(&self) -> usize;
    fn intrinsics(&self) -> CameraIntrinsics;
    fn timestamp(&self, frame: usize) -> f64;
    fn image(&self, frame: usize) -> Result<Image>;
    /// Matches between frames `a < b`.
    fn matches(&self, a: u32, b: u32) -> Result<PairwiseMatchSet>;
    fn ground_truth(&self) -> Option<&[Pose]>;
}

pub struct SimSource {
    pub scene: Scene,
    pub poses: Vec<Pose>,
    pub images: Vec<Image>,
    pub intrinsics: CameraIntrinsics,
    pub noise: NoiseModel,
    pub seed: u64,
}

impl SimSource {
    pub fn new(cfg: &RunConfig) -> Self {
        let scene = gen_scene(&cfg.scene);
        let poses = gen_trajectory(cfg.trajectory.kind, cfg.run.frames, &cfg.trajectory.params);
        let images = render_ground_truth(&scene, &poses, &cfg.camera, &cfg.render);
        SimSource {
            scene,
            poses,
            images,
            intrinsics: cfg.camera,
            noise: cfg.noise.clone(),
            seed: cfg.run.seed,
        }
    }

    pub fn pair(&self, a: u32, b: u32) -> crate::sim::SimMatches {
        gen_pair_matches(
            &self.scene,
            a,
            b,
            &self.poses[a as usize],
            &self.poses[b as usize],
            &self.intrinsics,
            &self.noise,
            pair_seed(self.seed, a, b),
        )
    }
}

impl FrameSource for SimSource {
    fn frame_count(&self) -> usize {
        self.poses.len()
    }

    fn intrinsics(&self) -> CameraIntrinsics {
        self.intrinsics
    }

    fn timestamp(&self, frame: usize) -> f64 {
        frame as f64
    }

    fn image(&self, frame: usize) -> Result<Image> {
        Ok(self.images[frame].clone())
    }

    fn matches(&self, a: u32, b: u32) -> Result<PairwiseMatchSet> {
        if a.max(b) as usize >= self.poses.len() {
            return Err(TvgError::Config(format!(
                "frame pair ({a}, {b}) outside the sequence"
            )));
        }
        Ok(self.pair(a, b).set)
    }

    fn ground_truth(&self) -> Option<&[Pose]> {
        Some(&self.poses)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub frames: usize,
    pub camera: CameraIntrinsics,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub scene_seed: u64,
    #[serde(default)]
    pub trajectory_seed: u64,
    /// Largest `b − a` for which a match file exists.
    #[serde(default)]
    pub max_pair_gap: u32,
    #[serde(default)]
    pub artifacts: Vec<String>,
}

pub fn image_file(frame: usize) -> String {
    format!("images/{frame:06}.tvgf")
}

pub fn match_file(a: u32, b: u32) -> String {
    format!("matches/{a:06}_{b:06}.tvgm")
}

pub struct DatasetSource {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub ground_truth: Option<Trajectory>,
}

impl DatasetSource {
    pub fn open(dir: &Path) -> Result<Self> {
        let path = dir.join("manifest.toml");
        let text = std::fs::read_to_string(&path).map_err(|e| TvgError::io(&path, e))?;
        let manifest: Manifest = toml::from_str(&text)
            .map_err(|e| TvgError::parse(&path, 0, e.message().to_string()))?;
        manifest.camera.validate()?;
        let gt_path = dir.join("groundtruth.tum");
        let ground_truth = if gt_path.exists() {
            let t = read_tum(&gt_path)?;
            if t.len() != manifest.frames {
                return Err(TvgError::DimensionMismatch(format!(
                    "ground truth has {} poses for {} frames",
                    t.len(),
                    manifest.frames
                )));
            }
            Some(t)
        } else {
            None
        };
        Ok(DatasetSource {
            dir: dir.to_path_buf(),
            manifest,
            ground_truth,
        })
    }
}

impl FrameSource for DatasetSource {
    fn frame_count(&self) -> usize {
        self.manifest.frames
    }

    fn intrinsics(&self) -> CameraIntrinsics {
        self.manifest.camera
    }

    fn timestamp(&self, frame: usize) -> f64 {
        self.ground_truth
            .as_ref()
            .map(|t| t.timestamps[frame])
            .unwrap_or(frame as f64)
    }

    fn image(&self, frame: usize) -> Result<Image> {
        Image::read_tvgf(&self.dir.join(image_file(frame)))
    }

    fn matches(&self, a: u32, b: u32) -> Result<PairwiseMatchSet> {
        load_matches(&self.dir.join(match_file(a, b)))
    }

    fn ground_truth(&self) -> Option<&[Pose]> {
        self.ground_truth.as_ref().map(|t| t.poses.as_slice())
    }
}

/// Writes a complete synthetic dataset for `cfg` into `out`. Match files are
/// written for every pair up to the keyframe policy's largest gap.
pub fn write_dataset(cfg: &RunConfig, out: &Path) -> Result<Manifest> {
    cfg.validate()?;
    let src = SimSource::new(cfg);
    let mut artifacts = Vec::new();
    let traj = Trajectory {
        timestamps: (0..src.frame_count()).map(|t| t as f64).collect(),
        poses: src.poses.clone(),
    };
    write_tum(&out.join("groundtruth.tum"), &traj)?;
    artifacts.push("groundtruth.tum".to_string());
    write_ply(&out.join("gt_map.ply"), &src.scene.map)?;
    artifacts.push("gt_map.ply".to_string());
    for (t, img) in src.images.iter().enumerate() {
        let name = image_file(t);
        img.write_tvgf(&out.join(&name))?;
        let png = name.replace(".tvgf", ".png");
        img.write_png(&out.join(&png))?;
        artifacts.push(name);
        artifacts.push(png);
    }
    let gap = cfg.mapping.keyframes.max_gap.max(1);
    let n = src.frame_count() as u32;
    for a in 0..n {
        for b in a + 1..n.min(a + gap + 1) {
            let name = match_file(a, b);
            save_matches(&src.pair(a, b).set, &out.join(&name))?;
            artifacts.push(name);
        }
    }
    let manifest = Manifest {
        frames: src.frame_count(),
        camera: cfg.camera,
        master_seed: cfg.run.seed,
        scene_seed: cfg.scene.seed,
        trajectory_seed: cfg.trajectory.params.seed,
        max_pair_gap: gap,
        artifacts,
    };
    let text = toml::to_string(&manifest).map_err(|e| TvgError::Config(e.to_string()))?;
    super::io::write_atomic(&out.join("manifest.toml"), text.as_bytes())?;
    Ok(manifest)
}
