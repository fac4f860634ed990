//! Synthetic desk-scale worlds: Gaussian scenes, camera trajectories,
//! ground-truth images and noisy, scale-ambiguous pairwise pointmap matches.
//!
//! Every generator is a pure function of its spec and seed. Per-pair streams
//! are seeded from the master seed and the two frame ids, so pairs can be
//! generated in any order or in parallel without changing results.

mod matches;
mod scene;
mod trajectory;

pub use matches::{gen_pair_matches, pair_seed, MatchTruth, NoiseModel, SimMatches};
pub use scene::{gen_scene, ColorScheme, Scene, SceneSpec};
pub use trajectory::{gen_trajectory, TrajectoryKind, TrajectoryParams};

use crate::geom::{CameraIntrinsics, Pose};
use crate::splat::{render, Image, RenderOptions};

/// Ground-truth color images for world-from-camera `poses`.
pub fn render_ground_truth(
    scene: &Scene,
    poses: &[Pose],
    k: &CameraIntrinsics,
    opts: &RenderOptions,
) -> Vec<Image> {
    poses
        .iter()
        .map(|p| render(&scene.map, &p.inverse(), k, opts).color)
        .collect()
}
