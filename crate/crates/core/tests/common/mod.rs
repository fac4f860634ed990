#![allow(dead_code)]

use nalgebra::{Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tvg_core::geom::{CameraIntrinsics, Pose, Twist};
use tvg_core::matching::TriViewMatch;
use tvg_core::pipeline::{MappingMode, RunConfig};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_pose(rng: &mut ChaCha8Rng, rot: f64, trans: f64) -> Pose {
    Pose::exp(&Twist::new(
        rng.random_range(-rot..rot),
        rng.random_range(-rot..rot),
        rng.random_range(-rot..rot),
        rng.random_range(-trans..trans),
        rng.random_range(-trans..trans),
        rng.random_range(-trans..trans),
    ))
}

pub fn small_camera() -> CameraIntrinsics {
    CameraIntrinsics::new(60.0, 60.0, 32.0, 24.0, 64, 48).unwrap()
}

/// A short, cheap noiseless run.
pub fn small_config(frames: usize) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.run.frames = frames;
    cfg.camera = small_camera();
    cfg.scene.count = 300;
    cfg
}

pub fn deferred(mut cfg: RunConfig, batch: usize) -> RunConfig {
    cfg.run.mapping_mode = MappingMode::Deferred;
    cfg.run.defer_batch = batch;
    cfg
}

/// World-from-camera poses of three views that all look at the box
/// `[-1, 1]² × [3, 5]` and the exact triplets of `n` points inside it.
/// Pointmaps are exact and share the world scale.
pub fn exact_triplets(
    rng: &mut ChaCha8Rng,
    k: &CameraIntrinsics,
    n: usize,
) -> ([Pose; 3], Vec<TriViewMatch>) {
    loop {
        let poses = [
            random_pose(rng, 0.05, 0.3),
            random_pose(rng, 0.05, 0.3),
            random_pose(rng, 0.05, 0.3),
        ];
        let mut out = Vec::new();
        let mut tries = 0;
        while out.len() < n && tries < 50 * n {
            tries += 1;
            let w = Vector3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(3.0..5.0),
            );
            let cams: Vec<Vector3<f64>> = poses
                .iter()
                .map(|p| p.inverse().transform_point(&w))
                .collect();
            let px: Vec<Vector2<f64>> = cams
                .iter()
                .map(|c| Vector2::new(k.fx * c.x / c.z + k.cx, k.fy * c.y / c.z + k.cy))
                .collect();
            if !px.iter().all(|p| k.contains(p)) {
                continue;
            }
            out.push(TriViewMatch {
                p_prev: px[0],
                p_key: px[1],
                p_cur: px[2],
                point_from_prev_pair: cams[1],
                point_from_cur_pair: cams[2],
                key_point_from_cur_pair: cams[1],
                confidence: 1.0,
            });
        }
        if out.len() == n {
            return (poses, out);
        }
    }
}
