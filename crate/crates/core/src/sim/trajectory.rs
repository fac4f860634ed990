use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geom::{so3_exp, Pose};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrajectoryKind {
    /// Constant orientation, centers on a straight line.
    #[default]
    LineLowParallax,
    /// Cameras on a horizontal circle around `target`, always facing it.
    Arc,
    /// Random rotations and translations per frame.
    HandheldAggressive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrajectoryParams {
    pub seed: u64,
    /// Distance between consecutive centers (line and handheld kinds).
    pub step: f64,
    pub direction: [f64; 3],
    pub start: [f64; 3],
    /// Point the arc circles around.
    pub target: [f64; 3],
    pub arc_radius: f64,
    pub arc_step_deg: f64,
    /// Largest per-frame rotation of the handheld kind (radians).
    pub max_rotation: f64,
}

impl Default for TrajectoryParams {
    fn default() -> Self {
        TrajectoryParams {
            seed: 0,
            step: 0.025,
            direction: [1.0, 0.0, 0.2],
            start: [-0.5, 0.0, 0.0],
            target: [0.0, 0.0, 4.0],
            arc_radius: 4.0,
            arc_step_deg: 2.0,
            max_rotation: 0.05,
        }
    }
}

/// World-from-camera poses (camera looks down its `+z`).
pub fn gen_trajectory(kind: TrajectoryKind, n_frames: usize, p: &TrajectoryParams) -> Vec<Pose> {
    let start = Vector3::from(p.start);
    match kind {
        TrajectoryKind::LineLowParallax => {
            let dir = Vector3::from(p.direction).normalize();
            (0..n_frames)
                .map(|i| Pose::from_translation(start + dir * (p.step * i as f64)))
                .collect()
        }
        TrajectoryKind::Arc => {
            let target = Vector3::from(p.target);
            (0..n_frames)
                .map(|i| {
                    let theta = (p.arc_step_deg * i as f64).to_radians();
                    // Yaw about +y; the camera sits at target − R·(0, 0, radius).
                    let rotation = so3_exp(&Vector3::new(0.0, theta, 0.0));
                    let center = target - rotation * Vector3::new(0.0, 0.0, p.arc_radius);
                    Pose::new(rotation, center)
                })
                .collect()
        }
        TrajectoryKind::HandheldAggressive => {
            let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
            let mut pose = Pose::from_translation(start);
            let mut out = Vec::with_capacity(n_frames);
            for i in 0..n_frames {
                if i > 0 {
                    let axis = Vector3::new(
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                    );
                    let angle = rng.random_range(0.0..=p.max_rotation);
                    let omega = if axis.norm() > 0.0 {
                        axis.normalize() * angle
                    } else {
                        Vector3::zeros()
                    };
                    let dir = Vector3::new(
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-0.3..0.3),
                    );
                    let t = if dir.norm() > 0.0 {
                        dir.normalize() * p.step
                    } else {
                        Vector3::zeros()
                    };
                    pose = Pose::new(so3_exp(&omega) * pose.rotation, pose.translation + t);
                }
                out.push(pose);
            }
            out
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_centers_are_collinear() {
        let poses = gen_trajectory(
            TrajectoryKind::LineLowParallax,
            30,
            &TrajectoryParams::default(),
        );
        let a = poses[0].translation;
        let d = (poses[29].translation - a).normalize();
        for p in &poses {
            assert!((p.translation - a).cross(&d).norm() < 1e-12);
        }
    }

    #[test]
    fn arc_closes() {
        let n = 36;
        let params = TrajectoryParams {
            arc_step_deg: 360.0 / n as f64,
            ..Default::default()
        };
        let poses = gen_trajectory(TrajectoryKind::Arc, n + 1, &params);
        assert!((poses[n].translation - poses[0].translation).norm() < 1e-9);
        assert!((poses[n].rotation - poses[0].rotation).norm() < 1e-9);
    }

    #[test]
    fn handheld_is_deterministic_and_bounded() {
        let p = TrajectoryParams::default();
        let a = gen_trajectory(TrajectoryKind::HandheldAggressive, 20, &p);
        assert_eq!(
            a,
            gen_trajectory(TrajectoryKind::HandheldAggressive, 20, &p)
        );
        for w in a.windows(2) {
            assert!(w[0].rotation_angle_to(&w[1]) <= p.max_rotation + 1e-12);
        }
    }
}
