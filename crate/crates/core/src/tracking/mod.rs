//! Per-frame pose estimation against a weighted sum of a photometric render
//! loss, a trifocal transfer loss and a 3D pointmap alignment loss.

mod dart;
mod geometric;
mod scale;

pub use dart::{dart_weight, DartConfig};
pub use geometric::{
    loss_2d, loss_3d, loss_3d_for_pose, residuals_2d, GeometricSettings, LossTerm, ResidualForm,
    TransferMode,
};
pub use scale::{
    constant_velocity, estimate_pair_scale, estimate_pair_scale_trimmed, initialize_pose,
    initialize_pose_or_extrapolate, PoseInitSource, TRIM_FACTOR,
};

use serde::{Deserialize, Serialize};

use crate::error::{Result, TvgError};
use crate::geom::{CameraIntrinsics, Pose, RobustKernel, Twist};
use crate::matching::TriViewMatch;
use crate::optim::Adam;
use crate::splat::{image_loss_with_grad, GaussianMap, Image, Rasterizer, RenderOptions};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrackerConfig {
    pub lambda_2d: f64,
    pub lambda_3d: f64,
    /// SSIM share of the photometric loss.
    pub gamma: f64,
    pub iterations: usize,
    pub lr_rotation: f64,
    pub lr_translation: f64,
    pub dart: DartConfig,
    /// Huber threshold of the 2D residual (normalized image units).
    pub huber_delta_2d: f64,
    /// Huber threshold of the 3D residual (scene units).
    pub huber_delta_3d: f64,
    pub kernel: RobustKernel,
    pub transfer_mode: TransferMode,
    pub residual_form: ResidualForm,
    pub use_photometric: bool,
    pub use_2d: bool,
    pub use_3d: bool,
    pub early_stop_tol: f64,
    pub early_stop_patience: usize,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            lambda_2d: 0.01,
            lambda_3d: 0.01,
            gamma: 0.2,
            iterations: 40,
            lr_rotation: 0.001,
            lr_translation: 0.002,
            dart: DartConfig::default(),
            huber_delta_2d: 1e-2,
            huber_delta_3d: 0.1,
            kernel: RobustKernel::Huber,
            transfer_mode: TransferMode::Checked,
            residual_form: ResidualForm::Cross,
            use_photometric: true,
            use_2d: true,
            use_3d: true,
            early_stop_tol: 1e-8,
            early_stop_patience: 5,
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(TvgError::Config(m.to_string()));
        if self.lambda_2d < 0.0 || self.lambda_3d < 0.0 {
            return bad("tracking weights must be non-negative");
        }
        if self.dart.w_min > self.dart.w_max {
            return bad("dart.w_min must not exceed dart.w_max");
        }
        if self.iterations == 0 {
            return bad("tracking iterations must be positive");
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return bad("gamma must lie in [0, 1]");
        }
        if self.huber_delta_2d <= 0.0 || self.huber_delta_3d <= 0.0 {
            return bad("huber thresholds must be positive");
        }
        Ok(())
    }

    pub fn geometric_2d(&self) -> GeometricSettings {
        GeometricSettings {
            mode: self.transfer_mode,
            form: self.residual_form,
            kernel: self.kernel,
            delta: self.huber_delta_2d,
        }
    }
}

/// Tracker state carried between frames.
#[derive(Clone, Debug, PartialEq)]
pub struct TrackerState {
    /// World-from-camera estimate of the frame being tracked.
    pub pose: Pose,
    /// Frames tracked since the map last received new primitives.
    pub frames_since_keyframe: u32,
    pub accumulated_scale: f64,
}

impl TrackerState {
    pub fn new(pose: Pose) -> Self {
        TrackerState {
            pose,
            frames_since_keyframe: 0,
            accumulated_scale: 1.0,
        }
    }
}

/// Loss breakdown of one optimizer iteration. Disabled or invalid terms are `None`.
#[derive(Clone, Debug, PartialEq)]
pub struct IterationRecord {
    pub l_photo: Option<f64>,
    pub l_2d: Option<f64>,
    pub l_3d: Option<f64>,
    pub lambda_p: f64,
    pub total: f64,
}

#[derive(Clone, Debug)]
pub struct TrackReport {
    pub frame: u32,
    pub iterations: Vec<IterationRecord>,
    pub initial_pose: Pose,
    /// World-from-camera result.
    pub pose: Pose,
    pub inliers: usize,
    pub outliers: usize,
    pub converged: bool,
    pub map_revision: u64,
    pub lambda_p: f64,
}

/// Everything `track_frame` reads for one frame.
pub struct FrameInputs<'a> {
    pub frame: u32,
    pub image: Option<&'a Image>,
    pub triplets: &'a [TriViewMatch],
    pub map: &'a GaussianMap,
    pub intrinsics: &'a CameraIntrinsics,
    pub render: &'a RenderOptions,
    /// World-from-camera pose of keyframe `k−1`.
    pub pose_prev_key: &'a Pose,
    /// World-from-camera pose of keyframe `k`.
    pub pose_key: &'a Pose,
    /// Relative scale applied to the current pair's points in the 3D term.
    pub pair_scale: f64,
}

struct Evaluation {
    record: IterationRecord,
    grad: Twist,
}

fn evaluate(
    inputs: &FrameInputs,
    cfg: &TrackerConfig,
    lambda_p: f64,
    camera_from_world: &Pose,
) -> Result<Evaluation> {
    let pose = camera_from_world.inverse();
    let mut grad = Twist::zeros();
    let mut total = 0.0;
    let mut l_photo = None;
    if cfg.use_photometric && !inputs.map.is_empty() {
        if let Some(image) = inputs.image {
            let r = Rasterizer::new(
                inputs.map,
                camera_from_world,
                inputs.intrinsics,
                inputs.render,
            );
            let view = r.render();
            let (loss, d) = image_loss_with_grad(image, &view.color, cfg.gamma)?;
            grad += r.backward(inputs.map, &d, false).pose * lambda_p;
            total += lambda_p * loss;
            l_photo = Some(loss);
        }
    }
    let mut l_2d = None;
    if cfg.use_2d {
        let t = loss_2d(
            inputs.triplets,
            inputs.pose_prev_key,
            inputs.pose_key,
            &pose,
            inputs.intrinsics,
            &cfg.geometric_2d(),
        );
        if t.is_valid() {
            grad += t.grad * cfg.lambda_2d;
            total += cfg.lambda_2d * t.value;
            l_2d = Some(t.value);
        }
    }
    let mut l_3d = None;
    if cfg.use_3d && inputs.pair_scale > 0.0 {
        let t = loss_3d_for_pose(
            inputs.triplets,
            inputs.pair_scale,
            inputs.pose_key,
            &pose,
            cfg.kernel,
            cfg.huber_delta_3d,
        );
        if t.is_valid() {
            grad += t.grad * cfg.lambda_3d;
            total += cfg.lambda_3d * t.value;
            l_3d = Some(t.value);
        }
    }
    Ok(Evaluation {
        record: IterationRecord {
            l_photo,
            l_2d,
            l_3d,
            lambda_p,
            total,
        },
        grad,
    })
}

/// Optimizes the current pose starting from `state.pose`.
///
/// Runs up to `cfg.iterations` Adam steps on a left twist of the
/// camera-from-world pose and returns the iterate with the lowest objective
/// (the start pose included). On success `state.pose` is updated and the
/// staleness counter advanced.
pub fn track_frame(
    inputs: &FrameInputs,
    state: &mut TrackerState,
    cfg: &TrackerConfig,
) -> Result<TrackReport> {
    let lambda_p = dart_weight(state.frames_since_keyframe, &cfg.dart);
    let mut cw = state.pose.inverse();
    let first = evaluate(inputs, cfg, lambda_p, &cw)?;
    let r = &first.record;
    if r.l_photo.is_none() && r.l_2d.is_none() && r.l_3d.is_none() {
        return Err(TvgError::TrackingFailure {
            frame: inputs.frame,
            reason: "no loss term has a usable constraint".into(),
        });
    }
    let lr: Vec<f64> = [cfg.lr_rotation; 3]
        .into_iter()
        .chain([cfg.lr_translation; 3])
        .collect();
    let mut adam = Adam::new(6);
    let mut best = (first.record.total, cw);
    let mut records = Vec::with_capacity(cfg.iterations);
    let mut current = first;
    let mut calm = 0;
    let mut converged = false;
    for i in 0..cfg.iterations {
        if i > 0 {
            current = evaluate(inputs, cfg, lambda_p, &cw)?;
            if current.record.total < best.0 {
                best = (current.record.total, cw);
            }
            let prev = records
                .last()
                .map(|r: &IterationRecord| r.total)
                .unwrap_or(f64::NAN);
            let now = current.record.total;
            if (now - prev).abs() <= cfg.early_stop_tol * now.abs().max(prev.abs()) {
                calm += 1;
            } else {
                calm = 0;
            }
        }
        let grad = current.grad;
        records.push(current.record.clone());
        if calm >= cfg.early_stop_patience {
            converged = true;
            break;
        }
        let step = adam.step(grad.as_slice(), &lr);
        cw = cw.perturbed(&Twist::from_column_slice(&step));
    }
    if !converged {
        let last = evaluate(inputs, cfg, lambda_p, &cw)?;
        if last.record.total < best.0 {
            best = (last.record.total, cw);
        }
    }
    let pose = best.1.inverse();
    let (inliers, outliers) = classify(inputs, cfg, &pose);
    let report = TrackReport {
        frame: inputs.frame,
        iterations: records,
        initial_pose: state.pose,
        pose,
        inliers,
        outliers,
        converged,
        map_revision: inputs.map.revision,
        lambda_p,
    };
    state.pose = pose;
    state.frames_since_keyframe += 1;
    Ok(report)
}

fn classify(inputs: &FrameInputs, cfg: &TrackerConfig, pose: &Pose) -> (usize, usize) {
    let residuals = residuals_2d(
        inputs.triplets,
        inputs.pose_prev_key,
        inputs.pose_key,
        pose,
        inputs.intrinsics,
        &cfg.geometric_2d(),
    );
    let usable: Vec<f64> = residuals.into_iter().flatten().collect();
    let inliers = usable
        .iter()
        .filter(|r| r.sqrt() <= cfg.huber_delta_2d)
        .count();
    (inliers, usable.len() - inliers)
}
