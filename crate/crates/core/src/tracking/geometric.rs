//! Trifocal transfer and 3D alignment losses with analytic pose gradients.
//!
//! Views are ordered as previous keyframe (1), bridge keyframe (2) and current
//! frame (3). Image points are taken to normalized camera coordinates, and the
//! 2D residual compares unit-normalized 3-vectors so that it does not depend on
//! the arbitrary scale of the transferred point.

use std::ops::AddAssign;

use nalgebra::{Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::geom::{
    transfer_line_from_contraction, CameraIntrinsics, HomogeneousPoint2, Pose, RobustKernel, Twist,
    MIN_BASELINE,
};
use crate::matching::TriViewMatch;

/// How the current-view quantity compared against `p_t` is obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransferMode {
    /// Point transfer through the line in view 2 perpendicular to the epipolar line.
    Checked,
    /// `(Σ p₁ⁱ Tᵢ) p₂` taken literally.
    Literal,
}

/// Residual between `p_t` and the transferred 3-vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidualForm {
    /// `‖p × x‖²`.
    Cross,
    /// `(p · x)²`.
    Incidence,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeometricSettings {
    pub mode: TransferMode,
    pub form: ResidualForm,
    pub kernel: RobustKernel,
    pub delta: f64,
}

/// Value and gradient of one loss term. `terms == 0` means the term had no
/// usable constraint.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LossTerm {
    pub value: f64,
    pub grad: Twist,
    pub terms: usize,
    pub inliers: usize,
    pub skipped: usize,
}

impl LossTerm {
    pub fn is_valid(&self) -> bool {
        self.terms > 0
    }
}

fn residual_and_grad(
    p: &Vector3<f64>,
    x: &Vector3<f64>,
    form: ResidualForm,
) -> Option<(f64, Vector3<f64>)> {
    let nx = x.norm();
    let np = p.norm();
    if !(nx > 0.0 && np > 0.0) {
        return None;
    }
    let u = x / nx;
    let ph = p / np;
    let (r, d_u) = match form {
        ResidualForm::Cross => {
            let c = ph.cross(&u);
            (c.norm_squared(), 2.0 * c.cross(&ph))
        }
        ResidualForm::Incidence => {
            let d = ph.dot(&u);
            (d * d, 2.0 * d * ph)
        }
    };
    // Through the normalization u = x / ‖x‖.
    let d_x = (d_u - u * u.dot(&d_u)) / nx;
    Some((r, d_x))
}

struct Views {
    a: Matrix3<f64>,
    a4: Vector3<f64>,
    b: Matrix3<f64>,
    b4: Vector3<f64>,
}

/// Cameras of views 2 and 3 relative to view 1, or `None` when a baseline is too short.
fn relative_views(pose_prev: &Pose, pose_key: &Pose, pose_cur: &Pose) -> Option<Views> {
    let p2 = pose_key.inverse().compose(pose_prev);
    let p3 = pose_cur.inverse().compose(pose_prev);
    let b2 = (pose_key.translation - pose_prev.translation).norm();
    let b3 = (pose_cur.translation - pose_prev.translation).norm();
    if b2 <= MIN_BASELINE || b3 <= MIN_BASELINE {
        return None;
    }
    Some(Views {
        a: p2.rotation,
        a4: p2.translation,
        b: p3.rotation,
        b4: p3.translation,
    })
}

fn normalized(k: &CameraIntrinsics, p: &Vector2<f64>) -> Vector3<f64> {
    k.normalize(p)
}

/// Squared residual of one triplet and its gradient with respect to a left
/// twist on the current camera-from-world pose.
fn triplet_residual(
    views: &Views,
    p1: &Vector3<f64>,
    p2: &Vector3<f64>,
    pt: &Vector3<f64>,
    s: &GeometricSettings,
) -> Option<(f64, Twist)> {
    let ax = views.a * p1;
    let bx = views.b * p1;
    let mut g = Twist::zeros();
    match s.mode {
        TransferMode::Checked => {
            let m = ax * views.b4.transpose() - views.a4 * bx.transpose();
            let line = transfer_line_from_contraction(&m, &HomogeneousPoint2(*p2)).ok()?;
            let alpha = ax.dot(&line);
            let beta = views.a4.dot(&line);
            let x = views.b4 * alpha - bx * beta;
            let (r, dx) = residual_and_grad(pt, &x, s.form)?;
            g.fixed_rows_mut::<3>(0)
                .copy_from(&(alpha * views.b4.cross(&dx) - beta * bx.cross(&dx)));
            g.fixed_rows_mut::<3>(3).copy_from(&(alpha * dx));
            Some((r, g))
        }
        TransferMode::Literal => {
            let l = ax * views.b4.dot(p2) - views.a4 * bx.dot(p2);
            let (r, dl) = residual_and_grad(pt, &l, s.form)?;
            let (ga, ge) = (ax.dot(&dl), views.a4.dot(&dl));
            g.fixed_rows_mut::<3>(0)
                .copy_from(&(views.b4.cross(p2) * ga - bx.cross(p2) * ge));
            g.fixed_rows_mut::<3>(3).copy_from(&(p2 * ga));
            Some((r, g))
        }
    }
}

/// Robust sum of trifocal residuals over the triplets. Poses are
/// world-from-camera; the gradient is with respect to a left twist on the
/// current camera-from-world pose.
pub fn loss_2d(
    triplets: &[TriViewMatch],
    pose_prev: &Pose,
    pose_key: &Pose,
    pose_cur: &Pose,
    k: &CameraIntrinsics,
    settings: &GeometricSettings,
) -> LossTerm {
    let mut out = LossTerm::default();
    let Some(views) = relative_views(pose_prev, pose_key, pose_cur) else {
        out.skipped = triplets.len();
        return out;
    };
    for t in triplets {
        let p1 = normalized(k, &t.p_prev);
        let p2 = normalized(k, &t.p_key);
        let pt = normalized(k, &t.p_cur);
        match triplet_residual(&views, &p1, &p2, &pt, settings) {
            Some((r, g)) => {
                let (rho, d_rho) = settings.kernel.eval(r, settings.delta);
                out.value += rho;
                out.grad += g * d_rho;
                out.terms += 1;
                if r.sqrt() <= settings.delta {
                    out.inliers += 1;
                }
            }
            None => out.skipped += 1,
        }
    }
    out
}

/// Per-triplet squared 2D residuals (`None` where the transfer is degenerate).
pub fn residuals_2d(
    triplets: &[TriViewMatch],
    pose_prev: &Pose,
    pose_key: &Pose,
    pose_cur: &Pose,
    k: &CameraIntrinsics,
    settings: &GeometricSettings,
) -> Vec<Option<f64>> {
    let Some(views) = relative_views(pose_prev, pose_key, pose_cur) else {
        return vec![None; triplets.len()];
    };
    triplets
        .iter()
        .map(|t| {
            let (p1, p2, pt) = (
                normalized(k, &t.p_prev),
                normalized(k, &t.p_key),
                normalized(k, &t.p_cur),
            );
            triplet_residual(&views, &p1, &p2, &pt, settings).map(|(r, _)| r)
        })
        .collect()
}

/// `Σ ρ(‖T(s·P_c) − P_p‖²)` with `P_c` in current-frame and `P_p` in
/// keyframe coordinates. The gradient is with respect to a left twist on
/// `cur_to_key`.
pub fn loss_3d(
    triplets: &[TriViewMatch],
    s: f64,
    cur_to_key: &Pose,
    kernel: RobustKernel,
    delta: f64,
) -> LossTerm {
    let mut out = LossTerm::default();
    for t in triplets {
        let y = cur_to_key.transform_point(&(t.point_from_cur_pair * s));
        let e = y - t.point_from_prev_pair;
        let r = e.norm_squared();
        let (rho, d_rho) = kernel.eval(r, delta);
        let g_y = e * (2.0 * d_rho);
        out.value += rho;
        out.grad.fixed_rows_mut::<3>(0).add_assign(&y.cross(&g_y));
        out.grad.fixed_rows_mut::<3>(3).add_assign(&g_y);
        out.terms += 1;
        if r.sqrt() <= delta {
            out.inliers += 1;
        }
    }
    out
}

/// [`loss_3d`] expressed through world-from-camera poses of the keyframe and
/// current frame, with the gradient taken on the current camera-from-world pose.
pub fn loss_3d_for_pose(
    triplets: &[TriViewMatch],
    s: f64,
    pose_key: &Pose,
    pose_cur: &Pose,
    kernel: RobustKernel,
    delta: f64,
) -> LossTerm {
    let t = pose_key.inverse().compose(pose_cur);
    let mut out = loss_3d(triplets, s, &t, kernel, delta);
    // cur_to_key = key_cw ∘ cur_cw⁻¹, so a left twist δ on cur_cw acts as −Ad_T δ on it.
    out.grad = -(t.adjoint().transpose() * out.grad);
    out
}
