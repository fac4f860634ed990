//! Multi-view geometry primitives.
//!
//! Conventions used throughout the crate:
//! - A [`Pose`] maps points from a source frame into a target frame, `x_t = R x_s + t`.
//!   Trajectories store world-from-camera poses; rendering and projection take
//!   camera-from-world poses.
//! - Twists are ordered `(ω, v)`: rotation block first, translation block second.
//! - Cameras look down `+z` with `x` right and `y` down; pixel `(u, v)` addresses
//!   column `u`, row `v`, with integer coordinates at pixel centers.

mod camera;
mod procrustes;
mod robust;
mod se3;
mod trifocal;

pub use camera::{project, CameraIntrinsics, ProjectedPoint};
pub use procrustes::{
    procrustes_align, procrustes_align_trimmed, procrustes_objective, procrustes_trimmed_inliers,
    symmetric_scale,
};
pub use robust::{huber, huber_derivative, RobustKernel};
pub use se3::{se3_exp, se3_log, skew, so3_exp, so3_log, Pose, SimilarityTransform, Twist};
pub(crate) use trifocal::transfer_line_from_contraction;
pub use trifocal::{
    epipolar_transfer, incidence_residual, point_transfer_checked, transfer_line,
    trifocal_from_poses, trifocal_residual, HomogeneousPoint2, TrifocalTensor, MIN_BASELINE,
};

pub type Vec3 = nalgebra::Vector3<f64>;
pub type Vec2 = nalgebra::Vector2<f64>;
pub type Mat3 = nalgebra::Matrix3<f64>;
