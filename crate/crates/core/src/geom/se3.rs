use std::f64::consts::PI;

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3, Vector6};

/// Six-vector `(ω, v)` in the tangent space of SE(3).
pub type Twist = Vector6<f64>;

/// Rigid transform `x ↦ R x + t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl Default for Pose {
    fn default() -> Self {
        Self::identity()
    }
}

impl Pose {
    pub fn identity() -> Self {
        Pose {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Self {
        Pose {
            rotation,
            translation,
        }
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Pose::new(Matrix3::identity(), translation)
    }

    /// Builds a pose from a quaternion given as `(qx, qy, qz, qw)`; the quaternion is normalized.
    pub fn from_quaternion(t: Vector3<f64>, qx: f64, qy: f64, qz: f64, qw: f64) -> Self {
        let q = UnitQuaternion::from_quaternion(nalgebra::Quaternion::new(qw, qx, qy, qz));
        Pose::new(q.to_rotation_matrix().into_inner(), t)
    }

    /// Rotation as `(qx, qy, qz, qw)` with `qw >= 0`.
    pub fn quaternion(&self) -> [f64; 4] {
        let rot = Rotation3::from_matrix_unchecked(self.rotation);
        let q = UnitQuaternion::from_rotation_matrix(&rot);
        let (x, y, z, w) = (q.i, q.j, q.k, q.w);
        if w < 0.0 {
            [-x, -y, -z, -w]
        } else {
            [x, y, z, w]
        }
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    /// `self ∘ other`: apply `other` first.
    pub fn compose(&self, other: &Pose) -> Pose {
        Pose {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> Pose {
        let rt = self.rotation.transpose();
        Pose {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    pub fn exp(twist: &Twist) -> Pose {
        se3_exp(twist)
    }

    pub fn log(&self) -> Twist {
        se3_log(self)
    }

    /// Left perturbation `exp(δ) ∘ self`.
    pub fn perturbed(&self, delta: &Twist) -> Pose {
        se3_exp(delta).compose(self)
    }

    /// `‖RᵀR − I‖∞`, zero for an exact rotation.
    pub fn orthonormality_error(&self) -> f64 {
        (self.rotation.transpose() * self.rotation - Matrix3::identity())
            .abs()
            .max()
    }

    /// Rotation angle of `self⁻¹ ∘ other` in radians.
    pub fn rotation_angle_to(&self, other: &Pose) -> f64 {
        so3_log(&(self.rotation.transpose() * other.rotation)).norm()
    }

    /// 6×6 adjoint for `(ω, v)` ordering: `exp(Ad·ξ) = T exp(ξ) T⁻¹`.
    pub fn adjoint(&self) -> nalgebra::Matrix6<f64> {
        let mut ad = nalgebra::Matrix6::zeros();
        let r = self.rotation;
        let tr = skew(&self.translation) * r;
        ad.fixed_view_mut::<3, 3>(0, 0).copy_from(&r);
        ad.fixed_view_mut::<3, 3>(3, 3).copy_from(&r);
        ad.fixed_view_mut::<3, 3>(3, 0).copy_from(&tr);
        ad
    }
}

/// Similarity transform `x ↦ s R x + t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SimilarityTransform {
    pub scale: f64,
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl SimilarityTransform {
    pub fn identity() -> Self {
        SimilarityTransform {
            scale: 1.0,
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.scale * (self.rotation * p) + self.translation
    }

    pub fn inverse(&self) -> SimilarityTransform {
        let rt = self.rotation.transpose();
        SimilarityTransform {
            scale: 1.0 / self.scale,
            rotation: rt,
            translation: -(rt * self.translation) / self.scale,
        }
    }

    /// Rigid part, ignoring scale.
    pub fn rigid(&self) -> Pose {
        Pose::new(self.rotation, self.translation)
    }

    /// Applies the similarity to a world-from-camera pose: the camera center is
    /// mapped by the similarity and the orientation rotated.
    pub fn apply_to_pose(&self, pose: &Pose) -> Pose {
        Pose::new(self.rotation * pose.rotation, self.apply(&pose.translation))
    }
}

pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

fn vee(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(m[(2, 1)], m[(0, 2)], m[(1, 0)])
}

pub fn so3_exp(omega: &Vector3<f64>) -> Matrix3<f64> {
    let theta_sq = omega.norm_squared();
    let w = skew(omega);
    let (a, b) = if theta_sq < 1e-10 {
        (1.0 - theta_sq / 6.0, 0.5 - theta_sq / 24.0)
    } else {
        let theta = theta_sq.sqrt();
        (theta.sin() / theta, (1.0 - theta.cos()) / theta_sq)
    };
    Matrix3::identity() + w * a + w * w * b
}

/// Rotation vector of `r`. Angles at `π` resolve to the axis with non-negative
/// leading component.
pub fn so3_log(r: &Matrix3<f64>) -> Vector3<f64> {
    let cos_theta = ((r.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    let sin_vec = vee(&(r - r.transpose())) * 0.5;
    let sin_theta = sin_vec.norm();
    let theta = sin_theta.atan2(cos_theta);
    if theta < 1e-8 {
        return sin_vec;
    }
    if PI - theta > 1e-4 {
        return sin_vec * (theta / sin_theta);
    }
    // Near π the antisymmetric part vanishes; recover the axis from the symmetric part.
    let sym = (r + r.transpose()) * 0.5 - Matrix3::identity() * cos_theta;
    let denom = 1.0 - cos_theta;
    let diag = [sym[(0, 0)], sym[(1, 1)], sym[(2, 2)]];
    let k = (0..3)
        .max_by(|&i, &j| diag[i].total_cmp(&diag[j]))
        .unwrap_or(0);
    let mut axis = sym.column(k) / denom;
    axis /= axis.norm();
    if axis.dot(&sin_vec) < 0.0 {
        axis = -axis;
    }
    if sin_theta < 1e-12 {
        // exactly π: canonical branch
        let lead = axis
            .iter()
            .find(|c| c.abs() > 1e-12)
            .copied()
            .unwrap_or(1.0);
        if lead < 0.0 {
            axis = -axis;
        }
    }
    axis * theta
}

/// Left Jacobian `V` of SO(3), the map taking `v` to the translation of `exp(ω, v)`.
fn left_jacobian(omega: &Vector3<f64>) -> Matrix3<f64> {
    let theta_sq = omega.norm_squared();
    let w = skew(omega);
    let (b, c) = if theta_sq < 1e-10 {
        (0.5 - theta_sq / 24.0, 1.0 / 6.0 - theta_sq / 120.0)
    } else {
        let theta = theta_sq.sqrt();
        (
            (1.0 - theta.cos()) / theta_sq,
            (theta - theta.sin()) / (theta_sq * theta),
        )
    };
    Matrix3::identity() + w * b + w * w * c
}

fn left_jacobian_inverse(omega: &Vector3<f64>) -> Matrix3<f64> {
    let theta_sq = omega.norm_squared();
    let w = skew(omega);
    let d = if theta_sq < 1e-8 {
        1.0 / 12.0 + theta_sq / 720.0
    } else {
        let theta = theta_sq.sqrt();
        (1.0 - theta * theta.sin() / (2.0 * (1.0 - theta.cos()))) / theta_sq
    };
    Matrix3::identity() - w * 0.5 + w * w * d
}

pub fn se3_exp(twist: &Twist) -> Pose {
    let omega = Vector3::new(twist[0], twist[1], twist[2]);
    let v = Vector3::new(twist[3], twist[4], twist[5]);
    Pose {
        rotation: so3_exp(&omega),
        translation: left_jacobian(&omega) * v,
    }
}

pub fn se3_log(pose: &Pose) -> Twist {
    let omega = so3_log(&pose.rotation);
    let v = left_jacobian_inverse(&omega) * pose.translation;
    Twist::new(omega.x, omega.y, omega.z, v.x, v.y, v.z)
}
