//! Anisotropic 3-D Gaussian primitives and the map that holds them.

use nalgebra::{Matrix3, Vector3};

/// One Gaussian. `rotation` is a quaternion `(w, x, y, z)`; it is normalized on use.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianPrimitive {
    pub mean: Vector3<f64>,
    /// Per-axis standard deviations (world units).
    pub scale: Vector3<f64>,
    pub rotation: [f64; 4],
    pub color: Vector3<f64>,
    pub opacity_logit: f64,
}

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

pub fn normalized_quaternion(q: &[f64; 4]) -> [f64; 4] {
    let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
    if n == 0.0 {
        return [1.0, 0.0, 0.0, 0.0];
    }
    [q[0] / n, q[1] / n, q[2] / n, q[3] / n]
}

/// Rotation matrix of a unit quaternion `(w, x, y, z)`.
pub fn quaternion_matrix(q: &[f64; 4]) -> Matrix3<f64> {
    let [w, x, y, z] = *q;
    Matrix3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        1.0 - 2.0 * (x * x + y * y),
    )
}

/// Partial derivatives of [`quaternion_matrix`] with respect to `w, x, y, z`.
pub fn quaternion_matrix_partials(q: &[f64; 4]) -> [Matrix3<f64>; 4] {
    let [w, x, y, z] = *q;
    [
        Matrix3::new(0.0, -z, y, z, 0.0, -x, -y, x, 0.0) * 2.0,
        Matrix3::new(0.0, y, z, y, -2.0 * x, -w, z, w, -2.0 * x) * 2.0,
        Matrix3::new(-2.0 * y, x, w, x, 0.0, z, -w, z, -2.0 * y) * 2.0,
        Matrix3::new(-2.0 * z, -w, x, w, -2.0 * z, y, x, y, 0.0) * 2.0,
    ]
}

impl GaussianPrimitive {
    pub fn isotropic(mean: Vector3<f64>, scale: f64, color: Vector3<f64>, opacity: f64) -> Self {
        GaussianPrimitive {
            mean,
            scale: Vector3::repeat(scale),
            rotation: [1.0, 0.0, 0.0, 0.0],
            color,
            opacity_logit: logit(opacity.clamp(1e-4, 1.0 - 1e-4)),
        }
    }

    pub fn opacity(&self) -> f64 {
        sigmoid(self.opacity_logit)
    }

    /// Rotation matrix `R_q` of the normalized quaternion.
    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        quaternion_matrix(&normalized_quaternion(&self.rotation))
    }

    /// World covariance `Σ = R_qᵀ S² R_q`.
    pub fn covariance(&self) -> Matrix3<f64> {
        let r = self.rotation_matrix();
        let s2 = Matrix3::from_diagonal(&self.scale.component_mul(&self.scale));
        r.transpose() * s2 * r
    }

    pub fn max_scale(&self) -> f64 {
        self.scale.max()
    }

    pub fn is_finite(&self) -> bool {
        self.mean
            .iter()
            .chain(self.scale.iter())
            .chain(self.color.iter())
            .all(|v| v.is_finite())
            && self.rotation.iter().all(|v| v.is_finite())
            && self.opacity_logit.is_finite()
    }
}

/// Ordered primitive set. `revision` increases on every mutation so that
/// readers can tell which snapshot they worked against.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GaussianMap {
    pub primitives: Vec<GaussianPrimitive>,
    pub revision: u64,
}

impl GaussianMap {
    pub fn new(primitives: Vec<GaussianPrimitive>) -> Self {
        GaussianMap {
            primitives,
            revision: 0,
        }
    }

    pub fn len(&self) -> usize {
        self.primitives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.primitives.is_empty()
    }

    pub fn push(&mut self, p: GaussianPrimitive) {
        self.primitives.push(p);
        self.revision += 1;
    }

    pub fn extend(&mut self, ps: impl IntoIterator<Item = GaussianPrimitive>) {
        self.primitives.extend(ps);
        self.revision += 1;
    }

    /// Marks an in-place parameter update.
    pub fn touch(&mut self) {
        self.revision += 1;
    }
}
