//! Trifocal tensor of three calibrated views, in normalized image coordinates.
//!
//! View 1 is canonical, `P1 = [I | 0]`; views 2 and 3 are `[A | a4]` and `[B | b4]`,
//! i.e. the camera-from-view-1 poses. Slices follow `Tᵢ = aᵢ b4ᵀ − a4 bᵢᵀ`, with
//! row index belonging to view 2 and column index to view 3.

use nalgebra::{Matrix3, Vector3};

use super::Pose;
use crate::error::{Result, TvgError};

/// Both baselines (view 1 to view 2, view 1 to view 3) must exceed this, in scene units.
pub const MIN_BASELINE: f64 = 1e-6;

const TRANSFER_EPS: f64 = 1e-12;

/// Homogeneous 2D point or line; equality is projective.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HomogeneousPoint2(pub Vector3<f64>);

impl HomogeneousPoint2 {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        HomogeneousPoint2(Vector3::new(x, y, z))
    }

    pub fn vector(&self) -> &Vector3<f64> {
        &self.0
    }

    pub fn scaled(&self, s: f64) -> Self {
        HomogeneousPoint2(self.0 * s)
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|c| *c == 0.0)
    }

    /// Sine of the angle between the two rays, `0` when projectively equal.
    pub fn projective_distance(&self, other: &HomogeneousPoint2) -> f64 {
        self.0.cross(&other.0).norm() / (self.0.norm() * other.0.norm())
    }
}

impl From<Vector3<f64>> for HomogeneousPoint2 {
    fn from(v: Vector3<f64>) -> Self {
        HomogeneousPoint2(v)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrifocalTensor {
    pub slices: [Matrix3<f64>; 3],
}

impl TrifocalTensor {
    pub fn zeros() -> Self {
        TrifocalTensor {
            slices: [Matrix3::zeros(); 3],
        }
    }

    pub fn scaled(&self, s: f64) -> Self {
        TrifocalTensor {
            slices: self.slices.map(|m| m * s),
        }
    }

    /// `Σᵢ p1ⁱ Tᵢ`.
    pub fn contract(&self, p1: &HomogeneousPoint2) -> Matrix3<f64> {
        self.slices[0] * p1.0.x + self.slices[1] * p1.0.y + self.slices[2] * p1.0.z
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.slices
            .iter()
            .map(|m| m.norm_squared())
            .sum::<f64>()
            .sqrt()
    }
}

/// Builds the tensor from the camera-from-view-1 poses of views 2 and 3.
pub fn trifocal_from_poses(pose_2: &Pose, pose_3: &Pose) -> Result<TrifocalTensor> {
    let b2 = pose_2.inverse().translation.norm();
    let b3 = pose_3.inverse().translation.norm();
    if b2 <= MIN_BASELINE || b3 <= MIN_BASELINE {
        return Err(TvgError::DegenerateConfiguration(format!(
            "baselines {b2:e} and {b3:e} must both exceed {MIN_BASELINE:e}"
        )));
    }
    Ok(tensor_from_cameras(
        &pose_2.rotation,
        &pose_2.translation,
        &pose_3.rotation,
        &pose_3.translation,
    ))
}

pub(crate) fn tensor_from_cameras(
    a: &Matrix3<f64>,
    a4: &Vector3<f64>,
    b: &Matrix3<f64>,
    b4: &Vector3<f64>,
) -> TrifocalTensor {
    let slice = |i: usize| a.column(i) * b4.transpose() - a4 * b.column(i).transpose();
    TrifocalTensor {
        slices: [slice(0), slice(1), slice(2)],
    }
}

/// Line transfer taken literally: `l = Σᵢ p1ⁱ Tᵢ p2`.
pub fn epipolar_transfer(
    t: &TrifocalTensor,
    p1: &HomogeneousPoint2,
    p2: &HomogeneousPoint2,
) -> HomogeneousPoint2 {
    HomogeneousPoint2(t.contract(p1) * p2.0)
}

/// `‖p × l‖²`: zero iff the two 3-vectors are parallel.
pub fn trifocal_residual(p_t: &HomogeneousPoint2, l_t: &HomogeneousPoint2) -> f64 {
    let (p, l) = (&p_t.0, &l_t.0);
    let a = p.x * l.z - p.z * l.x;
    let b = p.y * l.z - p.z * l.y;
    let c = p.x * l.y - p.y * l.x;
    a * a + b * b + c * c
}

/// `(p·l)²`: zero iff the point lies on the line.
pub fn incidence_residual(p: &HomogeneousPoint2, l: &HomogeneousPoint2) -> f64 {
    let d = p.0.dot(&l.0);
    d * d
}

/// Line in view 2 through `p2`, perpendicular to the epipolar line of `p1`.
///
/// The epipolar line is recovered as the left null vector of `Σ p1ⁱ Tᵢ`, whose
/// columns are points on that line.
pub fn transfer_line(
    t: &TrifocalTensor,
    p1: &HomogeneousPoint2,
    p2: &HomogeneousPoint2,
) -> Result<Vector3<f64>> {
    let m = t.contract(p1);
    transfer_line_from_contraction(&m, p2)
}

pub(crate) fn transfer_line_from_contraction(
    m: &Matrix3<f64>,
    p2: &HomogeneousPoint2,
) -> Result<Vector3<f64>> {
    let cols = [
        m.column(0).into_owned(),
        m.column(1).into_owned(),
        m.column(2).into_owned(),
    ];
    let mut epipolar = Vector3::zeros();
    let mut best = -1.0;
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        let c = cols[i].cross(&cols[j]);
        let n = c.norm_squared();
        if n > best {
            best = n;
            epipolar = c;
        }
    }
    let (x, y, z) = (p2.0.x, p2.0.y, p2.0.z);
    let (l1, l2) = (epipolar.x, epipolar.y);
    let line = Vector3::new(l2 * z, -l1 * z, -l2 * x + l1 * y);
    let scale = m.norm_squared() * p2.0.norm();
    let rel = if scale > 0.0 {
        line.norm() / scale
    } else {
        0.0
    };
    if !(rel >= TRANSFER_EPS) {
        return Err(TvgError::DegenerateTransfer(rel));
    }
    Ok(line)
}

/// Point–line–point transfer into view 3: `Mᵀ l₂` with `M = Σ p1ⁱ Tᵢ`.
pub fn point_transfer_checked(
    t: &TrifocalTensor,
    p1: &HomogeneousPoint2,
    p2: &HomogeneousPoint2,
) -> Result<HomogeneousPoint2> {
    let m = t.contract(p1);
    let line = transfer_line_from_contraction(&m, p2)?;
    Ok(HomogeneousPoint2(m.transpose() * line))
}
