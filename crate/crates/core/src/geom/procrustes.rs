use nalgebra::{Matrix3, Vector3};

use super::SimilarityTransform;
use crate::error::{Result, TvgError};

const RANK_TOL: f64 = 1e-12;

/// Least-squares similarity (or rigid, when `with_scale` is false) taking `src` onto `dst`
/// (Umeyama). The rotation always has determinant `+1`.
pub fn procrustes_align(
    src: &[Vector3<f64>],
    dst: &[Vector3<f64>],
    with_scale: bool,
) -> Result<SimilarityTransform> {
    if src.len() != dst.len() {
        return Err(TvgError::DimensionMismatch(format!(
            "procrustes: {} source vs {} target points",
            src.len(),
            dst.len()
        )));
    }
    let n = src.len();
    if n < 3 {
        return Err(TvgError::AlignmentDegenerate(format!(
            "{n} correspondences, need 3"
        )));
    }
    let inv_n = 1.0 / n as f64;
    let mu_s = src.iter().sum::<Vector3<f64>>() * inv_n;
    let mu_d = dst.iter().sum::<Vector3<f64>>() * inv_n;

    let mut cross = Matrix3::zeros();
    let mut scatter = Matrix3::zeros();
    let mut var_s = 0.0;
    for (s, d) in src.iter().zip(dst) {
        let cs = s - mu_s;
        let cd = d - mu_d;
        cross += cd * cs.transpose();
        scatter += cs * cs.transpose();
        var_s += cs.norm_squared();
    }
    cross *= inv_n;
    scatter *= inv_n;
    var_s *= inv_n;

    let sv_src = scatter.singular_values();
    let sv_src = sorted_desc(&sv_src);
    if !(sv_src[0] > 0.0) || sv_src[1] <= RANK_TOL * sv_src[0] {
        return Err(TvgError::AlignmentDegenerate(
            "source cloud is collinear or coincident".into(),
        ));
    }

    let svd = cross.svd(true, true);
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(TvgError::AlignmentDegenerate("svd failed".into())),
    };
    let d = svd.singular_values;
    let ds = sorted_desc(&d);
    if !(ds[0] > 0.0) || ds[1] <= RANK_TOL * ds[0] {
        return Err(TvgError::AlignmentDegenerate(
            "cross-covariance rank below 2".into(),
        ));
    }
    let mut sign = Matrix3::identity();
    if u.determinant() * v_t.determinant() < 0.0 {
        // flip the direction belonging to the smallest singular value
        let k = (0..3).min_by(|&i, &j| d[i].total_cmp(&d[j])).unwrap_or(2);
        sign[(k, k)] = -1.0;
    }
    let rotation = u * sign * v_t;
    let scale = if with_scale {
        (0..3).map(|i| d[i] * sign[(i, i)]).sum::<f64>() / var_s
    } else {
        1.0
    };
    if !(scale.is_finite() && scale > 0.0) {
        return Err(TvgError::AlignmentDegenerate(format!(
            "non-positive scale {scale}"
        )));
    }
    let translation = mu_d - scale * rotation * mu_s;
    Ok(SimilarityTransform {
        scale,
        rotation,
        translation,
    })
}

/// Residual-trimmed alignment: fits all pairs, then repeatedly refits on the
/// pairs whose residual under the current fit is within `factor` times the
/// median residual, until the kept set stops changing.
pub fn procrustes_align_trimmed(
    src: &[Vector3<f64>],
    dst: &[Vector3<f64>],
    with_scale: bool,
    factor: f64,
) -> Result<SimilarityTransform> {
    procrustes_trimmed_inliers(src, dst, with_scale, factor).map(|(t, _)| t)
}

/// Refit rounds of the trimmed alignment.
pub const TRIM_ROUNDS: usize = 10;

/// [`procrustes_align_trimmed`] that also returns the indices of the pairs
/// used by the final fit.
pub fn procrustes_trimmed_inliers(
    src: &[Vector3<f64>],
    dst: &[Vector3<f64>],
    with_scale: bool,
    factor: f64,
) -> Result<(SimilarityTransform, Vec<usize>)> {
    let mut fit = procrustes_align(src, dst, with_scale)?;
    let mut kept: Vec<usize> = (0..src.len()).collect();
    // Exact data has a zero median; the floor keeps its pairs.
    let floor = 1e-9 * dst.iter().map(|d| d.norm()).fold(0.0, f64::max);
    for _ in 0..TRIM_ROUNDS {
        let residuals: Vec<f64> = src
            .iter()
            .zip(dst)
            .map(|(s, d)| (fit.apply(s) - d).norm())
            .collect();
        let mut sorted = residuals.clone();
        sorted.sort_by(f64::total_cmp);
        let cutoff = factor * sorted[sorted.len() / 2] + floor;
        let next: Vec<usize> = (0..src.len()).filter(|&i| residuals[i] <= cutoff).collect();
        if next == kept || next.len() < 3 {
            break;
        }
        let ks: Vec<_> = next.iter().map(|&i| src[i]).collect();
        let kd: Vec<_> = next.iter().map(|&i| dst[i]).collect();
        match procrustes_align(&ks, &kd, with_scale) {
            Ok(t) => {
                fit = t;
                kept = next;
            }
            Err(_) => break,
        }
    }
    Ok((fit, kept))
}

/// Ratio of the clouds' RMS spreads about their centroids, `sqrt(Σ‖dᵢ−d̄‖² / Σ‖sᵢ−s̄‖²)`.
///
/// Unlike the least-squares scale it is not shrunk by noise in `src`; it is
/// unbiased when both clouds carry noise proportional to their own scale.
pub fn symmetric_scale(src: &[Vector3<f64>], dst: &[Vector3<f64>]) -> Result<f64> {
    if src.len() != dst.len() || src.len() < 2 {
        return Err(TvgError::AlignmentDegenerate(format!(
            "{} vs {} points",
            src.len(),
            dst.len()
        )));
    }
    let spread = |pts: &[Vector3<f64>]| {
        let mu = pts.iter().sum::<Vector3<f64>>() / pts.len() as f64;
        pts.iter().map(|p| (p - mu).norm_squared()).sum::<f64>()
    };
    let (a, b) = (spread(src), spread(dst));
    if !(a > 0.0 && b > 0.0) {
        return Err(TvgError::AlignmentDegenerate("coincident cloud".into()));
    }
    Ok((b / a).sqrt())
}

/// `Σ ‖T(srcᵢ) − dstᵢ‖²`.
pub fn procrustes_objective(
    t: &SimilarityTransform,
    src: &[Vector3<f64>],
    dst: &[Vector3<f64>],
) -> f64 {
    src.iter()
        .zip(dst)
        .map(|(s, d)| (t.apply(s) - d).norm_squared())
        .sum()
}

fn sorted_desc(v: &Vector3<f64>) -> [f64; 3] {
    let mut a = [v[0], v[1], v[2]];
    a.sort_by(|x, y| y.total_cmp(x));
    a
}
