//! Trajectory and rendering metrics: ATE, RPE, PSNR and SSIM.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Result, TvgError};
use crate::geom::{Pose, SimilarityTransform};
use crate::splat::{ssim, Image};

pub const PSNR_CAP: f64 = 99.0;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alignment {
    None,
    Se3,
    #[default]
    Sim3,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AteResult {
    pub rmse: f64,
    /// Per-frame translation residual after alignment.
    pub errors: Vec<f64>,
    pub transform: SimilarityTransform,
    pub aligned: Vec<Pose>,
}

fn check_lengths(est: &[Pose], gt: &[Pose]) -> Result<()> {
    if est.len() != gt.len() {
        return Err(TvgError::DimensionMismatch(format!(
            "trajectory lengths differ: {} estimated vs {} ground truth",
            est.len(),
            gt.len()
        )));
    }
    if est.len() < 2 {
        return Err(TvgError::InsufficientEvidence {
            got: est.len(),
            need: 2,
        });
    }
    Ok(())
}

/// Least-squares alignment of camera centers. Unlike `procrustes_align` this
/// accepts collinear centers, where the roll about the line does not change
/// the residuals.
pub fn align_centers(
    src: &[Vector3<f64>],
    dst: &[Vector3<f64>],
    with_scale: bool,
) -> SimilarityTransform {
    let inv_n = 1.0 / src.len() as f64;
    let mu_s = src.iter().sum::<Vector3<f64>>() * inv_n;
    let mu_d = dst.iter().sum::<Vector3<f64>>() * inv_n;
    let mut cross = Matrix3::zeros();
    let mut var_s = 0.0;
    for (s, d) in src.iter().zip(dst) {
        cross += (d - mu_d) * (s - mu_s).transpose();
        var_s += (s - mu_s).norm_squared();
    }
    cross *= inv_n;
    var_s *= inv_n;
    if var_s == 0.0 {
        return SimilarityTransform {
            scale: 1.0,
            rotation: Matrix3::identity(),
            translation: mu_d - mu_s,
        };
    }
    let svd = cross.svd(true, true);
    let (u, v_t) = (svd.u.expect("svd u"), svd.v_t.expect("svd v"));
    let d = svd.singular_values;
    let mut sign = Matrix3::identity();
    if u.determinant() * v_t.determinant() < 0.0 {
        let k = (0..3).min_by(|&i, &j| d[i].total_cmp(&d[j])).unwrap_or(2);
        sign[(k, k)] = -1.0;
    }
    let rotation = u * sign * v_t;
    let mut scale = 1.0;
    if with_scale {
        let s = (0..3).map(|i| d[i] * sign[(i, i)]).sum::<f64>() / var_s;
        if s > 0.0 {
            scale = s;
        }
    }
    SimilarityTransform {
        scale,
        rotation,
        translation: mu_d - scale * rotation * mu_s,
    }
}

pub fn ate_rmse(est: &[Pose], gt: &[Pose], align: Alignment) -> Result<AteResult> {
    check_lengths(est, gt)?;
    let src: Vec<_> = est.iter().map(|p| p.translation).collect();
    let dst: Vec<_> = gt.iter().map(|p| p.translation).collect();
    let transform = match align {
        Alignment::None => SimilarityTransform::identity(),
        Alignment::Se3 => align_centers(&src, &dst, false),
        Alignment::Sim3 => align_centers(&src, &dst, true),
    };
    let aligned: Vec<Pose> = est.iter().map(|p| transform.apply_to_pose(p)).collect();
    let errors: Vec<f64> = aligned
        .iter()
        .zip(gt)
        .map(|(a, g)| (a.translation - g.translation).norm())
        .collect();
    let rmse = (errors.iter().map(|e| e * e).sum::<f64>() / errors.len() as f64).sqrt();
    Ok(AteResult {
        rmse,
        errors,
        transform,
        aligned,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct RpeResult {
    /// RMSE of relative translation errors.
    pub trans: f64,
    /// RMSE of relative rotation errors, degrees.
    pub rot_deg: f64,
    pub trans_series: Vec<f64>,
    pub rot_series: Vec<f64>,
}

/// Relative pose error over frame gaps of `delta`. Series entry `i` belongs to
/// the pair `(i − delta, i)`; the first `delta` entries are zero.
pub fn rpe(est: &[Pose], gt: &[Pose], delta: usize) -> Result<RpeResult> {
    check_lengths(est, gt)?;
    if delta == 0 || delta >= est.len() {
        return Err(TvgError::Config(format!(
            "rpe delta {delta} outside [1, {})",
            est.len()
        )));
    }
    let n = est.len();
    let mut trans_series = vec![0.0; n];
    let mut rot_series = vec![0.0; n];
    for i in delta..n {
        let rel_est = est[i - delta].inverse().compose(&est[i]);
        let rel_gt = gt[i - delta].inverse().compose(&gt[i]);
        let e = rel_gt.inverse().compose(&rel_est);
        trans_series[i] = e.translation.norm();
        rot_series[i] = Pose::identity().rotation_angle_to(&e).to_degrees();
    }
    let rms =
        |s: &[f64]| (s[delta..].iter().map(|x| x * x).sum::<f64>() / (n - delta) as f64).sqrt();
    Ok(RpeResult {
        trans: rms(&trans_series),
        rot_deg: rms(&rot_series),
        trans_series,
        rot_series,
    })
}

pub fn psnr(reference: &Image, test: &Image) -> Result<f64> {
    reference.check_same_shape(test)?;
    let mse = reference
        .data
        .iter()
        .zip(&test.data)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / reference.data.len().max(1) as f64;
    if mse < 1e-10 {
        return Ok(PSNR_CAP);
    }
    Ok((10.0 * (1.0 / mse).log10()).min(PSNR_CAP))
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub ate_rmse: f64,
    pub rpe_trans: f64,
    pub rpe_rot: f64,
    /// `NaN` when no images were compared.
    pub psnr_mean: f64,
    pub ssim_mean: f64,
    pub ate_series: Vec<f64>,
    pub rpe_trans_series: Vec<f64>,
    pub rpe_rot_series: Vec<f64>,
    pub psnr_series: Vec<f64>,
    pub ssim_series: Vec<f64>,
}

/// Full report. RPE is measured on the sim3-aligned estimate so that its
/// translation part is in ground-truth units.
pub fn evaluate(est: &[Pose], gt: &[Pose], images: &[(Image, Image)]) -> Result<EvalReport> {
    let ate = ate_rmse(est, gt, Alignment::Sim3)?;
    let rel = rpe(&ate.aligned, gt, 1)?;
    let mut psnr_series = Vec::with_capacity(images.len());
    let mut ssim_series = Vec::with_capacity(images.len());
    for (reference, rendered) in images {
        psnr_series.push(psnr(reference, rendered)?);
        ssim_series.push(ssim(reference, rendered)?);
    }
    let mean = |s: &[f64]| {
        if s.is_empty() {
            f64::NAN
        } else {
            s.iter().sum::<f64>() / s.len() as f64
        }
    };
    Ok(EvalReport {
        ate_rmse: ate.rmse,
        rpe_trans: rel.trans,
        rpe_rot: rel.rot_deg,
        psnr_mean: mean(&psnr_series),
        ssim_mean: mean(&ssim_series),
        ate_series: ate.errors,
        rpe_trans_series: rel.trans_series,
        rpe_rot_series: rel.rot_series,
        psnr_series,
        ssim_series,
    })
}

impl EvalReport {
    /// Per-frame CSV; image columns are empty for frames without images.
    pub fn csv(&self) -> String {
        let mut out = String::from("frame,ate,rpe_trans,rpe_rot_deg,psnr,ssim\n");
        for i in 0..self.ate_series.len() {
            let img = |s: &[f64]| s.get(i).map(|v| v.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{i},{},{},{},{},{}\n",
                self.ate_series[i],
                self.rpe_trans_series[i],
                self.rpe_rot_series[i],
                img(&self.psnr_series),
                img(&self.ssim_series)
            ));
        }
        out
    }

    pub fn summary(&self) -> String {
        let fmt = |v: f64, p: usize| {
            if v.is_nan() {
                "n/a".to_string()
            } else {
                format!("{v:.p$}")
            }
        };
        format!(
            "ATE_RMSE PSNR SSIM LPIPS RPE_TRANS RPE_ROT_DEG\n{} {} {} n/a {} {}\n",
            fmt(self.ate_rmse, 6),
            fmt(self.psnr_mean, 3),
            fmt(self.ssim_mean, 4),
            fmt(self.rpe_trans, 6),
            fmt(self.rpe_rot, 4)
        )
    }
}
