//! Tri-view uncertainty and uncertainty-guided Gaussian initialization.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TvgError};
use crate::geom::Pose;
use crate::matching::TriViewMatch;
use crate::splat::{logit, GaussianPrimitive, Image};

/// Fused point and isotropic spread of its multi-view estimates.
#[derive(Clone, Debug, PartialEq)]
pub struct UncertaintyEstimate {
    pub mean: Vector3<f64>,
    pub variance: f64,
    pub samples: usize,
}

/// `P̄ = mean(Pᵢ)`, `σ² = (1/N) Σ ‖Pᵢ − P̄‖²`; needs at least two finite samples.
pub fn triview_uncertainty(samples: &[Vector3<f64>]) -> Result<UncertaintyEstimate> {
    let valid: Vec<&Vector3<f64>> = samples
        .iter()
        .filter(|p| p.iter().all(|v| v.is_finite()))
        .collect();
    if valid.len() < 2 {
        return Err(TvgError::InsufficientEvidence {
            got: valid.len(),
            need: 2,
        });
    }
    let n = valid.len() as f64;
    let mean = valid.iter().copied().sum::<Vector3<f64>>() / n;
    let variance = valid
        .iter()
        .map(|p| (*p - mean).norm_squared())
        .sum::<f64>()
        / n;
    Ok(UncertaintyEstimate {
        mean,
        variance,
        samples: valid.len(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TugiConfig {
    /// Base opacity `a`.
    pub base_opacity: f64,
    /// Opacity attenuation gain `k_op` per unit of `√σ²`.
    pub k_op: f64,
    /// Scale gain `c_s`.
    pub scale_gain: f64,
    pub scale_floor: f64,
    pub opacity_eps: f64,
}

impl TugiConfig {
    /// Gain that drives the opacity to its clamp when `√σ²` reaches 10% of `extent`.
    pub fn k_op_for_extent(base_opacity: f64, opacity_eps: f64, extent: f64) -> f64 {
        (1.0 - opacity_eps / base_opacity) / (0.1 * extent)
    }
}

impl Default for TugiConfig {
    fn default() -> Self {
        TugiConfig {
            base_opacity: 0.7,
            k_op: Self::k_op_for_extent(0.7, 1e-4, 3.0),
            scale_gain: 1.0,
            scale_floor: 1e-3,
            opacity_eps: 1e-4,
        }
    }
}

/// Primitive at the fused point, sized by and made more transparent with its spread.
pub fn tugi_init(
    estimate: &UncertaintyEstimate,
    colors: &[Vector3<f64>; 3],
    cfg: &TugiConfig,
) -> GaussianPrimitive {
    let sigma = estimate.variance.sqrt();
    let scale = (cfg.scale_gain * sigma).max(cfg.scale_floor);
    let opacity =
        (cfg.base_opacity * (1.0 - cfg.k_op * sigma)).clamp(cfg.opacity_eps, 1.0 - cfg.opacity_eps);
    GaussianPrimitive {
        mean: estimate.mean,
        scale: Vector3::repeat(scale),
        rotation: [1.0, 0.0, 0.0, 0.0],
        color: (colors[0] + colors[1] + colors[2]) / 3.0,
        opacity_logit: logit(opacity),
    }
}

/// Fixed-size primitive used when uncertainty guidance is disabled.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlainInit {
    pub scale: f64,
    pub opacity: f64,
}

impl Default for PlainInit {
    fn default() -> Self {
        PlainInit {
            scale: 0.01,
            opacity: 0.1,
        }
    }
}

/// The three estimates of a triplet's point in bridge-keyframe coordinates:
/// from the `(k−1, k)` pair, from the `(k, t)` pair's keyframe side, and from
/// its current-frame side carried into the keyframe by `cur_to_key`.
pub fn triview_samples(t: &TriViewMatch, pair_scale: f64, cur_to_key: &Pose) -> [Vector3<f64>; 3] {
    [
        t.point_from_prev_pair,
        t.key_point_from_cur_pair * pair_scale,
        cur_to_key.transform_point(&(t.point_from_cur_pair * pair_scale)),
    ]
}

fn sample_color(img: &Image, p: &nalgebra::Vector2<f64>) -> Vector3<f64> {
    let c = img.sample_bilinear(p.x, p.y);
    match c.len() {
        1 => Vector3::repeat(c[0]),
        _ => Vector3::new(c[0], c[1], c[2]),
    }
}

/// Images of the three views a triplet was observed in.
pub struct TriViewImages<'a> {
    pub prev: &'a Image,
    pub key: &'a Image,
    pub cur: &'a Image,
}

/// How new primitives are shaped.
#[derive(Clone, Debug, PartialEq)]
pub enum SeedMode {
    Tugi(TugiConfig),
    Plain(PlainInit),
}

/// Candidate primitives for a set of triplets, in world coordinates.
pub fn seed_primitives(
    triplets: &[TriViewMatch],
    images: &TriViewImages,
    pose_key: &Pose,
    cur_to_key: &Pose,
    pair_scale: f64,
    mode: &SeedMode,
) -> Vec<GaussianPrimitive> {
    triplets
        .iter()
        .filter_map(|t| {
            let est = triview_uncertainty(&triview_samples(t, pair_scale, cur_to_key)).ok()?;
            let colors = [
                sample_color(images.prev, &t.p_prev),
                sample_color(images.key, &t.p_key),
                sample_color(images.cur, &t.p_cur),
            ];
            let world = UncertaintyEstimate {
                mean: pose_key.transform_point(&est.mean),
                ..est
            };
            Some(match mode {
                SeedMode::Tugi(cfg) => tugi_init(&world, &colors, cfg),
                SeedMode::Plain(p) => GaussianPrimitive::isotropic(
                    world.mean,
                    p.scale,
                    (colors[0] + colors[1] + colors[2]) / 3.0,
                    p.opacity,
                ),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Twist;
    use crate::splat::sigmoid;

    #[test]
    fn coincident_samples_have_zero_variance() {
        let e = triview_uncertainty(&[Vector3::zeros(), Vector3::zeros()]).unwrap();
        assert_eq!(e.variance, 0.0);
    }

    #[test]
    fn two_sample_case() {
        let e = triview_uncertainty(&[Vector3::zeros(), Vector3::new(0.0, 0.0, 0.2)]).unwrap();
        assert!((e.mean - Vector3::new(0.0, 0.0, 0.1)).norm() < 1e-15);
        assert!((e.variance - 0.01).abs() < 1e-15);
    }

    #[test]
    fn too_few_samples() {
        assert!(triview_uncertainty(&[Vector3::zeros()]).is_err());
        assert!(triview_uncertainty(&[Vector3::zeros(), Vector3::repeat(f64::NAN)]).is_err());
    }

    #[test]
    fn rigid_and_scale_behavior() {
        let pts = [
            Vector3::new(0.1, 0.2, 3.0),
            Vector3::new(-0.3, 0.0, 2.5),
            Vector3::new(0.0, 0.4, 3.3),
        ];
        let base = triview_uncertainty(&pts).unwrap().variance;
        let t = Pose::exp(&Twist::new(0.4, -1.0, 0.3, 5.0, -2.0, 1.0));
        let moved: Vec<_> = pts.iter().map(|p| t.transform_point(p)).collect();
        assert!((triview_uncertainty(&moved).unwrap().variance - base).abs() < 1e-12);
        let scaled: Vec<_> = pts.iter().map(|p| p * 3.0).collect();
        assert!((triview_uncertainty(&scaled).unwrap().variance - 9.0 * base).abs() < 1e-12);
    }

    #[test]
    fn tugi_reference_values() {
        let cfg = TugiConfig::default();
        let colors = [Vector3::x(), Vector3::y(), Vector3::z()];
        let zero = UncertaintyEstimate {
            mean: Vector3::zeros(),
            variance: 0.0,
            samples: 3,
        };
        let g = tugi_init(&zero, &colors, &cfg);
        assert!((g.opacity_logit - 0.8472978603872037).abs() < 1e-12);
        assert_eq!(g.scale, Vector3::repeat(1e-3));
        assert!((g.color - Vector3::repeat(1.0 / 3.0)).norm() < 1e-15);
        assert_eq!(g.rotation, [1.0, 0.0, 0.0, 0.0]);
        let wide = UncertaintyEstimate {
            variance: 1.0,
            ..zero
        };
        assert!((tugi_init(&wide, &colors, &cfg).opacity_logit - logit(1e-4)).abs() < 1e-12);
        // Clamp is reached at 10% of the default 3-unit extent.
        let edge = UncertaintyEstimate {
            variance: 0.09,
            ..zero
        };
        assert!((sigmoid(tugi_init(&edge, &colors, &cfg).opacity_logit) - 1e-4).abs() < 1e-9);
    }

    #[test]
    fn tugi_is_monotone_in_variance() {
        let cfg = TugiConfig::default();
        let colors = [Vector3::zeros(); 3];
        let mut last_opacity = f64::INFINITY;
        let mut last_scale = 0.0;
        for i in 0..50 {
            let e = UncertaintyEstimate {
                mean: Vector3::zeros(),
                variance: (i as f64 * 0.01).powi(2),
                samples: 3,
            };
            let g = tugi_init(&e, &colors, &cfg);
            assert!(g.opacity() <= last_opacity && g.scale.x >= last_scale);
            last_opacity = g.opacity();
            last_scale = g.scale.x;
        }
    }
}
