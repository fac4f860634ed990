use nalgebra::{Vector2, Vector3};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::Scene;
use crate::error::{Result, TvgError};
use crate::geom::{project, CameraIntrinsics, Pose};
use crate::matching::{MatchRecord, PairwiseMatchSet};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseModel {
    /// Pixel noise standard deviation (px).
    pub sigma_px: f64,
    /// Pointmap noise standard deviation as a fraction of depth.
    pub sigma_pt: f64,
    pub outlier_fraction: f64,
    pub scale_lo: f64,
    pub scale_hi: f64,
    pub drop_rate: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel::zero()
    }
}

impl NoiseModel {
    pub fn zero() -> Self {
        NoiseModel {
            sigma_px: 0.0,
            sigma_pt: 0.0,
            outlier_fraction: 0.0,
            scale_lo: 1.0,
            scale_hi: 1.0,
            drop_rate: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.sigma_px >= 0.0
            && self.sigma_pt >= 0.0
            && (0.0..1.0).contains(&self.outlier_fraction)
            && self.scale_lo > 0.0
            && self.scale_lo <= self.scale_hi
            && self.scale_hi.is_finite()
            && (0.0..1.0).contains(&self.drop_rate);
        if ok {
            Ok(())
        } else {
            Err(TvgError::Config(format!("invalid noise model {self:?}")))
        }
    }
}

/// Oracle-only bookkeeping for a generated pair.
#[derive(Clone, Debug, PartialEq)]
pub struct MatchTruth {
    /// Scene point index behind each record.
    pub point_ids: Vec<usize>,
    pub outlier: Vec<bool>,
    /// Factor applied to both pointmaps of the pair.
    pub scale: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimMatches {
    pub set: PairwiseMatchSet,
    pub truth: MatchTruth,
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Independent stream seed for the pair `(a, b)`.
pub fn pair_seed(master: u64, a: u32, b: u32) -> u64 {
    splitmix64(splitmix64(splitmix64(master) ^ a as u64) ^ ((b as u64) << 32 | 0x5bd1))
}

/// Matches between frames `frame_a` and `frame_b` for every scene point that
/// projects inside both images. Poses are world-from-camera. Occlusion is ignored.
#[allow(clippy::too_many_arguments)]
pub fn gen_pair_matches(
    scene: &Scene,
    frame_a: u32,
    frame_b: u32,
    pose_a: &Pose,
    pose_b: &Pose,
    k: &CameraIntrinsics,
    noise: &NoiseModel,
    seed: u64,
) -> SimMatches {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = if noise.scale_lo < noise.scale_hi {
        rng.random_range(noise.scale_lo..=noise.scale_hi)
    } else {
        noise.scale_lo
    };
    let cw_a = pose_a.inverse();
    let cw_b = pose_b.inverse();
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let gauss3 = |rng: &mut ChaCha8Rng, sigma: f64| -> Vector3<f64> {
        if sigma == 0.0 {
            return Vector3::zeros();
        }
        Vector3::new(unit.sample(rng), unit.sample(rng), unit.sample(rng)) * sigma
    };

    let mut records = Vec::new();
    let mut ids = Vec::new();
    for (id, p) in scene.points.iter().enumerate() {
        let (Some(pa), Some(pb)) = (project(k, &cw_a, p), project(k, &cw_b, p)) else {
            continue;
        };
        if !(k.contains(&pa.pixel) && k.contains(&pb.pixel)) {
            continue;
        }
        if noise.drop_rate > 0.0 && rng.random::<f64>() < noise.drop_rate {
            continue;
        }
        let mut pixel_noise = || {
            let n = gauss3(&mut rng, noise.sigma_px);
            Vector2::new(n.x, n.y)
        };
        let pixel_a = clamp_pixel(k, pa.pixel + pixel_noise());
        let pixel_b = clamp_pixel(k, pb.pixel + pixel_noise());
        let in_a = cw_a.transform_point(p);
        let in_b = cw_b.transform_point(p);
        let point_in_a = (in_a + gauss3(&mut rng, noise.sigma_pt * pa.depth)) * scale;
        let point_in_b = (in_b + gauss3(&mut rng, noise.sigma_pt * pb.depth)) * scale;
        records.push(MatchRecord {
            pixel_a,
            pixel_b,
            point_in_a,
            point_in_b,
            confidence: rng.random_range(0.5..=1.0),
        });
        ids.push(id);
    }
    if records.is_empty() {
        log::warn!("frames {frame_a} and {frame_b} share no visible scene point");
    }

    let n = records.len();
    let n_out = (noise.outlier_fraction * n as f64).floor() as usize;
    let mut outlier = vec![false; n];
    if n_out > 0 {
        let (d_lo, d_hi) = records
            .iter()
            .map(|r| r.point_in_b.z)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), z| {
                (lo.min(z), hi.max(z))
            });
        let mut chosen = sample(&mut rng, n, n_out).into_vec();
        chosen.sort_unstable();
        for i in chosen {
            outlier[i] = true;
            let pixel_b = Vector2::new(
                rng.random_range(0.0..=(k.width - 1) as f64),
                rng.random_range(0.0..=(k.height - 1) as f64),
            );
            let depth = if d_lo < d_hi {
                rng.random_range(d_lo..=d_hi)
            } else {
                d_lo
            };
            let r = &mut records[i];
            r.pixel_b = pixel_b;
            r.point_in_b = k.unproject(&pixel_b, depth);
            r.confidence = rng.random_range(0.3..=1.0);
        }
    }

    SimMatches {
        set: PairwiseMatchSet::new(frame_a, frame_b, records),
        truth: MatchTruth {
            point_ids: ids,
            outlier,
            scale,
        },
    }
}

fn clamp_pixel(k: &CameraIntrinsics, p: Vector2<f64>) -> Vector2<f64> {
    Vector2::new(
        p.x.clamp(0.0, (k.width - 1) as f64),
        p.y.clamp(0.0, (k.height - 1) as f64),
    )
}
