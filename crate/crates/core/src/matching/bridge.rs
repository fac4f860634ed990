use std::collections::HashMap;

use nalgebra::Vector2;

use super::{PairwiseMatchSet, TriViewMatch};
use crate::error::{Result, TvgError};
use crate::geom::Pose;

/// Joins `(k−1, k)` and `(k, t)` match sets through their shared frame `k`.
///
/// Candidate pairs are records whose frame-`k` pixels lie within `join_tol`.
/// Records of the current pair are visited by descending confidence (ties by
/// input order); each takes its nearest still-unused partner. Output is sorted
/// by the bridge pixel in row-major order.
pub fn bridge_triplets(
    prev_key: &PairwiseMatchSet,
    key_cur: &PairwiseMatchSet,
    join_tol: f64,
) -> Result<Vec<TriViewMatch>> {
    if prev_key.frame_b != key_cur.frame_a {
        return Err(TvgError::BridgeFrameMismatch {
            first_b: prev_key.frame_b,
            second_a: key_cur.frame_a,
        });
    }
    if !(join_tol >= 0.0) {
        return Err(TvgError::Config(format!(
            "join tolerance must be non-negative, got {join_tol}"
        )));
    }
    let cell = join_tol.max(1e-9);
    let key = |p: &Vector2<f64>| ((p.x / cell).floor() as i64, (p.y / cell).floor() as i64);
    let mut grid: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
    for (i, r) in prev_key.records.iter().enumerate() {
        grid.entry(key(&r.pixel_b)).or_default().push(i);
    }
    let mut order: Vec<usize> = (0..key_cur.records.len()).collect();
    order.sort_by(|&a, &b| {
        key_cur.records[b]
            .confidence
            .total_cmp(&key_cur.records[a].confidence)
            .then(a.cmp(&b))
    });
    let tol_sq = join_tol * join_tol;
    let mut used = vec![false; prev_key.records.len()];
    let mut out = Vec::new();
    for ci in order {
        let cur = &key_cur.records[ci];
        let (gx, gy) = key(&cur.pixel_a);
        let mut best: Option<(f64, usize)> = None;
        for dy in -1..=1 {
            for dx in -1..=1 {
                let Some(bucket) = grid.get(&(gx + dx, gy + dy)) else {
                    continue;
                };
                for &pi in bucket {
                    if used[pi] {
                        continue;
                    }
                    let d = (prev_key.records[pi].pixel_b - cur.pixel_a).norm_squared();
                    if d <= tol_sq && best.is_none_or(|(bd, bi)| d < bd || (d == bd && pi < bi)) {
                        best = Some((d, pi));
                    }
                }
            }
        }
        if let Some((_, pi)) = best {
            used[pi] = true;
            let prev = &prev_key.records[pi];
            out.push(TriViewMatch {
                p_prev: prev.pixel_a,
                p_key: cur.pixel_a,
                p_cur: cur.pixel_b,
                point_from_prev_pair: prev.point_in_b,
                point_from_cur_pair: cur.point_in_b,
                key_point_from_cur_pair: cur.point_in_a,
                confidence: prev.confidence.min(cur.confidence),
            });
        }
    }
    out.sort_by(|a, b| {
        a.p_key
            .y
            .total_cmp(&b.p_key.y)
            .then(a.p_key.x.total_cmp(&b.p_key.x))
            .then(a.p_prev.y.total_cmp(&b.p_prev.y))
            .then(a.p_prev.x.total_cmp(&b.p_prev.x))
    });
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParallaxFilter {
    pub min_parallax_deg: f64,
    pub min_confidence: f64,
}

impl Default for ParallaxFilter {
    fn default() -> Self {
        ParallaxFilter {
            min_parallax_deg: 1.0,
            min_confidence: 0.3,
        }
    }
}

/// Angle in degrees at `point` between the rays to two camera centers.
pub fn ray_angle_deg(
    point: &nalgebra::Vector3<f64>,
    center_a: &nalgebra::Vector3<f64>,
    center_b: &nalgebra::Vector3<f64>,
) -> f64 {
    let ra = center_a - point;
    let rb = center_b - point;
    let (na, nb) = (ra.norm(), rb.norm());
    if na == 0.0 || nb == 0.0 {
        return 0.0;
    }
    ra.cross(&rb).norm().atan2(ra.dot(&rb)).to_degrees()
}

/// Keeps triplets whose `k−1` and `t` viewing rays to the bridged point are at
/// least `min_parallax_deg` apart and whose confidence reaches the threshold.
/// Poses are world-from-camera; the point is taken from the `(k−1, k)` pair
/// and placed in the world through the keyframe pose.
pub fn filter_parallax(
    triplets: &[TriViewMatch],
    pose_prev: &Pose,
    pose_key: &Pose,
    pose_cur: &Pose,
    filter: &ParallaxFilter,
) -> Vec<TriViewMatch> {
    triplets
        .iter()
        .filter(|m| {
            if m.confidence < filter.min_confidence {
                return false;
            }
            let world = pose_key.transform_point(&m.point_from_prev_pair);
            ray_angle_deg(&world, &pose_prev.translation, &pose_cur.translation)
                >= filter.min_parallax_deg
        })
        .cloned()
        .collect()
}
