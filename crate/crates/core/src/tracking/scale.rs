//! Relative pair scale and pose initialization from pointmaps.

use nalgebra::Vector3;

use crate::error::{Result, TvgError};
use crate::geom::{
    procrustes_align, procrustes_align_trimmed, procrustes_trimmed_inliers, symmetric_scale, Pose,
};
use crate::matching::{PairwiseMatchSet, TriViewMatch};

/// Residual multiple of the median above which a pair is dropped before refitting.
pub const TRIM_FACTOR: f64 = 3.0;

fn cloud_pairs(triplets: &[TriViewMatch]) -> (Vec<Vector3<f64>>, Vec<Vector3<f64>>) {
    triplets
        .iter()
        .map(|t| (t.point_from_cur_pair, t.point_from_prev_pair))
        .unzip()
}

/// Scale of the similarity taking the current-pair cloud onto the previous-pair cloud.
pub fn estimate_pair_scale(triplets: &[TriViewMatch]) -> Result<f64> {
    let (src, dst) = cloud_pairs(triplets);
    Ok(procrustes_align(&src, &dst, true)?.scale)
}

/// Pair scale for the running system: pairs are screened with one round of
/// residual trimming of the similarity fit, and the scale of the kept pairs is
/// the ratio of their spreads, which does not shrink under pointmap noise.
pub fn estimate_pair_scale_trimmed(triplets: &[TriViewMatch]) -> Result<f64> {
    let (src, dst) = cloud_pairs(triplets);
    let (_, kept) = procrustes_trimmed_inliers(&src, &dst, true, TRIM_FACTOR)?;
    let ks: Vec<_> = kept.iter().map(|&i| src[i]).collect();
    let kd: Vec<_> = kept.iter().map(|&i| dst[i]).collect();
    symmetric_scale(&ks, &kd)
}

/// World-from-current pose from the `(k, t)` matches: the current-frame cloud,
/// rescaled by `scale`, is rigidly aligned to the keyframe cloud placed in the
/// world through `pose_key`.
pub fn initialize_pose(matches: &PairwiseMatchSet, pose_key: &Pose, scale: f64) -> Result<Pose> {
    if matches.len() < 3 {
        return Err(TvgError::InsufficientEvidence {
            got: matches.len(),
            need: 3,
        });
    }
    let (src, dst): (Vec<_>, Vec<_>) = matches
        .records
        .iter()
        .map(|r| {
            (
                r.point_in_b * scale,
                pose_key.transform_point(&(r.point_in_a * scale)),
            )
        })
        .unzip();
    Ok(procrustes_align_trimmed(&src, &dst, false, TRIM_FACTOR)?.rigid())
}

/// Extrapolates the motion between the last two world-from-camera poses.
pub fn constant_velocity(before: &Pose, last: &Pose) -> Pose {
    last.compose(&before.inverse().compose(last))
}

/// Where an initial pose came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PoseInitSource {
    Pointmap,
    ConstantVelocity,
    LastPose,
}

/// [`initialize_pose`], falling back to constant velocity over `history`
/// (oldest first) when the pointmap alignment is degenerate.
pub fn initialize_pose_or_extrapolate(
    matches: &PairwiseMatchSet,
    pose_key: &Pose,
    scale: f64,
    history: &[Pose],
) -> Result<(Pose, PoseInitSource)> {
    match initialize_pose(matches, pose_key, scale) {
        Ok(p) => Ok((p, PoseInitSource::Pointmap)),
        Err(e) => match history {
            [.., a, b] => Ok((constant_velocity(a, b), PoseInitSource::ConstantVelocity)),
            [b] => Ok((*b, PoseInitSource::LastPose)),
            [] => Err(e),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Twist;
    use crate::matching::MatchRecord;
    use nalgebra::Vector2;

    fn pair_from_motion(
        key: &Pose,
        cur: &Pose,
        pts: &[Vector3<f64>],
        scale: f64,
    ) -> PairwiseMatchSet {
        let records = pts
            .iter()
            .map(|w| MatchRecord {
                pixel_a: Vector2::zeros(),
                pixel_b: Vector2::zeros(),
                point_in_a: key.inverse().transform_point(w) / scale,
                point_in_b: cur.inverse().transform_point(w) / scale,
                confidence: 1.0,
            })
            .collect();
        PairwiseMatchSet::new(0, 1, records)
    }

    fn grid() -> Vec<Vector3<f64>> {
        (0..27)
            .map(|i| {
                Vector3::new(
                    (i % 3) as f64 - 1.0,
                    ((i / 3) % 3) as f64 - 1.0,
                    4.0 + (i / 9) as f64,
                )
            })
            .collect()
    }

    #[test]
    fn identical_pointmaps_return_key_pose() {
        let key = Pose::exp(&Twist::new(0.1, 0.2, -0.1, 0.5, 0.0, 0.2));
        let set = pair_from_motion(&key, &key, &grid(), 1.0);
        let p = initialize_pose(&set, &key, 1.0).unwrap();
        assert!(p.compose(&key.inverse()).log().norm() < 1e-12);
    }

    #[test]
    fn known_motion_is_recovered_at_scale() {
        let key = Pose::exp(&Twist::new(0.1, 0.2, -0.1, 0.5, 0.0, 0.2));
        let cur = Pose::exp(&Twist::new(0.05, 0.25, -0.1, 0.6, 0.1, 0.1));
        let set = pair_from_motion(&key, &cur, &grid(), 2.5);
        let p = initialize_pose(&set, &key, 2.5).unwrap();
        assert!(p.compose(&cur.inverse()).log().norm() < 1e-9);
    }

    #[test]
    fn collinear_points_fall_back_to_constant_velocity() {
        let line: Vec<_> = (0..10).map(|i| Vector3::new(i as f64, 0.0, 4.0)).collect();
        let set = pair_from_motion(&Pose::identity(), &Pose::identity(), &line, 1.0);
        let a = Pose::from_translation(Vector3::new(0.0, 0.0, 0.0));
        let b = Pose::from_translation(Vector3::new(0.1, 0.0, 0.0));
        let (p, src) = initialize_pose_or_extrapolate(&set, &b, 1.0, &[a, b]).unwrap();
        assert_eq!(src, PoseInitSource::ConstantVelocity);
        assert!((p.translation - Vector3::new(0.2, 0.0, 0.0)).norm() < 1e-15);
    }

    fn triplets_scaled(factor: f64) -> Vec<TriViewMatch> {
        grid()
            .iter()
            .map(|p| TriViewMatch {
                p_prev: Vector2::zeros(),
                p_key: Vector2::zeros(),
                p_cur: Vector2::zeros(),
                point_from_prev_pair: *p,
                point_from_cur_pair: p * factor + Vector3::new(0.3, 0.0, 0.0),
                key_point_from_cur_pair: *p,
                confidence: 1.0,
            })
            .collect()
    }

    #[test]
    fn pair_scale_inverts_cloud_scaling() {
        assert!((estimate_pair_scale(&triplets_scaled(1.0)).unwrap() - 1.0).abs() < 1e-12);
        assert!((estimate_pair_scale(&triplets_scaled(0.5)).unwrap() - 2.0).abs() < 1e-12);
        assert!((estimate_pair_scale_trimmed(&triplets_scaled(0.5)).unwrap() - 2.0).abs() < 1e-12);
        assert!(estimate_pair_scale(&triplets_scaled(1.0)[..2]).is_err());
    }
}
