use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geom::Pose;
use crate::matching::{ray_angle_deg, PairwiseMatchSet, TriViewMatch};
use crate::splat::Image;

#[derive(Clone, Debug)]
pub struct Keyframe {
    pub id: u32,
    pub timestamp: f64,
    /// World-from-camera.
    pub pose: Pose,
    pub image: Option<Image>,
    /// Matches to the preceding keyframe (frame `a` is the predecessor), in world scale.
    pub matches: Option<PairwiseMatchSet>,
    /// Map revision at the time the keyframe was registered.
    pub revision: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KeyframePolicy {
    pub min_parallax_deg: f64,
    pub min_overlap: f64,
    pub max_gap: u32,
}

impl Default for KeyframePolicy {
    fn default() -> Self {
        KeyframePolicy {
            min_parallax_deg: 2.0,
            min_overlap: 0.85,
            max_gap: 10,
        }
    }
}

/// What the keyframe rule looks at for the current frame.
pub struct KeyframeEvidence<'a> {
    pub triplets: &'a [TriViewMatch],
    /// World-from-camera pose of the latest keyframe.
    pub pose_key: &'a Pose,
    pub pose_cur: &'a Pose,
    /// Matches between the latest keyframe and the current frame.
    pub matches_to_key: usize,
    /// Matches between the two latest keyframes.
    pub matches_between_keys: usize,
    pub frames_since_keyframe: u32,
    pub no_keyframe_yet: bool,
}

/// Median parallax of the triplets as seen from the latest keyframe and the current frame.
pub fn median_parallax_deg(
    triplets: &[TriViewMatch],
    pose_key: &Pose,
    pose_cur: &Pose,
) -> Option<f64> {
    let mut angles: Vec<f64> = triplets
        .iter()
        .map(|t| {
            let w = pose_key.transform_point(&t.point_from_prev_pair);
            ray_angle_deg(&w, &pose_key.translation, &pose_cur.translation)
        })
        .collect();
    if angles.is_empty() {
        return None;
    }
    angles.sort_by(f64::total_cmp);
    Some(angles[angles.len() / 2])
}

pub fn keyframe_decision(policy: &KeyframePolicy, e: &KeyframeEvidence) -> bool {
    if e.no_keyframe_yet || e.frames_since_keyframe >= policy.max_gap {
        return true;
    }
    if median_parallax_deg(e.triplets, e.pose_key, e.pose_cur)
        .is_some_and(|p| p > policy.min_parallax_deg)
    {
        return true;
    }
    if e.matches_between_keys > 0 {
        let overlap = e.matches_to_key as f64 / e.matches_between_keys as f64;
        if overlap < policy.min_overlap {
            return true;
        }
    }
    false
}

/// `id,timestamp,tx,ty,tz,qx,qy,qz,qw` rows with a header line.
pub fn keyframes_csv(keyframes: &[Keyframe]) -> String {
    let mut s = String::from("id,timestamp,tx,ty,tz,qx,qy,qz,qw\n");
    for k in keyframes {
        let t = &k.pose.translation;
        let [qx, qy, qz, qw] = k.pose.quaternion();
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{}",
            k.id, k.timestamp, t.x, t.y, t.z, qx, qy, qz, qw
        );
    }
    s
}

pub fn write_keyframes_csv(path: &Path, keyframes: &[Keyframe]) -> Result<()> {
    crate::pipeline::io::write_atomic(path, keyframes_csv(keyframes).as_bytes())
}
