//! Pairwise match sets and their bridging into tri-view correspondences.

mod bridge;
mod io;

pub use bridge::{bridge_triplets, filter_parallax, ray_angle_deg, ParallaxFilter};
pub use io::{load_matches, matches_string, parse_matches, save_matches};

use nalgebra::{Vector2, Vector3};

/// One dense correspondence between frames `a` and `b`, with each frame's own
/// pointmap estimate of the 3D point.
#[derive(Clone, Debug, PartialEq)]
pub struct MatchRecord {
    pub pixel_a: Vector2<f64>,
    pub pixel_b: Vector2<f64>,
    pub point_in_a: Vector3<f64>,
    pub point_in_b: Vector3<f64>,
    pub confidence: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PairwiseMatchSet {
    pub frame_a: u32,
    pub frame_b: u32,
    pub records: Vec<MatchRecord>,
    /// Reconstruction scale of this pair relative to the global frame (1 when unknown).
    pub pair_scale: f64,
}

impl PairwiseMatchSet {
    pub fn new(frame_a: u32, frame_b: u32, records: Vec<MatchRecord>) -> Self {
        PairwiseMatchSet {
            frame_a,
            frame_b,
            records,
            pair_scale: 1.0,
        }
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Consistent pixel triplet across the previous keyframe `k−1`, the bridge
/// keyframe `k` and the current frame `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct TriViewMatch {
    pub p_prev: Vector2<f64>,
    pub p_key: Vector2<f64>,
    pub p_cur: Vector2<f64>,
    /// The point in frame `k` coordinates, from the `(k−1, k)` pair.
    pub point_from_prev_pair: Vector3<f64>,
    /// The point in frame `t` coordinates, from the `(k, t)` pair.
    pub point_from_cur_pair: Vector3<f64>,
    /// The point in frame `k` coordinates, from the `(k, t)` pair.
    pub key_point_from_cur_pair: Vector3<f64>,
    pub confidence: f64,
}
