use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TvgError};
use crate::splat::{logit, GaussianMap, GaussianPrimitive};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColorScheme {
    /// Independent uniform RGB per primitive.
    Random,
    /// Smooth color field over space, plus per-primitive brightness jitter.
    Gradient,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SceneSpec {
    pub seed: u64,
    pub count: usize,
    /// Side length of the axis-aligned cube holding the primitive means.
    pub extent: f64,
    pub center: [f64; 3],
    pub color_scheme: ColorScheme,
    pub min_scale: f64,
    pub max_scale: f64,
    pub opacity: f64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        SceneSpec {
            seed: 0,
            count: 600,
            extent: 3.0,
            center: [0.0, 0.0, 4.0],
            color_scheme: ColorScheme::Random,
            min_scale: 0.002,
            max_scale: 0.005,
            opacity: 0.95,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.count == 0 || !(self.extent > 0.0) {
            return Err(TvgError::Config(
                "scene needs count > 0 and extent > 0".into(),
            ));
        }
        if !(self.min_scale > 0.0 && self.min_scale <= self.max_scale) {
            return Err(TvgError::Config(
                "scene scales must satisfy 0 < min_scale <= max_scale".into(),
            ));
        }
        if !(self.opacity > 0.0 && self.opacity < 1.0) {
            return Err(TvgError::Config("scene opacity must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub map: GaussianMap,
    /// Primitive means; their indices are the hidden correspondence ids.
    pub points: Vec<Vector3<f64>>,
}

pub fn gen_scene(spec: &SceneSpec) -> Scene {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let half = spec.extent / 2.0;
    let c = Vector3::from(spec.center);
    let prims: Vec<GaussianPrimitive> = (0..spec.count)
        .map(|_| {
            let offset = Vector3::new(
                rng.random_range(-half..=half),
                rng.random_range(-half..=half),
                rng.random_range(-half..=half),
            );
            let color = match spec.color_scheme {
                ColorScheme::Random => Vector3::new(rng.random(), rng.random(), rng.random()),
                ColorScheme::Gradient => {
                    let u = offset / spec.extent + Vector3::repeat(0.5);
                    let jitter: f64 = rng.random_range(0.7..1.0);
                    Vector3::new(u.x, 0.5 * (u.y + u.z), 1.0 - u.x) * jitter
                }
            };
            let scale = if spec.min_scale < spec.max_scale {
                rng.random_range(spec.min_scale..spec.max_scale)
            } else {
                spec.min_scale
            };
            GaussianPrimitive {
                mean: c + offset,
                scale: Vector3::repeat(scale),
                rotation: [1.0, 0.0, 0.0, 0.0],
                color,
                opacity_logit: logit(spec.opacity),
            }
        })
        .collect();
    let points = prims.iter().map(|p| p.mean).collect();
    Scene {
        map: GaussianMap::new(prims),
        points,
    }
}
