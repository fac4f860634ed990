//! Keyframes, uncertainty-guided primitive seeding and map refinement.

mod keyframe;
mod tugi;

pub use keyframe::{
    keyframe_decision, keyframes_csv, median_parallax_deg, write_keyframes_csv, Keyframe,
    KeyframeEvidence, KeyframePolicy,
};
pub use tugi::{
    seed_primitives, triview_samples, triview_uncertainty, tugi_init, PlainInit, SeedMode,
    TriViewImages, TugiConfig, UncertaintyEstimate,
};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::geom::CameraIntrinsics;
use crate::optim::Adam;
use crate::splat::{
    image_loss, image_loss_with_grad, normalized_quaternion, GaussianMap, GaussianPrimitive, Image,
    PrimitiveGrad, Rasterizer, RenderOptions,
};

const PARAMS_PER_PRIMITIVE: usize = 14;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MappingConfig {
    pub iterations: usize,
    pub gamma: f64,
    pub window_recent: usize,
    pub window_random: usize,
    pub lr_mean: f64,
    pub lr_log_scale: f64,
    pub lr_rotation: f64,
    pub lr_color: f64,
    pub lr_opacity: f64,
    pub use_tugi: bool,
    pub tugi: TugiConfig,
    pub plain: PlainInit,
    /// Duplicate radius as a multiple of the larger of the two scales.
    pub duplicate_factor: f64,
    /// Candidates below this opacity are not inserted.
    pub min_opacity: f64,
    pub keyframes: KeyframePolicy,
}

impl Default for MappingConfig {
    fn default() -> Self {
        MappingConfig {
            iterations: 80,
            gamma: 0.2,
            window_recent: 5,
            window_random: 3,
            lr_mean: 1e-3,
            lr_log_scale: 5e-3,
            lr_rotation: 1e-3,
            lr_color: 1e-2,
            lr_opacity: 5e-2,
            use_tugi: true,
            tugi: TugiConfig::default(),
            plain: PlainInit::default(),
            duplicate_factor: 3.0,
            min_opacity: 0.005,
            keyframes: KeyframePolicy::default(),
        }
    }
}

impl MappingConfig {
    pub fn seed_mode(&self) -> SeedMode {
        if self.use_tugi {
            SeedMode::Tugi(self.tugi.clone())
        } else {
            SeedMode::Plain(self.plain.clone())
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RefineReport {
    pub window: Vec<u32>,
    /// Mean window loss before each step, plus the loss after the last step.
    pub losses: Vec<f64>,
}

/// Owns the map, the keyframe registry and the optimizer state of every primitive.
pub struct Mapper {
    pub map: GaussianMap,
    pub keyframes: Vec<Keyframe>,
    pub cfg: MappingConfig,
    adam: Adam,
    rng: ChaCha8Rng,
}

fn mean_scale(g: &GaussianPrimitive) -> f64 {
    (g.scale.x + g.scale.y + g.scale.z) / 3.0
}

impl Mapper {
    pub fn new(cfg: MappingConfig, seed: u64) -> Self {
        Mapper {
            map: GaussianMap::default(),
            keyframes: Vec::new(),
            cfg,
            adam: Adam::new(0),
            rng: ChaCha8Rng::seed_from_u64(seed ^ 0x6d61_7070_696e_6721),
        }
    }

    pub fn register_keyframe(&mut self, mut kf: Keyframe) {
        kf.revision = self.map.revision;
        self.keyframes.push(kf);
    }

    fn duplicates(&self, c: &GaussianPrimitive, existing: &[GaussianPrimitive]) -> bool {
        let sc = mean_scale(c);
        existing.iter().any(|g| {
            g.opacity() >= self.cfg.min_opacity
                && (g.mean - c.mean).norm() < self.cfg.duplicate_factor * sc.max(mean_scale(g))
        })
    }

    /// Appends the candidates that are visible (opacity at least `min_opacity`)
    /// and do not lie within `duplicate_factor` scales of a visible primitive
    /// already in the map or accepted earlier in the batch. The revision
    /// advances once when anything is added.
    pub fn insert_primitives(&mut self, candidates: Vec<GaussianPrimitive>) -> usize {
        let mut accepted: Vec<GaussianPrimitive> = Vec::new();
        for c in candidates {
            if c.opacity() < self.cfg.min_opacity
                || self.duplicates(&c, &self.map.primitives)
                || self.duplicates(&c, &accepted)
            {
                continue;
            }
            accepted.push(c);
        }
        let n = accepted.len();
        if n > 0 {
            self.map.extend(accepted);
            self.adam.grow(n * PARAMS_PER_PRIMITIVE);
        }
        n
    }

    /// Keyframes used by one refinement call: the latest `window_recent` plus
    /// `window_random` drawn from the older ones.
    fn window(&mut self) -> Vec<usize> {
        let with_images: Vec<usize> = (0..self.keyframes.len())
            .filter(|&i| self.keyframes[i].image.is_some())
            .collect();
        let split = with_images.len().saturating_sub(self.cfg.window_recent);
        let (older, recent) = with_images.split_at(split);
        let take = self.cfg.window_random.min(older.len());
        let mut picks: Vec<usize> = sample(&mut self.rng, older.len(), take)
            .into_iter()
            .map(|i| older[i])
            .collect();
        picks.sort_unstable();
        picks.extend_from_slice(recent);
        picks
    }

    fn window_loss(
        &self,
        window: &[usize],
        k: &CameraIntrinsics,
        opts: &RenderOptions,
    ) -> Result<f64> {
        let mut total = 0.0;
        for &i in window {
            let kf = &self.keyframes[i];
            let r = Rasterizer::new(&self.map, &kf.pose.inverse(), k, opts);
            total += image_loss(
                kf.image.as_ref().expect("window keyframes have images"),
                &r.render().color,
                self.cfg.gamma,
            )?;
        }
        Ok(total / window.len() as f64)
    }

    /// Adam refinement of every primitive against the keyframe window.
    pub fn refine(&mut self, k: &CameraIntrinsics, opts: &RenderOptions) -> Result<RefineReport> {
        let window = self.window();
        let ids = window.iter().map(|&i| self.keyframes[i].id).collect();
        if window.is_empty() || self.map.is_empty() {
            return Ok(RefineReport {
                window: ids,
                losses: Vec::new(),
            });
        }
        let lr: Vec<f64> = (0..self.map.len())
            .flat_map(|_| {
                let c = &self.cfg;
                [
                    [c.lr_mean; 3].as_slice(),
                    &[c.lr_log_scale; 3],
                    &[c.lr_rotation; 4],
                    &[c.lr_color; 3],
                    &[c.lr_opacity],
                ]
                .concat()
            })
            .collect();
        let mut losses = Vec::with_capacity(self.cfg.iterations + 1);
        for _ in 0..self.cfg.iterations {
            let mut grads = vec![PrimitiveGrad::default(); self.map.len()];
            let mut loss = 0.0;
            for &i in &window {
                let kf = &self.keyframes[i];
                let target: &Image = kf.image.as_ref().expect("window keyframes have images");
                let r = Rasterizer::new(&self.map, &kf.pose.inverse(), k, opts);
                let (l, d) = image_loss_with_grad(target, &r.render().color, self.cfg.gamma)?;
                loss += l;
                for (acc, g) in grads.iter_mut().zip(
                    r.backward(&self.map, &d, true)
                        .primitives
                        .unwrap_or_default(),
                ) {
                    acc.add(&g);
                }
            }
            let inv = 1.0 / window.len() as f64;
            losses.push(loss * inv);
            let flat: Vec<f64> = grads
                .iter()
                .zip(&self.map.primitives)
                .flat_map(|(g, p)| {
                    let mut v = Vec::with_capacity(PARAMS_PER_PRIMITIVE);
                    v.extend(g.mean.iter().map(|x| x * inv));
                    v.extend((0..3).map(|j| g.scale[j] * p.scale[j] * inv));
                    v.extend(g.rotation.iter().map(|x| x * inv));
                    v.extend(g.color.iter().map(|x| x * inv));
                    v.push(g.opacity_logit * inv);
                    v
                })
                .collect();
            let step = self.adam.step(&flat, &lr);
            for (p, s) in self
                .map
                .primitives
                .iter_mut()
                .zip(step.chunks_exact(PARAMS_PER_PRIMITIVE))
            {
                for j in 0..3 {
                    p.mean[j] += s[j];
                    p.scale[j] *= s[3 + j].exp();
                }
                let q = [
                    p.rotation[0] + s[6],
                    p.rotation[1] + s[7],
                    p.rotation[2] + s[8],
                    p.rotation[3] + s[9],
                ];
                p.rotation = normalized_quaternion(&q);
                for j in 0..3 {
                    p.color[j] = (p.color[j] + s[10 + j]).clamp(0.0, 1.0);
                }
                p.opacity_logit += s[13];
            }
            self.map.touch();
        }
        losses.push(self.window_loss(&window, k, opts)?);
        Ok(RefineReport {
            window: ids,
            losses,
        })
    }
}
