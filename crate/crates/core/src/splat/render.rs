//! CPU splat rasterizer with an analytic backward pass.
//!
//! Each primitive is projected with the local affine approximation
//! `Σ' = J W Σ Wᵀ Jᵀ + 0.3·I` and alpha-composited front to back per pixel
//! (pixel centers at integer coordinates). Primitives are depth-sorted with
//! ties broken by index, contributions with Mahalanobis² above 36 are skipped,
//! and a pixel stops once its transmittance drops below `1e-4`. Whatever
//! transmittance remains is filled with the background color.
//!
//! Rows are processed in fixed blocks in parallel and gradient partial sums
//! are reduced in block order, so results do not depend on the thread count.

use std::ops::AddAssign;

use nalgebra::{Matrix2, Matrix2x3, Matrix3, Vector2, Vector3};
use rayon::prelude::*;

use super::gaussian::{
    normalized_quaternion, quaternion_matrix, quaternion_matrix_partials, GaussianMap,
};
use super::image::Image;
use super::loss::image_loss_with_grad;
use crate::error::Result;
use crate::geom::{skew, CameraIntrinsics, Pose, Twist};

const ROW_BLOCK: usize = 4;
const MAX_ALPHA: f64 = 0.99;

#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RenderOptions {
    pub background: Vector3<f64>,
    pub near: f64,
    /// Isotropic screen-space dilation added to every projected covariance (px²).
    pub dilation: f64,
    pub cutoff_sq: f64,
    pub min_transmittance: f64,
}

impl Default for RenderOptions {
    fn default() -> Self {
        RenderOptions {
            background: Vector3::repeat(0.5),
            near: 0.01,
            dilation: 0.3,
            cutoff_sq: 36.0,
            min_transmittance: 1e-4,
        }
    }
}

/// A primitive after projection, with the intermediates the backward pass needs.
#[derive(Clone, Debug)]
pub struct ProjectedSplat {
    pub index: usize,
    pub depth: f64,
    pub mean2d: Vector2<f64>,
    pub cov2d: Matrix2<f64>,
    pub conic: Matrix2<f64>,
    pub opacity: f64,
    pub color: Vector3<f64>,
    pub radius: f64,
    cam: Vector3<f64>,
    jac: Matrix2x3<f64>,
    cov_cam: Matrix3<f64>,
}

pub fn project_gaussian(
    map: &GaussianMap,
    index: usize,
    camera_from_world: &Pose,
    k: &CameraIntrinsics,
    opts: &RenderOptions,
) -> Option<ProjectedSplat> {
    let g = &map.primitives[index];
    let cam = camera_from_world.transform_point(&g.mean);
    if cam.z < opts.near {
        return None;
    }
    let (x, y, z) = (cam.x, cam.y, cam.z);
    let jac = Matrix2x3::new(
        k.fx / z,
        0.0,
        -k.fx * x / (z * z),
        0.0,
        k.fy / z,
        -k.fy * y / (z * z),
    );
    let w = camera_from_world.rotation;
    let cov_cam = w * g.covariance() * w.transpose();
    let cov2d = jac * cov_cam * jac.transpose() + Matrix2::identity() * opts.dilation;
    let conic = cov2d.try_inverse()?;
    let mean2d = Vector2::new(k.fx * x / z + k.cx, k.fy * y / z + k.cy);
    let tr = cov2d.trace();
    let det = cov2d.determinant();
    let lambda_max = 0.5 * tr + (0.25 * tr * tr - det).max(0.0).sqrt();
    let radius = opts.cutoff_sq.sqrt() * lambda_max.sqrt();
    let (w_px, h_px) = (k.width as f64, k.height as f64);
    if mean2d.x + radius < 0.0
        || mean2d.y + radius < 0.0
        || mean2d.x - radius > w_px - 1.0
        || mean2d.y - radius > h_px - 1.0
        || !mean2d.iter().all(|v| v.is_finite())
    {
        return None;
    }
    Some(ProjectedSplat {
        index,
        depth: z,
        mean2d,
        cov2d,
        conic,
        opacity: g.opacity(),
        color: g.color,
        radius,
        cam,
        jac,
        cov_cam,
    })
}

#[derive(Clone, Debug)]
pub struct RenderedView {
    pub color: Image,
    /// Accumulated opacity `1 − T_final` per pixel.
    pub alpha: Image,
    /// Number of primitives blended into each pixel.
    pub contributors: Vec<u32>,
}

/// Gradient of a scalar loss with respect to one primitive's parameters.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PrimitiveGrad {
    pub mean: Vector3<f64>,
    pub scale: Vector3<f64>,
    pub rotation: [f64; 4],
    pub color: Vector3<f64>,
    pub opacity_logit: f64,
}

impl PrimitiveGrad {
    pub fn add(&mut self, o: &PrimitiveGrad) {
        self.mean += o.mean;
        self.scale += o.scale;
        for i in 0..4 {
            self.rotation[i] += o.rotation[i];
        }
        self.color += o.color;
        self.opacity_logit += o.opacity_logit;
    }
}

#[derive(Clone, Debug)]
pub struct RenderGradients {
    /// Gradient w.r.t. a left twist `(ω, v)` applied to the camera-from-world pose.
    pub pose: Twist,
    /// One entry per map primitive (zero for primitives that were not drawn).
    pub primitives: Option<Vec<PrimitiveGrad>>,
}

/// Screen-space gradient accumulator for one projected splat.
#[derive(Clone, Copy, Default)]
struct SplatGrad2D {
    mean: [f64; 2],
    conic: [f64; 3],
    opacity: f64,
    color: [f64; 3],
}

impl SplatGrad2D {
    fn add(&mut self, o: &SplatGrad2D) {
        for i in 0..2 {
            self.mean[i] += o.mean[i];
        }
        for i in 0..3 {
            self.conic[i] += o.conic[i];
            self.color[i] += o.color[i];
        }
        self.opacity += o.opacity;
    }
}

struct Contribution {
    splat: u32,
    alpha: f64,
    transmittance: f64,
    gauss: f64,
    delta: Vector2<f64>,
    clamped: bool,
}

/// Projected, sorted and binned primitives for one map snapshot and pose.
pub struct Rasterizer {
    splats: Vec<ProjectedSplat>,
    offsets: Vec<usize>,
    lists: Vec<u32>,
    width: usize,
    height: usize,
    opts: RenderOptions,
    camera_from_world: Pose,
    k: CameraIntrinsics,
}

impl Rasterizer {
    pub fn new(
        map: &GaussianMap,
        camera_from_world: &Pose,
        k: &CameraIntrinsics,
        opts: &RenderOptions,
    ) -> Self {
        let mut splats: Vec<ProjectedSplat> = (0..map.len())
            .into_par_iter()
            .filter_map(|i| project_gaussian(map, i, camera_from_world, k, opts))
            .collect();
        splats.sort_by(|a, b| a.depth.total_cmp(&b.depth).then(a.index.cmp(&b.index)));
        let (width, height) = (k.width as usize, k.height as usize);
        let bounds = |s: &ProjectedSplat| {
            let x0 = (s.mean2d.x - s.radius).ceil().max(0.0) as usize;
            let x1 = (s.mean2d.x + s.radius).floor().min((width - 1) as f64);
            let y0 = (s.mean2d.y - s.radius).ceil().max(0.0) as usize;
            let y1 = (s.mean2d.y + s.radius).floor().min((height - 1) as f64);
            if x1 < 0.0 || y1 < 0.0 {
                return None;
            }
            Some((x0, x1 as usize, y0, y1 as usize))
        };
        let mut counts = vec![0usize; width * height + 1];
        for s in &splats {
            if let Some((x0, x1, y0, y1)) = bounds(s) {
                for y in y0..=y1 {
                    for x in x0..=x1 {
                        counts[y * width + x + 1] += 1;
                    }
                }
            }
        }
        for i in 1..counts.len() {
            counts[i] += counts[i - 1];
        }
        let offsets = counts;
        let mut cursor = offsets.clone();
        let mut lists = vec![0u32; offsets[width * height]];
        for (si, s) in splats.iter().enumerate() {
            if let Some((x0, x1, y0, y1)) = bounds(s) {
                for y in y0..=y1 {
                    for x in x0..=x1 {
                        let p = y * width + x;
                        lists[cursor[p]] = si as u32;
                        cursor[p] += 1;
                    }
                }
            }
        }
        Rasterizer {
            splats,
            offsets,
            lists,
            width,
            height,
            opts: opts.clone(),
            camera_from_world: *camera_from_world,
            k: *k,
        }
    }

    pub fn splats(&self) -> &[ProjectedSplat] {
        &self.splats
    }

    /// Front-to-back compositing of one pixel; returns color and final transmittance.
    fn blend(
        &self,
        x: usize,
        y: usize,
        mut visit: impl FnMut(Contribution),
    ) -> (Vector3<f64>, f64) {
        let p = y * self.width + x;
        let px = Vector2::new(x as f64, y as f64);
        let mut color = Vector3::zeros();
        let mut t = 1.0;
        for &si in &self.lists[self.offsets[p]..self.offsets[p + 1]] {
            let s = &self.splats[si as usize];
            let d = px - s.mean2d;
            let q = d.dot(&(s.conic * d));
            if q > self.opts.cutoff_sq {
                continue;
            }
            let gauss = (-0.5 * q).exp();
            let raw = s.opacity * gauss;
            let (alpha, clamped) = if raw > MAX_ALPHA {
                (MAX_ALPHA, true)
            } else {
                (raw, false)
            };
            color += s.color * (alpha * t);
            visit(Contribution {
                splat: si,
                alpha,
                transmittance: t,
                gauss,
                delta: d,
                clamped,
            });
            t *= 1.0 - alpha;
            if t < self.opts.min_transmittance {
                break;
            }
        }
        (color + self.opts.background * t, t)
    }

    pub fn render(&self) -> RenderedView {
        let (w, h) = (self.width, self.height);
        let mut color = Image::new(w, h, 3);
        let mut alpha = Image::new(w, h, 1);
        let mut contributors = vec![0u32; w * h];
        color
            .data
            .par_chunks_mut(3 * w)
            .zip(alpha.data.par_chunks_mut(w))
            .zip(contributors.par_chunks_mut(w))
            .enumerate()
            .for_each(|(y, ((crow, arow), nrow))| {
                for x in 0..w {
                    let mut n = 0;
                    let (c, t) = self.blend(x, y, |_| n += 1);
                    crow[3 * x..3 * x + 3].copy_from_slice(c.as_slice());
                    arow[x] = 1.0 - t;
                    nrow[x] = n;
                }
            });
        RenderedView {
            color,
            alpha,
            contributors,
        }
    }

    fn screen_gradients(&self, d_color: &Image) -> Vec<SplatGrad2D> {
        let n = self.splats.len();
        let blocks: Vec<Vec<SplatGrad2D>> = (0..self.height.div_ceil(ROW_BLOCK))
            .into_par_iter()
            .map(|b| {
                let mut acc = vec![SplatGrad2D::default(); n];
                let mut stack = Vec::new();
                for y in b * ROW_BLOCK..((b + 1) * ROW_BLOCK).min(self.height) {
                    for x in 0..self.width {
                        let g = Vector3::new(
                            d_color.get(x, y, 0),
                            d_color.get(x, y, 1),
                            d_color.get(x, y, 2),
                        );
                        if g == Vector3::zeros() {
                            continue;
                        }
                        stack.clear();
                        self.blend(x, y, |c| stack.push(c));
                        // Color of everything behind the current primitive, normalized by
                        // the transmittance just behind it.
                        let mut behind = self.opts.background;
                        for c in stack.iter().rev() {
                            let s = &self.splats[c.splat as usize];
                            let a = &mut acc[c.splat as usize];
                            let w = c.alpha * c.transmittance;
                            for i in 0..3 {
                                a.color[i] += w * g[i];
                            }
                            if !c.clamped {
                                let d_alpha = c.transmittance * g.dot(&(s.color - behind));
                                a.opacity += d_alpha * c.gauss;
                                let d_q = -0.5 * d_alpha * s.opacity * c.gauss;
                                let cd = s.conic * c.delta;
                                a.mean[0] -= 2.0 * d_q * cd.x;
                                a.mean[1] -= 2.0 * d_q * cd.y;
                                a.conic[0] += d_q * c.delta.x * c.delta.x;
                                a.conic[1] += d_q * c.delta.x * c.delta.y;
                                a.conic[2] += d_q * c.delta.y * c.delta.y;
                            }
                            behind = s.color * c.alpha + behind * (1.0 - c.alpha);
                        }
                    }
                }
                acc
            })
            .collect();
        let mut total = vec![SplatGrad2D::default(); n];
        for block in &blocks {
            for (t, g) in total.iter_mut().zip(block) {
                t.add(g);
            }
        }
        total
    }

    /// Backpropagates `d_color = ∂L/∂(rendered color)` to the pose and, optionally,
    /// to every primitive.
    pub fn backward(
        &self,
        map: &GaussianMap,
        d_color: &Image,
        want_primitives: bool,
    ) -> RenderGradients {
        let screen = self.screen_gradients(d_color);
        let (fx, fy) = (self.k.fx, self.k.fy);
        let w = self.camera_from_world.rotation;
        let generators = [
            skew(&Vector3::x()),
            skew(&Vector3::y()),
            skew(&Vector3::z()),
        ];
        let mut pose = Twist::zeros();
        let mut prims = want_primitives.then(|| vec![PrimitiveGrad::default(); map.len()]);
        for (s, g2) in self.splats.iter().zip(&screen) {
            let g_mean2d = Vector2::new(g2.mean[0], g2.mean[1]);
            let g_conic = Matrix2::new(g2.conic[0], g2.conic[1], g2.conic[1], g2.conic[2]);
            let g_cov2d = -s.conic * g_conic * s.conic;
            let g_cov_cam = s.jac.transpose() * g_cov2d * s.jac;
            let g_jac = 2.0 * g_cov2d * s.jac * s.cov_cam;
            let (x, y, z) = (s.cam.x, s.cam.y, s.cam.z);
            let mut g_cam = s.jac.transpose() * g_mean2d;
            let z2 = z * z;
            let z3 = z2 * z;
            g_cam.x += g_jac[(0, 2)] * (-fx / z2);
            g_cam.y += g_jac[(1, 2)] * (-fy / z2);
            g_cam.z += g_jac[(0, 0)] * (-fx / z2)
                + g_jac[(0, 2)] * (2.0 * fx * x / z3)
                + g_jac[(1, 1)] * (-fy / z2)
                + g_jac[(1, 2)] * (2.0 * fy * y / z3);

            let mut g_omega = s.cam.cross(&g_cam);
            for (kk, e) in generators.iter().enumerate() {
                let n = e * s.cov_cam - s.cov_cam * e;
                g_omega[kk] += g_cov_cam.component_mul(&n).sum();
            }
            pose.fixed_rows_mut::<3>(0).add_assign(&g_omega);
            pose.fixed_rows_mut::<3>(3).add_assign(&g_cam);

            if let Some(prims) = prims.as_mut() {
                let prim = &map.primitives[s.index];
                let out = &mut prims[s.index];
                out.mean = w.transpose() * g_cam;
                let g_cov = w.transpose() * g_cov_cam * w;
                let qn = normalized_quaternion(&prim.rotation);
                let rq = quaternion_matrix(&qn);
                let inner = rq * g_cov * rq.transpose();
                let s2 = prim.scale.component_mul(&prim.scale);
                for i in 0..3 {
                    out.scale[i] = 2.0 * prim.scale[i] * inner[(i, i)];
                }
                let g_rq = 2.0 * Matrix3::from_diagonal(&s2) * rq * g_cov;
                let parts = quaternion_matrix_partials(&qn);
                let g_qn: [f64; 4] = std::array::from_fn(|i| g_rq.component_mul(&parts[i]).sum());
                let norm = prim.rotation.iter().map(|v| v * v).sum::<f64>().sqrt();
                let proj: f64 = (0..4).map(|i| qn[i] * g_qn[i]).sum();
                out.rotation = std::array::from_fn(|i| (g_qn[i] - qn[i] * proj) / norm);
                out.color = Vector3::new(g2.color[0], g2.color[1], g2.color[2]);
                out.opacity_logit = g2.opacity * s.opacity * (1.0 - s.opacity);
            }
        }
        RenderGradients {
            pose,
            primitives: prims,
        }
    }
}

pub fn render(
    map: &GaussianMap,
    camera_from_world: &Pose,
    k: &CameraIntrinsics,
    opts: &RenderOptions,
) -> RenderedView {
    Rasterizer::new(map, camera_from_world, k, opts).render()
}

/// Image loss of the render against `target` and its gradient with respect to
/// a left twist on `camera_from_world`.
pub fn pose_gradient(
    map: &GaussianMap,
    camera_from_world: &Pose,
    k: &CameraIntrinsics,
    target: &Image,
    gamma: f64,
    opts: &RenderOptions,
) -> Result<(f64, Twist)> {
    let r = Rasterizer::new(map, camera_from_world, k, opts);
    let (loss, d) = image_loss_with_grad(target, &r.render().color, gamma)?;
    Ok((loss, r.backward(map, &d, false).pose))
}

/// Summed image loss over a set of `(camera_from_world, target)` views and its
/// gradient with respect to every primitive.
pub fn map_gradients(
    map: &GaussianMap,
    views: &[(Pose, &Image)],
    k: &CameraIntrinsics,
    gamma: f64,
    opts: &RenderOptions,
) -> Result<(f64, Vec<PrimitiveGrad>)> {
    let mut total = 0.0;
    let mut grads = vec![PrimitiveGrad::default(); map.len()];
    for (pose, target) in views {
        let r = Rasterizer::new(map, pose, k, opts);
        let (loss, d) = image_loss_with_grad(target, &r.render().color, gamma)?;
        total += loss;
        for (acc, g) in grads
            .iter_mut()
            .zip(r.backward(map, &d, true).primitives.unwrap_or_default())
        {
            acc.add(&g);
        }
    }
    Ok((total, grads))
}
