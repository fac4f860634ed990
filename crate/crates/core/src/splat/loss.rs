//! Photometric losses: L1, SSIM and their blend, with gradients w.r.t. the rendered image.
//!
//! SSIM uses an 11x11 separable Gaussian window (σ = 1.5) with `C1 = 0.01²`
//! and `C2 = 0.03²`. Near the border the window is truncated and renormalized
//! to unit mass, so every pixel yields a valid local statistic.

use super::image::Image;
use crate::error::Result;

pub const SSIM_RADIUS: usize = 5;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_C1: f64 = 1e-4;
pub const SSIM_C2: f64 = 9e-4;

fn window_weights() -> [f64; 2 * SSIM_RADIUS + 1] {
    let mut w = [0.0; 2 * SSIM_RADIUS + 1];
    for (i, wi) in w.iter_mut().enumerate() {
        let d = i as f64 - SSIM_RADIUS as f64;
        *wi = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    w
}

/// 1-D truncated, renormalized Gaussian taps for every position on an axis of length `n`.
struct AxisTaps {
    /// First source index of each output position.
    lo: Vec<usize>,
    /// Normalized weights of each output position, starting at `lo`.
    weights: Vec<Vec<f64>>,
}

impl AxisTaps {
    fn new(n: usize) -> Self {
        let w = window_weights();
        let r = SSIM_RADIUS;
        let mut lo = Vec::with_capacity(n);
        let mut weights = Vec::with_capacity(n);
        for p in 0..n {
            let a = p.saturating_sub(r);
            let b = (p + r).min(n - 1);
            let taps: Vec<f64> = (a..=b).map(|q| w[q + r - p]).collect();
            let norm: f64 = taps.iter().sum();
            lo.push(a);
            weights.push(taps.into_iter().map(|t| t / norm).collect());
        }
        AxisTaps { lo, weights }
    }
}

/// Separable window filter over a `width × height` plane. With `adjoint` the
/// transposed operator is applied.
struct WindowFilter {
    width: usize,
    height: usize,
    rows: AxisTaps,
    cols: AxisTaps,
}

impl WindowFilter {
    fn new(width: usize, height: usize) -> Self {
        WindowFilter {
            width,
            height,
            rows: AxisTaps::new(width),
            cols: AxisTaps::new(height),
        }
    }

    fn horizontal(&self, src: &[f64], dst: &mut [f64], adjoint: bool) {
        let w = self.width;
        for (s, d) in src.chunks_exact(w).zip(dst.chunks_exact_mut(w)) {
            d.fill(0.0);
            for p in 0..w {
                let lo = self.rows.lo[p];
                let taps = &self.rows.weights[p];
                if adjoint {
                    for (dq, t) in d[lo..lo + taps.len()].iter_mut().zip(taps) {
                        *dq += t * s[p];
                    }
                } else {
                    d[p] = taps
                        .iter()
                        .zip(&s[lo..lo + taps.len()])
                        .map(|(t, v)| t * v)
                        .sum();
                }
            }
        }
    }

    fn vertical(&self, src: &[f64], dst: &mut [f64], adjoint: bool) {
        let w = self.width;
        dst.fill(0.0);
        for p in 0..self.height {
            let lo = self.cols.lo[p];
            for (j, t) in self.cols.weights[p].iter().enumerate() {
                let q = lo + j;
                let (from, to) = if adjoint { (p, q) } else { (q, p) };
                let (s, d) = (
                    &src[from * w..(from + 1) * w],
                    &mut dst[to * w..(to + 1) * w],
                );
                for (dv, sv) in d.iter_mut().zip(s) {
                    *dv += t * sv;
                }
            }
        }
    }

    fn blur(&self, plane: &[f64], adjoint: bool) -> Vec<f64> {
        let mut tmp = vec![0.0; plane.len()];
        let mut out = vec![0.0; plane.len()];
        if adjoint {
            // (V·H)ᵀ = Hᵀ·Vᵀ
            self.vertical(plane, &mut tmp, true);
            self.horizontal(&tmp, &mut out, true);
        } else {
            self.horizontal(plane, &mut tmp, false);
            self.vertical(&tmp, &mut out, false);
        }
        out
    }
}

struct SsimPlane {
    mean: f64,
    grad: Option<Vec<f64>>,
}

fn ssim_plane(x: &[f64], y: &[f64], f: &WindowFilter, want_grad: bool) -> SsimPlane {
    let n = x.len();
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(y).map(|(a, b)| a * b).collect();
    let mx = f.blur(x, false);
    let my = f.blur(y, false);
    let exx = f.blur(&xx, false);
    let eyy = f.blur(&yy, false);
    let exy = f.blur(&xy, false);

    let mut total = 0.0;
    let (mut ga, mut gb, mut gc) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for p in 0..n {
        let vx = exx[p] - mx[p] * mx[p];
        let vy = eyy[p] - my[p] * my[p];
        let cxy = exy[p] - mx[p] * my[p];
        let a1 = 2.0 * mx[p] * my[p] + SSIM_C1;
        let a2 = 2.0 * cxy + SSIM_C2;
        let b1 = mx[p] * mx[p] + my[p] * my[p] + SSIM_C1;
        let b2 = vx + vy + SSIM_C2;
        let s = a1 * a2 / (b1 * b2);
        total += s;
        if want_grad {
            // Partials of s with respect to μy, σy² and σxy, treated as independent.
            ga[p] = 2.0 * mx[p] * a2 / (b1 * b2) - 2.0 * my[p] * s / b1;
            gb[p] = -s / b2;
            gc[p] = 2.0 * a1 / (b1 * b2);
        }
    }
    let mean = total / n as f64;
    if !want_grad {
        return SsimPlane { mean, grad: None };
    }
    let scale = 1.0 / n as f64;
    // ∂σy²/∂y = 2F·y − 2μyF, ∂σxy/∂y = F·x − μxF, pushed back through Fᵀ.
    let t_a: Vec<f64> = (0..n)
        .map(|p| scale * (ga[p] - 2.0 * gb[p] * my[p] - gc[p] * mx[p]))
        .collect();
    let t_b: Vec<f64> = gb.iter().map(|v| 2.0 * scale * v).collect();
    let t_c: Vec<f64> = gc.iter().map(|v| scale * v).collect();
    let ba = f.blur(&t_a, true);
    let bb = f.blur(&t_b, true);
    let bc = f.blur(&t_c, true);
    let grad = (0..n)
        .map(|q| ba[q] + y[q] * bb[q] + x[q] * bc[q])
        .collect();
    SsimPlane {
        mean,
        grad: Some(grad),
    }
}

fn ssim_impl(reference: &Image, test: &Image, want_grad: bool) -> Result<(f64, Option<Image>)> {
    reference.check_same_shape(test)?;
    let (w, h, c) = (reference.width, reference.height, reference.channels);
    let mut total = 0.0;
    let mut grad = want_grad.then(|| Image::new(w, h, c));
    let f = WindowFilter::new(w, h);
    for ch in 0..c {
        let plane = ssim_plane(&reference.plane(ch), &test.plane(ch), &f, want_grad);
        total += plane.mean;
        if let (Some(g), Some(pg)) = (grad.as_mut(), plane.grad) {
            for (i, v) in pg.into_iter().enumerate() {
                g.data[i * c + ch] = v / c as f64;
            }
        }
    }
    Ok((total / c as f64, grad))
}

/// Mean SSIM over pixels and channels.
pub fn ssim(reference: &Image, test: &Image) -> Result<f64> {
    ssim_impl(reference, test, false).map(|(s, _)| s)
}

/// Mean SSIM and its gradient with respect to `test`.
pub fn ssim_with_grad(reference: &Image, test: &Image) -> Result<(f64, Image)> {
    ssim_impl(reference, test, true).map(|(s, g)| (s, g.expect("gradient requested")))
}

/// Mean absolute difference.
pub fn l1(reference: &Image, test: &Image) -> Result<f64> {
    reference.check_same_shape(test)?;
    let n = reference.data.len() as f64;
    Ok(reference
        .data
        .iter()
        .zip(&test.data)
        .map(|(a, b)| (a - b).abs())
        .sum::<f64>()
        / n)
}

/// `(1 − γ)·L1 + γ·(1 − SSIM)` between an observed and a rendered image.
pub fn image_loss(observed: &Image, rendered: &Image, gamma: f64) -> Result<f64> {
    let l = l1(observed, rendered)?;
    let s = if gamma != 0.0 {
        ssim(observed, rendered)?
    } else {
        1.0
    };
    Ok((1.0 - gamma) * l + gamma * (1.0 - s))
}

/// Blended loss and its gradient with respect to `rendered`.
pub fn image_loss_with_grad(
    observed: &Image,
    rendered: &Image,
    gamma: f64,
) -> Result<(f64, Image)> {
    let l = l1(observed, rendered)?;
    let n = rendered.data.len() as f64;
    let mut grad = Image::new(rendered.width, rendered.height, rendered.channels);
    for ((g, o), r) in grad.data.iter_mut().zip(&observed.data).zip(&rendered.data) {
        let d = r - o;
        let sign = if d > 0.0 {
            1.0
        } else if d < 0.0 {
            -1.0
        } else {
            0.0
        };
        *g = (1.0 - gamma) * sign / n;
    }
    let mut s = 1.0;
    if gamma != 0.0 {
        let (sv, sg) = ssim_with_grad(observed, rendered)?;
        s = sv;
        for (g, d) in grad.data.iter_mut().zip(&sg.data) {
            *g -= gamma * d;
        }
    }
    Ok(((1.0 - gamma) * l + gamma * (1.0 - s), grad))
}
