//! Python bindings: run a simulated sequence end to end, plus the small
//! geometric building blocks that are handy from notebooks.

use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use tvg_core::geom::{procrustes_align, Pose, Twist};
use tvg_core::mapping::triview_uncertainty;
use tvg_core::pipeline::{
    config_string, parse_config, run_slam, tum_string, write_outputs, RunConfig,
};
use tvg_core::tracking::{dart_weight, DartConfig};
use tvg_core::TvgError;

fn py_err(e: TvgError) -> PyErr {
    match e {
        TvgError::Config(_) | TvgError::Parse { .. } => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn rows(m: &Matrix3<f64>) -> [[f64; 3]; 3] {
    [0, 1, 2].map(|r| [m[(r, 0)], m[(r, 1)], m[(r, 2)]])
}

fn points(v: &[[f64; 3]]) -> Vec<Vector3<f64>> {
    v.iter().map(|p| Vector3::from(*p)).collect()
}

/// Default run configuration as TOML text.
#[pyfunction]
fn default_config() -> PyResult<String> {
    config_string(&RunConfig::default()).map_err(py_err)
}

/// Runs a sequence. `config` is TOML text; omitted keys keep their defaults.
/// When `out_dir` is given the trajectory, map and logs are written there.
#[pyfunction]
#[pyo3(signature = (config=None, out_dir=None))]
fn run<'py>(
    py: Python<'py>,
    config: Option<&str>,
    out_dir: Option<&str>,
) -> PyResult<Bound<'py, PyDict>> {
    let cfg = match config {
        Some(text) => parse_config(text, Path::new("<python>")).map_err(py_err)?,
        None => RunConfig::default(),
    };
    let out = py.detach(|| run_slam(&cfg)).map_err(py_err)?;
    if let Some(dir) = out_dir {
        write_outputs(&out, Path::new(dir)).map_err(py_err)?;
    }
    let d = PyDict::new(py);
    d.set_item("frames", out.trajectory.poses.len())?;
    d.set_item("keyframes", out.keyframes.len())?;
    d.set_item("primitives", out.map.len())?;
    d.set_item("trajectory_tum", tum_string(&out.trajectory))?;
    d.set_item("failure", out.failure.as_ref().map(|e| e.to_string()))?;
    if let Some(r) = &out.report {
        d.set_item("ate_rmse", r.ate_rmse)?;
        d.set_item("rpe_trans", r.rpe_trans)?;
        d.set_item("rpe_rot_deg", r.rpe_rot.to_degrees())?;
        d.set_item("psnr", r.psnr_mean)?;
        d.set_item("ssim", r.ssim_mean)?;
    }
    Ok(d)
}

/// Photometric weight after `frames` frames without a map update.
#[pyfunction]
#[pyo3(signature = (frames, w_min=0.1, w_max=1.0, n_m=5.0, k=0.8))]
fn photometric_weight(frames: u32, w_min: f64, w_max: f64, n_m: f64, k: f64) -> f64 {
    let cfg = DartConfig {
        enabled: true,
        w_min,
        w_max,
        n_m,
        k,
    };
    dart_weight(frames, &cfg)
}

/// Mean squared distance of the samples to their centroid.
#[pyfunction]
fn triview_variance(samples: Vec<[f64; 3]>) -> PyResult<f64> {
    Ok(triview_uncertainty(&points(&samples))
        .map_err(py_err)?
        .variance)
}

/// Similarity (or rigid, with `with_scale=False`) transform taking `src` onto
/// `dst`, as `(scale, rotation rows, translation)`.
#[pyfunction]
#[pyo3(signature = (src, dst, with_scale=true))]
fn procrustes(
    src: Vec<[f64; 3]>,
    dst: Vec<[f64; 3]>,
    with_scale: bool,
) -> PyResult<(f64, [[f64; 3]; 3], [f64; 3])> {
    let t = procrustes_align(&points(&src), &points(&dst), with_scale).map_err(py_err)?;
    Ok((t.scale, rows(&t.rotation), t.translation.into()))
}

/// SE(3) exponential of `(ω, v)`, returned as `(rotation rows, translation)`.
#[pyfunction]
fn se3_exp(twist: [f64; 6]) -> ([[f64; 3]; 3], [f64; 3]) {
    let p = Pose::exp(&Twist::from(twist));
    (rows(&p.rotation), p.translation.into())
}

/// Inverse of [`se3_exp`].
#[pyfunction]
fn se3_log(rotation: [[f64; 3]; 3], translation: [f64; 3]) -> [f64; 6] {
    let p = Pose {
        rotation: Matrix3::from_fn(|r, c| rotation[r][c]),
        translation: Vector3::from(translation),
    };
    p.log().into()
}

#[pymodule]
fn tvg(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(default_config, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(photometric_weight, m)?)?;
    m.add_function(wrap_pyfunction!(triview_variance, m)?)?;
    m.add_function(wrap_pyfunction!(procrustes, m)?)?;
    m.add_function(wrap_pyfunction!(se3_exp, m)?)?;
    m.add_function(wrap_pyfunction!(se3_log, m)?)?;
    Ok(())
}
