//! ASCII PLY export/import of Gaussian maps.
//!
//! Vertex properties, in order: `x y z scale_0 scale_1 scale_2 rot_0 rot_1
//! rot_2 rot_3 r g b opacity_logit`. Quaternions are `(w, x, y, z)`.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Vector3;

use super::gaussian::{GaussianMap, GaussianPrimitive};
use crate::error::{Result, TvgError};

const PROPERTIES: [&str; 14] = [
    "x",
    "y",
    "z",
    "scale_0",
    "scale_1",
    "scale_2",
    "rot_0",
    "rot_1",
    "rot_2",
    "rot_3",
    "r",
    "g",
    "b",
    "opacity_logit",
];

pub fn ply_string(map: &GaussianMap) -> String {
    let mut s = String::new();
    s.push_str("ply\nformat ascii 1.0\n");
    let _ = writeln!(s, "element vertex {}", map.len());
    for p in PROPERTIES {
        let _ = writeln!(s, "property double {p}");
    }
    s.push_str("end_header\n");
    for g in &map.primitives {
        let vals = [
            g.mean.x,
            g.mean.y,
            g.mean.z,
            g.scale.x,
            g.scale.y,
            g.scale.z,
            g.rotation[0],
            g.rotation[1],
            g.rotation[2],
            g.rotation[3],
            g.color.x,
            g.color.y,
            g.color.z,
            g.opacity_logit,
        ];
        let row: Vec<String> = vals.iter().map(|v| format!("{v}")).collect();
        s.push_str(&row.join(" "));
        s.push('\n');
    }
    s
}

pub fn write_ply(path: &Path, map: &GaussianMap) -> Result<()> {
    crate::pipeline::io::write_atomic(path, ply_string(map).as_bytes())
}

pub fn read_ply(path: &Path) -> Result<GaussianMap> {
    let text = std::fs::read_to_string(path).map_err(|e| TvgError::io(path, e))?;
    parse_ply(&text).map_err(|(line, msg)| TvgError::parse(path, line, msg))
}

fn parse_ply(text: &str) -> std::result::Result<GaussianMap, (usize, String)> {
    let mut lines = text.lines().enumerate();
    let mut count = None;
    let mut props = Vec::new();
    for (i, line) in lines.by_ref() {
        let line = line.trim();
        match line.split_whitespace().collect::<Vec<_>>().as_slice() {
            ["ply"] | ["format", "ascii", "1.0"] | ["comment", ..] => {}
            ["element", "vertex", n] => {
                count = Some(n.parse::<usize>().map_err(|e| (i + 1, e.to_string()))?);
            }
            ["property", _, name] => props.push(name.to_string()),
            ["end_header"] => break,
            _ => return Err((i + 1, format!("unexpected header line `{line}`"))),
        }
    }
    let count = count.ok_or((1, "missing vertex count".to_string()))?;
    if props != PROPERTIES {
        return Err((1, format!("unexpected vertex properties {props:?}")));
    }
    let mut prims = Vec::with_capacity(count);
    for (i, line) in lines.take(count) {
        let v: Vec<f64> = line
            .split_whitespace()
            .map(|t| t.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| (i + 1, e.to_string()))?;
        if v.len() != PROPERTIES.len() {
            return Err((
                i + 1,
                format!("expected {} values, found {}", PROPERTIES.len(), v.len()),
            ));
        }
        let g = GaussianPrimitive {
            mean: Vector3::new(v[0], v[1], v[2]),
            scale: Vector3::new(v[3], v[4], v[5]),
            rotation: [v[6], v[7], v[8], v[9]],
            color: Vector3::new(v[10], v[11], v[12]),
            opacity_logit: v[13],
        };
        if !g.is_finite() {
            return Err((i + 1, "non-finite value".to_string()));
        }
        prims.push(g);
    }
    if prims.len() != count {
        return Err((
            text.lines().count(),
            format!("expected {count} vertices, found {}", prims.len()),
        ));
    }
    Ok(GaussianMap::new(prims))
}
