//! TUM trajectory text: `timestamp tx ty tz qx qy qz qw`, world-from-camera.

use std::fmt::Write;
use std::path::Path;

use nalgebra::Vector3;

use crate::error::{Result, TvgError};
use crate::geom::Pose;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Trajectory {
    pub timestamps: Vec<f64>,
    pub poses: Vec<Pose>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.poses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.poses.is_empty()
    }
}

pub fn tum_string(traj: &Trajectory) -> String {
    let mut s = String::new();
    for (t, p) in traj.timestamps.iter().zip(&traj.poses) {
        let [qx, qy, qz, qw] = p.quaternion();
        let c = &p.translation;
        let _ = writeln!(s, "{t} {} {} {} {qx} {qy} {qz} {qw}", c.x, c.y, c.z);
    }
    s
}

/// Seven numbers `tx ty tz qx qy qz qw` to a pose. The quaternion is normalized.
pub fn parse_pose(text: &str) -> std::result::Result<Pose, String> {
    let v: Vec<f64> = text
        .split_whitespace()
        .map(|f| f.parse::<f64>().map_err(|_| format!("bad number `{f}`")))
        .collect::<std::result::Result<_, _>>()?;
    if v.len() != 7 {
        return Err(format!("expected 7 numbers, found {}", v.len()));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err("non-finite value".into());
    }
    if (v[3] * v[3] + v[4] * v[4] + v[5] * v[5] + v[6] * v[6]) < 1e-24 {
        return Err("zero quaternion".into());
    }
    Ok(Pose::from_quaternion(
        Vector3::new(v[0], v[1], v[2]),
        v[3],
        v[4],
        v[5],
        v[6],
    ))
}

/// Blank lines and `#` comments are skipped. Errors carry 1-based line numbers.
pub fn parse_tum(text: &str) -> std::result::Result<Trajectory, (usize, String)> {
    let mut traj = Trajectory::default();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (stamp, rest) = line
            .split_once(char::is_whitespace)
            .ok_or((i + 1, "expected 8 fields".to_string()))?;
        let t: f64 = stamp
            .parse()
            .map_err(|_| (i + 1, format!("bad timestamp `{stamp}`")))?;
        let pose = parse_pose(rest).map_err(|m| (i + 1, m))?;
        traj.timestamps.push(t);
        traj.poses.push(pose);
    }
    Ok(traj)
}

pub fn read_tum(path: &Path) -> Result<Trajectory> {
    let text = std::fs::read_to_string(path).map_err(|e| TvgError::io(path, e))?;
    parse_tum(&text).map_err(|(line, m)| TvgError::parse(path, line, m))
}

pub fn write_tum(path: &Path, traj: &Trajectory) -> Result<()> {
    super::io::write_atomic(path, tum_string(traj).as_bytes())
}
