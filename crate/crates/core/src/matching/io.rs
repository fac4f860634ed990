//! Match files: header `TVGM1 frame_a frame_b count pair_scale`, then one CSV
//! row `ua,va,ub,vb,Xa,Ya,Za,Xb,Yb,Zb,conf` per record. Floats are written in
//! shortest round-trip form, so save/load is lossless.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Vector2, Vector3};

use super::{MatchRecord, PairwiseMatchSet};
use crate::error::{Result, TvgError};

pub fn matches_string(set: &PairwiseMatchSet) -> String {
    let mut s = format!(
        "TVGM1 {} {} {} {}\n",
        set.frame_a,
        set.frame_b,
        set.records.len(),
        set.pair_scale
    );
    for r in &set.records {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.pixel_a.x,
            r.pixel_a.y,
            r.pixel_b.x,
            r.pixel_b.y,
            r.point_in_a.x,
            r.point_in_a.y,
            r.point_in_a.z,
            r.point_in_b.x,
            r.point_in_b.y,
            r.point_in_b.z,
            r.confidence
        );
    }
    s
}

pub fn save_matches(set: &PairwiseMatchSet, path: &Path) -> Result<()> {
    crate::pipeline::io::write_atomic(path, matches_string(set).as_bytes())
}

pub fn load_matches(path: &Path) -> Result<PairwiseMatchSet> {
    let text = std::fs::read_to_string(path).map_err(|e| TvgError::io(path, e))?;
    parse_matches(&text).map_err(|(line, msg)| TvgError::parse(path, line, msg))
}

/// Parses match-file text; errors carry the 1-based line number.
pub fn parse_matches(text: &str) -> std::result::Result<PairwiseMatchSet, (usize, String)> {
    let mut lines = text.lines();
    let header = lines.next().ok_or((1, "empty file".to_string()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 5 || fields[0] != "TVGM1" {
        return Err((1, format!("bad header `{header}`")));
    }
    let bad = |what: &str| (1, format!("bad {what} in header"));
    let frame_a: u32 = fields[1].parse().map_err(|_| bad("frame_a"))?;
    let frame_b: u32 = fields[2].parse().map_err(|_| bad("frame_b"))?;
    let count: usize = fields[3].parse().map_err(|_| bad("count"))?;
    let pair_scale: f64 = fields[4].parse().map_err(|_| bad("pair_scale"))?;
    if !(pair_scale.is_finite() && pair_scale > 0.0) {
        return Err(bad("pair_scale"));
    }
    let mut records = Vec::with_capacity(count);
    for (row, line) in lines.enumerate() {
        let lineno = row + 2;
        if line.trim().is_empty() {
            continue;
        }
        let v: Vec<f64> = line
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| (lineno, format!("row {row}: {e}")))?;
        if v.len() != 11 {
            return Err((
                lineno,
                format!("row {row}: expected 11 values, found {}", v.len()),
            ));
        }
        if let Some(i) = v.iter().position(|x| !x.is_finite()) {
            return Err((lineno, format!("row {row}: non-finite value in column {i}")));
        }
        if !(0.0..=1.0).contains(&v[10]) {
            return Err((
                lineno,
                format!("row {row}: confidence {} outside [0, 1]", v[10]),
            ));
        }
        records.push(MatchRecord {
            pixel_a: Vector2::new(v[0], v[1]),
            pixel_b: Vector2::new(v[2], v[3]),
            point_in_a: Vector3::new(v[4], v[5], v[6]),
            point_in_b: Vector3::new(v[7], v[8], v[9]),
            confidence: v[10],
        });
    }
    if records.len() != count {
        return Err((
            1,
            format!("header declares {count} rows, found {}", records.len()),
        ));
    }
    Ok(PairwiseMatchSet {
        frame_a,
        frame_b,
        records,
        pair_scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_lossless() {
        let set = PairwiseMatchSet {
            frame_a: 3,
            frame_b: 7,
            records: vec![MatchRecord {
                pixel_a: Vector2::new(1.0 / 3.0, 2.5),
                pixel_b: Vector2::new(0.1, 71.0),
                point_in_a: Vector3::new(-0.2, 1e-17, 4.0),
                point_in_b: Vector3::new(0.3, 0.2, 3.999999999),
                confidence: 0.75,
            }],
            pair_scale: 1.25,
        };
        assert_eq!(parse_matches(&matches_string(&set)).unwrap(), set);
    }

    #[test]
    fn empty_set_is_valid() {
        let set = PairwiseMatchSet::new(0, 1, vec![]);
        let text = matches_string(&set);
        assert_eq!(text, "TVGM1 0 1 0 1\n");
        assert_eq!(parse_matches(&text).unwrap(), set);
    }

    #[test]
    fn nan_row_is_rejected_with_index() {
        let text = "TVGM1 0 1 2 1\n1,1,1,1,0,0,1,0,0,1,0.5\n1,1,1,1,0,NaN,1,0,0,1,0.5\n";
        let (line, msg) = parse_matches(text).unwrap_err();
        assert_eq!(line, 3);
        assert!(msg.contains("row 1"), "{msg}");
    }
}
