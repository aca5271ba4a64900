//! Text file formats: correspondence lists, 4x4 transforms, inlier masks.
//!
//! All three are line oriented. Lines starting with '#' are comments and
//! blank lines are skipped; everything else must parse, and errors carry
//! 1-based line numbers. Floats are written with Rust's shortest round-trip
//! formatting, so write-then-read reproduces values exactly.

use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;
use turboreg_core::{Correspondence, CorrespondenceSet, Point3, RigidTransform};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}:{line}: {msg}")]
    Line {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("{path}: {msg}")]
    File { path: String, msg: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

fn line_err(path: &Path, line: usize, msg: impl Into<String>) -> FormatError {
    FormatError::Line {
        path: path.display().to_string(),
        line,
        msg: msg.into(),
    }
}

fn file_err(path: &Path, msg: impl Into<String>) -> FormatError {
    FormatError::File {
        path: path.display().to_string(),
        msg: msg.into(),
    }
}

fn read_to_string(path: &Path) -> Result<String, FormatError> {
    std::fs::read_to_string(path).map_err(|source| FormatError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Non-comment, non-blank lines with their 1-based line numbers.
fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(k, l)| (k + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_reals(path: &Path, line: usize, text: &str, want: usize) -> Result<Vec<f64>, FormatError> {
    let mut vals = Vec::with_capacity(want);
    for tok in text.split_whitespace() {
        let v: f64 = tok
            .parse()
            .map_err(|_| line_err(path, line, format!("expected a real number, got {tok:?}")))?;
        if !v.is_finite() {
            return Err(line_err(path, line, format!("non-finite value {tok:?}")));
        }
        vals.push(v);
    }
    if vals.len() != want {
        return Err(line_err(
            path,
            line,
            format!("expected {want} values, got {}", vals.len()),
        ));
    }
    Ok(vals)
}

/// One correspondence per line: "sx sy sz tx ty tz" in meters.
pub fn read_correspondences(path: &Path) -> Result<CorrespondenceSet, FormatError> {
    let text = read_to_string(path)?;
    let mut corr = Vec::new();
    for (line, l) in data_lines(&text) {
        let v = parse_reals(path, line, l, 6)?;
        corr.push(Correspondence {
            source: Point3::new(v[0], v[1], v[2]),
            target: Point3::new(v[3], v[4], v[5]),
        });
    }
    CorrespondenceSet::new(corr).map_err(|e| file_err(path, e.to_string()))
}

pub fn correspondences_to_string(corr: &CorrespondenceSet) -> String {
    let mut out = String::from("# sx sy sz tx ty tz\n");
    for c in corr.iter() {
        let s = c.source;
        let t = c.target;
        let _ = writeln!(out, "{} {} {} {} {} {}", s.x, s.y, s.z, t.x, t.y, t.z);
    }
    out
}

/// A parsed transform plus whether the rotation block had to be re-projected
/// onto the rotation group to pass validation.
#[derive(Debug, Clone, Copy)]
pub struct ReadTransform {
    pub transform: RigidTransform,
    pub reprojected: bool,
}

/// Four data lines of four reals each, row-major homogeneous 4x4. A rotation
/// block that fails orthonormality by more than the strict tolerance is
/// projected back via the polar decomposition and flagged; bottom rows other
/// than "0 0 0 1" are rejected outright.
pub fn read_transform(path: &Path) -> Result<ReadTransform, FormatError> {
    let text = read_to_string(path)?;
    let mut rows: Vec<(usize, Vec<f64>)> = Vec::new();
    for (line, l) in data_lines(&text) {
        if rows.len() == 4 {
            return Err(line_err(path, line, "more than 4 matrix rows"));
        }
        rows.push((line, parse_reals(path, line, l, 4)?));
    }
    if rows.len() != 4 {
        return Err(file_err(
            path,
            format!("expected 4 matrix rows, got {}", rows.len()),
        ));
    }
    let mut m = [0.0f64; 16];
    for (r, (_, vals)) in rows.iter().enumerate() {
        m[4 * r..4 * r + 4].copy_from_slice(vals);
    }
    let (transform, reprojected) = RigidTransform::from_row_major_lenient(&m)
        .map_err(|e| line_err(path, rows[0].0, e.to_string()))?;
    Ok(ReadTransform {
        transform,
        reprojected,
    })
}

pub fn transform_to_string(t: &RigidTransform) -> String {
    let m = t.to_row_major();
    let mut out = String::new();
    for r in 0..4 {
        let _ = writeln!(out, "{} {} {} {}", m[4 * r], m[4 * r + 1], m[4 * r + 2], m[4 * r + 3]);
    }
    out
}

/// One 0/1 per line.
pub fn read_mask(path: &Path) -> Result<Vec<bool>, FormatError> {
    let text = read_to_string(path)?;
    let mut mask = Vec::new();
    for (line, l) in data_lines(&text) {
        match l {
            "0" => mask.push(false),
            "1" => mask.push(true),
            other => return Err(line_err(path, line, format!("expected 0 or 1, got {other:?}"))),
        }
    }
    if mask.is_empty() {
        return Err(file_err(path, "empty mask"));
    }
    Ok(mask)
}

pub fn mask_to_string(mask: &[bool]) -> String {
    let mut out = String::new();
    for &b in mask {
        out.push(if b { '1' } else { '0' });
        out.push('\n');
    }
    out
}
