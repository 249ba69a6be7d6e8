//! Field exchange formats.
//!
//! *Raw*: one line of JSON header, a newline, then little-endian `f64`
//! values in x-fastest order (vector components interleaved per cell).
//!
//! *VTK*: legacy `STRUCTURED_POINTS` ASCII with point data at the cell
//! centres. Values are printed with 17 significant digits so that reading a
//! file back reproduces every `f64` exactly. The frame is kept in the title
//! line; VTK itself has no notion of it.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Grid3, PatchFrame, ScalarField3, VectorField3};
use crate::error::{Error, Result};
use crate::linalg::Vec3;

pub const RAW_FORMAT: &str = "sliprelax-raw";
pub const RAW_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FieldKind {
    Scalar,
    Vector,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawHeader {
    pub format: String,
    pub version: u32,
    pub kind: FieldKind,
    pub grid: Grid3,
    pub frame: PatchFrame,
}

/// A field of either kind, as read from disk.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyField {
    Scalar(ScalarField3),
    Vector(VectorField3),
}

impl AnyField {
    pub fn into_scalar(self) -> Result<ScalarField3> {
        match self {
            AnyField::Scalar(f) => Ok(f),
            AnyField::Vector(_) => Err(Error::Format("expected a scalar field, found a vector field".into())),
        }
    }

    pub fn into_vector(self) -> Result<VectorField3> {
        match self {
            AnyField::Vector(f) => Ok(f),
            AnyField::Scalar(_) => Err(Error::Format("expected a vector field, found a scalar field".into())),
        }
    }
}

fn raw_bytes(header: &RawHeader, values: impl Iterator<Item = f64>) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec(header)?;
    out.push(b'\n');
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn encode_raw_scalar(f: &ScalarField3) -> Result<Vec<u8>> {
    let header = RawHeader {
        format: RAW_FORMAT.into(),
        version: RAW_VERSION,
        kind: FieldKind::Scalar,
        grid: f.grid().clone(),
        frame: *f.frame(),
    };
    raw_bytes(&header, f.values().iter().copied())
}

pub fn encode_raw_vector(f: &VectorField3) -> Result<Vec<u8>> {
    let header = RawHeader {
        format: RAW_FORMAT.into(),
        version: RAW_VERSION,
        kind: FieldKind::Vector,
        grid: f.grid().clone(),
        frame: *f.frame(),
    };
    raw_bytes(&header, f.values().iter().flatten().copied())
}

pub fn decode_raw(bytes: &[u8]) -> Result<AnyField> {
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Format("missing header line".into()))?;
    let header: RawHeader =
        serde_json::from_slice(&bytes[..nl]).map_err(|e| Error::Format(format!("bad header: {e}")))?;
    if header.format != RAW_FORMAT {
        return Err(Error::Format(format!("unknown format tag `{}`", header.format)));
    }
    if header.version != RAW_VERSION {
        return Err(Error::Format(format!("unsupported version {}", header.version)));
    }
    let body = &bytes[nl + 1..];
    let per_cell = match header.kind {
        FieldKind::Scalar => 1,
        FieldKind::Vector => 3,
    };
    let want = header.grid.len() * per_cell * 8;
    if body.len() != want {
        return Err(Error::Format(format!("payload has {} bytes, expected {want}", body.len())));
    }
    let values: Vec<f64> = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Ok(match header.kind {
        FieldKind::Scalar => AnyField::Scalar(ScalarField3::new(header.grid, header.frame, values)?),
        FieldKind::Vector => {
            let v = values.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
            AnyField::Vector(VectorField3::new(header.grid, header.frame, v)?)
        }
    })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

pub fn write_raw_scalar(path: &Path, f: &ScalarField3) -> Result<()> {
    write_file(path, &encode_raw_scalar(f)?)
}

pub fn write_raw_vector(path: &Path, f: &VectorField3) -> Result<()> {
    write_file(path, &encode_raw_vector(f)?)
}

pub fn read_raw(path: &Path) -> Result<AnyField> {
    decode_raw(&fs::read(path).map_err(|e| Error::io(path, e))?)
}

fn vtk_header(out: &mut String, grid: &Grid3, frame: &PatchFrame) {
    let n = grid.resolution();
    let h = grid.spacing();
    let o = grid.origin();
    let fmt3 = |v: Vec3| format!("{:.16e} {:.16e} {:.16e}", v[0], v[1], v[2]);
    out.push_str("# vtk DataFile Version 3.0\n");
    let _ = writeln!(
        out,
        "sliprelax frame e1={} e2={} e3={}",
        fmt3(frame.e1()),
        fmt3(frame.e2()),
        fmt3(frame.e3())
    );
    out.push_str("ASCII\nDATASET STRUCTURED_POINTS\n");
    let _ = writeln!(out, "DIMENSIONS {} {} {}", n[0], n[1], n[2]);
    let _ = writeln!(out, "ORIGIN {}", fmt3([o[0] + 0.5 * h[0], o[1] + 0.5 * h[1], o[2] + 0.5 * h[2]]));
    let _ = writeln!(out, "SPACING {}", fmt3(h));
    let _ = writeln!(out, "POINT_DATA {}", grid.len());
}

fn check_name(name: &str) -> Result<()> {
    if name.is_empty() || name.chars().any(char::is_whitespace) {
        return Err(Error::param("name", "VTK array names must be non-empty without whitespace"));
    }
    Ok(())
}

pub fn vtk_scalar_string(f: &ScalarField3, name: &str) -> Result<String> {
    check_name(name)?;
    let mut out = String::with_capacity(f.values().len() * 25 + 512);
    vtk_header(&mut out, f.grid(), f.frame());
    let _ = writeln!(out, "SCALARS {name} double 1\nLOOKUP_TABLE default");
    for v in f.values() {
        let _ = writeln!(out, "{v:.16e}");
    }
    Ok(out)
}

pub fn vtk_vector_string(f: &VectorField3, name: &str) -> Result<String> {
    check_name(name)?;
    let mut out = String::with_capacity(f.values().len() * 75 + 512);
    vtk_header(&mut out, f.grid(), f.frame());
    let _ = writeln!(out, "VECTORS {name} double");
    for v in f.values() {
        let _ = writeln!(out, "{:.16e} {:.16e} {:.16e}", v[0], v[1], v[2]);
    }
    Ok(out)
}

pub fn write_vtk_scalar(path: &Path, f: &ScalarField3, name: &str) -> Result<()> {
    write_file(path, vtk_scalar_string(f, name)?.as_bytes())
}

pub fn write_vtk_vector(path: &Path, f: &VectorField3, name: &str) -> Result<()> {
    write_file(path, vtk_vector_string(f, name)?.as_bytes())
}

fn parse_f64(tok: Option<&str>, what: &str) -> Result<f64> {
    tok.ok_or_else(|| Error::Format(format!("missing {what}")))?
        .parse::<f64>()
        .map_err(|e| Error::Format(format!("bad {what}: {e}")))
}

fn parse_vec3<'a>(it: &mut impl Iterator<Item = &'a str>, what: &str) -> Result<Vec3> {
    Ok([parse_f64(it.next(), what)?, parse_f64(it.next(), what)?, parse_f64(it.next(), what)?])
}

/// Reads back a file written by [`write_vtk_scalar`] or [`write_vtk_vector`].
pub fn parse_vtk(text: &str) -> Result<(String, AnyField)> {
    let mut lines = text.lines();
    let magic = lines.next().unwrap_or_default();
    if !magic.starts_with("# vtk DataFile") {
        return Err(Error::Format("not a legacy VTK file".into()));
    }
    let title = lines.next().unwrap_or_default();
    let frame = match title.split_once("frame ") {
        Some((_, rest)) => {
            let cleaned = rest.replace("e1=", "").replace("e2=", "").replace("e3=", "");
            let mut it = cleaned.split_whitespace();
            PatchFrame::new(
                parse_vec3(&mut it, "e1")?,
                parse_vec3(&mut it, "e2")?,
                parse_vec3(&mut it, "e3")?,
            )?
        }
        None => PatchFrame::identity(),
    };
    let mut dims = None;
    let mut origin = None;
    let mut spacing = None;
    let mut rest = lines;
    let (name, kind) = loop {
        let line = rest
            .next()
            .ok_or_else(|| Error::Format("no SCALARS/VECTORS section".into()))?;
        let mut it = line.split_whitespace();
        match it.next() {
            Some("DIMENSIONS") => {
                let mut d = [0usize; 3];
                for v in d.iter_mut() {
                    *v = it
                        .next()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| Error::Format("bad DIMENSIONS".into()))?;
                }
                dims = Some(d);
            }
            Some("ORIGIN") => origin = Some(parse_vec3(&mut it, "ORIGIN")?),
            Some("SPACING") => spacing = Some(parse_vec3(&mut it, "SPACING")?),
            Some("SCALARS") => {
                let name = it.next().unwrap_or("field").to_string();
                // LOOKUP_TABLE line
                rest.next();
                break (name, FieldKind::Scalar);
            }
            Some("VECTORS") => break (it.next().unwrap_or("field").to_string(), FieldKind::Vector),
            _ => {}
        }
    };
    let (d, o, h) = match (dims, origin, spacing) {
        (Some(d), Some(o), Some(h)) => (d, o, h),
        _ => return Err(Error::Format("missing DIMENSIONS/ORIGIN/SPACING".into())),
    };
    let extents = [d[0] as f64 * h[0], d[1] as f64 * h[1], d[2] as f64 * h[2]];
    let lower = [o[0] - 0.5 * h[0], o[1] - 0.5 * h[1], o[2] - 0.5 * h[2]];
    let grid = Grid3::new(extents, d, lower)?;
    let mut nums = Vec::with_capacity(grid.len() * 3);
    for line in rest {
        for tok in line.split_whitespace() {
            nums.push(parse_f64(Some(tok), "value")?);
        }
    }
    let field = match kind {
        FieldKind::Scalar => AnyField::Scalar(ScalarField3::new(grid, frame, nums)?),
        FieldKind::Vector => {
            if nums.len() % 3 != 0 {
                return Err(Error::Format("vector data is not a multiple of 3".into()));
            }
            let v = nums.chunks_exact(3).map(|c| [c[0], c[1], c[2]]).collect();
            AnyField::Vector(VectorField3::new(grid, frame, v)?)
        }
    };
    Ok((name, field))
}

pub fn read_vtk(path: &Path) -> Result<(String, AnyField)> {
    parse_vtk(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}
