//! Text and binary file formats for scene assets.
//!
//! Floats in text formats are written with Rust's shortest round-trip
//! formatting, so every format reproduces finite inputs bit-identically.

use std::fmt::Write as _;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{Matrix3, Point3, Vector3};
use thiserror::Error;

use crate::scene::{CameraView, GaussianPrimitive, ImageBuffer, TriangleMesh};

#[derive(Debug, Error)]
pub enum FormatError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("raster: {0}")]
    Raster(String),
}

fn parse_err(line: usize, message: impl Into<String>) -> FormatError {
    FormatError::Parse {
        line,
        message: message.into(),
    }
}

fn floats(line: usize, tokens: &[&str]) -> Result<Vec<f64>, FormatError> {
    tokens
        .iter()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| parse_err(line, format!("bad number `{t}`")))
        })
        .collect()
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let line = raw.split('#').next().unwrap_or("").trim();
        (!line.is_empty()).then_some((i + 1, line))
    })
}

// ---------------------------------------------------------------- primitives

/// `id cx cy cz s11 s12 s13 s22 s23 s33 alpha r g b nx ny nz`
pub fn primitives_to_string(prims: &[GaussianPrimitive]) -> String {
    let mut out = String::from("# id cx cy cz s11 s12 s13 s22 s23 s33 alpha r g b nx ny nz\n");
    for p in prims {
        let s = &p.covariance;
        let _ = writeln!(
            out,
            "{} {} {} {} {} {} {} {} {} {} {} {} {} {} {} {} {}",
            p.id,
            p.center.x,
            p.center.y,
            p.center.z,
            s[(0, 0)],
            s[(0, 1)],
            s[(0, 2)],
            s[(1, 1)],
            s[(1, 2)],
            s[(2, 2)],
            p.opacity,
            p.color.x,
            p.color.y,
            p.color.z,
            p.normal.x,
            p.normal.y,
            p.normal.z
        );
    }
    out
}

pub fn parse_primitives(text: &str) -> Result<Vec<GaussianPrimitive>, FormatError> {
    content_lines(text)
        .map(|(n, line)| {
            let tokens: Vec<&str> = line.split_whitespace().collect();
            if tokens.len() != 17 {
                return Err(parse_err(
                    n,
                    format!("expected 17 fields, got {}", tokens.len()),
                ));
            }
            let id = tokens[0]
                .parse::<u64>()
                .map_err(|_| parse_err(n, format!("bad id `{}`", tokens[0])))?;
            let v = floats(n, &tokens[1..])?;
            #[rustfmt::skip]
            let covariance = Matrix3::new(
                v[3], v[4], v[5],
                v[4], v[6], v[7],
                v[5], v[7], v[8],
            );
            Ok(GaussianPrimitive {
                id,
                center: Point3::new(v[0], v[1], v[2]),
                covariance,
                opacity: v[9],
                color: Vector3::new(v[10], v[11], v[12]),
                normal: Vector3::new(v[13], v[14], v[15]),
            })
        })
        .collect()
}

pub fn write_primitives(path: &Path, prims: &[GaussianPrimitive]) -> Result<(), FormatError> {
    fs::write(path, primitives_to_string(prims))?;
    Ok(())
}

pub fn read_primitives(path: &Path) -> Result<Vec<GaussianPrimitive>, FormatError> {
    parse_primitives(&fs::read_to_string(path)?)
}

// ------------------------------------------------------------------- cameras

/// One `[view]` block per camera, `key = value` lines inside.
pub fn cameras_to_string(views: &[CameraView]) -> String {
    let mut out = String::new();
    for v in views {
        let r = &v.rotation;
        let t = &v.translation;
        let _ = writeln!(out, "[view]");
        let _ = writeln!(out, "view_id = {}", v.view_id);
        let _ = writeln!(out, "width = {}", v.width);
        let _ = writeln!(out, "height = {}", v.height);
        let _ = writeln!(out, "fx = {}", v.fx());
        let _ = writeln!(out, "fy = {}", v.fy());
        let _ = writeln!(out, "cx = {}", v.cx());
        let _ = writeln!(out, "cy = {}", v.cy());
        if v.skew() != 0.0 {
            let _ = writeln!(out, "skew = {}", v.skew());
        }
        let _ = writeln!(
            out,
            "rotation = {} {} {} {} {} {} {} {} {}",
            r[(0, 0)],
            r[(0, 1)],
            r[(0, 2)],
            r[(1, 0)],
            r[(1, 1)],
            r[(1, 2)],
            r[(2, 0)],
            r[(2, 1)],
            r[(2, 2)]
        );
        let _ = writeln!(out, "translation = {} {} {}", t.x, t.y, t.z);
        out.push('\n');
    }
    out
}

#[derive(Default)]
struct ViewDraft {
    start: usize,
    view_id: Option<u32>,
    width: Option<u32>,
    height: Option<u32>,
    fx: Option<f64>,
    fy: Option<f64>,
    cx: Option<f64>,
    cy: Option<f64>,
    skew: f64,
    rotation: Option<Matrix3<f64>>,
    translation: Option<Vector3<f64>>,
}

impl ViewDraft {
    fn finish(self) -> Result<CameraView, FormatError> {
        let line = self.start;
        let missing = |k: &str| parse_err(line, format!("view block missing `{k}`"));
        let mut view = CameraView::from_pinhole(
            self.view_id.ok_or_else(|| missing("view_id"))?,
            (
                self.fx.ok_or_else(|| missing("fx"))?,
                self.fy.ok_or_else(|| missing("fy"))?,
                self.cx.ok_or_else(|| missing("cx"))?,
                self.cy.ok_or_else(|| missing("cy"))?,
            ),
            self.rotation.ok_or_else(|| missing("rotation"))?,
            self.translation.ok_or_else(|| missing("translation"))?,
            self.width.ok_or_else(|| missing("width"))?,
            self.height.ok_or_else(|| missing("height"))?,
        );
        view.intrinsics[(0, 1)] = self.skew;
        Ok(view)
    }
}

pub fn parse_cameras(text: &str) -> Result<Vec<CameraView>, FormatError> {
    let mut views = Vec::new();
    let mut draft: Option<ViewDraft> = None;
    for (n, line) in content_lines(text) {
        if line == "[view]" {
            if let Some(d) = draft.take() {
                views.push(d.finish()?);
            }
            draft = Some(ViewDraft {
                start: n,
                ..Default::default()
            });
            continue;
        }
        let d = draft
            .as_mut()
            .ok_or_else(|| parse_err(n, "key outside a [view] block"))?;
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| parse_err(n, "expected `key = value`"))?;
        let (k, v) = (k.trim(), v.trim());
        let int = || {
            v.parse::<u32>()
                .map_err(|_| parse_err(n, format!("bad integer `{v}`")))
        };
        let vals = || floats(n, &v.split_whitespace().collect::<Vec<_>>());
        let one = || -> Result<f64, FormatError> {
            match vals()?.as_slice() {
                [x] => Ok(*x),
                _ => Err(parse_err(n, format!("`{k}` expects one number"))),
            }
        };
        match k {
            "view_id" => d.view_id = Some(int()?),
            "width" => d.width = Some(int()?),
            "height" => d.height = Some(int()?),
            "fx" => d.fx = Some(one()?),
            "fy" => d.fy = Some(one()?),
            "cx" => d.cx = Some(one()?),
            "cy" => d.cy = Some(one()?),
            "skew" => d.skew = one()?,
            "rotation" => {
                let r = vals()?;
                if r.len() != 9 {
                    return Err(parse_err(n, "rotation expects 9 numbers"));
                }
                d.rotation = Some(Matrix3::from_row_slice(&r));
            }
            "translation" => {
                let t = vals()?;
                if t.len() != 3 {
                    return Err(parse_err(n, "translation expects 3 numbers"));
                }
                d.translation = Some(Vector3::from_row_slice(&t));
            }
            other => return Err(parse_err(n, format!("unknown camera key `{other}`"))),
        }
    }
    if let Some(d) = draft {
        views.push(d.finish()?);
    }
    Ok(views)
}

pub fn write_cameras(path: &Path, views: &[CameraView]) -> Result<(), FormatError> {
    fs::write(path, cameras_to_string(views))?;
    Ok(())
}

pub fn read_cameras(path: &Path) -> Result<Vec<CameraView>, FormatError> {
    parse_cameras(&fs::read_to_string(path)?)
}

// ------------------------------------------------------------------- rasters

pub const RASTER_MAGIC: &[u8; 4] = b"SFR1";

pub fn encode_raster(img: &ImageBuffer) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + img.data().len() * 4);
    out.extend_from_slice(RASTER_MAGIC);
    for d in [img.width(), img.height(), img.channels()] {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for v in img.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_raster(bytes: &[u8]) -> Result<ImageBuffer, FormatError> {
    if bytes.len() < 16 || &bytes[..4] != RASTER_MAGIC {
        return Err(FormatError::Raster("missing SFR1 header".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap()) as usize;
    let (w, h, c) = (word(4), word(8), word(12));
    let body = &bytes[16..];
    let expected = w
        .checked_mul(h)
        .and_then(|n| n.checked_mul(c))
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| FormatError::Raster("dimensions overflow".into()))?;
    if body.len() != expected {
        return Err(FormatError::Raster(format!(
            "payload is {} bytes, expected {expected}",
            body.len()
        )));
    }
    let data = body
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect();
    ImageBuffer::from_vec(w, h, c, data).map_err(|e| FormatError::Raster(e.to_string()))
}

pub fn write_raster(path: &Path, img: &ImageBuffer) -> Result<(), FormatError> {
    let mut f = fs::File::create(path)?;
    f.write_all(&encode_raster(img))?;
    Ok(())
}

pub fn read_raster(path: &Path) -> Result<ImageBuffer, FormatError> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode_raster(&bytes)
}

/// Binary PGM of channel 0, linearly mapped from `[lo, hi]` to `0..=255`.
pub fn write_pgm(path: &Path, img: &ImageBuffer, lo: f32, hi: f32) -> Result<(), FormatError> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    let span = if hi > lo { hi - lo } else { 1.0 };
    for y in 0..img.height() {
        for x in 0..img.width() {
            let v = ((img.get(x, y, 0) - lo) / span).clamp(0.0, 1.0);
            out.push((v * 255.0).round() as u8);
        }
    }
    fs::write(path, out)?;
    Ok(())
}

// ---------------------------------------------------------------------- OBJ

pub fn mesh_to_obj(mesh: &TriangleMesh) -> String {
    let mut out = String::new();
    for v in &mesh.vertices {
        let _ = writeln!(out, "v {} {} {}", v.x, v.y, v.z);
    }
    for t in &mesh.triangles {
        let _ = writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
    }
    out
}

/// Reads `v` and `f` records; polygons are fan-triangulated and `v/vt/vn`
/// index forms are accepted. Other records are ignored.
pub fn parse_obj(text: &str) -> Result<TriangleMesh, FormatError> {
    let mut mesh = TriangleMesh::default();
    for (n, line) in content_lines(text) {
        let mut tokens = line.split_whitespace();
        match tokens.next() {
            Some("v") => {
                let v = floats(n, &tokens.take(3).collect::<Vec<_>>())?;
                if v.len() != 3 {
                    return Err(parse_err(n, "vertex needs 3 coordinates"));
                }
                mesh.vertices.push(Point3::new(v[0], v[1], v[2]));
            }
            Some("f") => {
                let idx: Vec<usize> = tokens
                    .map(|t| {
                        let first = t.split('/').next().unwrap_or("");
                        let i: i64 = first
                            .parse()
                            .map_err(|_| parse_err(n, format!("bad face index `{t}`")))?;
                        let count = mesh.vertices.len() as i64;
                        let resolved = if i < 0 { count + i } else { i - 1 };
                        if resolved < 0 || resolved >= count {
                            return Err(parse_err(n, format!("face index {i} out of range")));
                        }
                        Ok(resolved as usize)
                    })
                    .collect::<Result<_, _>>()?;
                if idx.len() < 3 {
                    return Err(parse_err(n, "face needs at least 3 vertices"));
                }
                for k in 1..idx.len() - 1 {
                    mesh.triangles.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    Ok(mesh)
}

pub fn write_obj(path: &Path, mesh: &TriangleMesh) -> Result<(), FormatError> {
    fs::write(path, mesh_to_obj(mesh))?;
    Ok(())
}

pub fn read_obj(path: &Path) -> Result<TriangleMesh, FormatError> {
    parse_obj(&fs::read_to_string(path)?)
}
