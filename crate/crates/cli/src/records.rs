//! Text formats for the intermediate tables the stages exchange.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use lightmesh_core::synthetic::PrimitiveSample;
use lightmesh_core::visibility::{ViewHit, VisibilityRecord};
use nalgebra::Point2;

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, raw)| {
        let line = raw.split('#').next().unwrap_or("").trim();
        (!line.is_empty()).then_some((i + 1, line))
    })
}

fn num<T: std::str::FromStr>(line: usize, tok: Option<&str>) -> Result<T, String> {
    let tok = tok.ok_or_else(|| format!("line {line}: missing field"))?;
    tok.parse()
        .map_err(|_| format!("line {line}: bad number `{tok}`"))
}

/// `point_id view_id px py d_exp d_img`, one line per accepted pair;
/// points with no accepted view appear as `point_id -`.
pub fn visibility_to_string(records: &[VisibilityRecord]) -> String {
    let mut out = String::from("# point_id view_id px py d_exp d_img\n");
    for r in records {
        if r.visible_views.is_empty() {
            let _ = writeln!(out, "{} -", r.point_id);
        }
        for h in &r.visible_views {
            let _ = writeln!(
                out,
                "{} {} {} {} {} {}",
                r.point_id, h.view_id, h.pixel.x, h.pixel.y, h.d_exp, h.d_img
            );
        }
    }
    out
}

pub fn parse_visibility(text: &str) -> Result<Vec<VisibilityRecord>, String> {
    let mut records: Vec<VisibilityRecord> = Vec::new();
    for (n, line) in content_lines(text) {
        let mut t = line.split_whitespace();
        let point_id: usize = num(n, t.next())?;
        let rec = match records.last_mut() {
            Some(r) if r.point_id == point_id => r,
            _ => {
                if records.last().is_some_and(|r| r.point_id > point_id) {
                    return Err(format!("line {n}: point ids must be non-decreasing"));
                }
                records.push(VisibilityRecord {
                    point_id,
                    visible_views: Vec::new(),
                });
                records.last_mut().unwrap()
            }
        };
        let view = t.next();
        if view == Some("-") {
            continue;
        }
        rec.visible_views.push(ViewHit {
            view_id: num(n, view)?,
            pixel: Point2::new(num(n, t.next())?, num(n, t.next())?),
            d_exp: num(n, t.next())?,
            d_img: num(n, t.next())?,
        });
    }
    Ok(records)
}

/// Reads the `id e_i ...` table written by the score stage.
pub fn parse_scores(text: &str) -> Result<BTreeMap<u64, f64>, String> {
    let mut scores = BTreeMap::new();
    for (n, line) in content_lines(text) {
        let mut t = line.split_whitespace();
        let id: u64 = num(n, t.next())?;
        let e: f64 = num(n, t.next())?;
        if scores.insert(id, e).is_some() {
            return Err(format!("line {n}: duplicate id {id}"));
        }
    }
    Ok(scores)
}

/// Id blocks of a generated primitive set.
pub fn sample_to_string(s: &PrimitiveSample) -> String {
    format!(
        "surface_count = {}\nedge_count = {}\nclutter_count = {}\n",
        s.surface_count, s.edge_count, s.clutter_count
    )
}

/// `(surface, edge, clutter)` counts.
pub fn parse_sample(text: &str) -> Result<(usize, usize, usize), String> {
    let mut map = BTreeMap::new();
    for (n, line) in content_lines(text) {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| format!("line {n}: expected `key = value`"))?;
        map.insert(k.trim().to_string(), num::<usize>(n, Some(v.trim()))?);
    }
    let get = |k: &str| map.get(k).copied().ok_or_else(|| format!("missing `{k}`"));
    Ok((
        get("surface_count")?,
        get("edge_count")?,
        get("clutter_count")?,
    ))
}
