//! Multi-view edge-consistency scoring and threshold pruning.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::{Point2, Point3};
use thiserror::Error;

use crate::edges::EdgeMask;
use crate::scene::{CameraView, GaussianPrimitive, ImageBuffer, PipelineConfig};
use crate::visibility::check_view;

#[derive(Debug, Error, PartialEq)]
pub enum PruneError {
    #[error("{views} views, {masks} masks and {depths} depth maps must agree")]
    CountMismatch {
        views: usize,
        masks: usize,
        depths: usize,
    },
    #[error("mask for view {view} is {mw}x{mh}, view is {vw}x{vh}")]
    MaskShape {
        view: u32,
        mw: usize,
        mh: usize,
        vw: u32,
        vh: u32,
    },
    #[error("duplicate primitive id {0}")]
    DuplicateId(u64),
}

/// `Π(P x̃)`, or `None` behind the camera or outside `[0, W−1] × [0, H−1]`.
pub fn project_point(x: &Point3<f64>, view: &CameraView) -> Option<Point2<f64>> {
    let xc = view.to_camera(x);
    if !(xc.z > 0.0) {
        return None;
    }
    let p = view.camera_to_pixel(&xc);
    view.in_bounds(&p).then_some(p)
}

/// `v_ij`: projects in bounds, lands on a mask pixel and passes the depth test.
pub fn edge_visibility(
    primitive: &GaussianPrimitive,
    view: &CameraView,
    mask: &EdgeMask,
    depth: &ImageBuffer,
    config: &PipelineConfig,
) -> bool {
    let Some(px) = project_point(&primitive.center, view) else {
        return false;
    };
    mask.at(px.x, px.y) && check_view(&primitive.center, view, depth, config).is_some()
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EdgeScoreTable {
    pub scores: BTreeMap<u64, f64>,
    pub per_view_hits: BTreeMap<u64, Vec<(u32, bool)>>,
    pub view_count: usize,
}

impl EdgeScoreTable {
    pub fn hit_count(&self, id: u64) -> usize {
        self.per_view_hits
            .get(&id)
            .map_or(0, |h| h.iter().filter(|(_, v)| *v).count())
    }

    /// `id e_i hit_count view_count` per line, ascending id.
    pub fn to_text(&self) -> String {
        let mut out = String::from("# id e_i hit_count view_count\n");
        for (id, e) in &self.scores {
            let _ = writeln!(out, "{id} {e} {} {}", self.hit_count(*id), self.view_count);
        }
        out
    }
}

/// `e_i = Σ_j v_ij / |views|` over all views.
pub fn score_all(
    primitives: &[GaussianPrimitive],
    views: &[CameraView],
    masks: &[EdgeMask],
    depths: &[ImageBuffer],
    config: &PipelineConfig,
) -> Result<EdgeScoreTable, PruneError> {
    if views.len() != masks.len() || views.len() != depths.len() {
        return Err(PruneError::CountMismatch {
            views: views.len(),
            masks: masks.len(),
            depths: depths.len(),
        });
    }
    for (v, m) in views.iter().zip(masks) {
        if m.mask.width() != v.width as usize || m.mask.height() != v.height as usize {
            return Err(PruneError::MaskShape {
                view: v.view_id,
                mw: m.mask.width(),
                mh: m.mask.height(),
                vw: v.width,
                vh: v.height,
            });
        }
    }
    let mut table = EdgeScoreTable {
        view_count: views.len(),
        ..Default::default()
    };
    for p in primitives {
        let hits: Vec<(u32, bool)> = views
            .iter()
            .zip(masks)
            .zip(depths)
            .map(|((v, m), d)| (v.view_id, edge_visibility(p, v, m, d, config)))
            .collect();
        let count = hits.iter().filter(|(_, h)| *h).count();
        let score = if views.is_empty() {
            0.0
        } else {
            count as f64 / views.len() as f64
        };
        if table.scores.insert(p.id, score).is_some() {
            return Err(PruneError::DuplicateId(p.id));
        }
        table.per_view_hits.insert(p.id, hits);
    }
    Ok(table)
}

/// Splits into `(kept, pruned)` with `pruned = { e_i < τ }`; ids missing
/// from the table score 0.
pub fn prune(
    primitives: &[GaussianPrimitive],
    table: &EdgeScoreTable,
    tau: f64,
) -> (Vec<GaussianPrimitive>, Vec<GaussianPrimitive>) {
    primitives
        .iter()
        .cloned()
        .partition(|p| table.scores.get(&p.id).copied().unwrap_or(0.0) >= tau)
}
