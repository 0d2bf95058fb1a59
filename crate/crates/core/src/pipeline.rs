//! In-memory stage functions and the end-to-end run.
//!
//! Depth maps for scoring and visibility are rendered from the full
//! primitive set; the ground-truth rasters are only used for evaluation.

use std::time::Instant;

use nalgebra::Point3;
use thiserror::Error;

use crate::edges::{extract_masks, EdgeError, EdgeMask};
use crate::eval::{rmse, EvalError, EvalReport};
use crate::meshing::{
    accumulate_ray_costs, extract_surface, geometric_costs, postfilter_edges,
    repair_singular_edges, solve_mincut, tetrahedralize, LabeledTetMesh, MeshingError,
};
use crate::pruning::{prune, score_all, EdgeScoreTable, PruneError};
use crate::render::render_maps;
use crate::scene::{
    CameraView, ConfigError, GaussianPrimitive, ImageBuffer, PipelineConfig, TriangleMesh,
};
use crate::synthetic::{generate_scene, SceneAssets, SceneSpec, SyntheticError};
use crate::visibility::{validate_visibility, VisibilityError, VisibilityRecord};

#[derive(Debug, Error, PartialEq)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Synthetic(#[from] SyntheticError),
    #[error(transparent)]
    Edge(#[from] EdgeError),
    #[error(transparent)]
    Prune(#[from] PruneError),
    #[error(transparent)]
    Visibility(#[from] VisibilityError),
    #[error(transparent)]
    Meshing(#[from] MeshingError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

impl PipelineError {
    /// Stage that raised the error, as used in CLI error lines.
    pub fn stage(&self) -> &'static str {
        match self {
            Self::Config(_) => "config",
            Self::Synthetic(_) => "gen",
            Self::Edge(_) => "masks",
            Self::Prune(_) => "score",
            Self::Visibility(_) => "visibility",
            Self::Meshing(_) => "mesh",
            Self::Eval(_) => "eval",
        }
    }

    pub fn kind(&self) -> String {
        let dbg = match self {
            Self::Config(e) => format!("{e:?}"),
            Self::Synthetic(e) => format!("{e:?}"),
            Self::Edge(e) => format!("{e:?}"),
            Self::Prune(e) => format!("{e:?}"),
            Self::Visibility(e) => format!("{e:?}"),
            Self::Meshing(e) => format!("{e:?}"),
            Self::Eval(e) => format!("{e:?}"),
        };
        dbg.split(|c: char| !c.is_alphanumeric())
            .next()
            .unwrap_or("")
            .to_string()
    }
}

/// Depth maps rendered from `primitives`, one per view.
pub fn render_depths(
    primitives: &[GaussianPrimitive],
    views: &[CameraView],
    config: &PipelineConfig,
) -> Vec<ImageBuffer> {
    views
        .iter()
        .map(|v| render_maps(primitives, v, config).depth)
        .collect()
}

pub fn masks_stage(
    primitives: &[GaussianPrimitive],
    views: &[CameraView],
    config: &PipelineConfig,
) -> Result<Vec<EdgeMask>, PipelineError> {
    Ok(extract_masks(primitives, views, config)?)
}

/// Scores and prunes, repeating `prune_passes` times on the survivors.
pub fn prune_stage(
    primitives: &[GaussianPrimitive],
    views: &[CameraView],
    masks: &[EdgeMask],
    depths: &[ImageBuffer],
    config: &PipelineConfig,
) -> Result<(EdgeScoreTable, Vec<GaussianPrimitive>), PipelineError> {
    let mut table = score_all(primitives, views, masks, depths, config)?;
    let (mut kept, _) = prune(primitives, &table, config.prune_tau);
    for _ in 1..config.prune_passes {
        table = score_all(&kept, views, masks, depths, config)?;
        kept = prune(&kept, &table, config.prune_tau).0;
    }
    Ok((table, kept))
}

pub fn visibility_stage(
    kept: &[GaussianPrimitive],
    views: &[CameraView],
    depths: &[ImageBuffer],
    config: &PipelineConfig,
) -> Result<Vec<VisibilityRecord>, PipelineError> {
    let points: Vec<Point3<f64>> = kept.iter().map(|p| p.center).collect();
    Ok(validate_visibility(&points, views, depths, config)?)
}

#[derive(Debug, Clone)]
pub struct MeshOutput {
    /// Labels after singular-edge repair; `cut_value` is their energy.
    pub labeled: LabeledTetMesh,
    pub repaired: usize,
    /// Interface surface before the edge-length filter.
    pub raw: TriangleMesh,
    pub mesh: TriangleMesh,
}

/// Tetrahedralizes the kept points, builds the cut graph from their
/// visibility records and extracts the filtered surface.
pub fn mesh_stage(
    points: &[Point3<f64>],
    records: &[VisibilityRecord],
    views: &[CameraView],
    config: &PipelineConfig,
) -> Result<MeshOutput, PipelineError> {
    let tets = tetrahedralize(points)?;
    let mut graph = accumulate_ray_costs(&tets, records, views, config)?;
    graph.add_geometric(&geometric_costs(&tets), config.graphcut_beta);
    let mut labeled = solve_mincut(&tets, &graph);
    let repaired = repair_singular_edges(&mut labeled);
    if repaired > 0 {
        labeled.cut_value = graph.energy(&labeled.inside);
    }
    let raw = extract_surface(&labeled);
    let mesh = postfilter_edges(&raw, config.postfilter_edge_factor);
    Ok(MeshOutput {
        labeled,
        repaired,
        raw,
        mesh,
    })
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StageTimes {
    pub gen: f64,
    pub masks: f64,
    pub score: f64,
    pub visibility: f64,
    pub mesh: f64,
    pub eval: f64,
}

#[derive(Debug, Clone)]
pub struct PipelineRun {
    pub masks: Vec<EdgeMask>,
    pub depths: Vec<ImageBuffer>,
    pub scores: EdgeScoreTable,
    pub kept: Vec<GaussianPrimitive>,
    pub records: Vec<VisibilityRecord>,
    pub mesh: MeshOutput,
    /// `wall_time` covers every stage after generation.
    pub report: EvalReport,
    pub times: StageTimes,
}

fn timed<T>(slot: &mut f64, f: impl FnOnce() -> T) -> T {
    let start = Instant::now();
    let out = f();
    *slot = start.elapsed().as_secs_f64();
    out
}

/// masks → score/prune → visibility → mesh → postfilter → eval on generated assets.
pub fn run_on_assets(
    assets: &SceneAssets,
    config: &PipelineConfig,
) -> Result<PipelineRun, PipelineError> {
    config.validate()?;
    let mut times = StageTimes::default();
    let prims = &assets.sample.primitives;
    let views = &assets.views;
    let (masks, depths) = timed(&mut times.masks, || -> Result<_, PipelineError> {
        Ok((
            masks_stage(prims, views, config)?,
            render_depths(prims, views, config),
        ))
    })?;
    let (scores, kept) = timed(&mut times.score, || {
        prune_stage(prims, views, &masks, &depths, config)
    })?;
    let records = timed(&mut times.visibility, || {
        visibility_stage(&kept, views, &depths, config)
    })?;
    let points: Vec<Point3<f64>> = kept.iter().map(|p| p.center).collect();
    let mesh = timed(&mut times.mesh, || {
        mesh_stage(&points, &records, views, config)
    })?;
    let mut report = timed(&mut times.eval, || rmse(&mesh.mesh, &assets.mesh))?;
    report.wall_time = times.masks + times.score + times.visibility + times.mesh + times.eval;
    Ok(PipelineRun {
        masks,
        depths,
        scores,
        kept,
        records,
        mesh,
        report,
        times,
    })
}

/// Generates the scene and runs every stage; `wall_time` includes generation.
pub fn run_pipeline(
    spec: &SceneSpec,
    config: &PipelineConfig,
) -> Result<(SceneAssets, PipelineRun), PipelineError> {
    config.validate()?;
    let mut gen_time = 0.0;
    let assets = timed(&mut gen_time, || generate_scene(spec))?;
    let mut run = run_on_assets(&assets, config)?;
    run.times.gen = gen_time;
    run.report.wall_time += gen_time;
    Ok((assets, run))
}
