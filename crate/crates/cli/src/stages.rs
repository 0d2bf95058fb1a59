//! File-backed stage commands. Each reads only what upstream manifests
//! declare, writes its outputs under the scene directory and records a
//! [`StageManifest`].

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use lightmesh_core::edges::{mask_from_normals, EdgeMask};
use lightmesh_core::eval::{rmse, EvalReport, CSV_HEADER};
use lightmesh_core::io::{self, FormatError};
use lightmesh_core::pipeline::{mesh_stage, PipelineError};
use lightmesh_core::pruning::{prune, score_all, EdgeScoreTable};
use lightmesh_core::render::render_maps;
use lightmesh_core::synthetic::{generate_scene, SceneSpec};
use lightmesh_core::visibility::validate_visibility;
use lightmesh_core::{CameraView, GaussianPrimitive, ImageBuffer, PipelineConfig, TriangleMesh};
use nalgebra::Point3;

use crate::error::CliError;
use crate::manifest::StageManifest;
use crate::records;

pub const STAGES: &[&str] = &[
    "gen",
    "masks",
    "score",
    "prune",
    "visibility",
    "mesh",
    "eval",
];

fn format_err(stage: &str, path: &Path, e: FormatError) -> CliError {
    match e {
        FormatError::Io(e) => CliError::io(stage, path, e),
        other => CliError::new(stage, "ParseError", format!("{}: {other}", path.display())),
    }
}

fn text_err(stage: &str, path: &Path, e: String) -> CliError {
    CliError::new(stage, "ParseError", format!("{}: {e}", path.display()))
}

fn read_text(stage: &str, path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::io(stage, path, e))
}

fn write_text(stage: &str, path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::io(stage, path, e))
}

fn make_dir(stage: &str, path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|e| CliError::io(stage, path, e))
}

fn cameras(
    dir: &Path,
    scene: &StageManifest,
    stage: &str,
) -> Result<(PathBuf, Vec<CameraView>), CliError> {
    let rel = scene.single_output("cameras")?.to_path_buf();
    let views =
        io::read_cameras(&dir.join(&rel)).map_err(|e| format_err(stage, &dir.join(&rel), e))?;
    Ok((rel, views))
}

fn primitives(dir: &Path, rel: &Path, stage: &str) -> Result<Vec<GaussianPrimitive>, CliError> {
    io::read_primitives(&dir.join(rel)).map_err(|e| format_err(stage, &dir.join(rel), e))
}

fn rasters(dir: &Path, rels: &[&Path], stage: &str) -> Result<Vec<ImageBuffer>, CliError> {
    rels.iter()
        .map(|r| io::read_raster(&dir.join(r)).map_err(|e| format_err(stage, &dir.join(r), e)))
        .collect()
}

fn check_counts(stage: &str, what: &str, got: usize, views: usize) -> Result<(), CliError> {
    if got == views {
        Ok(())
    } else {
        Err(CliError::new(
            stage,
            "CountMismatch",
            format!("{got} {what} for {views} views"),
        ))
    }
}

fn config_params(m: &mut StageManifest, config: &PipelineConfig) {
    m.params_from_text(&config.to_text());
}

fn validate(stage: &str, config: &PipelineConfig) -> Result<(), CliError> {
    config
        .validate()
        .map_err(|e| CliError::from_pipeline(stage, &PipelineError::Config(e)))
}

/// Generates the synthetic scene described by `spec_path` into `out`.
pub fn cmd_gen(spec_path: &Path, out: &Path) -> Result<StageManifest, CliError> {
    const S: &str = "gen";
    let start = Instant::now();
    let text = fs::read_to_string(spec_path).map_err(|e| CliError::io(S, spec_path, e))?;
    let spec =
        SceneSpec::parse(&text).map_err(|e| CliError::new(S, "InvalidSpec", e.to_string()))?;
    let assets =
        generate_scene(&spec).map_err(|e| CliError::new(S, "InvalidSpec", e.to_string()))?;
    make_dir(S, &out.join("gt"))?;

    let mut m = StageManifest::new(S);
    m.input("spec", spec_path);
    let mut put = |role: &str, rel: String, text: String| -> Result<(), CliError> {
        write_text(S, &out.join(&rel), &text)?;
        m.output(role, rel);
        Ok(())
    };
    put("spec", "scene.spec".into(), spec.to_text())?;
    put("mesh", "gt_mesh.obj".into(), io::mesh_to_obj(&assets.mesh))?;
    put(
        "cameras",
        "cameras.txt".into(),
        io::cameras_to_string(&assets.views),
    )?;
    put(
        "primitives",
        "primitives.txt".into(),
        io::primitives_to_string(&assets.sample.primitives),
    )?;
    put(
        "sample",
        "sample.txt".into(),
        records::sample_to_string(&assets.sample),
    )?;
    for (i, (d, n)) in assets.gt_depths.iter().zip(&assets.gt_normals).enumerate() {
        for (role, img) in [("depth", d), ("normal", n)] {
            let rel = format!("gt/{role}_{i:03}.sfr");
            io::write_raster(&out.join(&rel), img)
                .map_err(|e| format_err(S, &out.join(&rel), e))?;
            m.output(role, rel);
        }
    }
    m.params_from_text(&spec.to_text());
    m.wall_time = start.elapsed().as_secs_f64();
    m.write(out)?;
    Ok(m)
}

/// Renders normal and depth maps from the primitive field and extracts an
/// edge mask per view.
pub fn cmd_masks(dir: &Path, config: &PipelineConfig) -> Result<StageManifest, CliError> {
    const S: &str = "masks";
    validate(S, config)?;
    let start = Instant::now();
    let scene = StageManifest::read(dir, "gen", S)?;
    let (cam_rel, views) = cameras(dir, &scene, S)?;
    let prim_rel = scene.single_output("primitives")?.to_path_buf();
    let prims = primitives(dir, &prim_rel, S)?;
    make_dir(S, &dir.join("masks"))?;
    make_dir(S, &dir.join("render"))?;

    let mut m = StageManifest::new(S);
    m.input("cameras", &cam_rel);
    m.input("primitives", &prim_rel);
    for (i, v) in views.iter().enumerate() {
        let maps = render_maps(&prims, v, config);
        let mask = mask_from_normals(&maps.normal, v.view_id, config)
            .map_err(|e| CliError::from_pipeline(S, &PipelineError::Edge(e)))?;
        for (role, rel, img) in [
            ("mask", format!("masks/mask_{i:03}.sfr"), &mask.mask),
            ("depth", format!("render/depth_{i:03}.sfr"), &maps.depth),
        ] {
            io::write_raster(&dir.join(&rel), img)
                .map_err(|e| format_err(S, &dir.join(&rel), e))?;
            m.output(role, rel);
        }
    }
    config_params(&mut m, config);
    m.wall_time = start.elapsed().as_secs_f64();
    m.write(dir)?;
    Ok(m)
}

fn load_masks(
    dir: &Path,
    masks: &StageManifest,
    views: &[CameraView],
    config: &PipelineConfig,
    stage: &str,
) -> Result<(Vec<EdgeMask>, Vec<ImageBuffer>), CliError> {
    let mask_imgs = rasters(dir, &masks.outputs_of("mask"), stage)?;
    let depths = rasters(dir, &masks.outputs_of("depth"), stage)?;
    check_counts(stage, "masks", mask_imgs.len(), views.len())?;
    check_counts(stage, "depth maps", depths.len(), views.len())?;
    let edge_masks = mask_imgs
        .into_iter()
        .zip(views)
        .map(|(mask, v)| EdgeMask {
            view_id: v.view_id,
            mask,
            threshold_used: config.edge_threshold,
        })
        .collect();
    Ok((edge_masks, depths))
}

/// Edge scores of every primitive.
pub fn cmd_score(dir: &Path, config: &PipelineConfig) -> Result<StageManifest, CliError> {
    const S: &str = "score";
    validate(S, config)?;
    let start = Instant::now();
    let scene = StageManifest::read(dir, "gen", S)?;
    let masks = StageManifest::read(dir, "masks", S)?;
    let (cam_rel, views) = cameras(dir, &scene, S)?;
    let prim_rel = scene.single_output("primitives")?.to_path_buf();
    let prims = primitives(dir, &prim_rel, S)?;
    let (edge_masks, depths) = load_masks(dir, &masks, &views, config, S)?;
    let table = score_all(&prims, &views, &edge_masks, &depths, config)
        .map_err(|e| CliError::from_pipeline(S, &PipelineError::Prune(e)))?;

    let mut m = StageManifest::new(S);
    m.input("cameras", &cam_rel);
    m.input("primitives", &prim_rel);
    for (role, p) in &masks.outputs {
        m.input(role, p);
    }
    write_text(S, &dir.join("scores.txt"), &table.to_text())?;
    m.output("scores", "scores.txt");
    config_params(&mut m, config);
    m.wall_time = start.elapsed().as_secs_f64();
    m.write(dir)?;
    Ok(m)
}

/// Keeps primitives whose edge score reaches `prune_tau`.
pub fn cmd_prune(dir: &Path, config: &PipelineConfig) -> Result<StageManifest, CliError> {
    const S: &str = "prune";
    validate(S, config)?;
    let start = Instant::now();
    let scene = StageManifest::read(dir, "gen", S)?;
    let score = StageManifest::read(dir, "score", S)?;
    let prim_rel = scene.single_output("primitives")?.to_path_buf();
    let prims = primitives(dir, &prim_rel, S)?;
    let scores_rel = score.single_output("scores")?.to_path_buf();
    let text = read_text(S, &dir.join(&scores_rel))?;
    let table = EdgeScoreTable {
        scores: records::parse_scores(&text).map_err(|e| text_err(S, &dir.join(&scores_rel), e))?,
        ..Default::default()
    };
    let (kept, pruned) = prune(&prims, &table, config.prune_tau);

    let mut m = StageManifest::new(S);
    m.input("primitives", &prim_rel);
    m.input("scores", &scores_rel);
    write_text(S, &dir.join("kept.txt"), &io::primitives_to_string(&kept))?;
    m.output("kept", "kept.txt");
    config_params(&mut m, config);
    m.params.push(("kept_count".into(), kept.len().to_string()));
    m.params
        .push(("pruned_count".into(), pruned.len().to_string()));
    m.wall_time = start.elapsed().as_secs_f64();
    m.write(dir)?;
    Ok(m)
}

/// Depth-consistent (point, view) pairs for the kept primitives.
pub fn cmd_visibility(dir: &Path, config: &PipelineConfig) -> Result<StageManifest, CliError> {
    const S: &str = "visibility";
    validate(S, config)?;
    let start = Instant::now();
    let scene = StageManifest::read(dir, "gen", S)?;
    let masks = StageManifest::read(dir, "masks", S)?;
    let pruned = StageManifest::read(dir, "prune", S)?;
    let (cam_rel, views) = cameras(dir, &scene, S)?;
    let kept_rel = pruned.single_output("kept")?.to_path_buf();
    let kept = primitives(dir, &kept_rel, S)?;
    let depth_rels = masks.outputs_of("depth");
    let depths = rasters(dir, &depth_rels, S)?;
    let points: Vec<Point3<f64>> = kept.iter().map(|p| p.center).collect();
    let recs = validate_visibility(&points, &views, &depths, config)
        .map_err(|e| CliError::from_pipeline(S, &PipelineError::Visibility(e)))?;

    let mut m = StageManifest::new(S);
    m.input("cameras", &cam_rel);
    m.input("kept", &kept_rel);
    for p in depth_rels {
        m.input("depth", p);
    }
    write_text(
        S,
        &dir.join("visibility.txt"),
        &records::visibility_to_string(&recs),
    )?;
    m.output("visibility", "visibility.txt");
    config_params(&mut m, config);
    m.wall_time = start.elapsed().as_secs_f64();
    m.write(dir)?;
    Ok(m)
}

/// Delaunay graph-cut surface of the kept points, before and after the
/// edge-length filter.
pub fn cmd_mesh(dir: &Path, config: &PipelineConfig) -> Result<StageManifest, CliError> {
    const S: &str = "mesh";
    validate(S, config)?;
    let start = Instant::now();
    let scene = StageManifest::read(dir, "gen", S)?;
    let pruned = StageManifest::read(dir, "prune", S)?;
    let vis = StageManifest::read(dir, "visibility", S)?;
    let (cam_rel, views) = cameras(dir, &scene, S)?;
    let kept_rel = pruned.single_output("kept")?.to_path_buf();
    let kept = primitives(dir, &kept_rel, S)?;
    let vis_rel = vis.single_output("visibility")?.to_path_buf();
    let text = read_text(S, &dir.join(&vis_rel))?;
    let recs = records::parse_visibility(&text).map_err(|e| text_err(S, &dir.join(&vis_rel), e))?;
    let points: Vec<Point3<f64>> = kept.iter().map(|p| p.center).collect();
    let out =
        mesh_stage(&points, &recs, &views, config).map_err(|e| CliError::from_pipeline(S, &e))?;

    let mut m = StageManifest::new(S);
    m.input("cameras", &cam_rel);
    m.input("kept", &kept_rel);
    m.input("visibility", &vis_rel);
    write_text(S, &dir.join("mesh_raw.obj"), &io::mesh_to_obj(&out.raw))?;
    write_text(S, &dir.join("mesh.obj"), &io::mesh_to_obj(&out.mesh))?;
    m.output("mesh_raw", "mesh_raw.obj");
    m.output("mesh", "mesh.obj");
    config_params(&mut m, config);
    m.params
        .push(("cut_value".into(), out.labeled.cut_value.to_string()));
    m.params
        .push(("repaired_tets".into(), out.repaired.to_string()));
    m.wall_time = start.elapsed().as_secs_f64();
    m.write(dir)?;
    Ok(m)
}

/// Options of the eval stage; unset paths come from the manifests.
#[derive(Debug, Clone, Default)]
pub struct EvalOptions {
    pub rec: Option<PathBuf>,
    pub gt: Option<PathBuf>,
    pub csv: Option<PathBuf>,
    pub method: String,
}

fn read_mesh(stage: &str, path: &Path) -> Result<TriangleMesh, CliError> {
    io::read_obj(path).map_err(|e| format_err(stage, path, e))
}

fn scene_name(dir: &Path) -> String {
    dir.canonicalize()
        .ok()
        .and_then(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .unwrap_or_else(|| "scene".into())
}

/// RMSE of the reconstruction against the ground truth, plus the CSV row.
pub fn cmd_eval(
    dir: &Path,
    opts: &EvalOptions,
) -> Result<(StageManifest, EvalReport, String), CliError> {
    const S: &str = "eval";
    let start = Instant::now();
    let rec_path = match &opts.rec {
        Some(p) => p.clone(),
        None => dir.join(StageManifest::read(dir, "mesh", S)?.single_output("mesh")?),
    };
    let gt_path = match &opts.gt {
        Some(p) => p.clone(),
        None => dir.join(StageManifest::read(dir, "gen", S)?.single_output("mesh")?),
    };
    let rec = read_mesh(S, &rec_path)?;
    let gt = read_mesh(S, &gt_path)?;
    let mut report =
        rmse(&rec, &gt).map_err(|e| CliError::from_pipeline(S, &PipelineError::Eval(e)))?;
    report.wall_time = start.elapsed().as_secs_f64();
    let method = if opts.method.is_empty() {
        "lightmesh"
    } else {
        &opts.method
    };
    let row = report.csv_row(&scene_name(dir), method);

    let mut m = StageManifest::new(S);
    m.input("mesh", &rec_path);
    m.input("gt_mesh", &gt_path);
    write_text(S, &dir.join("report.txt"), &report.to_key_value())?;
    m.output("report", "report.txt");
    if let Some(csv) = &opts.csv {
        append_csv(csv, &row)?;
        m.output("csv", csv);
    }
    m.wall_time = report.wall_time;
    m.write(dir)?;
    Ok((m, report, row))
}

/// Appends `row`, writing the header first if the file is new or empty.
pub fn append_csv(path: &Path, row: &str) -> Result<(), CliError> {
    use std::io::Write;
    let fresh = fs::metadata(path).map_or(true, |m| m.len() == 0);
    let mut f = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| CliError::io("eval", path, e))?;
    let mut text = String::new();
    if fresh {
        text.push_str(CSV_HEADER);
        text.push('\n');
    }
    text.push_str(row);
    text.push('\n');
    f.write_all(text.as_bytes())
        .map_err(|e| CliError::io("eval", path, e))
}

/// Runs every stage in order. The report's `wall_time` is the sum of the
/// stage wall times. The first failing stage aborts the run and leaves a
/// manifest recording the error.
pub fn cmd_pipeline(
    spec_path: &Path,
    out: &Path,
    config: &PipelineConfig,
    eval: &EvalOptions,
) -> Result<(EvalReport, String), CliError> {
    validate("pipeline", config)?;
    let record_failure = |e: CliError| {
        if out.is_dir() {
            let mut m = StageManifest::new(&e.stage);
            m.params.push(("error".into(), e.kind.clone()));
            let _ = m.write(out);
        }
        e
    };
    let mut total = cmd_gen(spec_path, out).map_err(record_failure)?.wall_time;
    type Stage = fn(&Path, &PipelineConfig) -> Result<StageManifest, CliError>;
    let stages: [Stage; 5] = [cmd_masks, cmd_score, cmd_prune, cmd_visibility, cmd_mesh];
    for stage in stages {
        total += stage(out, config).map_err(record_failure)?.wall_time;
    }
    let (_, mut report, _) = cmd_eval(
        out,
        &EvalOptions {
            csv: None,
            ..eval.clone()
        },
    )
    .map_err(record_failure)?;
    report.wall_time += total;
    let method = if eval.method.is_empty() {
        "lightmesh"
    } else {
        &eval.method
    };
    let row = report.csv_row(&scene_name(out), method);
    if let Some(csv) = &eval.csv {
        append_csv(csv, &row)?;
    }
    write_text("eval", &out.join("report.txt"), &report.to_key_value())?;
    Ok((report, row))
}

/// Checks that every output listed by the manifests in `dir` exists and
/// parses.
pub fn verify_outputs(dir: &Path, m: &StageManifest) -> Result<(), CliError> {
    for (role, rel) in &m.outputs {
        let path = dir.join(rel);
        let s = m.stage.as_str();
        match role.as_str() {
            "mesh" | "mesh_raw" => {
                read_mesh(s, &path)?;
            }
            "cameras" => {
                io::read_cameras(&path).map_err(|e| format_err(s, &path, e))?;
            }
            "primitives" | "kept" => {
                io::read_primitives(&path).map_err(|e| format_err(s, &path, e))?;
            }
            "depth" | "normal" | "mask" => {
                io::read_raster(&path).map_err(|e| format_err(s, &path, e))?;
            }
            "scores" => {
                records::parse_scores(&read_text(s, &path)?).map_err(|e| text_err(s, &path, e))?;
            }
            "visibility" => {
                records::parse_visibility(&read_text(s, &path)?)
                    .map_err(|e| text_err(s, &path, e))?;
            }
            "sample" => {
                records::parse_sample(&read_text(s, &path)?).map_err(|e| text_err(s, &path, e))?;
            }
            "spec" => {
                SceneSpec::parse(&read_text(s, &path)?)
                    .map_err(|e| text_err(s, &path, e.to_string()))?;
            }
            "csv" => {
                read_text(s, &path)?;
            }
            "report" => {
                read_text(s, &path)?;
            }
            other => {
                return Err(CliError::new(
                    s,
                    "ManifestError",
                    format!("unknown output role `{other}`"),
                ))
            }
        }
    }
    Ok(())
}
