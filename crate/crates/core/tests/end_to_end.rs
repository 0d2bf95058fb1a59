use lightmesh_core::eval::rmse;
use lightmesh_core::io;
use lightmesh_core::pipeline::run_pipeline;
use lightmesh_core::synthetic::SceneSpec;
use lightmesh_core::PipelineConfig;

fn tiny() -> SceneSpec {
    SceneSpec::parse("view_count = 10\nresolution = 96\ndensity = 50\nseed = 9").unwrap()
}

#[test]
fn tiny_house_reconstructs_close_to_ground_truth() {
    let (assets, run) = run_pipeline(&tiny(), &PipelineConfig::default()).unwrap();
    assert!(run.mesh.raw.is_closed_manifold());
    assert!(run.report.rmse <= 0.02 * assets.mesh.bbox_diagonal());
    let clutter_kept = run
        .kept
        .iter()
        .filter(|p| assets.sample.is_clutter(p.id))
        .count();
    assert!(
        (clutter_kept as f64) < 0.1 * assets.sample.clutter_count as f64,
        "{clutter_kept}"
    );
}

#[test]
fn files_round_trip_through_text_formats() {
    let (assets, run) = run_pipeline(&tiny(), &PipelineConfig::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();

    let obj = dir.path().join("mesh.obj");
    io::write_obj(&obj, &run.mesh.mesh).unwrap();
    let back = io::read_obj(&obj).unwrap();
    assert_eq!(back.triangles, run.mesh.mesh.triangles);
    assert_eq!(rmse(&back, &run.mesh.mesh).unwrap().rmse, 0.0);

    let prims = dir.path().join("kept.txt");
    io::write_primitives(&prims, &run.kept).unwrap();
    assert_eq!(io::read_primitives(&prims).unwrap(), run.kept);

    let cams = dir.path().join("cameras.txt");
    io::write_cameras(&cams, &assets.views).unwrap();
    assert_eq!(io::read_cameras(&cams).unwrap(), assets.views);
}

#[test]
fn runs_are_deterministic() {
    let config = PipelineConfig::default();
    let (_, a) = run_pipeline(&tiny(), &config).unwrap();
    let (_, b) = run_pipeline(&tiny(), &config).unwrap();
    assert_eq!(a.scores, b.scores);
    assert_eq!(a.mesh.mesh, b.mesh.mesh);
    assert_eq!(a.report.rmse, b.report.rmse);
}
