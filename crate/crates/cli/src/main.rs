use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lightmesh_cli::{
    cmd_eval, cmd_gen, cmd_masks, cmd_mesh, cmd_pipeline, cmd_prune, cmd_score, cmd_visibility,
    CliError, EvalOptions, StageManifest,
};
use lightmesh_core::PipelineConfig;

#[derive(Parser)]
#[command(
    name = "lightmesh",
    version,
    about = "Lightweight building surface reconstruction"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic scene from a spec file.
    Gen {
        spec: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Render normal/depth maps and extract edge masks.
    Masks(StageArgs),
    /// Score every primitive by multi-view edge consistency.
    Score(StageArgs),
    /// Drop primitives scoring below prune_tau.
    Prune(StageArgs),
    /// Validate (point, view) pairs against the rendered depth.
    Visibility(StageArgs),
    /// Build the graph-cut surface of the kept points.
    Mesh(StageArgs),
    /// Measure RMSE against the ground-truth mesh.
    Eval {
        scene: PathBuf,
        #[command(flatten)]
        eval: EvalArgs,
    },
    /// Run gen through eval in one go.
    Pipeline {
        spec: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        eval: EvalArgs,
    },
}

#[derive(Args)]
struct StageArgs {
    /// Scene directory written by `gen`.
    scene: PathBuf,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct EvalArgs {
    /// Reconstructed mesh (default: the mesh stage output).
    #[arg(long)]
    rec: Option<PathBuf>,
    /// Ground-truth mesh (default: the generated building).
    #[arg(long)]
    gt: Option<PathBuf>,
    /// Append the result row to this CSV table.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long, default_value = "lightmesh")]
    method: String,
}

/// Config file plus per-key overrides.
#[derive(Args)]
struct ConfigArgs {
    /// `key = value` config file; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    tv_lambda: Option<String>,
    #[arg(long)]
    tv_iterations: Option<String>,
    #[arg(long)]
    edge_threshold: Option<String>,
    #[arg(long)]
    loss_weights: Option<String>,
    #[arg(long)]
    loss_epsilon: Option<String>,
    #[arg(long)]
    ssim_mix: Option<String>,
    #[arg(long)]
    prune_tau: Option<String>,
    #[arg(long)]
    prune_passes: Option<String>,
    #[arg(long)]
    depth_eps_abs: Option<String>,
    #[arg(long)]
    depth_eps_rel: Option<String>,
    #[arg(long)]
    graphcut_beta: Option<String>,
    #[arg(long)]
    vis_sigma: Option<String>,
    #[arg(long)]
    vis_alpha: Option<String>,
    #[arg(long)]
    postfilter_edge_factor: Option<String>,
    #[arg(long)]
    splat_cutoff_sigmas: Option<String>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<PipelineConfig, CliError> {
        let bad = |e: lightmesh_core::scene::ConfigError| {
            CliError::new("config", "ConfigError", e.to_string())
        };
        let mut config = match &self.config {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::io("config", p, e))?;
                PipelineConfig::parse(&text).map_err(bad)?
            }
            None => PipelineConfig::default(),
        };
        let overrides = [
            ("tv_lambda", &self.tv_lambda),
            ("tv_iterations", &self.tv_iterations),
            ("edge_threshold", &self.edge_threshold),
            ("loss_weights", &self.loss_weights),
            ("loss_epsilon", &self.loss_epsilon),
            ("ssim_mix", &self.ssim_mix),
            ("prune_tau", &self.prune_tau),
            ("prune_passes", &self.prune_passes),
            ("depth_eps_abs", &self.depth_eps_abs),
            ("depth_eps_rel", &self.depth_eps_rel),
            ("graphcut_beta", &self.graphcut_beta),
            ("vis_sigma", &self.vis_sigma),
            ("vis_alpha", &self.vis_alpha),
            ("postfilter_edge_factor", &self.postfilter_edge_factor),
            ("splat_cutoff_sigmas", &self.splat_cutoff_sigmas),
        ];
        for (key, value) in overrides {
            if let Some(v) = value {
                config.set(key, v).map_err(bad)?;
            }
        }
        config.validate().map_err(bad)?;
        Ok(config)
    }
}

impl EvalArgs {
    fn options(&self) -> EvalOptions {
        EvalOptions {
            rec: self.rec.clone(),
            gt: self.gt.clone(),
            csv: self.csv.clone(),
            method: self.method.clone(),
        }
    }
}

fn stage(
    f: fn(&Path, &PipelineConfig) -> Result<StageManifest, CliError>,
    args: &StageArgs,
) -> Result<(), CliError> {
    let m = f(&args.scene, &args.config.resolve()?)?;
    println!(
        "stage={} wall_time={:.3} outputs={}",
        m.stage,
        m.wall_time,
        m.outputs.len()
    );
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Gen { spec, out } => {
            let m = cmd_gen(&spec, &out)?;
            println!(
                "stage=gen wall_time={:.3} outputs={}",
                m.wall_time,
                m.outputs.len()
            );
        }
        Command::Masks(a) => stage(cmd_masks, &a)?,
        Command::Score(a) => stage(cmd_score, &a)?,
        Command::Prune(a) => stage(cmd_prune, &a)?,
        Command::Visibility(a) => stage(cmd_visibility, &a)?,
        Command::Mesh(a) => stage(cmd_mesh, &a)?,
        Command::Eval { scene, eval } => {
            let (_, report, row) = cmd_eval(&scene, &eval.options())?;
            print!("{}", report.to_key_value());
            println!("{row}");
        }
        Command::Pipeline {
            spec,
            out,
            config,
            eval,
        } => {
            let (report, row) = cmd_pipeline(&spec, &out, &config.resolve()?, &eval.options())?;
            print!("{}", report.to_key_value());
            println!("{row}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::FAILURE
        }
    }
}
