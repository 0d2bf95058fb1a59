//! Batch driver for the reconstruction pipeline: one subcommand per stage
//! plus an end-to-end run, all working inside one scene directory.

pub mod error;
pub mod manifest;
pub mod records;
pub mod stages;

pub use error::CliError;
pub use manifest::{StageManifest, SCENE_MANIFEST};
pub use stages::{
    append_csv, cmd_eval, cmd_gen, cmd_masks, cmd_mesh, cmd_pipeline, cmd_prune, cmd_score,
    cmd_visibility, verify_outputs, EvalOptions, STAGES,
};
