//! Stage manifests: what a stage read, what it wrote, how long it took and
//! the parameters it ran with.
//!
//! ```text
//! stage score
//! wall_time 0.052
//! input primitives primitives.txt
//! output scores scores.txt
//! param prune_tau 0.1
//! ```
//! Paths are relative to the scene directory.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::CliError;

pub const SCENE_MANIFEST: &str = "scene.manifest";

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StageManifest {
    pub stage: String,
    /// Seconds.
    pub wall_time: f64,
    pub inputs: Vec<(String, PathBuf)>,
    pub outputs: Vec<(String, PathBuf)>,
    pub params: Vec<(String, String)>,
}

impl StageManifest {
    pub fn new(stage: &str) -> Self {
        Self {
            stage: stage.to_string(),
            ..Default::default()
        }
    }

    pub fn file_name(stage: &str) -> String {
        if stage == "gen" {
            SCENE_MANIFEST.to_string()
        } else {
            format!("{stage}.stage")
        }
    }

    pub fn input(&mut self, role: &str, path: impl Into<PathBuf>) {
        self.inputs.push((role.to_string(), path.into()));
    }

    pub fn output(&mut self, role: &str, path: impl Into<PathBuf>) {
        self.outputs.push((role.to_string(), path.into()));
    }

    /// Adds every `key = value` line of `text` as a parameter.
    pub fn params_from_text(&mut self, text: &str) {
        for line in text.lines() {
            if let Some((k, v)) = line.split_once('=') {
                self.params
                    .push((k.trim().to_string(), v.trim().to_string()));
            }
        }
    }

    pub fn outputs_of(&self, role: &str) -> Vec<&Path> {
        self.outputs
            .iter()
            .filter(|(r, _)| r == role)
            .map(|(_, p)| p.as_path())
            .collect()
    }

    pub fn single_output(&self, role: &str) -> Result<&Path, CliError> {
        match self.outputs_of(role).as_slice() {
            [p] => Ok(p),
            other => Err(CliError::new(
                &self.stage,
                "ManifestError",
                format!(
                    "expected one `{role}` output in {}, found {}",
                    Self::file_name(&self.stage),
                    other.len()
                ),
            )),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = format!("stage {}\nwall_time {:.6}\n", self.stage, self.wall_time);
        for (r, p) in &self.inputs {
            let _ = writeln!(out, "input {r} {}", p.display());
        }
        for (r, p) in &self.outputs {
            let _ = writeln!(out, "output {r} {}", p.display());
        }
        for (k, v) in &self.params {
            let _ = writeln!(out, "param {k} {v}");
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, String> {
        let mut m = Self::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let mut parts = line.splitn(3, ' ');
            let tag = parts.next().unwrap_or("");
            let a = parts
                .next()
                .ok_or_else(|| format!("line {}: missing field", n + 1))?;
            let b = parts.next();
            match (tag, b) {
                ("stage", None) => m.stage = a.to_string(),
                ("wall_time", None) => {
                    m.wall_time = a
                        .parse()
                        .map_err(|_| format!("line {}: bad wall_time", n + 1))?
                }
                ("input", Some(p)) => m.input(a, p),
                ("output", Some(p)) => m.output(a, p),
                ("param", Some(v)) => m.params.push((a.to_string(), v.to_string())),
                _ => return Err(format!("line {}: unrecognised entry `{line}`", n + 1)),
            }
        }
        if m.stage.is_empty() {
            return Err("missing stage line".into());
        }
        Ok(m)
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let path = dir.join(Self::file_name(&self.stage));
        fs::write(&path, self.to_text()).map_err(|e| CliError::io(&self.stage, &path, e))
    }

    /// Reads the manifest `stage` left in `dir`; its absence names the
    /// stage that has to run first.
    pub fn read(dir: &Path, stage: &str, needed_by: &str) -> Result<Self, CliError> {
        let path = dir.join(Self::file_name(stage));
        let text = fs::read_to_string(&path).map_err(|_| {
            CliError::new(
                needed_by,
                "MissingInput",
                format!("{} not found; run `{stage}` first", path.display()),
            )
        })?;
        Self::parse(&text).map_err(|e| {
            CliError::new(
                needed_by,
                "ManifestError",
                format!("{}: {e}", path.display()),
            )
        })
    }
}
