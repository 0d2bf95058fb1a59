use std::fmt::Write as _;

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("unknown config key `{0}`")]
    UnknownKey(String),
    #[error("bad value `{value}` for `{key}`")]
    BadValue { key: String, value: String },
    #[error("`{key}` out of range: {reason}")]
    OutOfRange {
        key: &'static str,
        reason: &'static str,
    },
}

/// Every tunable of the pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub tv_lambda: f64,
    pub tv_iterations: usize,
    pub edge_threshold: f64,
    /// Weights of the refined L1, SSIM and normal terms.
    pub loss_weights: [f64; 3],
    pub loss_epsilon: f64,
    /// L1/SSIM blend of the unmasked photometric loss.
    pub ssim_mix: f64,
    pub prune_tau: f64,
    pub prune_passes: usize,
    pub depth_eps_abs: f64,
    pub depth_eps_rel: f64,
    pub graphcut_beta: f64,
    pub vis_sigma: f64,
    pub vis_alpha: f64,
    pub postfilter_edge_factor: f64,
    pub splat_cutoff_sigmas: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            tv_lambda: 0.1,
            tv_iterations: 50,
            edge_threshold: 0.5,
            loss_weights: [0.8, 0.2, 0.05],
            loss_epsilon: 1e-8,
            ssim_mix: 0.8,
            prune_tau: 0.1,
            prune_passes: 1,
            depth_eps_abs: 0.01,
            depth_eps_rel: 0.01,
            graphcut_beta: 1.0,
            vis_sigma: 1.0,
            vis_alpha: 1.0,
            postfilter_edge_factor: 5.0,
            splat_cutoff_sigmas: 3.0,
        }
    }
}

pub const CONFIG_KEYS: &[&str] = &[
    "tv_lambda",
    "tv_iterations",
    "edge_threshold",
    "loss_weights",
    "loss_epsilon",
    "ssim_mix",
    "prune_tau",
    "prune_passes",
    "depth_eps_abs",
    "depth_eps_rel",
    "graphcut_beta",
    "vis_sigma",
    "vis_alpha",
    "postfilter_edge_factor",
    "splat_cutoff_sigmas",
];

impl PipelineConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = [
            ("tv_lambda", self.tv_lambda),
            ("edge_threshold", self.edge_threshold),
            ("loss_epsilon", self.loss_epsilon),
            ("depth_eps_abs", self.depth_eps_abs),
            ("depth_eps_rel", self.depth_eps_rel),
            ("graphcut_beta", self.graphcut_beta),
            ("vis_sigma", self.vis_sigma),
            ("vis_alpha", self.vis_alpha),
            ("postfilter_edge_factor", self.postfilter_edge_factor),
            ("splat_cutoff_sigmas", self.splat_cutoff_sigmas),
        ];
        for (key, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(ConfigError::OutOfRange {
                    key,
                    reason: "must be finite and > 0",
                });
            }
        }
        if self
            .loss_weights
            .iter()
            .any(|w| !(w.is_finite() && *w >= 0.0))
        {
            return Err(ConfigError::OutOfRange {
                key: "loss_weights",
                reason: "weights must be finite and >= 0",
            });
        }
        if !(0.0..=1.0).contains(&self.prune_tau) {
            return Err(ConfigError::OutOfRange {
                key: "prune_tau",
                reason: "must lie in [0, 1]",
            });
        }
        if !(0.0..=1.0).contains(&self.ssim_mix) {
            return Err(ConfigError::OutOfRange {
                key: "ssim_mix",
                reason: "must lie in [0, 1]",
            });
        }
        if self.tv_iterations == 0 {
            return Err(ConfigError::OutOfRange {
                key: "tv_iterations",
                reason: "must be >= 1",
            });
        }
        Ok(())
    }

    /// Sets one field from its textual form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let bad = || ConfigError::BadValue {
            key: key.to_string(),
            value: value.to_string(),
        };
        let float = || value.trim().parse::<f64>().map_err(|_| bad());
        let int = || value.trim().parse::<usize>().map_err(|_| bad());
        match key {
            "tv_lambda" => self.tv_lambda = float()?,
            "tv_iterations" => self.tv_iterations = int()?,
            "edge_threshold" => self.edge_threshold = float()?,
            "loss_weights" => {
                let parts: Vec<f64> = value
                    .split(',')
                    .map(|s| s.trim().parse::<f64>())
                    .collect::<Result<_, _>>()
                    .map_err(|_| bad())?;
                self.loss_weights = parts.try_into().map_err(|_| bad())?;
            }
            "loss_epsilon" => self.loss_epsilon = float()?,
            "ssim_mix" => self.ssim_mix = float()?,
            "prune_tau" => self.prune_tau = float()?,
            "prune_passes" => self.prune_passes = int()?,
            "depth_eps_abs" => self.depth_eps_abs = float()?,
            "depth_eps_rel" => self.depth_eps_rel = float()?,
            "graphcut_beta" => self.graphcut_beta = float()?,
            "vis_sigma" => self.vis_sigma = float()?,
            "vis_alpha" => self.vis_alpha = float()?,
            "postfilter_edge_factor" => self.postfilter_edge_factor = float()?,
            "splat_cutoff_sigmas" => self.splat_cutoff_sigmas = float()?,
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        Some(match key {
            "tv_lambda" => self.tv_lambda.to_string(),
            "tv_iterations" => self.tv_iterations.to_string(),
            "edge_threshold" => self.edge_threshold.to_string(),
            "loss_weights" => format!(
                "{},{},{}",
                self.loss_weights[0], self.loss_weights[1], self.loss_weights[2]
            ),
            "loss_epsilon" => self.loss_epsilon.to_string(),
            "ssim_mix" => self.ssim_mix.to_string(),
            "prune_tau" => self.prune_tau.to_string(),
            "prune_passes" => self.prune_passes.to_string(),
            "depth_eps_abs" => self.depth_eps_abs.to_string(),
            "depth_eps_rel" => self.depth_eps_rel.to_string(),
            "graphcut_beta" => self.graphcut_beta.to_string(),
            "vis_sigma" => self.vis_sigma.to_string(),
            "vis_alpha" => self.vis_alpha.to_string(),
            "postfilter_edge_factor" => self.postfilter_edge_factor.to_string(),
            "splat_cutoff_sigmas" => self.splat_cutoff_sigmas.to_string(),
            _ => return None,
        })
    }

    /// Parses `key = value` lines over the defaults; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or(ConfigError::Syntax { line: n + 1 })?;
            cfg.set(k.trim(), v.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for key in CONFIG_KEYS {
            let _ = writeln!(out, "{key} = {}", self.get(key).unwrap_or_default());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        PipelineConfig::default().validate().unwrap();
    }

    #[test]
    fn text_round_trip() {
        let mut cfg = PipelineConfig::default();
        cfg.vis_sigma = 0.123456789012345;
        cfg.loss_weights = [1.0 / 3.0, 0.0, 2.5];
        let back = PipelineConfig::parse(&cfg.to_text()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn rejects_unknown_and_out_of_range() {
        assert!(matches!(
            PipelineConfig::parse("nope = 1"),
            Err(ConfigError::UnknownKey(_))
        ));
        assert!(matches!(
            PipelineConfig::parse("prune_tau = 1.5"),
            Err(ConfigError::OutOfRange {
                key: "prune_tau",
                ..
            })
        ));
        assert!(matches!(
            PipelineConfig::parse("vis_sigma = 0"),
            Err(ConfigError::OutOfRange { .. })
        ));
        assert!(PipelineConfig::parse("prune_tau = 0").is_ok());
    }
}
