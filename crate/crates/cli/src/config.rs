//! Run configuration: one TOML or JSON file layered over the defaults.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use veason_core::env::GenConfig;
use veason_core::grpo::{GrpoConfig, KlMode};
use veason_core::rewards::{PropagatorKind, RewardWeights};
use veason_core::train::TrainConfig;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainSection {
    pub steps: usize,
    pub batch_size: usize,
    pub kl_mode: KlMode,
    pub noise_std: f64,
    pub temperature: f64,
    /// Samples at the end of the manifest that training never sees.
    pub holdout: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub seed: u64,
    pub propagator: PropagatorKind,
    pub data: GenConfig,
    pub rewards: RewardWeights,
    pub grpo: GrpoConfig,
    pub train: TrainSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            seed: 7,
            propagator: t.propagator,
            data: GenConfig::default(),
            rewards: t.weights,
            grpo: t.grpo,
            train: TrainSection {
                steps: t.steps,
                batch_size: t.batch_size,
                kl_mode: t.kl_mode,
                noise_std: t.noise_std,
                temperature: t.temperature,
                holdout: 0,
            },
        }
    }
}

/// Overlays `patch` onto `base`, rejecting keys `base` does not have.
fn merge(base: &mut Value, patch: Value, path: &str) -> Result<(), CliError> {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                let here = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v, &here)?,
                    None => return Err(CliError::Validation(format!("unknown config field `{here}`"))),
                }
            }
            Ok(())
        }
        (slot, v) => {
            *slot = v;
            Ok(())
        }
    }
}

impl RunConfig {
    pub fn from_str_with_format(text: &str, toml_format: bool) -> Result<Self, CliError> {
        let patch: Value = if toml_format {
            toml::from_str(text).map_err(|e| CliError::Validation(format!("config: {e}")))?
        } else {
            serde_json::from_str(text).map_err(|e| CliError::Validation(format!("config: {e}")))?
        };
        let mut merged = serde_json::to_value(Self::default()).expect("defaults serialize");
        merge(&mut merged, patch, "")?;
        let cfg: Self = serde_json::from_value(merged).map_err(|e| CliError::Validation(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `.toml` or `.json` (by extension); `None` means defaults.
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("toml") => Self::from_str_with_format(&text, true),
            Some("json") => Self::from_str_with_format(&text, false),
            _ => Err(CliError::Validation(format!(
                "config {}: extension must be .toml or .json",
                path.display()
            ))),
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            steps: self.train.steps,
            batch_size: self.train.batch_size,
            grpo: self.grpo,
            weights: self.rewards,
            propagator: self.propagator,
            kl_mode: self.train.kl_mode,
            noise_std: self.train.noise_std,
            temperature: self.train.temperature,
        }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let v = |section: &str, e: &dyn std::fmt::Display| CliError::Validation(format!("{section}: {e}"));
        self.data.validate().map_err(|e| v("data", &e))?;
        self.rewards.validate().map_err(|e| v("rewards", &e))?;
        self.grpo.validate().map_err(|e| v("grpo", &e))?;
        self.train_config().validate().map_err(|e| v("train", &e))?;
        if self.train.holdout >= self.data.n_videos {
            return Err(CliError::Validation(format!(
                "train: holdout = {} must be smaller than data.n_videos = {}",
                self.train.holdout, self.data.n_videos
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_toml_keeps_other_defaults() {
        let c = RunConfig::from_str_with_format("seed = 3\n[grpo]\nbeta = 0.01\n[data.env]\nnum_frames = 6\n", true).unwrap();
        assert_eq!(c.seed, 3);
        assert_eq!(c.grpo.beta, 0.01);
        assert_eq!(c.grpo.learning_rate, RunConfig::default().grpo.learning_rate);
        assert_eq!(c.data.env.num_frames, 6);
        assert_eq!(c.data.env.width, 64);
    }

    #[test]
    fn json_and_toml_agree() {
        let a = RunConfig::from_str_with_format("propagator = \"oracle\"\n[rewards]\nalpha_s = 0.0\n", true).unwrap();
        let b = RunConfig::from_str_with_format(r#"{"propagator": "oracle", "rewards": {"alpha_s": 0.0}}"#, false).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.propagator, PropagatorKind::Oracle);
    }

    #[test]
    fn errors_name_the_field() {
        let msg = |s: &str| RunConfig::from_str_with_format(s, true).unwrap_err().to_string();
        assert!(msg("[data]\nn_videos = 0\n").contains("n_videos"));
        assert!(msg("[grpo]\ngroup_size = 1\n").contains("group_size"));
        assert!(msg("[rewards]\nalpha_k = -1.0\n").contains("alpha_k"));
        assert!(msg("[data]\nnegative_fraction = 2.0\n").contains("negative_fraction"));
        assert!(msg("[train]\nbatch_size = 0\n").contains("batch_size"));
        assert!(msg("[train]\nholdout = 500\n").contains("holdout"));
        assert!(msg("[grpo]\nlearning_rat = 1.0\n").contains("grpo.learning_rat"));
        assert!(msg("propagator = \"sam\"\n").contains("propagator") || msg("propagator = \"sam\"\n").contains("sam"));
    }

    #[test]
    fn clip_range_can_be_set_and_cleared() {
        let c = RunConfig::from_str_with_format("[grpo]\nclip_range = 0.2\n", true).unwrap();
        assert_eq!(c.grpo.clip_range, Some(0.2));
        let c = RunConfig::from_str_with_format(r#"{"grpo": {"clip_range": null}}"#, false).unwrap();
        assert_eq!(c.grpo.clip_range, None);
    }
}
