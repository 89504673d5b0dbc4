//! GRPO training of the toy policy on the synthetic environment, and greedy
//! inference to mask predictions.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::Sample;
use crate::eval::PredictionRecord;
use crate::grpo::{self, GroupPolicy, GrpoConfig, GrpoError, KlMode, SampleGroup, StepStats};
use crate::policy::{Action, Observation, ToyPolicy};
use crate::response::{serialize_response, snap_timestamp};
use crate::rewards::{total_reward, MaskPropagator, PropagatorKind, RewardError, RewardWeights};
use crate::rng;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training set is empty")]
    EmptyDataset,
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Grpo(#[from] GrpoError),
    #[error(transparent)]
    Reward(#[from] RewardError),
    #[error("sample {0}: {1}")]
    Propagation(String, String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub grpo: GrpoConfig,
    pub weights: RewardWeights,
    pub propagator: PropagatorKind,
    pub kl_mode: KlMode,
    /// Std of the Gaussian noise on observation features.
    pub noise_std: f64,
    pub temperature: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            steps: 300,
            batch_size: 16,
            grpo: GrpoConfig {
                learning_rate: 0.1,
                ..GrpoConfig::default()
            },
            weights: RewardWeights::default(),
            propagator: PropagatorKind::Labelmap,
            kl_mode: KlMode::Exact,
            noise_std: 0.05,
            temperature: 1.0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: String| Err(TrainError::InvalidConfig(m));
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return bad(format!("noise_std = {} must be finite and >= 0", self.noise_std));
        }
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return bad(format!("temperature = {} must be positive", self.temperature));
        }
        self.grpo.validate()?;
        self.weights.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub seed: u64,
    pub config: TrainConfig,
    pub policy: ToyPolicy,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub policy: ToyPolicy,
    pub stats: Vec<StepStats>,
}

pub fn observe_all(samples: &[Sample], seed: u64, noise_std: f64) -> Vec<Observation> {
    samples.iter().map(|s| Observation::of(s, seed, noise_std)).collect()
}

/// Prompt indices for `step`, walking through seeded shuffles of the dataset
/// one epoch after another.
fn batch_indices(seed: u64, n: usize, batch: usize, step: usize) -> Vec<usize> {
    let start = step * batch;
    let mut out = Vec::with_capacity(batch);
    let mut epoch = start / n;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, "train-epoch", epoch as u64));
    for pos in start..start + batch {
        if pos / n != epoch {
            epoch = pos / n;
            order = (0..n).collect();
            order.shuffle(&mut rng::stream(seed, "train-epoch", epoch as u64));
        }
        out.push(order[pos % n]);
    }
    out
}

/// Runs `cfg.steps` GRPO updates starting from `init`, which also serves as
/// the frozen reference policy. `on_step` sees every step's statistics.
pub fn train(
    seed: u64,
    samples: &[Sample],
    init: ToyPolicy,
    cfg: &TrainConfig,
    mut on_step: impl FnMut(&StepStats),
) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(TrainError::EmptyDataset);
    }
    let observations = observe_all(samples, seed, cfg.noise_std);
    let propagator = cfg.propagator.build();
    let reference = init.clone();
    let mut policy = init;
    let g = cfg.grpo.group_size;
    let mut stats = Vec::with_capacity(cfg.steps);

    for step in 0..cfg.steps {
        let mut batch = Vec::with_capacity(cfg.batch_size);
        let mut parts = [0.0; 4];
        let mut actions_total = 0usize;
        for (slot, i) in batch_indices(seed, samples.len(), cfg.batch_size, step).into_iter().enumerate() {
            let obs = &observations[i];
            let mut r = rng::substream(seed, "train", step as u64, slot as u64);
            let drawn = policy.sample_actions(obs, g, &mut r);
            let mut rewards = Vec::with_capacity(g);
            for (a, _) in &drawn {
                let text = serialize_response(&a.to_response(obs)).expect("policy responses serialize");
                let b = total_reward(&text, &samples[i].scene(), &cfg.weights, propagator.as_ref())?;
                parts[0] += b.r_format;
                parts[1] += b.r_temporal;
                parts[2] += b.r_spatial;
                parts[3] += b.r_unified;
                actions_total += a.num_decisions();
                rewards.push(b.r_total);
            }
            batch.push(SampleGroup {
                prompt_id: samples[i].sample_id.clone(),
                prompt: obs.clone(),
                logprob_ref: drawn.iter().map(|(a, _)| reference.log_prob(obs, a)).collect(),
                logprob_old: drawn.iter().map(|(_, lp)| *lp).collect(),
                actions: drawn.into_iter().map(|(a, _)| a).collect(),
                rewards,
            });
        }
        let update = grpo::step(&mut policy, &reference, &batch, &cfg.grpo, cfg.kl_mode)?;
        let n = (cfg.batch_size * g) as f64;
        let s = StepStats {
            step,
            mean_reward: update.mean_reward,
            mean_r_f: parts[0] / n,
            mean_r_k: parts[1] / n,
            mean_r_s: parts[2] / n,
            mean_r_u: parts[3] / n,
            kl: update.kl,
            grad_norm: update.grad_norm,
            mean_response_actions: actions_total as f64 / n,
        };
        on_step(&s);
        stats.push(s);
    }
    Ok(TrainOutcome { policy, stats })
}

/// Greedy decode, then propagate the boxes from the keyframe.
pub fn predict(
    policy: &ToyPolicy,
    sample: &Sample,
    obs: &Observation,
    propagator: &dyn MaskPropagator,
) -> Result<PredictionRecord, TrainError> {
    predict_action(&policy.greedy(obs), sample, obs, propagator)
}

pub fn predict_action(
    action: &Action,
    sample: &Sample,
    obs: &Observation,
    propagator: &dyn MaskPropagator,
) -> Result<PredictionRecord, TrainError> {
    let response = action.to_response(obs);
    let keyframe = snap_timestamp(response.keyframe_timestamp, sample.gt.sampled_times());
    let masks = propagator
        .propagate(&response.boxes, &sample.scene(), keyframe)
        .map_err(|e| TrainError::Propagation(sample.sample_id.clone(), e.to_string()))?;
    Ok(PredictionRecord::new(sample.sample_id.clone(), &masks))
}

pub fn infer(
    policy: &ToyPolicy,
    samples: &[Sample],
    seed: u64,
    noise_std: f64,
    propagator: &dyn MaskPropagator,
) -> Result<Vec<PredictionRecord>, TrainError> {
    samples
        .iter()
        .map(|s| predict(policy, s, &Observation::of(s, seed, noise_std), propagator))
        .collect()
}
