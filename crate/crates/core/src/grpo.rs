//! Group-relative advantages and the KL-regularized policy objective.
//!
//! Rewards are z-scored inside each group of `G` sampled responses (population
//! standard deviation plus `epsilon_std`). The objective for one group is
//!
//! ```text
//! sum_i ratio_i * A_i  -  beta * KL(pi_theta || pi_ref)
//! ratio_i = exp(logp_theta(o_i) - logp_old(o_i))
//! ```
//!
//! with optional PPO-style clipping of the ratio. Policies plug in through
//! [`GroupPolicy`]; the exact KL is used when the policy can compute it,
//! otherwise the `exp(d) - d - 1` estimator over the group's samples.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GrpoError {
    #[error("group size {0} is below 2")]
    GroupTooSmall(usize),
    #[error("reward {index} is not finite")]
    NonFiniteReward { index: usize },
    #[error("probability ratio of response {index} is not finite")]
    NonFiniteRatio { index: usize },
    #[error("gradient is not finite")]
    NonFiniteGradient,
    #[error("parameters became non-finite after the update")]
    NonFiniteParameters,
    #[error("group lists disagree in length: {0}")]
    Ragged(&'static str),
    #[error("empty batch")]
    EmptyBatch,
    #[error("invalid grpo config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrpoConfig {
    pub group_size: usize,
    pub beta: f64,
    pub learning_rate: f64,
    pub epsilon_std: f64,
    #[serde(default)]
    pub clip_range: Option<f64>,
    #[serde(default = "default_max_grad_norm")]
    pub max_grad_norm: f64,
}

fn default_max_grad_norm() -> f64 {
    1.0
}

impl GrpoConfig {
    /// Group size 8, KL coefficient 5e-3, learning rate 1e-6, gradient-norm cap 1.0.
    pub fn large_model_defaults() -> Self {
        Self {
            group_size: 8,
            beta: 5e-3,
            learning_rate: 1e-6,
            epsilon_std: 1e-6,
            clip_range: None,
            max_grad_norm: 1.0,
        }
    }

    pub fn validate(&self) -> Result<(), GrpoError> {
        let bad = |m: String| Err(GrpoError::InvalidConfig(m));
        if self.group_size < 2 {
            return bad(format!("group_size = {} must be at least 2", self.group_size));
        }
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return bad(format!("beta = {} must be finite and >= 0", self.beta));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return bad(format!("learning_rate = {} must be finite and >= 0", self.learning_rate));
        }
        if !(self.epsilon_std.is_finite() && self.epsilon_std > 0.0) {
            return bad(format!("epsilon_std = {} must be finite and > 0", self.epsilon_std));
        }
        if let Some(c) = self.clip_range {
            if !(c.is_finite() && c > 0.0 && c < 1.0) {
                return bad(format!("clip_range = {c} must lie in (0, 1)"));
            }
        }
        if !(self.max_grad_norm.is_finite() && self.max_grad_norm > 0.0) {
            return bad(format!("max_grad_norm = {} must be finite and > 0", self.max_grad_norm));
        }
        Ok(())
    }
}

impl Default for GrpoConfig {
    fn default() -> Self {
        Self::large_model_defaults()
    }
}

/// `A_i = (r_i - mean) / (std + eps)` with the population standard deviation.
///
/// Groups whose rewards are all equal get exact zeros.
pub fn advantages(rewards: &[f64], epsilon_std: f64) -> Result<Vec<f64>, GrpoError> {
    let g = rewards.len();
    if g < 2 {
        return Err(GrpoError::GroupTooSmall(g));
    }
    if let Some(index) = rewards.iter().position(|r| !r.is_finite()) {
        return Err(GrpoError::NonFiniteReward { index });
    }
    if rewards.iter().all(|r| *r == rewards[0]) {
        return Ok(vec![0.0; g]);
    }
    let mean = rewards.iter().sum::<f64>() / g as f64;
    let var = rewards.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / g as f64;
    let denom = var.sqrt() + epsilon_std;
    Ok(rewards.iter().map(|r| (r - mean) / denom).collect())
}

/// A differentiable stochastic policy over opaque actions.
pub trait GroupPolicy {
    type Prompt;
    type Action;

    fn params(&self) -> &[f64];

    fn params_mut(&mut self) -> &mut [f64];

    fn log_prob(&self, prompt: &Self::Prompt, action: &Self::Action) -> f64;

    /// Adds `scale * grad log pi(action | prompt)` into `grad`.
    fn add_grad_log_prob(&self, prompt: &Self::Prompt, action: &Self::Action, scale: f64, grad: &mut [f64]);

    /// Exact `KL(self || reference)` at `prompt`; when tractable, also adds
    /// `scale * grad KL` (w.r.t. `self`'s parameters) into `grad`.
    fn exact_kl(&self, _reference: &Self, _prompt: &Self::Prompt, _scale: f64, _grad: &mut [f64]) -> Option<f64> {
        None
    }
}

/// `G` responses to one prompt with their rewards and behaviour log-probs.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleGroup<P, A> {
    pub prompt_id: String,
    pub prompt: P,
    pub actions: Vec<A>,
    pub rewards: Vec<f64>,
    /// Under the sampling policy.
    pub logprob_old: Vec<f64>,
    /// Under the frozen reference policy.
    pub logprob_ref: Vec<f64>,
}

impl<P, A> SampleGroup<P, A> {
    pub fn validate(&self) -> Result<(), GrpoError> {
        let g = self.actions.len();
        if g < 2 {
            return Err(GrpoError::GroupTooSmall(g));
        }
        if self.rewards.len() != g {
            return Err(GrpoError::Ragged("rewards"));
        }
        if self.logprob_old.len() != g {
            return Err(GrpoError::Ragged("logprob_old"));
        }
        if self.logprob_ref.len() != g {
            return Err(GrpoError::Ragged("logprob_ref"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum KlMode {
    /// Closed form from the policy, falling back to the estimator if unavailable.
    #[default]
    Exact,
    Estimator,
}

/// `mean_i [exp(d_i) - d_i - 1]` with `d_i = logp_ref - logp_theta`.
pub fn kl_estimator(logprob_new: &[f64], logprob_ref: &[f64]) -> f64 {
    let n = logprob_new.len().max(1) as f64;
    logprob_new
        .iter()
        .zip(logprob_ref)
        .map(|(lt, lr)| {
            let d = lr - lt;
            d.exp() - d - 1.0
        })
        .sum::<f64>()
        / n
}

/// Objective value from log-probabilities alone.
pub fn grpo_objective(
    logprob_new: &[f64],
    logprob_old: &[f64],
    advantages: &[f64],
    kl: f64,
    cfg: &GrpoConfig,
) -> Result<f64, GrpoError> {
    let mut total = 0.0;
    for (i, ((ln, lo), a)) in logprob_new.iter().zip(logprob_old).zip(advantages).enumerate() {
        let ratio = (ln - lo).exp();
        if !ratio.is_finite() {
            return Err(GrpoError::NonFiniteRatio { index: i });
        }
        total += surrogate(ratio, *a, cfg.clip_range).0;
    }
    Ok(total - cfg.beta * kl)
}

/// `(value, d value / d ratio)` for one response.
fn surrogate(ratio: f64, adv: f64, clip: Option<f64>) -> (f64, f64) {
    match clip {
        None => (ratio * adv, adv),
        Some(c) => {
            let clipped = ratio.clamp(1.0 - c, 1.0 + c);
            let unclipped = ratio * adv;
            if unclipped <= clipped * adv {
                (unclipped, adv)
            } else {
                (clipped * adv, 0.0)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveEval {
    pub value: f64,
    pub kl: f64,
    pub advantages: Vec<f64>,
    pub grad: Vec<f64>,
}

/// Objective for one group together with its gradient w.r.t. `policy`'s parameters.
pub fn objective_and_grad<Pi: GroupPolicy>(
    policy: &Pi,
    reference: &Pi,
    group: &SampleGroup<Pi::Prompt, Pi::Action>,
    cfg: &GrpoConfig,
    kl_mode: KlMode,
) -> Result<ObjectiveEval, GrpoError> {
    group.validate()?;
    let adv = advantages(&group.rewards, cfg.epsilon_std)?;
    let mut grad = vec![0.0; policy.params().len()];
    let logprob_new: Vec<f64> = group.actions.iter().map(|a| policy.log_prob(&group.prompt, a)).collect();

    let mut value = 0.0;
    for (i, action) in group.actions.iter().enumerate() {
        let ratio = (logprob_new[i] - group.logprob_old[i]).exp();
        if !ratio.is_finite() {
            return Err(GrpoError::NonFiniteRatio { index: i });
        }
        let (v, dv_dratio) = surrogate(ratio, adv[i], cfg.clip_range);
        value += v;
        if dv_dratio != 0.0 {
            // d ratio / d theta = ratio * grad log pi
            policy.add_grad_log_prob(&group.prompt, action, dv_dratio * ratio, &mut grad);
        }
    }

    let exact = match kl_mode {
        KlMode::Exact => policy.exact_kl(reference, &group.prompt, -cfg.beta, &mut grad),
        KlMode::Estimator => None,
    };
    let kl = match exact {
        Some(kl) => kl,
        None => {
            let g = group.actions.len() as f64;
            for (i, action) in group.actions.iter().enumerate() {
                let d = group.logprob_ref[i] - logprob_new[i];
                // d/dtheta [exp(d) - d - 1] = (1 - exp(d)) * grad log pi
                let scale = -cfg.beta * (1.0 - d.exp()) / g;
                policy.add_grad_log_prob(&group.prompt, action, scale, &mut grad);
            }
            kl_estimator(&logprob_new, &group.logprob_ref)
        }
    };
    value -= cfg.beta * kl;
    Ok(ObjectiveEval {
        value,
        kl,
        advantages: adv,
        grad,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpdateStats {
    pub objective: f64,
    pub kl: f64,
    pub mean_reward: f64,
    /// Before clipping.
    pub grad_norm: f64,
}

/// One gradient-ascent update on the batch-mean objective with global
/// gradient-norm clipping at `cfg.max_grad_norm`.
pub fn step<Pi: GroupPolicy>(
    policy: &mut Pi,
    reference: &Pi,
    batch: &[SampleGroup<Pi::Prompt, Pi::Action>],
    cfg: &GrpoConfig,
    kl_mode: KlMode,
) -> Result<UpdateStats, GrpoError> {
    if batch.is_empty() {
        return Err(GrpoError::EmptyBatch);
    }
    let n = batch.len() as f64;
    let mut grad = vec![0.0; policy.params().len()];
    let (mut objective, mut kl, mut reward_sum, mut reward_count) = (0.0, 0.0, 0.0, 0usize);
    for group in batch {
        let eval = objective_and_grad(policy, reference, group, cfg, kl_mode)?;
        for (g, e) in grad.iter_mut().zip(&eval.grad) {
            *g += e / n;
        }
        objective += eval.value / n;
        kl += eval.kl / n;
        reward_sum += group.rewards.iter().sum::<f64>();
        reward_count += group.rewards.len();
    }
    let grad_norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    if !grad_norm.is_finite() {
        return Err(GrpoError::NonFiniteGradient);
    }
    let scale = if grad_norm > cfg.max_grad_norm {
        cfg.max_grad_norm / grad_norm
    } else {
        1.0
    };
    for (p, g) in policy.params_mut().iter_mut().zip(&grad) {
        *p += cfg.learning_rate * scale * g;
    }
    if policy.params().iter().any(|p| !p.is_finite()) {
        return Err(GrpoError::NonFiniteParameters);
    }
    Ok(UpdateStats {
        objective,
        kl,
        mean_reward: reward_sum / reward_count as f64,
        grad_norm,
    })
}

/// One row of the training-curve CSV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub step: usize,
    pub mean_reward: f64,
    pub mean_r_f: f64,
    pub mean_r_k: f64,
    pub mean_r_s: f64,
    pub mean_r_u: f64,
    pub kl: f64,
    pub grad_norm: f64,
    pub mean_response_actions: f64,
}

pub const STEP_STATS_HEADER: [&str; 9] = [
    "step",
    "mean_reward",
    "mean_r_f",
    "mean_r_k",
    "mean_r_s",
    "mean_r_u",
    "kl",
    "grad_norm",
    "mean_response_actions",
];

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn advantage_examples() {
        let a = advantages(&[1.0, 2.0, 3.0], 0.0).unwrap_or_default();
        // mean 2, population std sqrt(2/3): (x - 2) / sqrt(2/3)
        let s = (2.0f64 / 3.0).sqrt();
        let expected = [-1.0 / s, 0.0, 1.0 / s];
        for (x, e) in a.iter().zip(expected) {
            assert!((x - e).abs() < 1e-12);
        }
        assert!((a[2] - 1.224_744_871_391_589).abs() < 1e-12);
        assert_eq!(advantages(&[5.0, 5.0, 5.0], 1e-6).unwrap(), vec![0.0; 3]);
        assert_eq!(advantages(&[0.1, 0.1, 0.1], 0.0).unwrap(), vec![0.0; 3]);
        assert_eq!(advantages(&[1.0], 0.0), Err(GrpoError::GroupTooSmall(1)));
        assert!(advantages(&[1.0, f64::NAN], 0.0).is_err());
    }

    #[test]
    fn advantages_shift_and_scale_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let g = rng.gen_range(2..=16);
            let r: Vec<f64> = (0..g).map(|_| rng.gen_range(0.0..4.0)).collect();
            let base = advantages(&r, 0.0).unwrap();
            let shift = advantages(&r.iter().map(|x| x + 7.5).collect::<Vec<_>>(), 0.0).unwrap();
            let scale = advantages(&r.iter().map(|x| x * 3.0).collect::<Vec<_>>(), 0.0).unwrap();
            for ((b, s), c) in base.iter().zip(&shift).zip(&scale) {
                assert!((b - s).abs() < 1e-9);
                assert!((b - c).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn objective_examples() {
        let cfg = GrpoConfig { beta: 0.0, ..Default::default() };
        assert_eq!(grpo_objective(&[0.3], &[0.3], &[1.0], 0.0, &cfg).unwrap(), 1.0);
        let cfg = GrpoConfig { beta: 0.5, ..Default::default() };
        let v = grpo_objective(&[-1.0, -2.0], &[-1.0, -2.0], &[1.0, -1.0], 0.2, &cfg).unwrap();
        assert!((v - (0.0 - 0.1)).abs() < 1e-15);
        assert_eq!(
            grpo_objective(&[800.0], &[0.0], &[1.0], 0.0, &cfg),
            Err(GrpoError::NonFiniteRatio { index: 0 })
        );
    }

    #[test]
    fn clipping_is_pessimistic() {
        // ratio e^0.5 ~ 1.65 with positive advantage is capped at 1.2.
        assert_eq!(surrogate(0.5f64.exp(), 1.0, Some(0.2)), (1.2, 0.0));
        let (v, d) = surrogate(0.5f64.exp(), -1.0, Some(0.2));
        assert!((v + 0.5f64.exp()).abs() < 1e-15 && d == -1.0);
        assert_eq!(surrogate(1.0, 2.0, Some(0.2)), (2.0, 2.0));
    }

    #[test]
    fn estimator_is_nonnegative_and_zero_at_identity() {
        assert_eq!(kl_estimator(&[-1.0, -2.0], &[-1.0, -2.0]), 0.0);
        assert!(kl_estimator(&[-1.0, -3.0], &[-2.0, -0.5]) > 0.0);
    }

    #[test]
    fn config_validation() {
        assert!(GrpoConfig::default().validate().is_ok());
        assert_eq!(GrpoConfig::default().group_size, 8);
        assert_eq!(GrpoConfig::default().beta, 5e-3);
        assert_eq!(GrpoConfig::default().learning_rate, 1e-6);
        for bad in [
            GrpoConfig { group_size: 1, ..Default::default() },
            GrpoConfig { beta: -1.0, ..Default::default() },
            GrpoConfig { epsilon_std: 0.0, ..Default::default() },
            GrpoConfig { clip_range: Some(1.5), ..Default::default() },
        ] {
            assert!(bad.validate().is_err());
        }
    }
}
