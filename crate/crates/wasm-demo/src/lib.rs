//! wasm-bindgen surface for the static page in `www/`.

use wasm_bindgen::prelude::*;

use veason_core::env::{generate_dataset, GenConfig, Sample};
use veason_core::geometry::BoundingBox;
use veason_core::grpo::{self, StepStats};
use veason_core::policy::{Observation, ToyPolicy};
use veason_core::response::{serialize_response, StructuredResponse};
use veason_core::rewards::{total_reward, RewardBreakdown, RewardWeights};
use veason_core::train::{train, TrainConfig};

fn js_err(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

fn breakdown_json(b: &RewardBreakdown) -> String {
    serde_json::json!({
        "r_f": b.r_format,
        "r_k": b.r_temporal,
        "r_s": b.r_spatial,
        "r_u": b.r_unified,
        "r_total": b.r_total,
        "diag": b.diag,
    })
    .to_string()
}

#[wasm_bindgen]
pub struct Demo {
    seed: u64,
    samples: Vec<Sample>,
    policy: ToyPolicy,
    curves: Vec<StepStats>,
}

#[wasm_bindgen]
impl Demo {
    /// A small dataset of `n_videos` scenes generated from `seed`.
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u64, n_videos: usize) -> Result<Demo, JsError> {
        let cfg = GenConfig {
            n_videos,
            ..GenConfig::default()
        };
        let samples = generate_dataset(seed, &cfg).map_err(js_err)?.decode_samples().map_err(js_err)?;
        Ok(Demo {
            seed,
            samples,
            policy: ToyPolicy::uniform(),
            curves: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn width(&self) -> usize {
        self.samples[0].video.width
    }

    pub fn height(&self) -> usize {
        self.samples[0].video.height
    }

    pub fn num_frames(&self, i: usize) -> usize {
        self.samples[i].gt.num_frames()
    }

    pub fn sample_id(&self, i: usize) -> String {
        self.samples[i].sample_id.clone()
    }

    pub fn expression(&self, i: usize) -> String {
        self.samples[i].query.expression_text.clone()
    }

    pub fn subset(&self, i: usize) -> String {
        self.samples[i].query.subset().to_string()
    }

    pub fn sampled_times(&self, i: usize) -> Vec<f64> {
        self.samples[i].gt.sampled_times().to_vec()
    }

    /// RGBA pixels of frame `k`, ready for `ImageData`.
    pub fn frame_rgba(&self, i: usize, k: usize) -> Vec<u8> {
        self.samples[i].video.render_rgba(k)
    }

    /// Row-major 0/1 mask of the referred objects at frame `k`.
    pub fn gt_mask(&self, i: usize, k: usize) -> Vec<u8> {
        self.samples[i].gt.merged_masks()[k].bits().map(u8::from).collect()
    }

    /// Reward breakdown (JSON) of a response text.
    pub fn score_text(&self, i: usize, text: &str) -> Result<String, JsError> {
        let s = &self.samples[i];
        let p = TrainConfig::default().propagator.build();
        let b = total_reward(text, &s.scene(), &RewardWeights::default(), p.as_ref()).map_err(js_err)?;
        Ok(breakdown_json(&b))
    }

    /// Response text for one box (or none, if `boxes` is empty) at frame `k`.
    /// `boxes` holds `x1, y1, x2, y2` quadruples.
    pub fn response_for(&self, i: usize, k: usize, boxes: &[f64]) -> Result<String, JsError> {
        if !boxes.len().is_multiple_of(4) {
            return Err(JsError::new("boxes must come in groups of four"));
        }
        let boxes = boxes
            .chunks(4)
            .map(|c| BoundingBox::new(c[0], c[1], c[2], c[3]))
            .collect::<Result<Vec<_>, _>>()
            .map_err(js_err)?;
        let t = self.samples[i].gt.sampled_times()[k];
        serialize_response(&StructuredResponse::new("drawn by hand", t, boxes)).map_err(js_err)
    }

    /// Trains the toy policy from scratch; returns per-step mean reward.
    pub fn train(&mut self, steps: usize, learning_rate: f64) -> Result<Vec<f64>, JsError> {
        let mut cfg = TrainConfig {
            steps,
            ..TrainConfig::default()
        };
        cfg.grpo.learning_rate = learning_rate;
        let out = train(self.seed, &self.samples, ToyPolicy::uniform(), &cfg, |_| {}).map_err(js_err)?;
        self.policy = out.policy;
        self.curves = out.stats;
        Ok(self.curves.iter().map(|s| s.mean_reward).collect())
    }

    pub fn kl_curve(&self) -> Vec<f64> {
        self.curves.iter().map(|s| s.kl).collect()
    }

    /// The current policy's greedy answer for sample `i`.
    pub fn policy_response(&self, i: usize) -> Result<String, JsError> {
        let obs = Observation::of(&self.samples[i], self.seed, TrainConfig::default().noise_std);
        serialize_response(&self.policy.greedy(&obs).to_response(&obs)).map_err(js_err)
    }
}

/// Group-normalized advantages of a reward list.
#[wasm_bindgen]
pub fn advantages(rewards: &[f64], epsilon_std: f64) -> Result<Vec<f64>, JsError> {
    grpo::advantages(rewards, epsilon_std).map_err(js_err)
}
