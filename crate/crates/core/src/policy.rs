//! A small log-linear policy over structured responses.
//!
//! The observation is one noisy feature vector per sampled frame describing
//! where the referred object is. An action is chosen autoregressively:
//! keyframe, then a grid cell for the box center, then a box size.
//! All three heads are softmaxes over linear scores, so log-probabilities,
//! their gradients and the KL to a reference policy are exact.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::env::Sample;
use crate::geometry::BoundingBox;
use crate::grpo::GroupPolicy;
use crate::response::StructuredResponse;
use crate::rng;

/// `[bias, 4 * area, 2 * sqrt(area), cx, cy, vx, vy]`: visible area as a
/// fraction of the frame, centroid and its velocity per second in grid cells
/// from the frame center. Noise is added before the position scaling.
pub const FEATURES: usize = 7;
/// Grid cells per side for the box center.
pub const GRID: usize = 8;
const POSITION_SCALE: f64 = GRID as f64 / 2.0;
pub const CELLS: usize = GRID * GRID;
/// Box sides as fractions of the frame width.
pub const SIZE_BINS: [f64; 4] = [0.1, 0.2, 0.35, 0.5];
pub const SIZES: usize = SIZE_BINS.len();
pub const NUM_PARAMS: usize = FEATURES * (1 + CELLS + SIZES);

pub const THINK_STUB: &str = "Scan the sampled frames for the referred object, pick the frame where it is most visible and box it there.";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub width: usize,
    pub height: usize,
    pub sampled_times: Vec<f64>,
    pub features: Vec<[f64; FEATURES]>,
}

impl Observation {
    /// Features of the merged ground truth plus Gaussian noise drawn from a
    /// stream keyed by `(seed, sample_id)`.
    pub fn of(sample: &Sample, seed: u64, noise_std: f64) -> Self {
        let gt = &sample.gt;
        let (w, h) = (gt.width(), gt.height());
        let mut r = rng::stream(seed, &format!("observe/{}", sample.sample_id), 0);
        let noise = Normal::new(0.0, noise_std.max(0.0)).expect("finite std");
        let times = gt.sampled_times();
        let centroids: Vec<Option<(f64, f64)>> = gt
            .merged_masks()
            .iter()
            .map(|m| m.centroid().map(|(x, y)| (2.0 * x / w as f64 - 1.0, 2.0 * y / h as f64 - 1.0)))
            .collect();
        let velocity = |t: usize| -> (f64, f64) {
            let (a, b) = if t + 1 < times.len() { (t, t + 1) } else { (t.saturating_sub(1), t) };
            match (centroids[a], centroids[b]) {
                (Some(p), Some(q)) if b > a => {
                    let dt = times[b] - times[a];
                    ((q.0 - p.0) / dt, (q.1 - p.1) / dt)
                }
                _ => (0.0, 0.0),
            }
        };
        let features = gt
            .merged_masks()
            .iter()
            .enumerate()
            .map(|(t, m)| {
                let a = m.area() as f64 / (w * h) as f64;
                let (cx, cy) = centroids[t].unwrap_or((0.0, 0.0));
                let (vx, vy) = velocity(t);
                let mut f = [1.0, 4.0 * a, 2.0 * a.sqrt(), cx, cy, vx, vy];
                if noise_std > 0.0 {
                    for v in &mut f[1..] {
                        *v += noise.sample(&mut r);
                    }
                }
                for v in &mut f[3..] {
                    *v *= POSITION_SCALE;
                }
                f
            })
            .collect();
        Self {
            width: w,
            height: h,
            sampled_times: gt.sampled_times().to_vec(),
            features,
        }
    }

    pub fn num_frames(&self) -> usize {
        self.features.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Action {
    pub keyframe: usize,
    pub cell: usize,
    pub size: usize,
}

impl Action {
    pub fn boxes(&self, obs: &Observation) -> Vec<BoundingBox> {
        let (w, h) = (obs.width as f64, obs.height as f64);
        let cx = (self.cell % GRID) as f64 + 0.5;
        let cy = (self.cell / GRID) as f64 + 0.5;
        let (cx, cy) = (cx * w / GRID as f64, cy * h / GRID as f64);
        let half = SIZE_BINS[self.size] * w * 0.5;
        let b = BoundingBox::new(
            (cx - half).clamp(0.0, w),
            (cy - half).clamp(0.0, h),
            (cx + half).clamp(0.0, w),
            (cy + half).clamp(0.0, h),
        );
        vec![b.expect("clamped box is ordered")]
    }

    pub fn to_response(&self, obs: &Observation) -> StructuredResponse {
        StructuredResponse::new(THINK_STUB, obs.sampled_times[self.keyframe], self.boxes(obs))
    }

    /// Decisions the response encodes: one keyframe plus one per box.
    pub fn num_decisions(&self) -> usize {
        2
    }
}

fn dot(w: &[f64], f: &[f64; FEATURES]) -> f64 {
    w.iter().zip(f).map(|(a, b)| a * b).sum()
}

fn log_softmax(z: &mut [f64]) {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + z.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    for v in z {
        *v -= lse;
    }
}

fn sample_index<R: Rng>(logp: &[f64], r: &mut R) -> usize {
    let u: f64 = r.gen();
    let mut acc = 0.0;
    for (i, lp) in logp.iter().enumerate() {
        acc += lp.exp();
        if u < acc {
            return i;
        }
    }
    logp.len() - 1
}

fn argmax(v: &[f64]) -> usize {
    // earliest index wins ties
    let mut best = 0;
    for (i, x) in v.iter().enumerate() {
        if *x > v[best] {
            best = i;
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyPolicy {
    pub params: Vec<f64>,
    /// Logits are divided by this; must be positive.
    pub temperature: f64,
}

impl Default for ToyPolicy {
    fn default() -> Self {
        Self::uniform()
    }
}

impl ToyPolicy {
    /// All-zero parameters: every head is uniform.
    pub fn uniform() -> Self {
        Self {
            params: vec![0.0; NUM_PARAMS],
            temperature: 1.0,
        }
    }

    pub fn from_params(params: Vec<f64>, temperature: f64) -> Option<Self> {
        let ok = params.len() == NUM_PARAMS
            && params.iter().all(|p| p.is_finite())
            && temperature.is_finite()
            && temperature > 0.0;
        ok.then_some(Self { params, temperature })
    }

    fn inv_t(&self) -> f64 {
        1.0 / self.temperature
    }

    fn key_offset() -> usize {
        0
    }

    fn center_offset(cell: usize) -> usize {
        FEATURES * (1 + cell)
    }

    fn size_offset(size: usize) -> usize {
        FEATURES * (1 + CELLS + size)
    }

    fn w(&self, offset: usize) -> &[f64] {
        &self.params[offset..offset + FEATURES]
    }

    pub fn key_logp(&self, obs: &Observation) -> Vec<f64> {
        let mut z: Vec<f64> = obs.features.iter().map(|f| self.inv_t() * dot(self.w(Self::key_offset()), f)).collect();
        log_softmax(&mut z);
        z
    }

    pub fn center_logp(&self, f: &[f64; FEATURES]) -> Vec<f64> {
        let mut z: Vec<f64> = (0..CELLS).map(|c| self.inv_t() * dot(self.w(Self::center_offset(c)), f)).collect();
        log_softmax(&mut z);
        z
    }

    pub fn size_logp(&self, f: &[f64; FEATURES]) -> Vec<f64> {
        let mut z: Vec<f64> = (0..SIZES).map(|s| self.inv_t() * dot(self.w(Self::size_offset(s)), f)).collect();
        log_softmax(&mut z);
        z
    }

    pub fn sample<R: Rng>(&self, obs: &Observation, r: &mut R) -> Action {
        let keyframe = sample_index(&self.key_logp(obs), r);
        let f = &obs.features[keyframe];
        let cell = sample_index(&self.center_logp(f), r);
        let size = sample_index(&self.size_logp(f), r);
        Action { keyframe, cell, size }
    }

    /// Mode of each head in turn: the low-temperature limit of `sample`.
    pub fn greedy(&self, obs: &Observation) -> Action {
        let scores = |offset: usize, f: &[f64; FEATURES]| dot(self.w(offset), f);
        let keyframe = argmax(&obs.features.iter().map(|f| scores(Self::key_offset(), f)).collect::<Vec<_>>());
        let f = &obs.features[keyframe];
        Action {
            keyframe,
            cell: argmax(&(0..CELLS).map(|c| scores(Self::center_offset(c), f)).collect::<Vec<_>>()),
            size: argmax(&(0..SIZES).map(|s| scores(Self::size_offset(s), f)).collect::<Vec<_>>()),
        }
    }

    /// `G` sampled actions and their log-probabilities.
    pub fn sample_actions<R: Rng>(&self, obs: &Observation, g: usize, r: &mut R) -> Vec<(Action, f64)> {
        (0..g)
            .map(|_| {
                let a = self.sample(obs, r);
                (a, self.log_prob(obs, &a))
            })
            .collect()
    }

    /// `grad[offset..] += scale * (onehot(chosen) - p)_j * f` for each row `j`.
    fn add_softmax_grad(
        grad: &mut [f64],
        logp: &[f64],
        chosen: usize,
        f: &[f64; FEATURES],
        scale: f64,
        offset: impl Fn(usize) -> usize,
    ) {
        for (j, lp) in logp.iter().enumerate() {
            let d = scale * (f64::from(u8::from(j == chosen)) - lp.exp());
            let o = offset(j);
            for (g, x) in grad[o..o + FEATURES].iter_mut().zip(f) {
                *g += d * x;
            }
        }
    }
}

/// `(KL(p || q), d KL / d logits)` for two log-probability vectors.
fn kl_and_logit_grad(logp: &[f64], logq: &[f64]) -> (f64, Vec<f64>) {
    let kl: f64 = logp.iter().zip(logq).map(|(p, q)| p.exp() * (p - q)).sum();
    let g = logp.iter().zip(logq).map(|(p, q)| p.exp() * (p - q - kl)).collect();
    (kl, g)
}

impl GroupPolicy for ToyPolicy {
    type Prompt = Observation;
    type Action = Action;

    fn params(&self) -> &[f64] {
        &self.params
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn log_prob(&self, obs: &Observation, a: &Action) -> f64 {
        let f = &obs.features[a.keyframe];
        self.key_logp(obs)[a.keyframe] + self.center_logp(f)[a.cell] + self.size_logp(f)[a.size]
    }

    fn add_grad_log_prob(&self, obs: &Observation, a: &Action, scale: f64, grad: &mut [f64]) {
        let scale = scale * self.inv_t();
        let key = self.key_logp(obs);
        for (t, lp) in key.iter().enumerate() {
            let d = scale * (f64::from(u8::from(t == a.keyframe)) - lp.exp());
            for (g, x) in grad[..FEATURES].iter_mut().zip(&obs.features[t]) {
                *g += d * x;
            }
        }
        let f = &obs.features[a.keyframe];
        Self::add_softmax_grad(grad, &self.center_logp(f), a.cell, f, scale, Self::center_offset);
        Self::add_softmax_grad(grad, &self.size_logp(f), a.size, f, scale, Self::size_offset);
    }

    fn exact_kl(&self, reference: &Self, obs: &Observation, scale: f64, grad: &mut [f64]) -> Option<f64> {
        let scale = scale * self.inv_t();
        let p = self.key_logp(obs);
        let q = reference.key_logp(obs);
        let mut d = Vec::with_capacity(p.len());
        for (k, f) in obs.features.iter().enumerate() {
            let pk = p[k].exp();
            let (klc, gc) = kl_and_logit_grad(&self.center_logp(f), &reference.center_logp(f));
            let (kls, gs) = kl_and_logit_grad(&self.size_logp(f), &reference.size_logp(f));
            for (j, g) in gc.iter().enumerate() {
                let o = Self::center_offset(j);
                for (dst, x) in grad[o..o + FEATURES].iter_mut().zip(f) {
                    *dst += scale * pk * g * x;
                }
            }
            for (j, g) in gs.iter().enumerate() {
                let o = Self::size_offset(j);
                for (dst, x) in grad[o..o + FEATURES].iter_mut().zip(f) {
                    *dst += scale * pk * g * x;
                }
            }
            d.push(p[k] - q[k] + klc + kls);
        }
        let kl: f64 = p.iter().zip(&d).map(|(lp, dk)| lp.exp() * dk).sum();
        for (k, f) in obs.features.iter().enumerate() {
            let g = scale * p[k].exp() * (d[k] - kl);
            for (dst, x) in grad[..FEATURES].iter_mut().zip(f) {
                *dst += g * x;
            }
        }
        Some(kl)
    }
}
