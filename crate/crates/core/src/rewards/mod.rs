//! Four-part reward for keyframe + box answers.
//!
//! * format: 1 when the response parses, else 0;
//! * temporal: merged GT area at the chosen frame over the largest merged area;
//! * spatial: Hungarian-matched box IoUs summed and divided by the larger count;
//! * unified: mean per-frame IoU of propagated masks against merged GT.
//!
//! A response that fails to parse scores zero on every term.

pub mod hungarian;
pub mod propagate;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{box_iou, mask_iou, BinaryMask, BoundingBox, GeometryError};
use crate::response::{parse_response, snap_timestamp, StructuredResponse};

pub use hungarian::{hungarian, Assignment};
pub use propagate::{
    InstanceTracks, LabelMapPropagator, MaskPropagator, OraclePropagator, PropagationError, PropagatorKind,
    SceneFrames,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RewardError {
    #[error("keyframe index {index} out of range for {frames} frames")]
    KeyframeOutOfRange { index: usize, frames: usize },
    #[error("ground truth: {0}")]
    InvalidGroundTruth(String),
    #[error("reward weight {name} = {value} must be finite and non-negative")]
    InvalidWeight { name: &'static str, value: f64 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// One referred object's track over the sampled frames.
#[derive(Debug, Clone, PartialEq)]
pub struct GtObject {
    pub object_id: u32,
    pub masks: Vec<BinaryMask>,
    /// Tight box per frame, `None` where the object is not visible.
    pub boxes: Vec<Option<BoundingBox>>,
}

impl GtObject {
    /// Builds a track, deriving boxes as tight boxes of the masks.
    pub fn from_masks(object_id: u32, masks: Vec<BinaryMask>) -> Self {
        let boxes = masks.iter().map(BinaryMask::tight_box).collect();
        Self { object_id, masks, boxes }
    }
}

/// Ground truth for one sample over its sampled frames.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruthSample {
    sampled_times: Vec<f64>,
    width: usize,
    height: usize,
    objects: Vec<GtObject>,
    merged: Vec<BinaryMask>,
}

impl GroundTruthSample {
    pub fn new(
        sampled_times: Vec<f64>,
        width: usize,
        height: usize,
        mut objects: Vec<GtObject>,
    ) -> Result<Self, RewardError> {
        let t = sampled_times.len();
        if t == 0 {
            return Err(RewardError::InvalidGroundTruth("no sampled frames".into()));
        }
        if sampled_times.windows(2).any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less)) {
            return Err(RewardError::InvalidGroundTruth("sampled times must increase".into()));
        }
        objects.sort_by_key(|o| o.object_id);
        let mut merged = vec![BinaryMask::empty(width, height); t];
        for o in &objects {
            if o.masks.len() != t || o.boxes.len() != t {
                return Err(RewardError::InvalidGroundTruth(format!(
                    "object {} has {} masks for {t} frames",
                    o.object_id,
                    o.masks.len()
                )));
            }
            for (f, (m, b)) in o.masks.iter().zip(&o.boxes).enumerate() {
                if m.width() != width || m.height() != height {
                    return Err(GeometryError::DimensionMismatch(m.width(), m.height(), width, height).into());
                }
                if m.tight_box() != *b {
                    return Err(RewardError::InvalidGroundTruth(format!(
                        "object {} frame {f}: box is not the tight box of its mask",
                        o.object_id
                    )));
                }
                merged[f].union_with(m)?;
            }
        }
        Ok(Self {
            sampled_times,
            width,
            height,
            objects,
            merged,
        })
    }

    pub fn sampled_times(&self) -> &[f64] {
        &self.sampled_times
    }

    pub fn num_frames(&self) -> usize {
        self.sampled_times.len()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn objects(&self) -> &[GtObject] {
        &self.objects
    }

    pub fn merged_masks(&self) -> &[BinaryMask] {
        &self.merged
    }

    pub fn merged_areas(&self) -> Vec<usize> {
        self.merged.iter().map(BinaryMask::area).collect()
    }

    /// No referred object is visible in any sampled frame.
    pub fn is_negative(&self) -> bool {
        self.merged.iter().all(BinaryMask::is_empty)
    }

    /// Boxes of the objects visible at `frame`, in object-id order.
    pub fn boxes_at(&self, frame: usize) -> Vec<BoundingBox> {
        self.objects.iter().filter_map(|o| o.boxes[frame]).collect()
    }

    /// First frame with the largest merged area.
    pub fn argmax_area_frame(&self) -> usize {
        let areas = self.merged_areas();
        let mut best = 0;
        for (i, a) in areas.iter().enumerate() {
            if *a > areas[best] {
                best = i;
            }
        }
        best
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardWeights {
    pub alpha_f: f64,
    pub alpha_k: f64,
    pub alpha_s: f64,
    pub alpha_u: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            alpha_f: 1.0,
            alpha_k: 1.0,
            alpha_s: 1.0,
            alpha_u: 1.0,
        }
    }
}

impl RewardWeights {
    pub fn validate(&self) -> Result<(), RewardError> {
        for (name, value) in [
            ("alpha_f", self.alpha_f),
            ("alpha_k", self.alpha_k),
            ("alpha_s", self.alpha_s),
            ("alpha_u", self.alpha_u),
        ] {
            if !value.is_finite() || value < 0.0 {
                return Err(RewardError::InvalidWeight { name, value });
            }
        }
        Ok(())
    }

    pub fn sum(&self) -> f64 {
        self.alpha_f + self.alpha_k + self.alpha_s + self.alpha_u
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            alpha_f: self.alpha_f * c,
            alpha_k: self.alpha_k * c,
            alpha_s: self.alpha_s * c,
            alpha_u: self.alpha_u * c,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub r_format: f64,
    pub r_temporal: f64,
    pub r_spatial: f64,
    pub r_unified: f64,
    pub r_total: f64,
    /// Set when a sub-reward was forced to zero by a recoverable failure.
    pub diag: Option<String>,
}

impl RewardBreakdown {
    fn weighted(r_format: f64, r_temporal: f64, r_spatial: f64, r_unified: f64, w: &RewardWeights) -> Self {
        let r_total = w.alpha_f * r_format + w.alpha_k * r_temporal + w.alpha_s * r_spatial + w.alpha_u * r_unified;
        Self {
            r_format,
            r_temporal,
            r_spatial,
            r_unified,
            r_total,
            diag: None,
        }
    }
}

/// One line of a scores JSONL file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub sample_id: String,
    pub r_f: f64,
    pub r_k: f64,
    pub r_s: f64,
    pub r_u: f64,
    pub r_total: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diag: Option<String>,
}

impl ScoreRecord {
    pub fn new(sample_id: impl Into<String>, b: &RewardBreakdown) -> Self {
        Self {
            sample_id: sample_id.into(),
            r_f: b.r_format,
            r_k: b.r_temporal,
            r_s: b.r_spatial,
            r_u: b.r_unified,
            r_total: b.r_total,
            diag: b.diag.clone(),
        }
    }
}

pub fn format_reward(text: &str) -> f64 {
    if parse_response(text).is_ok() {
        1.0
    } else {
        0.0
    }
}

/// `S[k] / max_t S[t]` on merged GT areas. With no target anywhere, an empty
/// answer scores 1 and any box scores 0.
pub fn temporal_reward(
    keyframe: usize,
    pred_boxes: &[BoundingBox],
    gt: &GroundTruthSample,
) -> Result<f64, RewardError> {
    let areas = gt.merged_areas();
    if keyframe >= areas.len() {
        return Err(RewardError::KeyframeOutOfRange {
            index: keyframe,
            frames: areas.len(),
        });
    }
    let max = areas.iter().copied().max().unwrap_or(0);
    if max == 0 {
        return Ok(if pred_boxes.is_empty() { 1.0 } else { 0.0 });
    }
    Ok(areas[keyframe] as f64 / max as f64)
}

/// Cost matrix `1 - IoU` between predicted rows and GT columns.
pub fn iou_cost_matrix(pred: &[BoundingBox], gt: &[BoundingBox]) -> Vec<Vec<f64>> {
    pred.iter()
        .map(|p| gt.iter().map(|g| 1.0 - box_iou(p, g)).collect())
        .collect()
}

pub fn spatial_reward(pred: &[BoundingBox], gt: &[BoundingBox]) -> f64 {
    match (pred.is_empty(), gt.is_empty()) {
        (true, true) => return 1.0,
        (true, false) | (false, true) => return 0.0,
        _ => {}
    }
    let a = hungarian(&iou_cost_matrix(pred, gt));
    let matched: f64 = a
        .matched_pairs
        .iter()
        .map(|&(i, j)| box_iou(&pred[i], &gt[j]))
        .sum();
    (matched / pred.len().max(gt.len()) as f64).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnifiedOutcome {
    pub value: f64,
    pub diag: Option<String>,
}

/// Predicted boxes that Hungarian matching pairs with GT boxes at `keyframe`.
pub fn matched_boxes(pred: &[BoundingBox], gt: &GroundTruthSample, keyframe: usize) -> Vec<BoundingBox> {
    let gt_boxes = gt.boxes_at(keyframe);
    hungarian(&iou_cost_matrix(pred, &gt_boxes))
        .matched_pairs
        .iter()
        .map(|&(i, _)| pred[i])
        .collect()
}

/// Mean IoU between propagated masks and merged GT over all sampled frames.
///
/// Propagator failures score 0 and are reported through `diag`.
pub fn unified_reward(
    pred: &[BoundingBox],
    keyframe: usize,
    scene: &SceneFrames<'_>,
    propagator: &dyn MaskPropagator,
) -> Result<UnifiedOutcome, RewardError> {
    let gt = scene.gt;
    if keyframe >= gt.num_frames() {
        return Err(RewardError::KeyframeOutOfRange {
            index: keyframe,
            frames: gt.num_frames(),
        });
    }
    let matched = matched_boxes(pred, gt, keyframe);
    if matched.is_empty() {
        let value = if gt.is_negative() { 1.0 } else { 0.0 };
        return Ok(UnifiedOutcome { value, diag: None });
    }
    let masks = match propagator.propagate(&matched, scene, keyframe) {
        Ok(m) => m,
        Err(e) => {
            return Ok(UnifiedOutcome {
                value: 0.0,
                diag: Some(format!("{} propagator failed: {e}", propagator.name())),
            })
        }
    };
    if masks.len() != gt.num_frames() {
        return Ok(UnifiedOutcome {
            value: 0.0,
            diag: Some(format!(
                "{} propagator returned {} frames, expected {}",
                propagator.name(),
                masks.len(),
                gt.num_frames()
            )),
        });
    }
    let mut sum = 0.0;
    for (m, g) in masks.frames().iter().zip(gt.merged_masks()) {
        sum += mask_iou(m, g)?;
    }
    Ok(UnifiedOutcome {
        value: sum / gt.num_frames() as f64,
        diag: None,
    })
}

/// Scores an already parsed response.
pub fn score_parsed(
    response: &StructuredResponse,
    scene: &SceneFrames<'_>,
    weights: &RewardWeights,
    propagator: &dyn MaskPropagator,
) -> Result<RewardBreakdown, RewardError> {
    let gt = scene.gt;
    let keyframe = snap_timestamp(response.keyframe_timestamp, gt.sampled_times());
    let r_k = temporal_reward(keyframe, &response.boxes, gt)?;
    let r_s = spatial_reward(&response.boxes, &gt.boxes_at(keyframe));
    let unified = unified_reward(&response.boxes, keyframe, scene, propagator)?;
    let mut b = RewardBreakdown::weighted(1.0, r_k, r_s, unified.value, weights);
    b.diag = unified.diag;
    Ok(b)
}

pub fn total_reward(
    text: &str,
    scene: &SceneFrames<'_>,
    weights: &RewardWeights,
    propagator: &dyn MaskPropagator,
) -> Result<RewardBreakdown, RewardError> {
    match parse_response(text) {
        Ok(r) => score_parsed(&r, scene, weights, propagator),
        Err(reason) => {
            let mut b = RewardBreakdown::weighted(0.0, 0.0, 0.0, 0.0, weights);
            b.diag = Some(format!("format: {reason}"));
            Ok(b)
        }
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// Square object of side `side` at `(x, y)` in every listed frame.
    pub fn square_track(id: u32, frames: &[Option<(usize, usize, usize)>], w: usize, h: usize) -> GtObject {
        let masks = frames
            .iter()
            .map(|f| match f {
                Some((x, y, side)) => {
                    BinaryMask::from_fn(w, h, |px, py| (*x..x + side).contains(&px) && (*y..y + side).contains(&py))
                }
                None => BinaryMask::empty(w, h),
            })
            .collect();
        GtObject::from_masks(id, masks)
    }

    pub fn times(n: usize) -> Vec<f64> {
        (0..n).map(|i| i as f64).collect()
    }
}
