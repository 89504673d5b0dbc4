//! Supervised reasoning records: a pseudo keyframe drawn from the frames where
//! the target is largest, template-filled reasoning text and the ground-truth
//! answer at that frame.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::{Sample, Shape, SyntheticVideo, PALETTE};
use crate::geometry::BoundingBox;
use crate::response::{serialize_response, SerializeError, StructuredResponse};
use crate::rewards::GroundTruthSample;
use crate::rng;

pub const TOP_K: usize = 5;

pub const TEMPLATES: [&str; 3] = [
    "First, I analyze the scene. {scene_summary} Next, I check which frame best supports the query. {keyframe_justification} Finally, I localize the referred object in that frame. {localization_description}",
    "Scene overview: {scene_summary} Choosing the keyframe: {keyframe_justification} Grounding: {localization_description}",
    "Let me go through the clip step by step. {scene_summary} The frame that matters most is the one where the target is easiest to see. {keyframe_justification} With that frame fixed, {localization_description}",
];

const SLOTS: [&str; 3] = ["{scene_summary}", "{keyframe_justification}", "{localization_description}"];

#[derive(Debug, Error)]
pub enum CotError {
    #[error("target is never visible; no keyframe to sample")]
    NoVisibleTarget,
    #[error(transparent)]
    Serialize(#[from] SerializeError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CotRecord {
    pub sample_id: String,
    pub prompt: String,
    pub target: String,
    #[serde(skip)]
    pub template_id: usize,
    #[serde(skip)]
    pub keyframe: usize,
}

/// Frames ranked by merged target area, largest first, earlier index first
/// on ties; frames where the target is invisible are left out.
pub fn keyframe_candidates(gt: &GroundTruthSample) -> Vec<usize> {
    let areas = gt.merged_areas();
    let mut order: Vec<usize> = (0..areas.len()).filter(|&t| areas[t] > 0).collect();
    order.sort_by(|&a, &b| areas[b].cmp(&areas[a]));
    order.truncate(TOP_K);
    order
}

pub fn sample_pseudo_keyframe<R: Rng>(gt: &GroundTruthSample, rng: &mut R) -> Result<usize, CotError> {
    let c = keyframe_candidates(gt);
    if c.is_empty() {
        return Err(CotError::NoVisibleTarget);
    }
    Ok(c[rng.gen_range(0..c.len())])
}

pub fn format_seconds(t: f64) -> String {
    if t.fract() == 0.0 && t.abs() < 1e15 {
        format!("{}s", t as i64)
    } else {
        format!("{t}s")
    }
}

/// Question shared by the supervised and RL stages, with a `<Ns>` marker in
/// front of every sampled frame.
pub fn prompt_text(video: &SyntheticVideo, expression: &str) -> String {
    let frames: Vec<String> = video
        .sampled_times
        .iter()
        .map(|t| format!("<{}> [frame]", format_seconds(*t)))
        .collect();
    format!(
        "{}\nFind {expression} in this video. Reason about which frame shows it best inside think tags, then give the keyframe timestamp in seconds and one bounding box per referred object as JSON inside answer tags.",
        frames.join(" ")
    )
}

fn motion_words(v: [f64; 2]) -> String {
    let speed = v[0].hypot(v[1]);
    if speed < 0.5 {
        return "staying almost still".to_string();
    }
    let dir = if v[0].abs() >= v[1].abs() {
        if v[0] > 0.0 { "right" } else { "left" }
    } else if v[1] > 0.0 {
        "down"
    } else {
        "up"
    };
    let pace = if speed > 2.5 { "quickly" } else { "slowly" };
    format!("moving {pace} to the {dir}").replace("to the up", "upward").replace("to the down", "downward")
}

fn scene_summary(video: &SyntheticVideo) -> String {
    let parts: Vec<String> = video
        .objects
        .iter()
        .map(|o| {
            let shape = match o.shape {
                Shape::Rectangle => "rectangle",
                Shape::Ellipse => "ellipse",
            };
            let color = PALETTE[o.color_id as usize % PALETTE.len()].0;
            format!("a {color} {shape} {}", motion_words(o.velocity))
        })
        .collect();
    let bar = match video.occluders.len() {
        0 => String::new(),
        1 => " A gray bar hides part of the view.".to_string(),
        n => format!(" {n} gray bars hide part of the view."),
    };
    format!("The clip shows {} object(s): {}.{bar}", parts.len(), parts.join(", "))
}

fn keyframe_justification(gt: &GroundTruthSample, keyframe: usize) -> String {
    let areas = gt.merged_areas();
    let rank = 1 + areas.iter().filter(|a| **a > areas[keyframe]).count();
    format!(
        "At {} the target is clearly visible; its visible area ranks {rank} of {} sampled frames.",
        format_seconds(gt.sampled_times()[keyframe]),
        areas.len()
    )
}

fn position_phrase(b: &BoundingBox, width: usize, height: usize) -> String {
    let (cx, cy) = b.center();
    let col = ["left", "center", "right"][((3.0 * cx / width as f64) as usize).min(2)];
    let row = ["top", "middle", "bottom"][((3.0 * cy / height as f64) as usize).min(2)];
    match (row, col) {
        ("middle", "center") => "the center".to_string(),
        ("middle", c) => format!("the {c} side"),
        (r, "center") => format!("the {r} middle"),
        (r, c) => format!("the {r}-{c} area"),
    }
}

fn localization_description(boxes: &[BoundingBox], width: usize, height: usize) -> String {
    let places: Vec<String> = boxes.iter().map(|b| position_phrase(b, width, height)).collect();
    match places.len() {
        0 => "nothing needs a box.".to_string(),
        1 => format!("the referred object sits in {} of the frame.", places[0]),
        _ => format!("the referred objects sit in {} of the frame.", places.join(", ")),
    }
}

pub fn render_template(template_id: usize, slots: [&str; 3]) -> String {
    let mut s = TEMPLATES[template_id].to_string();
    for (name, value) in SLOTS.iter().zip(slots) {
        s = s.replace(name, value);
    }
    s
}

pub fn build_record<R: Rng>(sample: &Sample, keyframe: usize, rng: &mut R) -> Result<CotRecord, CotError> {
    let template_id = rng.gen_range(0..TEMPLATES.len());
    let gt = &sample.gt;
    let boxes = gt.boxes_at(keyframe);
    let think = render_template(
        template_id,
        [
            &scene_summary(&sample.video),
            &keyframe_justification(gt, keyframe),
            &localization_description(&boxes, gt.width(), gt.height()),
        ],
    );
    let response = StructuredResponse::new(think, gt.sampled_times()[keyframe], boxes);
    Ok(CotRecord {
        sample_id: sample.sample_id.clone(),
        prompt: prompt_text(&sample.video, &sample.query.expression_text),
        target: serialize_response(&response)?,
        template_id,
        keyframe,
    })
}

/// One record per positive sample, each drawn from its own stream.
pub fn generate_records(seed: u64, samples: &[Sample]) -> Result<Vec<CotRecord>, CotError> {
    samples
        .iter()
        .enumerate()
        .filter(|(_, s)| !s.is_negative())
        .map(|(i, s)| {
            let mut r = rng::stream(seed, "cot", i as u64);
            let k = sample_pseudo_keyframe(&s.gt, &mut r)?;
            build_record(s, k, &mut r)
        })
        .collect()
}

pub fn to_jsonl(records: &[CotRecord]) -> String {
    records
        .iter()
        .map(|r| serde_json::to_string(r).expect("records serialize") + "\n")
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{generate_dataset, GenConfig};
    use crate::response::parse_response;
    use crate::rewards::fixtures::{square_track, times};
    use crate::rewards::{spatial_reward, temporal_reward};

    fn gt_with_areas(sides: &[usize]) -> GroundTruthSample {
        let frames: Vec<Option<(usize, usize, usize)>> =
            sides.iter().map(|&s| (s > 0).then_some((1, 1, s))).collect();
        GroundTruthSample::new(times(sides.len()), 16, 16, vec![square_track(1, &frames, 16, 16)]).unwrap()
    }

    #[test]
    fn candidates_follow_area_rank_with_earlier_ties() {
        assert_eq!(keyframe_candidates(&gt_with_areas(&[9, 8, 7, 6, 5, 4, 3])), vec![0, 1, 2, 3, 4]);
        assert_eq!(keyframe_candidates(&gt_with_areas(&[1, 2, 3])), vec![2, 1, 0]);
        assert_eq!(keyframe_candidates(&gt_with_areas(&[5; 6])), vec![0, 1, 2, 3, 4]);
        assert_eq!(keyframe_candidates(&gt_with_areas(&[0, 4, 0])), vec![1]);
        let mut r = rng::stream(0, "t", 0);
        assert!(matches!(
            sample_pseudo_keyframe(&gt_with_areas(&[0, 0]), &mut r),
            Err(CotError::NoVisibleTarget)
        ));
    }

    #[test]
    fn pseudo_keyframe_is_uniform_over_top_five() {
        let gt = gt_with_areas(&[3, 9, 4, 8, 7, 6, 5]);
        let mut r = rng::stream(1, "uniform", 0);
        let mut counts = [0usize; 7];
        let n = 10_000;
        for _ in 0..n {
            counts[sample_pseudo_keyframe(&gt, &mut r).unwrap()] += 1;
        }
        assert_eq!(counts[0] + counts[2], 0);
        let (e, sd) = (n as f64 / 5.0, (n as f64 * 0.2 * 0.8).sqrt());
        for c in [counts[1], counts[3], counts[4], counts[5], counts[6]] {
            assert!((c as f64 - e).abs() < 3.0 * sd, "{counts:?}");
        }
    }

    #[test]
    fn templates_have_each_slot_once_and_no_tags() {
        for t in TEMPLATES {
            for s in SLOTS {
                assert_eq!(t.matches(s).count(), 1, "{t}");
            }
            for tag in ["<think>", "</think>", "<answer>", "</answer>"] {
                assert!(!t.contains(tag));
            }
        }
    }

    #[test]
    fn template_choice_is_uniform() {
        let gt = generate_dataset(3, &GenConfig { n_videos: 1, negative_fraction: 0.0, ..GenConfig::default() })
            .unwrap()
            .decode_samples()
            .unwrap();
        let mut r = rng::stream(2, "templates", 0);
        let mut counts = [0usize; 3];
        let n = 10_000;
        let k = keyframe_candidates(&gt[0].gt)[0];
        for _ in 0..n {
            counts[build_record(&gt[0], k, &mut r).unwrap().template_id] += 1;
        }
        let (e, sd) = (n as f64 / 3.0, (n as f64 * (1.0 / 3.0) * (2.0 / 3.0)).sqrt());
        for c in counts {
            assert!((c as f64 - e).abs() < 3.0 * sd, "{counts:?}");
        }
    }

    #[test]
    fn records_are_self_consistent_and_deterministic() {
        let cfg = GenConfig {
            n_videos: 40,
            negative_fraction: 0.2,
            ..GenConfig::default()
        };
        let samples = generate_dataset(6, &cfg).unwrap().decode_samples().unwrap();
        let records = generate_records(6, &samples).unwrap();
        assert_eq!(records.len(), samples.iter().filter(|s| !s.is_negative()).count());
        assert_eq!(to_jsonl(&records), to_jsonl(&generate_records(6, &samples).unwrap()));
        for rec in &records {
            let s = samples.iter().find(|s| s.sample_id == rec.sample_id).unwrap();
            let parsed = parse_response(&rec.target).unwrap();
            assert_eq!(parsed.boxes.len(), s.gt.objects().len());
            let k = rec.keyframe;
            assert_eq!(parsed.keyframe_timestamp, s.gt.sampled_times()[k]);
            assert!(keyframe_candidates(&s.gt).contains(&k));
            assert_eq!(spatial_reward(&parsed.boxes, &s.gt.boxes_at(k)), 1.0);
            let areas = s.gt.merged_areas();
            let floor = keyframe_candidates(&s.gt).iter().map(|&t| areas[t]).min().unwrap() as f64
                / *areas.iter().max().unwrap() as f64;
            assert!(temporal_reward(k, &parsed.boxes, &s.gt).unwrap() >= floor);
            assert!(rec.prompt.starts_with("<0s> [frame] <1s>"));
        }
    }
}
