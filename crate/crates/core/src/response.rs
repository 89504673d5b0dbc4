//! Structured model output: `<think>…</think><answer>{…}</answer>`.
//!
//! The answer payload is a strict JSON object with exactly two keys,
//! `keyframe_timestamp` and `bbox_2d_list`. Parsing is total: any input
//! string produces either a [`StructuredResponse`] or a single
//! [`FormatFailure`], the first one encountered in document order.

use std::fmt;

use serde::de::{MapAccess, Visitor};
use serde::{Deserialize, Deserializer, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::geometry::BoundingBox;

const THINK_OPEN: &str = "<think>";
const THINK_CLOSE: &str = "</think>";
const ANSWER_OPEN: &str = "<answer>";
const ANSWER_CLOSE: &str = "</answer>";
const TAGS: [&str; 4] = [THINK_OPEN, THINK_CLOSE, ANSWER_OPEN, ANSWER_CLOSE];

pub const KEY_TIMESTAMP: &str = "keyframe_timestamp";
pub const KEY_BOXES: &str = "bbox_2d_list";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FormatFailure {
    MissingThink,
    MissingAnswer,
    BadOrder,
    BadPayload,
    BadBox,
    BadTimestamp,
    ExtraContent,
}

impl fmt::Display for FormatFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormatVerdict {
    pub well_formed: bool,
    pub failure_reason: Option<FormatFailure>,
}

impl FormatVerdict {
    pub fn of(text: &str) -> Self {
        match parse_response(text) {
            Ok(_) => Self {
                well_formed: true,
                failure_reason: None,
            },
            Err(reason) => Self {
                well_formed: false,
                failure_reason: Some(reason),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StructuredResponse {
    pub think_text: String,
    /// Seconds.
    pub keyframe_timestamp: f64,
    pub boxes: Vec<BoundingBox>,
    pub raw_text: String,
}

impl StructuredResponse {
    pub fn new(think_text: impl Into<String>, keyframe_timestamp: f64, boxes: Vec<BoundingBox>) -> Self {
        Self {
            think_text: think_text.into(),
            keyframe_timestamp,
            boxes,
            raw_text: String::new(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SerializeError {
    #[error("think text contains the tag literal {0}")]
    TagInThink(&'static str),
    #[error("keyframe timestamp {0} is not a finite non-negative number")]
    BadTimestamp(f64),
}

/// One line of a responses JSONL file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub sample_id: String,
    pub response: String,
}

fn trim(s: &str) -> &str {
    s.trim_matches(char::is_whitespace)
}

pub fn parse_response(text: &str) -> Result<StructuredResponse, FormatFailure> {
    let Some(think_at) = text.find(THINK_OPEN) else {
        return Err(FormatFailure::MissingThink);
    };
    if let Some(answer_at) = text.find(ANSWER_OPEN) {
        if answer_at < think_at {
            return Err(FormatFailure::BadOrder);
        }
    }
    if !trim(&text[..think_at]).is_empty() {
        return Err(FormatFailure::ExtraContent);
    }
    let body = &text[think_at + THINK_OPEN.len()..];
    let Some(close) = body.find(THINK_CLOSE) else {
        return Err(FormatFailure::MissingThink);
    };
    let think_text = &body[..close];
    if TAGS.iter().any(|t| think_text.contains(t)) {
        return Err(FormatFailure::BadOrder);
    }
    let rest = &body[close + THINK_CLOSE.len()..];
    let Some(answer_at) = rest.find(ANSWER_OPEN) else {
        return Err(FormatFailure::MissingAnswer);
    };
    if !trim(&rest[..answer_at]).is_empty() {
        return Err(FormatFailure::ExtraContent);
    }
    let body = &rest[answer_at + ANSWER_OPEN.len()..];
    let Some(close) = body.find(ANSWER_CLOSE) else {
        return Err(FormatFailure::MissingAnswer);
    };
    let payload = &body[..close];
    if TAGS.iter().any(|t| payload.contains(t)) {
        return Err(FormatFailure::BadOrder);
    }
    let (keyframe_timestamp, boxes) = parse_payload(payload)?;
    if !trim(&body[close + ANSWER_CLOSE.len()..]).is_empty() {
        return Err(FormatFailure::ExtraContent);
    }
    Ok(StructuredResponse {
        think_text: think_text.to_string(),
        keyframe_timestamp,
        boxes,
        raw_text: text.to_string(),
    })
}

/// Object entries in source order, duplicates preserved.
struct Entries(Vec<(String, Value)>);

impl<'de> Deserialize<'de> for Entries {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct EntriesVisitor;
        impl<'de> Visitor<'de> for EntriesVisitor {
            type Value = Entries;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a JSON object")
            }
            fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<Entries, A::Error> {
                let mut v = Vec::new();
                while let Some(entry) = map.next_entry::<String, Value>()? {
                    v.push(entry);
                }
                Ok(Entries(v))
            }
        }
        d.deserialize_map(EntriesVisitor)
    }
}

fn parse_payload(payload: &str) -> Result<(f64, Vec<BoundingBox>), FormatFailure> {
    let Entries(entries) = serde_json::from_str(payload).map_err(|_| FormatFailure::BadPayload)?;
    let mut timestamp = None;
    let mut boxes = None;
    for (key, value) in &entries {
        match key.as_str() {
            KEY_TIMESTAMP if timestamp.is_none() => timestamp = Some(value),
            KEY_BOXES if boxes.is_none() => boxes = Some(value),
            _ => return Err(FormatFailure::BadPayload),
        }
    }
    let (Some(_), Some(_)) = (timestamp, boxes) else {
        return Err(FormatFailure::BadPayload);
    };
    // Field checks follow source order.
    let mut ts = None;
    let mut list = None;
    for (key, value) in &entries {
        if key == KEY_TIMESTAMP {
            ts = Some(parse_timestamp(value)?);
        } else {
            list = Some(parse_boxes(value)?);
        }
    }
    Ok((ts.unwrap_or_default(), list.unwrap_or_default()))
}

fn parse_timestamp(v: &Value) -> Result<f64, FormatFailure> {
    let t = match v {
        Value::Number(n) => n.as_f64(),
        Value::String(s) => {
            let s = s.strip_suffix('s').unwrap_or(s);
            let numeric = !s.is_empty()
                && s.chars().all(|c| c.is_ascii_digit() || c == '.')
                && s.chars().filter(|c| *c == '.').count() <= 1
                && s.chars().next().is_some_and(|c| c.is_ascii_digit())
                && s.chars().last().is_some_and(|c| c.is_ascii_digit());
            if numeric {
                s.parse::<f64>().ok()
            } else {
                None
            }
        }
        _ => None,
    };
    match t {
        Some(t) if t.is_finite() && t >= 0.0 => Ok(t),
        _ => Err(FormatFailure::BadTimestamp),
    }
}

fn parse_boxes(v: &Value) -> Result<Vec<BoundingBox>, FormatFailure> {
    let Value::Array(items) = v else {
        return Err(FormatFailure::BadPayload);
    };
    items
        .iter()
        .map(|item| {
            let Value::Array(coords) = item else {
                return Err(FormatFailure::BadBox);
            };
            if coords.len() != 4 {
                return Err(FormatFailure::BadBox);
            }
            let mut c = [0.0; 4];
            for (slot, value) in c.iter_mut().zip(coords) {
                *slot = value.as_f64().ok_or(FormatFailure::BadBox)?;
            }
            BoundingBox::try_from(c).map_err(|_| FormatFailure::BadBox)
        })
        .collect()
}

fn push_number(out: &mut String, v: f64) {
    // Display for f64 is the shortest string that parses back to the same value.
    out.push_str(&format!("{v}"));
}

pub fn serialize_response(r: &StructuredResponse) -> Result<String, SerializeError> {
    if let Some(tag) = TAGS.iter().find(|t| r.think_text.contains(**t)) {
        return Err(SerializeError::TagInThink(tag));
    }
    let t = r.keyframe_timestamp;
    if !t.is_finite() || t < 0.0 {
        return Err(SerializeError::BadTimestamp(t));
    }
    let mut out = String::with_capacity(r.think_text.len() + 64 + 32 * r.boxes.len());
    out.push_str(THINK_OPEN);
    out.push_str(&r.think_text);
    out.push_str(THINK_CLOSE);
    out.push_str(ANSWER_OPEN);
    out.push_str("{\"keyframe_timestamp\": ");
    push_number(&mut out, t);
    out.push_str(", \"bbox_2d_list\": [");
    for (i, b) in r.boxes.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push('[');
        for (j, c) in b.to_array().into_iter().enumerate() {
            if j > 0 {
                out.push_str(", ");
            }
            push_number(&mut out, c);
        }
        out.push(']');
    }
    out.push_str("]}");
    out.push_str(ANSWER_CLOSE);
    Ok(out)
}

/// Index of the sampled time nearest to `t`; ties go to the earlier frame.
///
/// `sampled_times` must be non-empty. Out-of-range times clamp to an endpoint.
pub fn snap_timestamp(t: f64, sampled_times: &[f64]) -> usize {
    let t = if t.is_nan() { 0.0 } else { t };
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, s) in sampled_times.iter().enumerate() {
        let d = (s - t).abs();
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    best
}
