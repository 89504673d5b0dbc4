//! Region similarity J, contour accuracy F, J&F and a no-target robustness
//! score over predicted mask sequences.

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::Sample;
use crate::geometry::{
    boundary_fscore, default_boundary_tolerance, mask_iou, rle_decode, rle_encode, GeometryError, MaskSequence,
    RleMask,
};

pub const SUBSETS: [&str; 2] = ["referring", "reasoning"];

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("sequence lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("prediction for unknown sample_id {0:?}")]
    UnknownSample(String),
    #[error("duplicate prediction for sample_id {0:?}")]
    DuplicatePrediction(String),
    #[error("sample {sample_id}: {source}")]
    BadPrediction {
        sample_id: String,
        #[source]
        source: GeometryError,
    },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub sample_id: String,
    pub masks: Vec<RleMask>,
}

impl PredictionRecord {
    pub fn new(sample_id: impl Into<String>, masks: &MaskSequence) -> Self {
        Self {
            sample_id: sample_id.into(),
            masks: masks.frames().iter().map(rle_encode).collect(),
        }
    }

    pub fn decode(&self) -> Result<MaskSequence, EvalError> {
        let wrap = |source| EvalError::BadPrediction {
            sample_id: self.sample_id.clone(),
            source,
        };
        let frames = self
            .masks
            .iter()
            .map(rle_decode)
            .collect::<Result<Vec<_>, _>>()
            .map_err(wrap)?;
        MaskSequence::new(frames).map_err(wrap)
    }
}

fn check_lengths(pred: &MaskSequence, gt: &MaskSequence) -> Result<(), EvalError> {
    if pred.len() != gt.len() {
        return Err(EvalError::LengthMismatch(pred.len(), gt.len()));
    }
    Ok(())
}

pub fn region_similarity(pred: &MaskSequence, gt: &MaskSequence) -> Result<f64, EvalError> {
    check_lengths(pred, gt)?;
    let mut sum = 0.0;
    for (p, g) in pred.frames().iter().zip(gt.frames()) {
        sum += mask_iou(p, g)?;
    }
    Ok(sum / gt.len() as f64)
}

pub fn contour_accuracy(pred: &MaskSequence, gt: &MaskSequence, tol: usize) -> Result<f64, EvalError> {
    check_lengths(pred, gt)?;
    let mut sum = 0.0;
    for (p, g) in pred.frames().iter().zip(gt.frames()) {
        sum += boundary_fscore(p, g, tol)?;
    }
    Ok(sum / gt.len() as f64)
}

/// Per-sample no-target score: 1 for an all-empty prediction, otherwise one
/// minus the predicted foreground fraction.
pub fn rejection_score(pred: &MaskSequence) -> f64 {
    let fg: usize = pred.frames().iter().map(|m| m.area()).sum();
    let total = pred.len() * pred.width() * pred.height();
    if fg == 0 || total == 0 {
        1.0
    } else {
        1.0 - fg as f64 / total as f64
    }
}

/// `100 * mean(rejection_score)`, or `None` without negatives.
pub fn robustness(preds: &[MaskSequence]) -> Option<f64> {
    if preds.is_empty() {
        return None;
    }
    Some(100.0 * preds.iter().map(rejection_score).sum::<f64>() / preds.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMetrics {
    pub sample_id: String,
    pub subset: String,
    pub predicted: bool,
    pub j: f64,
    pub f: f64,
    pub jf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetMetrics {
    pub name: String,
    pub count: usize,
    pub j: f64,
    pub f: f64,
    pub jf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub samples: Vec<SampleMetrics>,
    /// Positive samples only; `overall` comes last.
    pub subsets: Vec<SubsetMetrics>,
    pub negatives: usize,
    pub robustness_r: Option<f64>,
}

impl EvalReport {
    pub fn subset(&self, name: &str) -> Option<&SubsetMetrics> {
        self.subsets.iter().find(|s| s.name == name)
    }

    pub fn overall(&self) -> &SubsetMetrics {
        self.subset("overall").expect("overall is always present")
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        writeln!(s, "# J, F, J&F are x100 means over positive samples.").unwrap();
        writeln!(
            s,
            "# R is this tool's no-target rejection score over negative samples; it is not comparable to published benchmark R values."
        )
        .unwrap();
        writeln!(s, "{:<10} {:>6} {:>6} {:>6} {:>6}", "subset", "n", "J", "F", "J&F").unwrap();
        for m in &self.subsets {
            writeln!(s, "{:<10} {:>6} {:>6.1} {:>6.1} {:>6.1}", m.name, m.count, m.j, m.f, m.jf).unwrap();
        }
        match self.robustness_r {
            Some(r) => writeln!(s, "R ({} negatives): {r:.1}", self.negatives).unwrap(),
            None => writeln!(s, "R: n/a (no negative samples)").unwrap(),
        }
        s
    }
}

fn aggregate(name: &str, rows: &[&SampleMetrics]) -> SubsetMetrics {
    let n = rows.len();
    let mean = |get: fn(&SampleMetrics) -> f64| {
        if n == 0 {
            0.0
        } else {
            100.0 * rows.iter().map(|r| get(r)).sum::<f64>() / n as f64
        }
    };
    let (j, f) = (mean(|r| r.j), mean(|r| r.f));
    SubsetMetrics {
        name: name.to_string(),
        count: n,
        j,
        f,
        jf: (j + f) / 2.0,
    }
}

/// Scores `predictions` against the samples' merged ground truth. A sample
/// without a prediction scores J = F = 0, and 0 on R if it is negative.
pub fn evaluate(samples: &[Sample], predictions: &[PredictionRecord]) -> Result<EvalReport, EvalError> {
    let index: HashMap<&str, usize> = samples.iter().enumerate().map(|(i, s)| (s.sample_id.as_str(), i)).collect();
    let mut by_sample: Vec<Option<&PredictionRecord>> = vec![None; samples.len()];
    for p in predictions {
        let i = *index
            .get(p.sample_id.as_str())
            .ok_or_else(|| EvalError::UnknownSample(p.sample_id.clone()))?;
        if by_sample[i].replace(p).is_some() {
            return Err(EvalError::DuplicatePrediction(p.sample_id.clone()));
        }
    }

    let mut rows = Vec::with_capacity(samples.len());
    let mut rejection = Vec::new();
    for (s, p) in samples.iter().zip(&by_sample) {
        let gt = MaskSequence::new(s.gt.merged_masks().to_vec())?;
        let (j, f) = match p {
            Some(p) => {
                let pred = p.decode()?;
                let bad = |e: EvalError| match e {
                    EvalError::Geometry(source) => EvalError::BadPrediction {
                        sample_id: s.sample_id.clone(),
                        source,
                    },
                    other => other,
                };
                let j = region_similarity(&pred, &gt).map_err(bad)?;
                let f = contour_accuracy(&pred, &gt, default_boundary_tolerance(gt.width(), gt.height())).map_err(bad)?;
                if s.is_negative() {
                    rejection.push(rejection_score(&pred));
                }
                (j, f)
            }
            None => {
                if s.is_negative() {
                    rejection.push(0.0);
                }
                (0.0, 0.0)
            }
        };
        rows.push(SampleMetrics {
            sample_id: s.sample_id.clone(),
            subset: s.query.subset().to_string(),
            predicted: p.is_some(),
            j,
            f,
            jf: (j + f) / 2.0,
        });
    }

    let positives: Vec<&SampleMetrics> = rows.iter().filter(|r| r.subset != "negative").collect();
    let mut subsets: Vec<SubsetMetrics> = SUBSETS
        .iter()
        .map(|name| {
            let part: Vec<&SampleMetrics> = positives.iter().copied().filter(|r| r.subset == *name).collect();
            aggregate(name, &part)
        })
        .collect();
    subsets.push(aggregate("overall", &positives));
    let robustness_r = (!rejection.is_empty()).then(|| 100.0 * rejection.iter().sum::<f64>() / rejection.len() as f64);
    Ok(EvalReport {
        samples: rows,
        subsets,
        negatives: rejection.len(),
        robustness_r,
    })
}

/// Ground truth as predictions; evaluates to 100 everywhere.
pub fn ground_truth_predictions(samples: &[Sample]) -> Vec<PredictionRecord> {
    samples
        .iter()
        .map(|s| PredictionRecord {
            sample_id: s.sample_id.clone(),
            masks: s.gt.merged_masks().iter().map(rle_encode).collect(),
        })
        .collect()
}
