//! Keyframe boxes to full mask sequences.
//!
//! A propagator receives the matched boxes at one keyframe and returns one
//! mask per sampled frame, already merged across objects.

use thiserror::Error;

use super::GroundTruthSample;
use crate::geometry::{box_iou, box_to_mask, BinaryMask, BoundingBox, LabelMap, MaskSequence};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PropagationError {
    #[error("keyframe {index} out of range for {frames} frames")]
    KeyframeOutOfRange { index: usize, frames: usize },
    #[error("scene carries no instance label maps")]
    MissingLabelMaps,
    #[error("instance tracks cover {got} frames, expected {expected}")]
    FrameCount { expected: usize, got: usize },
    #[error("instance tracks are {0}x{1}, ground truth is {2}x{3}")]
    FrameSize(usize, usize, usize, usize),
}

/// Every instance label of a scene as a per-frame mask track.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceTracks {
    labels: Vec<u32>,
    /// `masks[i][t]`: pixels of `labels[i]` in frame `t`.
    masks: Vec<Vec<BinaryMask>>,
    width: usize,
    height: usize,
    frames: usize,
}

impl InstanceTracks {
    pub fn from_label_maps(maps: &[LabelMap]) -> Self {
        let (width, height) = maps.first().map_or((0, 0), |m| (m.width(), m.height()));
        let mut labels: Vec<u32> = Vec::new();
        for m in maps {
            for y in 0..m.height() {
                for x in 0..m.width() {
                    let l = m.get(x, y);
                    if l != 0 {
                        if let Err(pos) = labels.binary_search(&l) {
                            labels.insert(pos, l);
                        }
                    }
                }
            }
        }
        let masks = labels
            .iter()
            .map(|&l| maps.iter().map(|m| m.mask_of(l)).collect())
            .collect();
        Self {
            labels,
            masks,
            width,
            height,
            frames: maps.len(),
        }
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn track(&self, label: u32) -> Option<&[BinaryMask]> {
        let i = self.labels.binary_search(&label).ok()?;
        Some(&self.masks[i])
    }

    /// Most frequent label inside the rasterized box at `frame`; ties go to
    /// the smallest label, background never wins.
    pub fn dominant_label_in(&self, b: &BoundingBox, frame: usize) -> Option<u32> {
        let region = box_to_mask(b, self.width, self.height);
        let mut best: Option<(u32, usize)> = None;
        for (label, track) in self.labels.iter().zip(&self.masks) {
            let n = track[frame].intersection_area(&region).expect("tracks share frame size");
            if n > 0 && best.is_none_or(|(_, bn)| n > bn) {
                best = Some((*label, n));
            }
        }
        best.map(|(l, _)| l)
    }
}

/// What a propagator may look at for one sample.
#[derive(Debug, Clone, Copy)]
pub struct SceneFrames<'a> {
    pub gt: &'a GroundTruthSample,
    pub tracks: Option<&'a InstanceTracks>,
}

impl<'a> SceneFrames<'a> {
    pub fn new(gt: &'a GroundTruthSample, tracks: Option<&'a InstanceTracks>) -> Self {
        Self { gt, tracks }
    }
}

pub trait MaskPropagator: Send + Sync {
    fn name(&self) -> &'static str;

    fn propagate(
        &self,
        boxes: &[BoundingBox],
        scene: &SceneFrames<'_>,
        keyframe: usize,
    ) -> Result<MaskSequence, PropagationError>;
}

fn check_keyframe(scene: &SceneFrames<'_>, keyframe: usize) -> Result<(), PropagationError> {
    let frames = scene.gt.num_frames();
    if keyframe >= frames {
        return Err(PropagationError::KeyframeOutOfRange { index: keyframe, frames });
    }
    Ok(())
}

/// Copies ground-truth tracks: each box selects the referred object whose
/// keyframe box overlaps it most (ties to the lowest object id). Boxes that
/// overlap no object select nothing.
#[derive(Debug, Clone, Copy, Default)]
pub struct OraclePropagator;

impl MaskPropagator for OraclePropagator {
    fn name(&self) -> &'static str {
        "oracle"
    }

    fn propagate(
        &self,
        boxes: &[BoundingBox],
        scene: &SceneFrames<'_>,
        keyframe: usize,
    ) -> Result<MaskSequence, PropagationError> {
        check_keyframe(scene, keyframe)?;
        let gt = scene.gt;
        let mut frames = vec![BinaryMask::empty(gt.width(), gt.height()); gt.num_frames()];
        for b in boxes {
            let mut best: Option<(usize, f64)> = None;
            for (k, obj) in gt.objects().iter().enumerate() {
                let Some(gb) = obj.boxes[keyframe] else { continue };
                let iou = box_iou(b, &gb);
                if iou > 0.0 && best.is_none_or(|(_, bi)| iou > bi) {
                    best = Some((k, iou));
                }
            }
            if let Some((k, _)) = best {
                for (dst, src) in frames.iter_mut().zip(&gt.objects()[k].masks) {
                    dst.union_with(src).expect("gt masks share frame size");
                }
            }
        }
        Ok(MaskSequence::new(frames).expect("non-empty sequence"))
    }
}

/// Segments with the scene's instance label maps: each box takes the most
/// frequent object label inside it at the keyframe and follows that label
/// through every frame.
#[derive(Debug, Clone, Copy, Default)]
pub struct LabelMapPropagator;

impl MaskPropagator for LabelMapPropagator {
    fn name(&self) -> &'static str {
        "labelmap"
    }

    fn propagate(
        &self,
        boxes: &[BoundingBox],
        scene: &SceneFrames<'_>,
        keyframe: usize,
    ) -> Result<MaskSequence, PropagationError> {
        check_keyframe(scene, keyframe)?;
        let tracks = scene.tracks.ok_or(PropagationError::MissingLabelMaps)?;
        let gt = scene.gt;
        if tracks.frames() != gt.num_frames() {
            return Err(PropagationError::FrameCount {
                expected: gt.num_frames(),
                got: tracks.frames(),
            });
        }
        let mut frames = vec![BinaryMask::empty(gt.width(), gt.height()); gt.num_frames()];
        for b in boxes {
            let Some(label) = tracks.dominant_label_in(b, keyframe) else { continue };
            let track = tracks.track(label).expect("label comes from the tracks");
            for (dst, src) in frames.iter_mut().zip(track) {
                dst.union_with(src).map_err(|_| {
                    PropagationError::FrameSize(src.width(), src.height(), gt.width(), gt.height())
                })?;
            }
        }
        Ok(MaskSequence::new(frames).expect("non-empty sequence"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PropagatorKind {
    Oracle,
    Labelmap,
}

impl PropagatorKind {
    pub fn build(self) -> Box<dyn MaskPropagator> {
        match self {
            PropagatorKind::Oracle => Box::new(OraclePropagator),
            PropagatorKind::Labelmap => Box::new(LabelMapPropagator),
        }
    }
}

impl std::str::FromStr for PropagatorKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "oracle" => Ok(Self::Oracle),
            "labelmap" => Ok(Self::Labelmap),
            other => Err(format!("unknown propagator {other:?} (expected oracle or labelmap)")),
        }
    }
}
