//! Mask and box primitives: areas, IoU, boundaries and the run-length codec.
//!
//! Masks are bit-packed row-major rasters. Pixel `(x, y)` lives at bit
//! `y * width + x`. Boxes use continuous image coordinates with the origin at
//! the top-left corner; rasterization treats them as half-open intervals.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("mask dimensions differ: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("invalid box ({x1}, {y1}, {x2}, {y2})")]
    InvalidBox { x1: f64, y1: f64, x2: f64, y2: f64 },
    #[error("rle counts sum to {got}, expected {expected}")]
    RleLength { expected: usize, got: usize },
    #[error("rle counts are not canonical: zero-length run at position {0}")]
    RleNonCanonical(usize),
    #[error("mask sequence is empty")]
    EmptySequence,
    #[error("bit vector has {got} entries, expected {expected}")]
    BitLength { expected: usize, got: usize },
}

/// Axis-aligned box `(x1, y1, x2, y2)` in pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct BoundingBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

impl BoundingBox {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self, GeometryError> {
        let finite = x1.is_finite() && y1.is_finite() && x2.is_finite() && y2.is_finite();
        if !finite || x1 > x2 || y1 > y2 {
            return Err(GeometryError::InvalidBox { x1, y1, x2, y2 });
        }
        Ok(Self { x1, y1, x2, y2 })
    }

    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn center(&self) -> (f64, f64) {
        ((self.x1 + self.x2) * 0.5, (self.y1 + self.y2) * 0.5)
    }

    pub fn to_array(self) -> [f64; 4] {
        [self.x1, self.y1, self.x2, self.y2]
    }
}

impl TryFrom<[f64; 4]> for BoundingBox {
    type Error = GeometryError;

    fn try_from(v: [f64; 4]) -> Result<Self, Self::Error> {
        BoundingBox::new(v[0], v[1], v[2], v[3])
    }
}

impl From<BoundingBox> for [f64; 4] {
    fn from(b: BoundingBox) -> Self {
        b.to_array()
    }
}

/// Row-major boolean raster.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    words: Vec<u64>,
}

impl std::fmt::Debug for BinaryMask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "BinaryMask({}x{}, area {})", self.width, self.height, self.area())
    }
}

impl BinaryMask {
    pub fn empty(width: usize, height: usize) -> Self {
        let n = width * height;
        Self {
            width,
            height,
            words: vec![0; n.div_ceil(64)],
        }
    }

    pub fn full(width: usize, height: usize) -> Self {
        let mut m = Self::empty(width, height);
        let n = width * height;
        for (i, w) in m.words.iter_mut().enumerate() {
            let rem = n - i * 64;
            *w = if rem >= 64 { u64::MAX } else { (1u64 << rem) - 1 };
        }
        m
    }

    pub fn from_bits(width: usize, height: usize, bits: &[bool]) -> Result<Self, GeometryError> {
        if bits.len() != width * height {
            return Err(GeometryError::BitLength {
                expected: width * height,
                got: bits.len(),
            });
        }
        let mut m = Self::empty(width, height);
        for (i, _) in bits.iter().enumerate().filter(|(_, b)| **b) {
            m.words[i / 64] |= 1 << (i % 64);
        }
        Ok(m)
    }

    /// Builds a mask from a predicate evaluated at every pixel.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut m = Self::empty(width, height);
        for y in 0..height {
            for x in 0..width {
                if f(x, y) {
                    let i = y * width + x;
                    m.words[i / 64] |= 1 << (i % 64);
                }
            }
        }
        m
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|w| *w == 0)
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        debug_assert!(x < self.width && y < self.height);
        self.bit(y * self.width + x)
    }

    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        debug_assert!(x < self.width && y < self.height);
        let i = y * self.width + x;
        if value {
            self.words[i / 64] |= 1 << (i % 64);
        } else {
            self.words[i / 64] &= !(1 << (i % 64));
        }
    }

    fn bit(&self, i: usize) -> bool {
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn bits(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len()).map(move |i| self.bit(i))
    }

    pub fn area(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn same_shape(&self, other: &BinaryMask) -> Result<(), GeometryError> {
        if self.width != other.width || self.height != other.height {
            return Err(GeometryError::DimensionMismatch(
                self.width,
                self.height,
                other.width,
                other.height,
            ));
        }
        Ok(())
    }

    pub fn intersection_area(&self, other: &BinaryMask) -> Result<usize, GeometryError> {
        self.same_shape(other)?;
        Ok(self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum())
    }

    pub fn union_area(&self, other: &BinaryMask) -> Result<usize, GeometryError> {
        self.same_shape(other)?;
        Ok(self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a | b).count_ones() as usize)
            .sum())
    }

    pub fn union_with(&mut self, other: &BinaryMask) -> Result<(), GeometryError> {
        self.same_shape(other)?;
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
        Ok(())
    }

    /// Tight half-open bounding box of the foreground, `None` when empty.
    pub fn tight_box(&self) -> Option<BoundingBox> {
        let (mut x1, mut y1, mut x2, mut y2) = (usize::MAX, usize::MAX, 0, 0);
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    x1 = x1.min(x);
                    y1 = y1.min(y);
                    x2 = x2.max(x + 1);
                    y2 = y2.max(y + 1);
                }
            }
        }
        (x1 != usize::MAX).then_some(BoundingBox {
            x1: x1 as f64,
            y1: y1 as f64,
            x2: x2 as f64,
            y2: y2 as f64,
        })
    }

    /// Foreground centroid in pixel-center coordinates.
    pub fn centroid(&self) -> Option<(f64, f64)> {
        let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) {
                    sx += x as f64 + 0.5;
                    sy += y as f64 + 0.5;
                    n += 1;
                }
            }
        }
        (n > 0).then(|| (sx / n as f64, sy / n as f64))
    }
}

/// Ordered masks sharing one frame size.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskSequence {
    frames: Vec<BinaryMask>,
}

impl MaskSequence {
    pub fn new(frames: Vec<BinaryMask>) -> Result<Self, GeometryError> {
        let first = frames.first().ok_or(GeometryError::EmptySequence)?;
        for m in &frames[1..] {
            first.same_shape(m)?;
        }
        Ok(Self { frames })
    }

    pub fn empty(len: usize, width: usize, height: usize) -> Self {
        Self {
            frames: vec![BinaryMask::empty(width, height); len],
        }
    }

    pub fn frames(&self) -> &[BinaryMask] {
        &self.frames
    }

    pub fn into_frames(self) -> Vec<BinaryMask> {
        self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn width(&self) -> usize {
        self.frames[0].width()
    }

    pub fn height(&self) -> usize {
        self.frames[0].height()
    }
}

/// Per-pixel instance labels; 0 is background.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    width: usize,
    height: usize,
    labels: Vec<u32>,
}

impl LabelMap {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            labels: vec![0; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> u32 {
        self.labels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, label: u32) {
        self.labels[y * self.width + x] = label;
    }

    pub fn mask_of(&self, label: u32) -> BinaryMask {
        BinaryMask::from_fn(self.width, self.height, |x, y| self.get(x, y) == label)
    }
}

pub fn box_iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
    let iw = (a.x2.min(b.x2) - a.x1.max(b.x1)).max(0.0);
    let ih = (a.y2.min(b.y2) - a.y1.max(b.y1)).max(0.0);
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        0.0
    } else {
        (inter / union).clamp(0.0, 1.0)
    }
}

/// Mask IoU. Two empty masks score 1.0.
pub fn mask_iou(a: &BinaryMask, b: &BinaryMask) -> Result<f64, GeometryError> {
    let union = a.union_area(b)?;
    if union == 0 {
        return Ok(1.0);
    }
    let inter = a.intersection_area(b)?;
    Ok(inter as f64 / union as f64)
}

pub fn mask_area(m: &BinaryMask) -> usize {
    m.area()
}

/// Rasterizes `b` over `[x1, x2) x [y1, y2)` after clamping to the image.
pub fn box_to_mask(b: &BoundingBox, width: usize, height: usize) -> BinaryMask {
    let lo = |v: f64, hi: usize| v.ceil().clamp(0.0, hi as f64) as usize;
    let (x0, x1) = (lo(b.x1, width), lo(b.x2, width));
    let (y0, y1) = (lo(b.y1, height), lo(b.y2, height));
    let mut m = BinaryMask::empty(width, height);
    for y in y0..y1 {
        for x in x0..x1 {
            m.set(x, y, true);
        }
    }
    m
}

/// Foreground pixels that touch background (4-neighbourhood) or the image edge.
pub fn boundary(m: &BinaryMask) -> BinaryMask {
    let (w, h) = (m.width(), m.height());
    BinaryMask::from_fn(w, h, |x, y| {
        if !m.get(x, y) {
            return false;
        }
        x == 0
            || y == 0
            || x + 1 == w
            || y + 1 == h
            || !m.get(x - 1, y)
            || !m.get(x + 1, y)
            || !m.get(x, y - 1)
            || !m.get(x, y + 1)
    })
}

/// Square (Chebyshev) dilation by `radius` pixels.
fn dilate(m: &BinaryMask, radius: usize) -> BinaryMask {
    if radius == 0 {
        return m.clone();
    }
    let (w, h) = (m.width(), m.height());
    let rows = BinaryMask::from_fn(w, h, |x, y| {
        let lo = x.saturating_sub(radius);
        let hi = (x + radius).min(w - 1);
        (lo..=hi).any(|xx| m.get(xx, y))
    });
    BinaryMask::from_fn(w, h, |x, y| {
        let lo = y.saturating_sub(radius);
        let hi = (y + radius).min(h - 1);
        (lo..=hi).any(|yy| rows.get(x, yy))
    })
}

/// Boundary tolerance used by the contour metric: `round(0.008 * diagonal)`.
pub fn default_boundary_tolerance(width: usize, height: usize) -> usize {
    let diag = ((width * width + height * height) as f64).sqrt();
    (0.008 * diag).round() as usize
}

/// Boundary F-measure with a Chebyshev distance tolerance.
pub fn boundary_fscore(pred: &BinaryMask, gt: &BinaryMask, tol: usize) -> Result<f64, GeometryError> {
    pred.same_shape(gt)?;
    let pb = boundary(pred);
    let gb = boundary(gt);
    let (np, ng) = (pb.area(), gb.area());
    if np == 0 && ng == 0 {
        return Ok(1.0);
    }
    if np == 0 || ng == 0 {
        return Ok(0.0);
    }
    let precision = pb.intersection_area(&dilate(&gb, tol))? as f64 / np as f64;
    let recall = gb.intersection_area(&dilate(&pb, tol))? as f64 / ng as f64;
    if precision + recall == 0.0 {
        return Ok(0.0);
    }
    Ok(2.0 * precision * recall / (precision + recall))
}

/// Canonical run-length encoding: row-major, background run first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RleMask {
    #[serde(rename = "w")]
    pub width: usize,
    #[serde(rename = "h")]
    pub height: usize,
    pub counts: Vec<usize>,
}

pub fn rle_encode(m: &BinaryMask) -> RleMask {
    let mut counts = Vec::new();
    let mut current = false;
    let mut run = 0usize;
    for bit in m.bits() {
        if bit != current {
            counts.push(run);
            run = 0;
            current = bit;
        }
        run += 1;
    }
    if run > 0 {
        counts.push(run);
    }
    RleMask {
        width: m.width(),
        height: m.height(),
        counts,
    }
}

pub fn rle_decode(r: &RleMask) -> Result<BinaryMask, GeometryError> {
    let expected = r.width * r.height;
    let got: usize = r.counts.iter().sum();
    if got != expected {
        return Err(GeometryError::RleLength { expected, got });
    }
    if let Some(pos) = r
        .counts
        .iter()
        .enumerate()
        .skip(1)
        .find_map(|(i, c)| (*c == 0).then_some(i))
    {
        return Err(GeometryError::RleNonCanonical(pos));
    }
    let mut m = BinaryMask::empty(r.width, r.height);
    let mut pos = 0usize;
    for (i, c) in r.counts.iter().enumerate() {
        if i % 2 == 1 {
            for p in pos..pos + c {
                m.words[p / 64] |= 1 << (p % 64);
            }
        }
        pos += c;
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bx(x1: f64, y1: f64, x2: f64, y2: f64) -> BoundingBox {
        BoundingBox::new(x1, y1, x2, y2).unwrap()
    }

    /// Pixel-count IoU of two integer boxes on a large canvas.
    fn brute_box_iou(a: &BoundingBox, b: &BoundingBox) -> f64 {
        let (mut inter, mut union) = (0usize, 0usize);
        for y in -50..100 {
            for x in -50..100 {
                let (fx, fy) = (x as f64, y as f64);
                let ia = a.x1 <= fx && fx < a.x2 && a.y1 <= fy && fy < a.y2;
                let ib = b.x1 <= fx && fx < b.x2 && b.y1 <= fy && fy < b.y2;
                inter += (ia && ib) as usize;
                union += (ia || ib) as usize;
            }
        }
        if union == 0 {
            0.0
        } else {
            inter as f64 / union as f64
        }
    }

    #[test]
    fn box_iou_examples() {
        let a = bx(0.0, 0.0, 10.0, 10.0);
        assert_eq!(box_iou(&a, &a), 1.0);
        assert_eq!(box_iou(&a, &bx(20.0, 20.0, 30.0, 30.0)), 0.0);
        let b = bx(5.0, 0.0, 15.0, 10.0);
        let oracle = brute_box_iou(&a, &b);
        assert!((oracle - 1.0 / 3.0).abs() < 1e-12);
        assert!((box_iou(&a, &b) - oracle).abs() < 1e-12);
        let z = bx(3.0, 3.0, 3.0, 3.0);
        assert_eq!(box_iou(&z, &z), 0.0);
    }

    #[test]
    fn invalid_boxes_rejected() {
        assert!(BoundingBox::new(5.0, 0.0, 1.0, 1.0).is_err());
        assert!(BoundingBox::new(0.0, 0.0, f64::NAN, 1.0).is_err());
        assert!(serde_json::from_str::<BoundingBox>("[50,10,10,60]").is_err());
        let b: BoundingBox = serde_json::from_str("[10,10,50,60]").unwrap();
        assert_eq!(b, bx(10.0, 10.0, 50.0, 60.0));
    }

    #[test]
    fn mask_iou_examples() {
        let full = BinaryMask::full(10, 10);
        let left = BinaryMask::from_fn(10, 10, |x, _| x < 5);
        let brute = {
            let inter = full.bits().zip(left.bits()).filter(|(a, b)| *a && *b).count();
            let union = full.bits().zip(left.bits()).filter(|(a, b)| *a || *b).count();
            inter as f64 / union as f64
        };
        assert_eq!(brute, 0.5);
        assert_eq!(mask_iou(&full, &left).unwrap(), brute);
        assert_eq!(mask_iou(&full, &full).unwrap(), 1.0);
        let e = BinaryMask::empty(10, 10);
        assert_eq!(mask_iou(&e, &e).unwrap(), 1.0);
        assert!(mask_iou(&e, &BinaryMask::empty(10, 9)).is_err());
    }

    #[test]
    fn mask_area_examples() {
        assert_eq!(mask_area(&BinaryMask::empty(64, 64)), 0);
        assert_eq!(mask_area(&BinaryMask::full(64, 64)), 4096);
        let rect = BinaryMask::from_fn(32, 32, |x, y| (3..8).contains(&x) && (10..14).contains(&y));
        let brute = rect.bits().filter(|b| *b).count();
        assert_eq!(brute, 20);
        assert_eq!(mask_area(&rect), brute);
    }

    #[test]
    fn box_to_mask_examples() {
        assert_eq!(box_to_mask(&bx(0.0, 0.0, 64.0, 64.0), 64, 64), BinaryMask::full(64, 64));
        let m = box_to_mask(&bx(-5.0, -5.0, 3.0, 3.0), 8, 8);
        assert_eq!(m.area(), 9);
        assert!(m.get(2, 2) && !m.get(3, 0) && !m.get(0, 3));
        assert!(box_to_mask(&bx(4.0, 4.0, 4.0, 9.0), 8, 8).is_empty());
    }

    #[test]
    fn tight_box_roundtrip() {
        let m = BinaryMask::from_fn(16, 16, |x, y| (2..7).contains(&x) && (4..6).contains(&y));
        let b = m.tight_box().unwrap();
        assert_eq!(b, bx(2.0, 4.0, 7.0, 6.0));
        assert_eq!(box_to_mask(&b, 16, 16), m);
        assert!(BinaryMask::empty(4, 4).tight_box().is_none());
    }

    /// Brute-force boundary F with explicit distance checks.
    fn brute_fscore(pred: &BinaryMask, gt: &BinaryMask, tol: usize) -> f64 {
        let pts = |m: &BinaryMask| {
            let b = boundary(m);
            let mut v = Vec::new();
            for y in 0..m.height() {
                for x in 0..m.width() {
                    if b.get(x, y) {
                        v.push((x as i64, y as i64));
                    }
                }
            }
            v
        };
        let (p, g) = (pts(pred), pts(gt));
        if p.is_empty() && g.is_empty() {
            return 1.0;
        }
        if p.is_empty() || g.is_empty() {
            return 0.0;
        }
        let near = |a: &(i64, i64), set: &[(i64, i64)]| {
            set.iter()
                .any(|b| (a.0 - b.0).abs().max((a.1 - b.1).abs()) <= tol as i64)
        };
        let prec = p.iter().filter(|a| near(a, &g)).count() as f64 / p.len() as f64;
        let rec = g.iter().filter(|a| near(a, &p)).count() as f64 / g.len() as f64;
        if prec + rec == 0.0 {
            0.0
        } else {
            2.0 * prec * rec / (prec + rec)
        }
    }

    #[test]
    fn boundary_fscore_examples() {
        let gt = BinaryMask::from_fn(32, 32, |x, y| x < 10 && y < 10);
        let shifted = BinaryMask::from_fn(32, 32, |x, y| (1..11).contains(&x) && y < 10);
        assert_eq!(brute_fscore(&shifted, &gt, 1), 1.0);
        assert_eq!(boundary_fscore(&shifted, &gt, 1).unwrap(), 1.0);
        assert_eq!(boundary_fscore(&gt, &gt, 0).unwrap(), 1.0);
        assert_eq!(boundary_fscore(&BinaryMask::empty(32, 32), &gt, 3).unwrap(), 0.0);
        let e = BinaryMask::empty(32, 32);
        assert_eq!(boundary_fscore(&e, &e, 1).unwrap(), 1.0);
        assert!(boundary_fscore(&e, &BinaryMask::empty(8, 8), 1).is_err());
    }

    #[test]
    fn default_tolerance_convention() {
        assert_eq!(default_boundary_tolerance(64, 64), 1);
        assert_eq!(default_boundary_tolerance(560, 560), 6);
    }

    #[test]
    fn rle_examples() {
        assert_eq!(rle_encode(&BinaryMask::empty(2, 2)).counts, vec![4]);
        assert_eq!(rle_encode(&BinaryMask::full(2, 2)).counts, vec![0, 4]);
        let m = BinaryMask::from_bits(2, 2, &[true, false, false, true]).unwrap();
        let r = rle_encode(&m);
        assert_eq!(r.counts, vec![0, 1, 2, 1]);
        assert_eq!(rle_decode(&r).unwrap(), m);
        let json = serde_json::to_string(&r).unwrap();
        assert_eq!(json, r#"{"w":2,"h":2,"counts":[0,1,2,1]}"#);
    }

    #[test]
    fn rle_rejects_bad_counts() {
        let short = RleMask { width: 2, height: 2, counts: vec![3] };
        assert_eq!(
            rle_decode(&short),
            Err(GeometryError::RleLength { expected: 4, got: 3 })
        );
        let zero_run = RleMask { width: 2, height: 2, counts: vec![1, 0, 3] };
        assert!(matches!(rle_decode(&zero_run), Err(GeometryError::RleNonCanonical(1))));
    }

    fn arb_mask() -> impl Strategy<Value = BinaryMask> {
        (1usize..20, 1usize..20)
            .prop_flat_map(|(w, h)| (Just(w), Just(h), proptest::collection::vec(any::<bool>(), w * h)))
            .prop_map(|(w, h, bits)| BinaryMask::from_bits(w, h, &bits).unwrap())
    }

    fn arb_pair() -> impl Strategy<Value = (BinaryMask, BinaryMask)> {
        (1usize..16, 1usize..16, 0.05f64..0.95)
            .prop_flat_map(|(w, h, p)| {
                let bits = proptest::collection::vec(proptest::bool::weighted(p), w * h);
                (Just(w), Just(h), bits.clone(), bits)
            })
            .prop_map(|(w, h, a, b)| {
                (
                    BinaryMask::from_bits(w, h, &a).unwrap(),
                    BinaryMask::from_bits(w, h, &b).unwrap(),
                )
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn rle_roundtrip(m in arb_mask()) {
            let r = rle_encode(&m);
            prop_assert_eq!(r.counts.iter().sum::<usize>(), m.len());
            prop_assert_eq!(rle_decode(&r).unwrap(), m);
        }
    }

    proptest! {
        #[test]
        fn mask_iou_symmetric((a, b) in arb_pair()) {
            prop_assert_eq!(mask_iou(&a, &b).unwrap(), mask_iou(&b, &a).unwrap());
            if !a.is_empty() {
                prop_assert_eq!(mask_iou(&a, &a).unwrap(), 1.0);
            }
        }

        #[test]
        fn fscore_identity_and_monotone((a, b) in arb_pair(), t in 0usize..4) {
            prop_assert_eq!(boundary_fscore(&a, &a, t).unwrap(), 1.0);
            let lo = boundary_fscore(&a, &b, t).unwrap();
            let hi = boundary_fscore(&a, &b, t + 1).unwrap();
            prop_assert!(hi + 1e-12 >= lo);
            prop_assert!((lo - brute_fscore(&a, &b, t)).abs() < 1e-12);
        }

        #[test]
        fn box_iou_matches_rasterized(
            ax in 0i32..40, ay in 0i32..40, aw in 1i32..24, ah in 1i32..24,
            bx_ in 0i32..40, by in 0i32..40, bw in 1i32..24, bh in 1i32..24,
        ) {
            let a = bx(ax as f64, ay as f64, (ax + aw) as f64, (ay + ah) as f64);
            let b = bx(bx_ as f64, by as f64, (bx_ + bw) as f64, (by + bh) as f64);
            let ma = box_to_mask(&a, 64, 64);
            let mb = box_to_mask(&b, 64, 64);
            let tol = 2.0 / (ma.area().min(mb.area()) as f64);
            prop_assert!((box_iou(&a, &b) - mask_iou(&ma, &mb).unwrap()).abs() <= tol);
        }
    }
}
