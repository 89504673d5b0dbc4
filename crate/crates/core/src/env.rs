//! Synthetic moving-shape videos with occluders and symbolic queries.
//!
//! Everything here is a pure function of `(seed, GenConfig)`: videos are
//! parametric (shape, size, start, velocity), frames are rasterized on demand,
//! and the dataset manifest stores both the parameters and the ground truth
//! so it can be checked without re-running the generator.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{rle_decode, rle_encode, BinaryMask, BoundingBox, GeometryError, LabelMap, RleMask};
use crate::rewards::{GroundTruthSample, GtObject, InstanceTracks, RewardError, SceneFrames};
use crate::rng;

pub const PALETTE: [(&str, [u8; 3]); 6] = [
    ("red", [220, 50, 47]),
    ("green", [60, 170, 80]),
    ("blue", [38, 110, 210]),
    ("yellow", [230, 200, 40]),
    ("purple", [150, 80, 190]),
    ("orange", [240, 140, 30]),
];

const BACKGROUND_RGB: [u8; 3] = [236, 236, 230];
const OCCLUDER_RGB: [u8; 3] = [70, 70, 70];

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("sample {sample_id}: {message}")]
    BadSample { sample_id: String, message: String },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Reward(#[from] RewardError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnvConfig {
    pub width: usize,
    pub height: usize,
    pub num_frames: usize,
    /// Seconds between sampled frames.
    pub frame_stride: f64,
    pub min_objects: usize,
    pub max_objects: usize,
    /// Object side range as fractions of the frame width.
    pub min_size: f64,
    pub max_size: f64,
    /// Pixels per second.
    pub max_speed: f64,
    pub occluder_prob: f64,
    pub min_occluder_thickness: usize,
    pub max_occluder_thickness: usize,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            width: 64,
            height: 64,
            num_frames: 8,
            frame_stride: 1.0,
            min_objects: 2,
            max_objects: 3,
            min_size: 0.3,
            max_size: 0.42,
            max_speed: 4.0,
            occluder_prob: 0.5,
            min_occluder_thickness: 4,
            max_occluder_thickness: 8,
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<(), EnvError> {
        let bad = |m: String| Err(EnvError::InvalidConfig(m));
        if self.width == 0 || self.height == 0 {
            return bad(format!("frame size {}x{} must be positive", self.width, self.height));
        }
        if self.num_frames == 0 {
            return bad("num_frames must be at least 1".into());
        }
        if !(self.frame_stride.is_finite() && self.frame_stride > 0.0) {
            return bad(format!("frame_stride = {} must be positive", self.frame_stride));
        }
        if self.min_objects == 0 || self.min_objects > self.max_objects {
            return bad(format!(
                "object count range {}..={} must be non-empty and start at 1 or more",
                self.min_objects, self.max_objects
            ));
        }
        if self.max_objects >= PALETTE.len() {
            return bad(format!("max_objects = {} must leave an unused palette color", self.max_objects));
        }
        if !(0.0 < self.min_size && self.min_size <= self.max_size && self.max_size <= 1.0) {
            return bad(format!("object size range {}..{} must lie in (0, 1]", self.min_size, self.max_size));
        }
        if !(self.max_speed.is_finite() && self.max_speed >= 0.0) {
            return bad(format!("max_speed = {} must be finite and >= 0", self.max_speed));
        }
        if !(0.0..=1.0).contains(&self.occluder_prob) {
            return bad(format!("occluder_prob = {} must lie in [0, 1]", self.occluder_prob));
        }
        if self.min_occluder_thickness > self.max_occluder_thickness {
            return bad("occluder thickness range is empty".into());
        }
        Ok(())
    }

    pub fn sampled_times(&self) -> Vec<f64> {
        (0..self.num_frames).map(|i| i as f64 * self.frame_stride).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    pub n_videos: usize,
    pub negative_fraction: f64,
    #[serde(default)]
    pub env: EnvConfig,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self {
            n_videos: 200,
            negative_fraction: 0.1,
            env: EnvConfig::default(),
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<(), EnvError> {
        if self.n_videos == 0 {
            return Err(EnvError::InvalidConfig("n_videos must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.negative_fraction) {
            return Err(EnvError::InvalidConfig(format!(
                "negative_fraction = {} must lie in [0, 1]",
                self.negative_fraction
            )));
        }
        self.env.validate()
    }

    pub fn negative_count(&self) -> usize {
        (self.negative_fraction * self.n_videos as f64).round() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Shape {
    Rectangle,
    Ellipse,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectTrack {
    pub object_id: u32,
    pub shape: Shape,
    pub color_id: u8,
    /// Extent in pixels, `[width, height]`.
    pub size: [f64; 2],
    /// Pixels per second.
    pub velocity: [f64; 2],
    /// Center at time 0.
    pub start: [f64; 2],
}

/// Bounces `p` between `lo` and `hi`.
fn reflect(p: f64, lo: f64, hi: f64) -> f64 {
    let span = hi - lo;
    if span <= 0.0 {
        return (lo + hi) * 0.5;
    }
    let u = (p - lo).rem_euclid(2.0 * span);
    lo + if u > span { 2.0 * span - u } else { u }
}

impl ObjectTrack {
    pub fn center_at(&self, t: f64, width: usize, height: usize) -> (f64, f64) {
        let (hw, hh) = (self.size[0] * 0.5, self.size[1] * 0.5);
        (
            reflect(self.start[0] + self.velocity[0] * t, hw, width as f64 - hw),
            reflect(self.start[1] + self.velocity[1] * t, hh, height as f64 - hh),
        )
    }

    pub fn speed(&self) -> f64 {
        self.velocity[0].hypot(self.velocity[1])
    }

    pub fn nominal_area(&self) -> f64 {
        let a = self.size[0] * self.size[1];
        match self.shape {
            Shape::Rectangle => a,
            Shape::Ellipse => a * std::f64::consts::FRAC_PI_4,
        }
    }

    fn covers(&self, cx: f64, cy: f64, x: usize, y: usize) -> bool {
        let dx = (x as f64 + 0.5 - cx) / (self.size[0] * 0.5);
        let dy = (y as f64 + 0.5 - cy) / (self.size[1] * 0.5);
        match self.shape {
            Shape::Rectangle => dx.abs() < 1.0 && dy.abs() < 1.0,
            Shape::Ellipse => dx * dx + dy * dy <= 1.0,
        }
    }

    /// Full silhouette at time `t`, ignoring occlusion.
    pub fn silhouette(&self, t: f64, width: usize, height: usize) -> BinaryMask {
        let (cx, cy) = self.center_at(t, width, height);
        BinaryMask::from_fn(width, height, |x, y| self.covers(cx, cy, x, y))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticVideo {
    pub video_id: String,
    pub width: usize,
    pub height: usize,
    pub sampled_times: Vec<f64>,
    /// Back to front drawing order is list order.
    pub objects: Vec<ObjectTrack>,
    /// Static bars drawn over every object.
    pub occluders: Vec<BoundingBox>,
}

impl SyntheticVideo {
    pub fn label_map(&self, frame: usize) -> LabelMap {
        let t = self.sampled_times[frame];
        let mut m = LabelMap::new(self.width, self.height);
        for o in &self.objects {
            let (cx, cy) = o.center_at(t, self.width, self.height);
            for y in 0..self.height {
                for x in 0..self.width {
                    if o.covers(cx, cy, x, y) {
                        m.set(x, y, o.object_id);
                    }
                }
            }
        }
        for y in 0..self.height {
            for x in 0..self.width {
                if self.occluded(x, y) {
                    m.set(x, y, 0);
                }
            }
        }
        m
    }

    pub fn label_maps(&self) -> Vec<LabelMap> {
        (0..self.sampled_times.len()).map(|f| self.label_map(f)).collect()
    }

    fn occluded(&self, x: usize, y: usize) -> bool {
        let (px, py) = (x as f64, y as f64);
        self.occluders
            .iter()
            .any(|b| b.x1 <= px && px < b.x2 && b.y1 <= py && py < b.y2)
    }

    /// RGBA pixels of one frame.
    pub fn render_rgba(&self, frame: usize) -> Vec<u8> {
        let labels = self.label_map(frame);
        let mut out = Vec::with_capacity(self.width * self.height * 4);
        for y in 0..self.height {
            for x in 0..self.width {
                let rgb = match labels.get(x, y) {
                    0 if self.occluded(x, y) => OCCLUDER_RGB,
                    0 => BACKGROUND_RGB,
                    id => self
                        .objects
                        .iter()
                        .find(|o| o.object_id == id)
                        .map_or(BACKGROUND_RGB, |o| PALETTE[o.color_id as usize % PALETTE.len()].1),
                };
                out.extend_from_slice(&[rgb[0], rgb[1], rgb[2], 255]);
            }
        }
        out
    }

    /// Every object is fully visible in at least one sampled frame.
    fn each_object_unoccluded_somewhere(&self) -> bool {
        let maps = self.label_maps();
        self.objects.iter().all(|o| {
            maps.iter().zip(&self.sampled_times).any(|(m, t)| {
                let full = o.silhouette(*t, self.width, self.height);
                full.area() > 0 && m.mask_of(o.object_id) == full
            })
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "color_id", rename_all = "snake_case")]
pub enum Selector {
    ByColor(u8),
    Largest,
    Fastest,
    Leftmost,
    /// A palette color absent from the video: refers to nothing.
    None(u8),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Query {
    pub selector: Selector,
    pub expression_text: String,
}

fn color_name(c: u8) -> &'static str {
    PALETTE[c as usize % PALETTE.len()].0
}

impl Query {
    pub fn new(selector: Selector) -> Self {
        let expression_text = match selector {
            Selector::ByColor(c) | Selector::None(c) => format!("the {} object", color_name(c)),
            Selector::Largest => "the largest object in the scene".to_string(),
            Selector::Fastest => "the object that moves the fastest".to_string(),
            Selector::Leftmost => "the object that starts furthest to the left".to_string(),
        };
        Self {
            selector,
            expression_text,
        }
    }

    /// Ids of the objects this query refers to.
    pub fn referred(&self, video: &SyntheticVideo) -> Vec<u32> {
        let pick = |key: &dyn Fn(&ObjectTrack) -> f64| {
            video
                .objects
                .iter()
                .max_by(|a, b| key(a).total_cmp(&key(b)))
                .map(|o| vec![o.object_id])
                .unwrap_or_default()
        };
        match self.selector {
            Selector::ByColor(c) => video
                .objects
                .iter()
                .filter(|o| o.color_id == c)
                .map(|o| o.object_id)
                .collect(),
            Selector::Largest => pick(&|o| o.nominal_area()),
            Selector::Fastest => pick(&|o| o.speed()),
            Selector::Leftmost => pick(&|o| -o.start[0]),
            Selector::None(_) => Vec::new(),
        }
    }

    /// Evaluation subset label.
    pub fn subset(&self) -> &'static str {
        match self.selector {
            Selector::ByColor(_) => "referring",
            Selector::Largest | Selector::Fastest | Selector::Leftmost => "reasoning",
            Selector::None(_) => "negative",
        }
    }
}

fn random_video<R: Rng>(rng: &mut R, video_id: &str, env: &EnvConfig, n_objects: usize, occluders: bool) -> SyntheticVideo {
    let (w, h) = (env.width as f64, env.height as f64);
    let mut colors: Vec<u8> = (0..PALETTE.len() as u8).collect();
    colors.shuffle(rng);
    let objects = (0..n_objects)
        .map(|i| {
            let side = rng.gen_range(env.min_size..=env.max_size) * w;
            let aspect: f64 = rng.gen_range(0.85..1.15);
            let size = [side * aspect.sqrt(), side / aspect.sqrt()];
            let speed = rng.gen_range(0.0..=env.max_speed);
            let angle = rng.gen_range(0.0..std::f64::consts::TAU);
            let start = [
                rng.gen_range(size[0] * 0.5..=(w - size[0] * 0.5).max(size[0] * 0.5)),
                rng.gen_range(size[1] * 0.5..=(h - size[1] * 0.5).max(size[1] * 0.5)),
            ];
            ObjectTrack {
                object_id: i as u32 + 1,
                shape: if rng.gen_bool(0.5) { Shape::Rectangle } else { Shape::Ellipse },
                color_id: colors[i],
                size,
                velocity: [speed * angle.cos(), speed * angle.sin()],
                start,
            }
        })
        .collect();
    let mut bars = Vec::new();
    if occluders && rng.gen_bool(env.occluder_prob) {
        let thick = rng.gen_range(env.min_occluder_thickness..=env.max_occluder_thickness) as f64;
        let bar = if rng.gen_bool(0.5) {
            let x = rng.gen_range(0.0..(w - thick).max(1.0)).floor();
            BoundingBox::new(x, 0.0, x + thick, h)
        } else {
            let y = rng.gen_range(0.0..(h - thick).max(1.0)).floor();
            BoundingBox::new(0.0, y, w, y + thick)
        };
        bars.push(bar.expect("bar coordinates are ordered"));
    }
    SyntheticVideo {
        video_id: video_id.to_string(),
        width: env.width,
        height: env.height,
        sampled_times: env.sampled_times(),
        objects,
        occluders: bars,
    }
}

/// Draws a video satisfying the visibility invariant. Falls back to fewer
/// occluders and objects if random draws keep violating it.
pub fn generate_video<R: Rng>(rng: &mut R, video_id: &str, env: &EnvConfig) -> SyntheticVideo {
    for attempt in 0..200 {
        let n = if attempt < 150 {
            rng.gen_range(env.min_objects..=env.max_objects)
        } else {
            env.min_objects
        };
        let v = random_video(rng, video_id, env, n, attempt < 100);
        if v.each_object_unoccluded_somewhere() {
            return v;
        }
    }
    random_video(rng, video_id, env, 1, false)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GtEntry {
    pub object_id: u32,
    pub mask: RleMask,
    #[serde(rename = "box")]
    pub bbox: Option<BoundingBox>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestSample {
    pub sample_id: String,
    pub video: SyntheticVideo,
    pub query: Query,
    pub sampled_times: Vec<f64>,
    /// `gt[frame]` lists every referred object in that frame.
    pub gt: Vec<Vec<GtEntry>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub config: GenConfig,
    pub samples: Vec<ManifestSample>,
}

/// A manifest sample decoded for scoring and training.
#[derive(Debug, Clone)]
pub struct Sample {
    pub sample_id: String,
    pub video: SyntheticVideo,
    pub query: Query,
    pub gt: GroundTruthSample,
    pub tracks: InstanceTracks,
}

impl Sample {
    pub fn scene(&self) -> SceneFrames<'_> {
        SceneFrames::new(&self.gt, Some(&self.tracks))
    }

    pub fn is_negative(&self) -> bool {
        self.gt.is_negative()
    }
}

/// Ground truth for `referred` objects, occlusion applied.
pub fn ground_truth(video: &SyntheticVideo, referred: &[u32]) -> Result<GroundTruthSample, EnvError> {
    let maps = video.label_maps();
    let objects = referred
        .iter()
        .map(|&id| GtObject::from_masks(id, maps.iter().map(|m| m.mask_of(id)).collect()))
        .collect();
    Ok(GroundTruthSample::new(
        video.sampled_times.clone(),
        video.width,
        video.height,
        objects,
    )?)
}

fn encode_gt(gt: &GroundTruthSample) -> Vec<Vec<GtEntry>> {
    (0..gt.num_frames())
        .map(|f| {
            gt.objects()
                .iter()
                .map(|o| GtEntry {
                    object_id: o.object_id,
                    mask: rle_encode(&o.masks[f]),
                    bbox: o.boxes[f],
                })
                .collect()
        })
        .collect()
}

pub fn generate_dataset(seed: u64, config: &GenConfig) -> Result<Manifest, EnvError> {
    config.validate()?;
    let n = config.n_videos;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng::stream(seed, "gen-negatives", 0));
    let mut negative = vec![false; n];
    for &i in &order[..config.negative_count()] {
        negative[i] = true;
    }
    let mut samples = Vec::with_capacity(n);
    for (i, &neg) in negative.iter().enumerate() {
        let mut r = rng::stream(seed, "gen", i as u64);
        let sample_id = format!("s{i:05}");
        let video = generate_video(&mut r, &sample_id, &config.env);
        let selector = if neg {
            let used: Vec<u8> = video.objects.iter().map(|o| o.color_id).collect();
            let free: Vec<u8> = (0..PALETTE.len() as u8).filter(|c| !used.contains(c)).collect();
            Selector::None(*free.choose(&mut r).expect("config leaves a free color"))
        } else {
            match r.gen_range(0..4) {
                0 => Selector::ByColor(video.objects.choose(&mut r).expect("at least one object").color_id),
                1 => Selector::Largest,
                2 => Selector::Fastest,
                _ => Selector::Leftmost,
            }
        };
        let query = Query::new(selector);
        let gt = ground_truth(&video, &query.referred(&video))?;
        samples.push(ManifestSample {
            sample_id,
            sampled_times: video.sampled_times.clone(),
            gt: encode_gt(&gt),
            video,
            query,
        });
    }
    Ok(Manifest {
        seed,
        config: *config,
        samples,
    })
}

impl ManifestSample {
    pub fn decode(&self) -> Result<Sample, EnvError> {
        let bad = |message: String| EnvError::BadSample {
            sample_id: self.sample_id.clone(),
            message,
        };
        let t = self.sampled_times.len();
        if self.gt.len() != t {
            return Err(bad(format!("gt covers {} frames, expected {t}", self.gt.len())));
        }
        if self.video.sampled_times != self.sampled_times {
            return Err(bad("video and sample disagree on sampled times".into()));
        }
        let ids: Vec<u32> = self.gt.first().map(|f| f.iter().map(|e| e.object_id).collect()).unwrap_or_default();
        let mut objects: Vec<GtObject> = ids
            .iter()
            .map(|&id| GtObject {
                object_id: id,
                masks: Vec::with_capacity(t),
                boxes: Vec::with_capacity(t),
            })
            .collect();
        for (f, frame) in self.gt.iter().enumerate() {
            let frame_ids: Vec<u32> = frame.iter().map(|e| e.object_id).collect();
            if frame_ids != ids {
                return Err(bad(format!("frame {f} lists objects {frame_ids:?}, expected {ids:?}")));
            }
            for (o, e) in objects.iter_mut().zip(frame) {
                let m = rle_decode(&e.mask)?;
                if m.width() != self.video.width || m.height() != self.video.height {
                    return Err(bad(format!("frame {f} mask is {}x{}", m.width(), m.height())));
                }
                o.masks.push(m);
                o.boxes.push(e.bbox);
            }
        }
        let gt = GroundTruthSample::new(self.sampled_times.clone(), self.video.width, self.video.height, objects)
            .map_err(|e| bad(e.to_string()))?;
        let tracks = InstanceTracks::from_label_maps(&self.video.label_maps());
        Ok(Sample {
            sample_id: self.sample_id.clone(),
            video: self.video.clone(),
            query: self.query.clone(),
            gt,
            tracks,
        })
    }
}

impl Manifest {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }

    pub fn decode_samples(&self) -> Result<Vec<Sample>, EnvError> {
        self.samples.iter().map(ManifestSample::decode).collect()
    }

    /// `(first n samples, the rest)`, both keeping the seed and config.
    pub fn split_at(&self, n: usize) -> (Manifest, Manifest) {
        let n = n.min(self.samples.len());
        let head = Manifest {
            seed: self.seed,
            config: self.config,
            samples: self.samples[..n].to_vec(),
        };
        let tail = Manifest {
            seed: self.seed,
            config: self.config,
            samples: self.samples[n..].to_vec(),
        };
        (head, tail)
    }
}
