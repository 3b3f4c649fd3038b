//! Keyframe-centred training/evaluation units and geometric augmentation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::annotation::{pair_labels, BoxEntry, Instance, PoseEntry, VideoAnnotation};
use super::frames::FrameStack;
use crate::error::{Error, Result};
use crate::features::{resize_bilinear, Pose};
use crate::geometry::{fill_trajectory, pair_proposals, BBox, PairProposal, Trajectory};
use crate::nn::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WindowConfig {
    pub segment_len: usize,
    pub frame_stride: usize,
}

impl Default for WindowConfig {
    fn default() -> Self {
        WindowConfig {
            segment_len: 8,
            frame_stride: 1,
        }
    }
}

impl WindowConfig {
    pub fn validate(&self) -> Result<()> {
        if self.segment_len == 0 || self.frame_stride == 0 {
            return Err(Error::Config {
                field: "window".into(),
                reason: "segment_len and frame_stride must be positive".into(),
            });
        }
        Ok(())
    }

    /// Position of the keyframe inside the window.
    pub fn center(&self) -> usize {
        self.segment_len / 2
    }

    /// Frame indices of the window around `keyframe`, clamped to the video.
    pub fn frames(&self, keyframe: usize, frame_count: usize) -> Vec<usize> {
        let c = self.center() as i64;
        (0..self.segment_len as i64)
            .map(|i| {
                let f = keyframe as i64 + (i - c) * self.frame_stride as i64;
                f.clamp(0, frame_count as i64 - 1) as usize
            })
            .collect()
    }
}

/// One keyframe with its frame window, filled trajectories, per-frame
/// poses and pair labels.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyframeSample {
    pub video_id: String,
    pub keyframe: usize,
    pub frame_w: usize,
    pub frame_h: usize,
    /// `3 × T × H × W`, values in [0, 1].
    pub frames: Tensor,
    pub trajectories: Vec<Trajectory>,
    /// Per trajectory, per window frame; always `None` for non-persons.
    pub poses: Vec<Vec<Option<Pose>>>,
    pub pairs: Vec<PairProposal>,
    /// `pairs.len() × C` multi-hot; empty rows when labels are unknown.
    pub gt: Vec<Vec<u8>>,
}

impl KeyframeSample {
    pub fn segment_len(&self) -> usize {
        self.frames.shape()[1]
    }

    pub fn center(&self) -> usize {
        self.segment_len() / 2
    }

    pub fn validate(&self) -> Result<()> {
        let tn = self.segment_len();
        if self.frames.shape() != [3, tn, self.frame_h, self.frame_w] {
            return Err(Error::shape(
                "KeyframeSample",
                format!("frames {:?}", self.frames.shape()),
            ));
        }
        if self.poses.len() != self.trajectories.len() {
            return Err(Error::Length {
                op: "KeyframeSample.poses",
                expected: self.trajectories.len(),
                got: self.poses.len(),
            });
        }
        for (t, p) in self.trajectories.iter().zip(&self.poses) {
            if t.len() != tn || p.len() != tn {
                return Err(Error::Length {
                    op: "KeyframeSample.trajectory",
                    expected: tn,
                    got: t.len().min(p.len()),
                });
            }
        }
        if self.pairs != pair_proposals(&self.trajectories) {
            return Err(Error::Annotation(
                "pairs do not follow the proposal rule".into(),
            ));
        }
        if !self.gt.is_empty() && self.gt.len() != self.pairs.len() {
            return Err(Error::Length {
                op: "KeyframeSample.gt",
                expected: self.pairs.len(),
                got: self.gt.len(),
            });
        }
        Ok(())
    }

    /// Reverse the time axis of frames, trajectories and poses.
    pub fn time_reversed(&self) -> KeyframeSample {
        let [c, tn, h, w] = [
            self.frames.shape()[0],
            self.segment_len(),
            self.frame_h,
            self.frame_w,
        ];
        let plane = h * w;
        let mut data = vec![0.0; self.frames.len()];
        for ch in 0..c {
            for t in 0..tn {
                let src = (ch * tn + t) * plane;
                let dst = (ch * tn + (tn - 1 - t)) * plane;
                data[dst..dst + plane].copy_from_slice(&self.frames.data()[src..src + plane]);
            }
        }
        let mut out = self.clone();
        out.frames = Tensor::from_vec(self.frames.shape(), data).expect("same shape");
        out.trajectories = self.trajectories.iter().map(Trajectory::reversed).collect();
        for p in &mut out.poses {
            p.reverse();
        }
        out
    }
}

/// Build a sample from annotated boxes and poses. Instances present at
/// the keyframe become trajectories; window entries without a box are
/// filled with the whole image.
pub fn build_sample(
    video: &VideoAnnotation,
    frames: &FrameStack,
    keyframe: usize,
    predicates: &[String],
    window: &WindowConfig,
) -> Result<KeyframeSample> {
    window.validate()?;
    if frames.width != video.width
        || frames.height != video.height
        || frames.frame_count != video.frame_count
    {
        return Err(Error::Frames(format!(
            "video {} declares {}×{}×{} but frames are {}×{}×{}",
            video.video_id,
            video.width,
            video.height,
            video.frame_count,
            frames.width,
            frames.height,
            frames.frame_count
        )));
    }
    let idx = video.index();
    let window_frames = window.frames(keyframe, video.frame_count);
    let center = window.center();
    let mut trajectories = Vec::new();
    let mut poses = Vec::new();
    for inst in idx.present(keyframe) {
        let mut t = Trajectory::empty(
            inst.instance_id.clone(),
            inst.category.clone(),
            window_frames.len(),
        );
        for (i, &f) in window_frames.iter().enumerate() {
            if let Some(b) = idx.box_at(f, &inst.instance_id) {
                t.set(i, b);
            }
        }
        let filled = fill_trajectory(&t, video.width as f64, video.height as f64, Some(center))?;
        let p = window_frames
            .iter()
            .map(|&f| {
                if filled.is_person() {
                    idx.pose_at(f, &inst.instance_id)
                } else {
                    None
                }
            })
            .collect();
        trajectories.push(filled);
        poses.push(p);
    }
    let pairs = pair_proposals(&trajectories);
    let ids: Vec<String> = trajectories.iter().map(|t| t.instance_id.clone()).collect();
    let gt = pair_labels(video, keyframe, &ids, &pairs, predicates)?;
    Ok(KeyframeSample {
        video_id: video.video_id.clone(),
        keyframe,
        frame_w: video.width,
        frame_h: video.height,
        frames: frames.to_tensor(&window_frames)?,
        trajectories,
        poses,
        pairs,
        gt,
    })
}

/// Externally produced trajectories (any tracker) for one video, in the
/// annotation box/pose schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrackedVideo {
    pub video_id: String,
    pub instances: Vec<Instance>,
    #[serde(default)]
    pub boxes: Vec<BoxEntry>,
    #[serde(default)]
    pub poses: Vec<PoseEntry>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectorySet {
    pub videos: Vec<TrackedVideo>,
}

impl TrajectorySet {
    /// Ground-truth trajectories of an annotation set.
    pub fn from_annotations(ann: &super::AnnotationSet) -> Self {
        TrajectorySet {
            videos: ann
                .videos
                .iter()
                .map(|v| TrackedVideo {
                    video_id: v.video_id.clone(),
                    instances: v.instances.clone(),
                    boxes: v.boxes.clone(),
                    poses: v.poses.clone(),
                })
                .collect(),
        }
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        super::load_json(path)
    }

    pub fn video(&self, video_id: &str) -> Option<&TrackedVideo> {
        self.videos.iter().find(|v| v.video_id == video_id)
    }

    /// The annotation video with its instances, boxes and poses replaced
    /// by the tracked ones and no relations.
    pub fn substitute(tracked: &TrackedVideo, video: &VideoAnnotation) -> Result<VideoAnnotation> {
        let v = VideoAnnotation {
            video_id: video.video_id.clone(),
            fps: video.fps,
            width: video.width,
            height: video.height,
            frame_count: video.frame_count,
            instances: tracked.instances.clone(),
            boxes: tracked.boxes.clone(),
            poses: tracked.poses.clone(),
            relations: vec![],
        };
        v.validate()?;
        Ok(v)
    }
}

/// Training-time geometric augmentation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AugmentConfig {
    /// Shorter side is rescaled to a uniform integer in this range.
    pub short_side: [usize; 2],
    /// Crop `[width, height]`.
    pub crop: [usize; 2],
    pub flip_prob: f64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            short_side: [64, 80],
            crop: [64, 64],
            flip_prob: 0.5,
        }
    }
}

impl AugmentConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |reason: &str| {
            Err(Error::Config {
                field: "augment".into(),
                reason: reason.into(),
            })
        };
        if self.short_side[0] == 0 || self.short_side[0] > self.short_side[1] {
            return bad("short_side must be a non-empty positive range");
        }
        if self.crop[0] == 0 || self.crop[1] == 0 {
            return bad("crop must be positive");
        }
        if !(0.0..=1.0).contains(&self.flip_prob) {
            return bad("flip_prob must lie in [0, 1]");
        }
        Ok(())
    }
}

const FLIP_PAIRS: [(usize, usize); 8] = [
    (1, 2),
    (3, 4),
    (5, 6),
    (7, 8),
    (9, 10),
    (11, 12),
    (13, 14),
    (15, 16),
];

fn map_boxes(s: &mut KeyframeSample, f: impl Fn(&BBox) -> BBox) {
    for t in &mut s.trajectories {
        for b in &mut t.boxes {
            *b = f(b);
        }
    }
}

fn map_poses(s: &mut KeyframeSample, f: impl Fn(&Pose) -> Pose) {
    for p in s.poses.iter_mut().flatten().flatten() {
        *p = f(p);
    }
}

/// Bilinear rescale to `new_w × new_h`; boxes and keypoints follow.
pub fn rescale_sample(s: &KeyframeSample, new_w: usize, new_h: usize) -> Result<KeyframeSample> {
    if (new_w, new_h) == (s.frame_w, s.frame_h) {
        return Ok(s.clone());
    }
    let tn = s.segment_len();
    let flat = s.frames.clone().reshape(&[3 * tn, s.frame_h, s.frame_w])?;
    let resized = resize_bilinear(&flat, new_h, new_w).reshape(&[3, tn, new_h, new_w])?;
    let sx = new_w as f64 / s.frame_w as f64;
    let sy = new_h as f64 / s.frame_h as f64;
    let mut out = s.clone();
    out.frames = resized;
    out.frame_w = new_w;
    out.frame_h = new_h;
    map_boxes(&mut out, |b| BBox {
        x1: b.x1 * sx,
        y1: b.y1 * sy,
        x2: b.x2 * sx,
        y2: b.y2 * sy,
    });
    map_poses(&mut out, |p| p.map_points(|[x, y]| [x * sx, y * sy]));
    Ok(out)
}

/// Mirror along x; left/right keypoints swap roles.
pub fn flip_sample(s: &KeyframeSample) -> KeyframeSample {
    let (w, h) = (s.frame_w, s.frame_h);
    let mut out = s.clone();
    let data = out.frames.data_mut();
    for row in data.chunks_exact_mut(w) {
        row.reverse();
    }
    debug_assert_eq!(data.len() % (w * h), 0);
    let wf = w as f64;
    map_boxes(&mut out, |b| BBox {
        x1: wf - b.x2,
        y1: b.y1,
        x2: wf - b.x1,
        y2: b.y2,
    });
    map_poses(&mut out, |p| {
        let mut q = p.map_points(|[x, y]| [wf - x, y]);
        for (a, b) in FLIP_PAIRS {
            q.keypoints.swap(a, b);
            q.valid.swap(a, b);
        }
        q
    });
    out
}

/// Crop `cw × ch` at offset `(ox, oy)`. Boxes are clipped to the crop;
/// keypoints falling outside it become invalid.
pub fn crop_sample(
    s: &KeyframeSample,
    ox: usize,
    oy: usize,
    cw: usize,
    ch: usize,
) -> Result<KeyframeSample> {
    if ox + cw > s.frame_w || oy + ch > s.frame_h || cw == 0 || ch == 0 {
        return Err(Error::Config {
            field: "crop".into(),
            reason: format!("{cw}×{ch}+{ox}+{oy} exceeds {}×{}", s.frame_w, s.frame_h),
        });
    }
    if (ox, oy, cw, ch) == (0, 0, s.frame_w, s.frame_h) {
        return Ok(s.clone());
    }
    let tn = s.segment_len();
    let mut data = Vec::with_capacity(3 * tn * cw * ch);
    for plane in s.frames.data().chunks_exact(s.frame_w * s.frame_h) {
        for y in oy..oy + ch {
            data.extend_from_slice(&plane[y * s.frame_w + ox..y * s.frame_w + ox + cw]);
        }
    }
    let mut out = s.clone();
    out.frames = Tensor::from_vec(&[3, tn, ch, cw], data)?;
    out.frame_w = cw;
    out.frame_h = ch;
    let (dx, dy, wf, hf) = (ox as f64, oy as f64, cw as f64, ch as f64);
    map_boxes(&mut out, |b| {
        BBox {
            x1: b.x1 - dx,
            y1: b.y1 - dy,
            x2: b.x2 - dx,
            y2: b.y2 - dy,
        }
        .clip(wf, hf)
    });
    map_poses(&mut out, |p| {
        let mut q = p.map_points(|[x, y]| [x - dx, y - dy]);
        for (k, v) in q.keypoints.iter().zip(q.valid.iter_mut()) {
            if !(k[0] >= 0.0 && k[0] < wf && k[1] >= 0.0 && k[1] < hf) {
                *v = false;
            }
        }
        q
    });
    Ok(out)
}

fn scaled_dims(w: usize, h: usize, short: usize) -> (usize, usize) {
    let s = short as f64 / w.min(h) as f64;
    if w <= h {
        (short, ((h as f64 * s).round() as usize).max(1))
    } else {
        (((w as f64 * s).round() as usize).max(1), short)
    }
}

fn keyframe_person_visible(s: &KeyframeSample) -> bool {
    let c = s.center();
    let persons: Vec<_> = s.trajectories.iter().filter(|t| t.is_person()).collect();
    persons.is_empty() || persons.iter().any(|t| t.boxes[c].area() > 0.0)
}

/// Random shorter-side rescale, horizontal flip and crop. Labels are
/// untouched. A crop that removes every keyframe person box is redrawn up
/// to 10 times before falling back to the centre crop.
pub fn augment(
    s: &KeyframeSample,
    cfg: &AugmentConfig,
    rng: &mut impl Rng,
) -> Result<KeyframeSample> {
    cfg.validate()?;
    let short = rng.random_range(cfg.short_side[0]..=cfg.short_side[1]);
    let (w, h) = scaled_dims(s.frame_w, s.frame_h, short);
    let mut out = rescale_sample(s, w, h)?;
    if rng.random_bool(cfg.flip_prob) {
        out = flip_sample(&out);
    }
    let cw = cfg.crop[0].min(w);
    let ch = cfg.crop[1].min(h);
    for _ in 0..10 {
        let ox = rng.random_range(0..=w - cw);
        let oy = rng.random_range(0..=h - ch);
        let c = crop_sample(&out, ox, oy, cw, ch)?;
        if keyframe_person_visible(&c) {
            return Ok(c);
        }
    }
    crop_sample(&out, (w - cw) / 2, (h - ch) / 2, cw, ch)
}

/// Inference-time preprocessing: only the shorter side is resized.
pub fn resize_for_inference(s: &KeyframeSample, short_side: usize) -> Result<KeyframeSample> {
    let (w, h) = scaled_dims(s.frame_w, s.frame_h, short_side);
    rescale_sample(s, w, h)
}
