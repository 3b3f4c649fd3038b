//! Deterministic moving-rectangle videos with kinematically defined
//! relations.
//!
//! Every `towards` video is paired with a twin that is its exact time
//! reversal, so the pair shares every keyframe image while carrying the
//! opposite temporal label. `lift` is `hold` with both wrists above the
//! shoulders; it is visible in the pose input only, never in the pixels.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::annotation::{AnnotationSet, BoxEntry, Instance, PoseEntry, Relation, VideoAnnotation};
use super::frames::{quantize, FrameStack};
use super::taxonomy::{PredicateInfo, Taxonomy};
use crate::error::{Error, Result};
use crate::features::{Pose, NUM_KEYPOINTS};
use crate::geometry::{BBox, PERSON};
use crate::par::Exec;

pub const TOWARDS: &str = "towards";
pub const AWAY: &str = "away";
pub const NEXT_TO: &str = "next_to";
pub const HOLD: &str = "hold";
pub const LIFT: &str = "lift";
const KIT: [&str; 5] = [TOWARDS, AWAY, NEXT_TO, HOLD, LIFT];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub seed: u64,
    pub num_train: usize,
    pub num_val: usize,
    pub width: usize,
    pub height: usize,
    pub fps: usize,
    pub duration_s: usize,
    pub categories: Vec<String>,
    pub predicates: Vec<String>,
    /// Object speed in frame widths per frame.
    pub speed: [f64; 2],
    /// `next_to` holds while centre distance < `next_to_tau · width`.
    pub next_to_tau: f64,
    /// Fraction of videos generated as towards/away twin pairs.
    pub motion_fraction: f64,
    pub distractor_prob: f64,
    /// Amplitude of the static background noise.
    pub texture: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            seed: 0,
            num_train: 200,
            num_val: 50,
            width: 64,
            height: 64,
            fps: 8,
            duration_s: 2,
            categories: vec!["ball".into(), "cup".into(), "box".into()],
            predicates: KIT.iter().map(|s| s.to_string()).collect(),
            speed: [0.02, 0.03],
            next_to_tau: 0.2,
            motion_fraction: 0.5,
            distractor_prob: 0.3,
            texture: 0.15,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, reason: String| {
            Err(Error::Config {
                field: field.into(),
                reason,
            })
        };
        if self.num_train + self.num_val == 0 {
            return bad("num_train", "at least one video is required".into());
        }
        if self.width < 16 || self.height < 16 {
            return bad(
                "width",
                format!("{}×{} is below the 16×16 minimum", self.width, self.height),
            );
        }
        if self.fps == 0 || self.duration_s == 0 {
            return bad("fps", "fps and duration_s must be positive".into());
        }
        if self.categories.is_empty() || self.categories.iter().any(|c| c == PERSON) {
            return bad("categories", "need at least one non-person category".into());
        }
        for p in &self.predicates {
            if !KIT.contains(&p.as_str()) {
                return bad("predicates", format!("`{p}` is not in the kit {KIT:?}"));
            }
        }
        if !(self.speed[0] > 0.0 && self.speed[0] <= self.speed[1] && self.speed[1] < 0.05) {
            return bad(
                "speed",
                format!("{:?} must satisfy 0 < lo ≤ hi < 0.05", self.speed),
            );
        }
        if !(self.next_to_tau > 0.0 && self.next_to_tau < 0.3) {
            return bad(
                "next_to_tau",
                format!("{} must lie in (0, 0.3)", self.next_to_tau),
            );
        }
        for (field, v) in [
            ("motion_fraction", self.motion_fraction),
            ("distractor_prob", self.distractor_prob),
            ("texture", self.texture),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(field, format!("{v} must lie in [0, 1]"));
            }
        }
        Ok(())
    }

    pub fn frame_count(&self) -> usize {
        self.fps * self.duration_s + 1
    }

    pub fn taxonomy(&self) -> Taxonomy {
        Taxonomy {
            predicates: self
                .predicates
                .iter()
                .map(|p| PredicateInfo {
                    name: p.clone(),
                    temporal: p == TOWARDS || p == AWAY,
                })
                .collect(),
            categories: std::iter::once(PERSON.to_string())
                .chain(self.categories.iter().cloned())
                .collect(),
            triplets: vec![],
            note: Some("synthetic kit; temporal flags hold by construction".into()),
        }
    }
}

pub struct SyntheticDataset {
    pub train: AnnotationSet,
    pub val: AnnotationSet,
    pub taxonomy: Taxonomy,
    pub frames: BTreeMap<String, FrameStack>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Scenario {
    MotionTwins,
    NextTo,
    Hold,
    Apart,
}

/// One rendered video before id assignment.
struct Clip {
    instances: Vec<Instance>,
    /// `boxes[instance][frame]`
    boxes: Vec<Vec<BBox>>,
    poses: Vec<Pose>,
    texture: Vec<f64>,
}

fn object_size(spec: &SyntheticSpec) -> (f64, f64) {
    (0.14 * spec.width as f64, 0.14 * spec.height as f64)
}

fn person_box(spec: &SyntheticSpec, rng: &mut ChaCha8Rng) -> BBox {
    let (w, h) = (spec.width as f64, spec.height as f64);
    let (pw, ph) = (0.2 * w, 0.45 * h);
    let x1 = rng.random_range(0.05 * w..0.95 * w - pw);
    let y1 = rng.random_range(0.05 * h..0.95 * h - ph);
    BBox::new(x1, y1, x1 + pw, y1 + ph).expect("ordered")
}

fn centered(cx: f64, cy: f64, (ow, oh): (f64, f64)) -> BBox {
    BBox {
        x1: cx - ow / 2.0,
        y1: cy - oh / 2.0,
        x2: cx + ow / 2.0,
        y2: cy + oh / 2.0,
    }
}

fn dist(a: &BBox, b: &BBox) -> f64 {
    let (ax, ay) = a.center();
    let (bx, by) = b.center();
    ((ax - bx).powi(2) + (ay - by).powi(2)).sqrt()
}

fn inside(person: &BBox, obj: &BBox) -> bool {
    let (cx, cy) = obj.center();
    cx >= person.x1 && cx < person.x2 && cy >= person.y1 && cy < person.y2
}

/// Static person skeleton anchored in its box. With arms down the arm
/// segments coincide with the torso sides, which are drawn later.
pub fn synthetic_pose(b: &BBox, arms_raised: bool) -> Pose {
    let (cx, w, h) = ((b.x1 + b.x2) / 2.0, b.width(), b.height());
    let y = |f: f64| b.y1 + f * h;
    let lx = cx + 0.3 * w;
    let rx = cx - 0.3 * w;
    let (elbow, wrist) = if arms_raised {
        (y(0.05), y(-0.12))
    } else {
        (y(0.38), y(0.5))
    };
    let kp = [
        [cx, y(0.08)],
        [cx + 0.1 * w, y(0.06)],
        [cx - 0.1 * w, y(0.06)],
        [cx + 0.2 * w, y(0.08)],
        [cx - 0.2 * w, y(0.08)],
        [lx, y(0.22)],
        [rx, y(0.22)],
        [lx, elbow],
        [rx, elbow],
        [lx, wrist],
        [rx, wrist],
        [lx, y(0.6)],
        [rx, y(0.6)],
        [lx, y(0.8)],
        [rx, y(0.8)],
        [lx, y(0.98)],
        [rx, y(0.98)],
    ];
    Pose {
        keypoints: kp.to_vec(),
        valid: vec![true; NUM_KEYPOINTS],
    }
}

/// Both wrists above both shoulders.
pub fn arms_raised(p: &Pose) -> bool {
    [9, 10, 5, 6].iter().all(|&i| p.valid[i])
        && p.keypoints[9][1] < p.keypoints[5][1]
        && p.keypoints[10][1] < p.keypoints[6][1]
}

fn in_frame(b: &BBox, spec: &SyntheticSpec) -> bool {
    b.is_within(spec.width as f64, spec.height as f64)
}

/// Static object whose centre lies at a distance in `[lo, hi)` from the
/// person centre, outside the person box and inside the frame.
fn place_static(
    spec: &SyntheticSpec,
    person: &BBox,
    lo: f64,
    hi: f64,
    rng: &mut ChaCha8Rng,
) -> Option<BBox> {
    let (px, py) = person.center();
    for _ in 0..200 {
        let r = rng.random_range(lo..hi);
        let a = rng.random_range(0.0..std::f64::consts::TAU);
        let b = centered(px + r * a.cos(), py + r * a.sin(), object_size(spec));
        if in_frame(&b, spec) && !inside(person, &b) {
            return Some(b);
        }
    }
    None
}

fn palette(index: usize) -> [f64; 3] {
    const COLORS: [[f64; 3]; 6] = [
        [0.2, 0.75, 0.25],
        [0.2, 0.35, 0.9],
        [0.9, 0.8, 0.2],
        [0.7, 0.3, 0.8],
        [0.3, 0.8, 0.8],
        [0.95, 0.55, 0.1],
    ];
    let c = COLORS[index % COLORS.len()];
    let shade = 1.0 - 0.15 * (index / COLORS.len()) as f64;
    [c[0] * shade, c[1] * shade, c[2] * shade]
}
const PERSON_COLOR: [f64; 3] = [0.85, 0.25, 0.2];

fn generate_clip(spec: &SyntheticSpec, scenario: Scenario, rng: &mut ChaCha8Rng) -> Clip {
    let fc = spec.frame_count();
    let w = spec.width as f64;
    let tau = spec.next_to_tau * w;
    loop {
        let person = person_box(spec, rng);
        let raised = rng.random_bool(0.5);
        let category = rng.random_range(0..spec.categories.len());
        let track: Option<Vec<BBox>> = match scenario {
            Scenario::MotionTwins => {
                // radial motion towards the person centre ending outside next_to range
                let (px, py) = person.center();
                let speed = rng.random_range(spec.speed[0]..=spec.speed[1]) * w;
                let d_end = rng.random_range(1.2 * tau..1.6 * tau);
                let d_start = d_end + speed * (fc - 1) as f64;
                let a = rng.random_range(0.0..std::f64::consts::TAU);
                let track: Vec<BBox> = (0..fc)
                    .map(|f| {
                        let d = d_start - speed * f as f64;
                        centered(px + d * a.cos(), py + d * a.sin(), object_size(spec))
                    })
                    .collect();
                track
                    .iter()
                    .all(|b| in_frame(b, spec) && !inside(&person, b))
                    .then_some(track)
            }
            Scenario::NextTo => {
                place_static(spec, &person, 0.5 * tau, 0.95 * tau, rng).map(|b| vec![b; fc])
            }
            Scenario::Hold => {
                let cx = rng.random_range(
                    person.x1 + 0.25 * person.width()..person.x2 - 0.25 * person.width(),
                );
                let cy = rng.random_range(
                    person.y1 + 0.35 * person.height()..person.y2 - 0.35 * person.height(),
                );
                Some(vec![centered(cx, cy, object_size(spec)); fc])
            }
            Scenario::Apart => {
                place_static(spec, &person, 1.4 * tau, 2.0 * w, rng).map(|b| vec![b; fc])
            }
        };
        let Some(track) = track else { continue };
        let mut instances = vec![
            Instance {
                instance_id: "0".into(),
                category: PERSON.into(),
            },
            Instance {
                instance_id: "1".into(),
                category: spec.categories[category].clone(),
            },
        ];
        let mut boxes = vec![vec![person; fc], track];
        if rng.random_bool(spec.distractor_prob) {
            let occupied = boxes[1].clone();
            if let Some(d) = place_static(spec, &person, 1.4 * tau, 2.0 * w, rng) {
                let clear = occupied.iter().all(|o| crate::geometry::iou(o, &d) == 0.0);
                if clear {
                    instances.push(Instance {
                        instance_id: "2".into(),
                        category: spec.categories[rng.random_range(0..spec.categories.len())]
                            .clone(),
                    });
                    boxes.push(vec![d; fc]);
                }
            }
        }
        let texture = (0..spec.width * spec.height * 3)
            .map(|_| spec.texture * rng.random::<f64>())
            .collect();
        return Clip {
            instances,
            boxes,
            poses: vec![synthetic_pose(&person, raised); fc],
            texture,
        };
    }
}

fn coverage(lo: f64, hi: f64, p: usize) -> f64 {
    let (a, b) = (p as f64, p as f64 + 1.0);
    (hi.min(b) - lo.max(a)).max(0.0)
}

fn render(spec: &SyntheticSpec, clip: &Clip) -> FrameStack {
    let (w, h, fc) = (spec.width, spec.height, spec.frame_count());
    let mut data = Vec::with_capacity(w * h * 3 * fc);
    for f in 0..fc {
        let mut img = clip.texture.clone();
        for (inst, track) in clip.instances.iter().zip(&clip.boxes) {
            let color = if inst.category == PERSON {
                PERSON_COLOR
            } else {
                palette(
                    spec.categories
                        .iter()
                        .position(|c| *c == inst.category)
                        .unwrap_or(0),
                )
            };
            let b = &track[f];
            let (x0, x1) = (
                b.x1.floor().max(0.0) as usize,
                (b.x2.ceil() as usize).min(w),
            );
            let (y0, y1) = (
                b.y1.floor().max(0.0) as usize,
                (b.y2.ceil() as usize).min(h),
            );
            for y in y0..y1 {
                let cy = coverage(b.y1, b.y2, y);
                for x in x0..x1 {
                    let cov = cy * coverage(b.x1, b.x2, x);
                    for c in 0..3 {
                        let v = &mut img[(y * w + x) * 3 + c];
                        *v = *v * (1.0 - cov) + color[c] * cov;
                    }
                }
            }
        }
        data.extend(img.iter().map(|&v| quantize(v)));
    }
    FrameStack::new(w, h, fc, data).expect("consistent dims")
}

fn runs(flags: &[bool]) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    for (f, &on) in flags.iter().chain(std::iter::once(&false)).enumerate() {
        match (on, start) {
            (true, None) => start = Some(f),
            (false, Some(s)) => {
                out.push((s, f));
                start = None;
            }
            _ => {}
        }
    }
    out
}

/// Relations implied by the boxes and poses of a video. A frame is
/// `towards` when the centre distance strictly decreases into and out of
/// it (one-sided at the ends), `away` likewise for increases.
pub fn kinematic_relations(
    video: &VideoAnnotation,
    tau: f64,
    predicates: &[String],
) -> Vec<Relation> {
    let idx = video.index();
    let fc = video.frame_count;
    let mut out = Vec::new();
    for s in video.instances.iter().filter(|i| i.category == PERSON) {
        for o in video
            .instances
            .iter()
            .filter(|i| i.instance_id != s.instance_id)
        {
            let pairs: Vec<Option<(BBox, BBox)>> = (0..fc)
                .map(|f| {
                    Some((
                        idx.box_at(f, &s.instance_id)?,
                        idx.box_at(f, &o.instance_id)?,
                    ))
                })
                .collect();
            let d: Vec<Option<f64>> = pairs.iter().map(|p| p.map(|(a, b)| dist(&a, &b))).collect();
            let monotone = |f: usize, sign: f64| -> bool {
                let Some(df) = d[f] else { return false };
                let before = f == 0 || d[f - 1].is_some_and(|p| sign * (df - p) > 0.0);
                let after = f + 1 == fc || d[f + 1].is_some_and(|n| sign * (n - df) > 0.0);
                fc > 1 && before && after
            };
            let hold: Vec<bool> = pairs
                .iter()
                .map(|p| p.is_some_and(|(a, b)| inside(&a, &b)))
                .collect();
            for name in predicates {
                let flags: Vec<bool> = match name.as_str() {
                    TOWARDS => (0..fc).map(|f| monotone(f, -1.0)).collect(),
                    AWAY => (0..fc).map(|f| monotone(f, 1.0)).collect(),
                    NEXT_TO => d.iter().map(|x| x.is_some_and(|x| x < tau)).collect(),
                    HOLD => hold.clone(),
                    LIFT => (0..fc)
                        .map(|f| {
                            hold[f]
                                && idx
                                    .pose_at(f, &s.instance_id)
                                    .is_some_and(|p| arms_raised(&p))
                        })
                        .collect(),
                    _ => vec![false; fc],
                };
                for (b, e) in runs(&flags) {
                    out.push(Relation {
                        subject_id: s.instance_id.clone(),
                        object_id: o.instance_id.clone(),
                        predicate_id: name.clone(),
                        begin_frame: b,
                        end_frame: e,
                    });
                }
            }
        }
    }
    out
}

fn to_video(spec: &SyntheticSpec, id: String, clip: &Clip, reverse: bool) -> VideoAnnotation {
    let fc = spec.frame_count();
    let src = |f: usize| if reverse { fc - 1 - f } else { f };
    let mut boxes = Vec::new();
    let mut poses = Vec::new();
    for f in 0..fc {
        for (inst, track) in clip.instances.iter().zip(&clip.boxes) {
            boxes.push(BoxEntry {
                frame: f,
                instance_id: inst.instance_id.clone(),
                bbox: track[src(f)],
            });
        }
        let p = &clip.poses[src(f)];
        poses.push(PoseEntry {
            frame: f,
            instance_id: "0".into(),
            keypoints: p.keypoints.clone(),
            valid: p.valid.clone(),
        });
    }
    let mut v = VideoAnnotation {
        video_id: id,
        fps: spec.fps as f64,
        width: spec.width,
        height: spec.height,
        frame_count: fc,
        instances: clip.instances.clone(),
        boxes,
        poses,
        relations: vec![],
    };
    v.relations = kinematic_relations(&v, spec.next_to_tau * spec.width as f64, &spec.predicates);
    v
}

fn reverse_frames(stack: &FrameStack) -> FrameStack {
    let mut data = Vec::with_capacity(stack.data.len());
    for f in (0..stack.frame_count).rev() {
        data.extend_from_slice(stack.frame(f));
    }
    FrameStack::new(stack.width, stack.height, stack.frame_count, data).expect("same dims")
}

fn generate_split(
    spec: &SyntheticSpec,
    split: &str,
    stream: u64,
    count: usize,
    exec: Exec,
) -> (AnnotationSet, Vec<(String, FrameStack)>) {
    let mut plan_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    plan_rng.set_stream(stream);
    let mut plan = Vec::new();
    let mut slots = 0;
    while slots < count {
        let twins = count - slots >= 2 && plan_rng.random_bool(spec.motion_fraction);
        let scenario = if twins {
            Scenario::MotionTwins
        } else {
            [Scenario::NextTo, Scenario::Hold, Scenario::Apart][plan_rng.random_range(0..3)]
        };
        // which twin receives the lower id is random, so id order carries no label
        let swap = plan_rng.random_bool(0.5);
        plan.push((slots, scenario, swap));
        slots += if twins { 2 } else { 1 };
    }
    let units = exec.map(&plan, |&(slot, scenario, swap)| {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        rng.set_stream(stream + 1 + slot as u64);
        let clip = generate_clip(spec, scenario, &mut rng);
        let frames = render(spec, &clip);
        let id = |k: usize| format!("{split}{k:04}");
        let mut out = vec![(to_video(spec, id(slot), &clip, false), frames.clone())];
        if scenario == Scenario::MotionTwins {
            out.push((
                to_video(spec, id(slot + 1), &clip, true),
                reverse_frames(&frames),
            ));
            if swap {
                let (a, b) = (out[0].0.video_id.clone(), out[1].0.video_id.clone());
                out[0].0.video_id = b;
                out[1].0.video_id = a;
                out.swap(0, 1);
            }
        }
        out
    });
    let mut videos = Vec::new();
    let mut frames = Vec::new();
    for (v, f) in units.into_iter().flatten() {
        frames.push((v.video_id.clone(), f));
        videos.push(v);
    }
    (AnnotationSet { videos }, frames)
}

/// Render both splits and the taxonomy (triplet counts from train).
pub fn generate_synthetic(spec: &SyntheticSpec, exec: Exec) -> Result<SyntheticDataset> {
    spec.validate()?;
    let (train, tf) = generate_split(spec, "train", 0, spec.num_train, exec);
    let (val, vf) = generate_split(spec, "val", 1 << 32, spec.num_val, exec);
    let taxonomy = spec.taxonomy().with_counts_from(&train)?;
    Ok(SyntheticDataset {
        train,
        val,
        taxonomy,
        frames: tf.into_iter().chain(vf).collect(),
    })
}

fn is_time_reversal(a: &VideoAnnotation, b: &VideoAnnotation) -> bool {
    if a.frame_count != b.frame_count || a.instances != b.instances {
        return false;
    }
    let (ia, ib) = (a.index(), b.index());
    let fc = a.frame_count;
    (0..fc).all(|f| {
        a.instances
            .iter()
            .all(|i| ia.box_at(f, &i.instance_id) == ib.box_at(fc - 1 - f, &i.instance_id))
    })
}

/// Twin video ids: `(towards video, away video)` pairs whose frames are
/// mutual time reversals.
pub fn twin_pairs(set: &AnnotationSet) -> Vec<(String, String)> {
    let mut out = Vec::new();
    let ids: Vec<&str> = set.videos.iter().map(|v| v.video_id.as_str()).collect();
    for pair in ids.windows(2) {
        let (a, b) = (set.video(pair[0]).unwrap(), set.video(pair[1]).unwrap());
        let has = |v: &VideoAnnotation, p: &str| v.relations.iter().any(|r| r.predicate_id == p);
        if !is_time_reversal(a, b) {
            continue;
        }
        if has(a, TOWARDS) && has(b, AWAY) {
            out.push((a.video_id.clone(), b.video_id.clone()));
        } else if has(a, AWAY) && has(b, TOWARDS) {
            out.push((b.video_id.clone(), a.video_id.clone()));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{rasterize_skeleton, SkeletonEdgeTable};

    fn small() -> SyntheticSpec {
        SyntheticSpec {
            num_train: 12,
            num_val: 6,
            width: 32,
            height: 32,
            ..Default::default()
        }
    }

    #[test]
    fn deterministic() {
        let a = generate_synthetic(&small(), Exec::Sequential).unwrap();
        let b = generate_synthetic(&small(), Exec::Parallel).unwrap();
        assert_eq!(a.train, b.train);
        assert_eq!(a.val, b.val);
        assert_eq!(a.frames, b.frames);
        assert_eq!(a.taxonomy, b.taxonomy);
        assert_eq!(a.train.videos.len(), 12);
        assert_eq!(a.val.videos.len(), 6);
        a.train.validate().unwrap();
    }

    #[test]
    fn twins_are_reversals() {
        let d = generate_synthetic(&small(), Exec::Sequential).unwrap();
        let twins = twin_pairs(&d.train);
        assert!(!twins.is_empty());
        let fc = small().frame_count();
        for (t, a) in twins {
            let (ft, fa) = (&d.frames[&t], &d.frames[&a]);
            for f in 0..fc {
                assert_eq!(ft.frame(f), fa.frame(fc - 1 - f));
            }
            // the centre keyframe is shared exactly
            assert_eq!(ft.frame(fc / 2), fa.frame(fc / 2));
            let vt = d.train.video(&t).unwrap();
            assert!(vt
                .relations
                .iter()
                .any(|r| r.predicate_id == TOWARDS && r.begin_frame == 0 && r.end_frame == fc));
        }
    }

    #[test]
    fn relations_match_recomputed_distances() {
        let d = generate_synthetic(&small(), Exec::Sequential).unwrap();
        for v in d.train.videos.iter().chain(&d.val.videos) {
            let idx = v.index();
            for r in &v.relations {
                if r.predicate_id != TOWARDS && r.predicate_id != AWAY {
                    continue;
                }
                let series: Vec<f64> = (0..v.frame_count)
                    .map(|f| {
                        let a = idx.box_at(f, &r.subject_id).unwrap();
                        let b = idx.box_at(f, &r.object_id).unwrap();
                        let (ax, ay) = ((a.x1 + a.x2) * 0.5, (a.y1 + a.y2) * 0.5);
                        let (bx, by) = ((b.x1 + b.x2) * 0.5, (b.y1 + b.y2) * 0.5);
                        (ax - bx).hypot(ay - by)
                    })
                    .collect();
                for f in r.begin_frame..r.end_frame.saturating_sub(1) {
                    if r.predicate_id == TOWARDS {
                        assert!(series[f + 1] < series[f]);
                    } else {
                        assert!(series[f + 1] > series[f]);
                    }
                }
            }
            // static objects never move, so carry no temporal relation
            for o in v.instances.iter().skip(1) {
                let moves = (1..v.frame_count)
                    .any(|f| idx.box_at(f, &o.instance_id) != idx.box_at(0, &o.instance_id));
                let temporal = v.relations.iter().any(|r| {
                    r.object_id == o.instance_id
                        && (r.predicate_id == TOWARDS || r.predicate_id == AWAY)
                });
                assert_eq!(moves, temporal, "{} {}", v.video_id, o.instance_id);
            }
        }
    }

    #[test]
    fn lowered_arms_vanish_from_skeleton() {
        let b = BBox::new(10.0, 4.0, 22.0, 30.0).unwrap();
        let table = SkeletonEdgeTable::coco16();
        let down = rasterize_skeleton(Some(&synthetic_pose(&b, false)), 32, 32, &table);
        let up = rasterize_skeleton(Some(&synthetic_pose(&b, true)), 32, 32, &table);
        let arm_values: Vec<f64> = table.edges()[4..8].iter().map(|e| e.2).collect();
        assert!(!down.data().iter().any(|v| arm_values.contains(v)));
        assert!(up.data().iter().any(|v| arm_values.contains(v)));
        assert!(arms_raised(&synthetic_pose(&b, true)));
        assert!(!arms_raised(&synthetic_pose(&b, false)));
    }

    #[test]
    fn invalid_spec_names_field() {
        let spec = SyntheticSpec {
            speed: [0.0, 0.01],
            ..Default::default()
        };
        let err = spec.validate().unwrap_err().to_string();
        assert!(err.contains("speed"), "{err}");
    }

    #[test]
    fn runs_split_intervals() {
        assert_eq!(runs(&[true, true, false, true]), vec![(0, 2), (3, 4)]);
        assert_eq!(runs(&[false, false]), vec![]);
    }
}
