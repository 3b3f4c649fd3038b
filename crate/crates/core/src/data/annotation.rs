//! Clip-level annotation schema and its conversion to keyframe labels.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{Pose, NUM_KEYPOINTS};
use crate::geometry::{pair_proposals, BBox, PairProposal, Trajectory, PERSON};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Instance {
    pub instance_id: String,
    pub category: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxEntry {
    pub frame: usize,
    pub instance_id: String,
    #[serde(rename = "box")]
    pub bbox: BBox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseEntry {
    pub frame: usize,
    pub instance_id: String,
    pub keypoints: Vec<[f64; 2]>,
    pub valid: Vec<bool>,
}

/// Relation interval, begin inclusive and end exclusive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Relation {
    pub subject_id: String,
    pub object_id: String,
    pub predicate_id: String,
    pub begin_frame: usize,
    pub end_frame: usize,
}

impl Relation {
    pub fn covers(&self, frame: usize) -> bool {
        self.begin_frame <= frame && frame < self.end_frame
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VideoAnnotation {
    pub video_id: String,
    pub fps: f64,
    pub width: usize,
    pub height: usize,
    pub frame_count: usize,
    pub instances: Vec<Instance>,
    #[serde(default)]
    pub boxes: Vec<BoxEntry>,
    #[serde(default)]
    pub poses: Vec<PoseEntry>,
    #[serde(default)]
    pub relations: Vec<Relation>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnnotationSet {
    pub videos: Vec<VideoAnnotation>,
}

/// Which keyframes survive filtering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeyframeFilter {
    /// A person and another instance co-exist and some relation covers
    /// the keyframe (training).
    #[default]
    ActiveRelation,
    /// A person and another instance co-exist (evaluation).
    CoPresent,
}

impl VideoAnnotation {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Annotation(format!("video {}: {msg}", self.video_id)));
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return bad(format!("fps {} must be positive", self.fps));
        }
        if self.width == 0 || self.height == 0 || self.frame_count == 0 {
            return bad("width, height and frame_count must be positive".into());
        }
        let mut ids = BTreeSet::new();
        for inst in &self.instances {
            if !ids.insert(inst.instance_id.as_str()) {
                return bad(format!("duplicate instance `{}`", inst.instance_id));
            }
        }
        for b in &self.boxes {
            if !ids.contains(b.instance_id.as_str()) {
                return bad(format!(
                    "box at frame {} references unknown instance `{}`",
                    b.frame, b.instance_id
                ));
            }
            if b.frame >= self.frame_count {
                return bad(format!(
                    "box frame {} beyond frame_count {}",
                    b.frame, self.frame_count
                ));
            }
        }
        for p in &self.poses {
            match self.category_of(&p.instance_id) {
                None => {
                    return bad(format!(
                        "pose references unknown instance `{}`",
                        p.instance_id
                    ))
                }
                Some(c) if c != PERSON => {
                    return bad(format!(
                        "pose attached to non-person instance `{}`",
                        p.instance_id
                    ))
                }
                _ => {}
            }
            if p.keypoints.len() != NUM_KEYPOINTS || p.valid.len() != NUM_KEYPOINTS {
                return bad(format!(
                    "pose at frame {} needs {NUM_KEYPOINTS} keypoints",
                    p.frame
                ));
            }
        }
        for r in &self.relations {
            for id in [&r.subject_id, &r.object_id] {
                if !ids.contains(id.as_str()) {
                    return Err(self.unknown_instance(r, id));
                }
            }
            if self.category_of(&r.subject_id) != Some(PERSON) {
                return bad(format!(
                    "relation subject `{}` is not a person",
                    r.subject_id
                ));
            }
            if r.begin_frame >= r.end_frame {
                return bad(format!(
                    "relation {} -{}-> {} has empty interval [{}, {})",
                    r.subject_id, r.predicate_id, r.object_id, r.begin_frame, r.end_frame
                ));
            }
        }
        Ok(())
    }

    fn unknown_instance(&self, r: &Relation, missing: &str) -> Error {
        Error::UnknownInstance {
            video_id: self.video_id.clone(),
            subject_id: r.subject_id.clone(),
            predicate: r.predicate_id.clone(),
            object_id: r.object_id.clone(),
            missing: missing.to_string(),
        }
    }

    pub fn category_of(&self, instance_id: &str) -> Option<&str> {
        self.instances
            .iter()
            .find(|i| i.instance_id == instance_id)
            .map(|i| i.category.as_str())
    }

    /// Candidate keyframes at 1 Hz: frames `round(k·fps)` inside the video.
    pub fn candidate_keyframes(&self) -> Vec<usize> {
        let mut out = Vec::new();
        for k in 0.. {
            let f = (k as f64 * self.fps).round() as usize;
            if f >= self.frame_count {
                break;
            }
            if out.last() != Some(&f) {
                out.push(f);
            }
        }
        out
    }

    pub fn index(&self) -> VideoIndex<'_> {
        VideoIndex::new(self)
    }
}

/// Lookup tables over one video's boxes and poses.
#[derive(Debug, Clone)]
pub struct VideoIndex<'a> {
    pub video: &'a VideoAnnotation,
    boxes: BTreeMap<(usize, &'a str), BBox>,
    poses: BTreeMap<(usize, &'a str), &'a PoseEntry>,
}

impl<'a> VideoIndex<'a> {
    pub fn new(video: &'a VideoAnnotation) -> Self {
        VideoIndex {
            video,
            boxes: video
                .boxes
                .iter()
                .map(|b| ((b.frame, b.instance_id.as_str()), b.bbox))
                .collect(),
            poses: video
                .poses
                .iter()
                .map(|p| ((p.frame, p.instance_id.as_str()), p))
                .collect(),
        }
    }

    pub fn box_at(&self, frame: usize, instance_id: &str) -> Option<BBox> {
        self.boxes.get(&(frame, instance_id)).copied()
    }

    pub fn pose_at(&self, frame: usize, instance_id: &str) -> Option<Pose> {
        self.poses
            .get(&(frame, instance_id))
            .map(|p| Pose::new(p.keypoints.clone(), p.valid.clone()))
            .transpose()
            .ok()
            .flatten()
    }

    /// Instances with a box at `frame`, in declaration order.
    pub fn present(&self, frame: usize) -> Vec<&'a Instance> {
        self.video
            .instances
            .iter()
            .filter(|i| self.boxes.contains_key(&(frame, i.instance_id.as_str())))
            .collect()
    }

    /// A person and at least one other instance co-exist at `frame`.
    pub fn has_valid_pair(&self, frame: usize) -> bool {
        let present = self.present(frame);
        present.len() >= 2 && present.iter().any(|i| i.category == PERSON)
    }

    pub fn keep_keyframe(&self, frame: usize, filter: KeyframeFilter) -> bool {
        self.has_valid_pair(frame)
            && match filter {
                KeyframeFilter::CoPresent => true,
                KeyframeFilter::ActiveRelation => {
                    self.video.relations.iter().any(|r| r.covers(frame))
                }
            }
    }

    /// One-frame trajectories of the instances present at `frame`.
    pub fn keyframe_instances(&self, frame: usize) -> Vec<Trajectory> {
        self.present(frame)
            .into_iter()
            .map(|i| {
                let b = self.box_at(frame, &i.instance_id).expect("present");
                Trajectory::from_boxes(i.instance_id.clone(), i.category.clone(), vec![b])
            })
            .collect()
    }
}

impl AnnotationSet {
    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for v in &self.videos {
            if !seen.insert(v.video_id.as_str()) {
                return Err(Error::Annotation(format!(
                    "duplicate video `{}`",
                    v.video_id
                )));
            }
            v.validate()?;
        }
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let set: AnnotationSet = super::load_json(path)?;
        set.validate()?;
        Ok(set)
    }

    pub fn video(&self, video_id: &str) -> Option<&VideoAnnotation> {
        self.videos.iter().find(|v| v.video_id == video_id)
    }
}

/// Keyframes surviving `filter`, per video in file order, strictly
/// increasing within a video.
pub fn sample_keyframes(ann: &AnnotationSet, filter: KeyframeFilter) -> Vec<(String, usize)> {
    let mut out = Vec::new();
    for v in &ann.videos {
        let idx = v.index();
        for f in v.candidate_keyframes() {
            if idx.keep_keyframe(f, filter) {
                out.push((v.video_id.clone(), f));
            }
        }
    }
    out
}

/// Pair proposals at a keyframe and their multi-hot labels over
/// `predicates`.
#[derive(Debug, Clone, PartialEq)]
pub struct KeyframeLabels {
    pub instance_ids: Vec<String>,
    pub pairs: Vec<PairProposal>,
    pub labels: Vec<Vec<u8>>,
}

/// `labels[p][c] = 1` iff a relation (subject, object, c) covers `frame`.
pub fn convert_labels(
    video: &VideoAnnotation,
    frame: usize,
    predicates: &[String],
) -> Result<KeyframeLabels> {
    let idx = video.index();
    let trajs = idx.keyframe_instances(frame);
    let pairs = pair_proposals(&trajs);
    let ids: Vec<String> = trajs.iter().map(|t| t.instance_id.clone()).collect();
    let labels = pair_labels(video, frame, &ids, &pairs, predicates)?;
    Ok(KeyframeLabels {
        instance_ids: ids,
        pairs,
        labels,
    })
}

pub(crate) fn pair_labels(
    video: &VideoAnnotation,
    frame: usize,
    instance_ids: &[String],
    pairs: &[PairProposal],
    predicates: &[String],
) -> Result<Vec<Vec<u8>>> {
    let pair_of: BTreeMap<(&str, &str), usize> = pairs
        .iter()
        .enumerate()
        .map(|(i, p)| {
            (
                (
                    instance_ids[p.human_index].as_str(),
                    instance_ids[p.object_index].as_str(),
                ),
                i,
            )
        })
        .collect();
    let mut labels = vec![vec![0u8; predicates.len()]; pairs.len()];
    for r in &video.relations {
        for id in [&r.subject_id, &r.object_id] {
            if video.category_of(id).is_none() {
                return Err(video.unknown_instance(r, id));
            }
        }
        if !r.covers(frame) {
            continue;
        }
        let c = predicates
            .iter()
            .position(|p| *p == r.predicate_id)
            .ok_or_else(|| Error::Unknown {
                kind: "predicate",
                name: r.predicate_id.clone(),
            })?;
        if let Some(&p) = pair_of.get(&(r.subject_id.as_str(), r.object_id.as_str())) {
            labels[p][c] = 1;
        }
    }
    Ok(labels)
}
