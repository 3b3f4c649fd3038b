//! Annotation schema, keyframe conversion, frame storage, augmentation and
//! the synthetic benchmark.
//!
//! Dataset directory layout:
//!
//! ```text
//! <dir>/taxonomy.json
//! <dir>/train.json, <dir>/val.json      AnnotationSet per split
//! <dir>/frames/<video_id>.vhfr          one frame container per video
//! ```

pub mod annotation;
pub mod frames;
pub mod sample;
pub mod synthetic;
pub mod taxonomy;

use std::borrow::Cow;
use std::collections::BTreeMap;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

pub use annotation::{
    convert_labels, sample_keyframes, AnnotationSet, BoxEntry, Instance, KeyframeFilter,
    KeyframeLabels, PoseEntry, Relation, VideoAnnotation,
};
pub use frames::FrameStack;
pub use sample::{
    augment, build_sample, crop_sample, flip_sample, rescale_sample, resize_for_inference,
    AugmentConfig, KeyframeSample, TrackedVideo, TrajectorySet, WindowConfig,
};
pub use synthetic::{
    generate_synthetic, kinematic_relations, twin_pairs, SyntheticDataset, SyntheticSpec,
};
pub use taxonomy::{
    rarity_split, triplet_counts, PredicateInfo, RaritySplit, Taxonomy, Triplet, TripletEntry,
    RARE_THRESHOLD,
};

use crate::error::{Error, Result};

/// Parse JSON, reporting the failing path (e.g. `videos[3].fps`).
pub fn parse_json<T: DeserializeOwned>(bytes: &[u8], context: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_slice(bytes);
    serde_path_to_error::deserialize(de).map_err(|e| Error::Json {
        context: context.to_string(),
        message: format!("at `{}`: {}", e.path(), e.inner()),
    })
}

pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_json(&bytes, &path.display().to_string())
}

pub fn save_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Error::Json {
        context: path.display().to_string(),
        message: e.to_string(),
    })?;
    bytes.push(b'\n');
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Random access to keyframe samples.
pub trait SampleSet: Sync {
    fn len(&self) -> usize;
    fn get(&self, i: usize) -> Result<Cow<'_, KeyframeSample>>;
    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl SampleSet for [KeyframeSample] {
    fn len(&self) -> usize {
        <[KeyframeSample]>::len(self)
    }
    fn get(&self, i: usize) -> Result<Cow<'_, KeyframeSample>> {
        Ok(Cow::Borrowed(&self[i]))
    }
}

impl SampleSet for Vec<KeyframeSample> {
    fn len(&self) -> usize {
        self.as_slice().len()
    }
    fn get(&self, i: usize) -> Result<Cow<'_, KeyframeSample>> {
        Ok(Cow::Borrowed(&self[i]))
    }
}

/// One split with its frames; samples are built on demand.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub annotations: AnnotationSet,
    pub taxonomy: Taxonomy,
    pub frames: BTreeMap<String, FrameStack>,
    pub keyframes: Vec<(String, usize)>,
    pub window: WindowConfig,
}

impl Dataset {
    pub fn new(
        annotations: AnnotationSet,
        taxonomy: Taxonomy,
        frames: BTreeMap<String, FrameStack>,
        filter: KeyframeFilter,
        window: WindowConfig,
    ) -> Result<Self> {
        annotations.validate()?;
        taxonomy.validate()?;
        window.validate()?;
        for v in &annotations.videos {
            if !frames.contains_key(&v.video_id) {
                return Err(Error::Frames(format!("no frames for video {}", v.video_id)));
            }
        }
        let keyframes = sample_keyframes(&annotations, filter);
        Ok(Dataset {
            annotations,
            taxonomy,
            frames,
            keyframes,
            window,
        })
    }

    /// Load `<dir>/<split>.json` with its frames and the taxonomy.
    pub fn open(
        dir: &Path,
        split: &str,
        filter: KeyframeFilter,
        window: WindowConfig,
    ) -> Result<Self> {
        let annotations = AnnotationSet::load(&dir.join(format!("{split}.json")))?;
        let taxonomy = Taxonomy::load(&dir.join("taxonomy.json"))?;
        let mut frames = BTreeMap::new();
        for v in &annotations.videos {
            let p = dir.join("frames").join(format!("{}.vhfr", v.video_id));
            frames.insert(v.video_id.clone(), FrameStack::read(&p)?);
        }
        Self::new(annotations, taxonomy, frames, filter, window)
    }

    pub fn predicates(&self) -> Vec<String> {
        self.taxonomy.predicate_names()
    }

    pub fn build(&self, video_id: &str, keyframe: usize) -> Result<KeyframeSample> {
        let video = self
            .annotations
            .video(video_id)
            .ok_or_else(|| Error::Unknown {
                kind: "video",
                name: video_id.to_string(),
            })?;
        build_sample(
            video,
            &self.frames[video_id],
            keyframe,
            &self.predicates(),
            &self.window,
        )
    }

    /// The same keyframe seen through externally supplied trajectories;
    /// `None` when the tracker offers no valid pair there.
    pub fn build_tracked(
        &self,
        tracked: &TrackedVideo,
        keyframe: usize,
    ) -> Result<Option<KeyframeSample>> {
        let video = self
            .annotations
            .video(&tracked.video_id)
            .ok_or_else(|| Error::Unknown {
                kind: "video",
                name: tracked.video_id.clone(),
            })?;
        let substitute = TrajectorySet::substitute(tracked, video)?;
        if !substitute.index().has_valid_pair(keyframe) {
            return Ok(None);
        }
        let mut s = build_sample(
            &substitute,
            &self.frames[&tracked.video_id],
            keyframe,
            &self.predicates(),
            &self.window,
        )?;
        s.gt.clear();
        Ok(Some(s))
    }
}

impl SampleSet for Dataset {
    fn len(&self) -> usize {
        self.keyframes.len()
    }
    fn get(&self, i: usize) -> Result<Cow<'_, KeyframeSample>> {
        let (v, k) = &self.keyframes[i];
        Ok(Cow::Owned(self.build(v, *k)?))
    }
}

/// Write a synthetic dataset in the directory layout above.
pub fn write_synthetic(dir: &Path, data: &SyntheticDataset) -> Result<()> {
    let frames_dir = dir.join("frames");
    std::fs::create_dir_all(&frames_dir).map_err(|e| Error::io(&frames_dir, e))?;
    save_json(&dir.join("train.json"), &data.train)?;
    save_json(&dir.join("val.json"), &data.val)?;
    save_json(&dir.join("taxonomy.json"), &data.taxonomy)?;
    for (id, f) in &data.frames {
        f.write(&frames_dir.join(format!("{id}.vhfr")))?;
    }
    Ok(())
}
