use serde::{Deserialize, Serialize};

use super::{evaluate, Detection, EvalMode, EvalReport, GtInstance, MAX_DETECTIONS_PER_KEYFRAME};
use crate::data::{convert_labels, Dataset, RaritySplit, TrajectorySet};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::par::Exec;

/// Ground-truth instances at every keyframe of `ds`.
pub fn gt_instances(ds: &Dataset) -> Result<Vec<GtInstance>> {
    let predicates = ds.predicates();
    let mut out = Vec::new();
    for (video_id, k) in &ds.keyframes {
        let video = ds
            .annotations
            .video(video_id)
            .ok_or_else(|| Error::Unknown {
                kind: "video",
                name: video_id.clone(),
            })?;
        let idx = video.index();
        let labels = convert_labels(video, *k, &predicates)?;
        for (p, row) in labels.pairs.iter().zip(&labels.labels) {
            let (h, o) = (
                &labels.instance_ids[p.human_index],
                &labels.instance_ids[p.object_index],
            );
            for (c, _) in row.iter().enumerate().filter(|(_, &y)| y == 1) {
                out.push(GtInstance {
                    video_id: video_id.clone(),
                    keyframe: *k,
                    human_box: idx.box_at(*k, h).expect("present at keyframe"),
                    object_box: idx.box_at(*k, o).expect("present at keyframe"),
                    object_category: video.category_of(o).expect("validated").to_string(),
                    predicate: predicates[c].clone(),
                });
            }
        }
    }
    Ok(out)
}

/// Top-k detections at every keyframe of `ds`. With `tracks` the pair
/// boxes come from the supplied trajectories; videos absent from `tracks`
/// yield nothing and are listed in the returned notes.
pub fn predict_dataset(
    model: &Model,
    ds: &Dataset,
    tracks: Option<&TrajectorySet>,
    exec: Exec,
) -> Result<(Vec<Detection>, Vec<String>)> {
    let per_keyframe = exec.map(&ds.keyframes, |(video_id, k)| -> Result<Vec<Detection>> {
        let sample = match tracks {
            None => Some(ds.build(video_id, *k)?),
            Some(set) => match set.video(video_id) {
                Some(tracked) => ds.build_tracked(tracked, *k)?,
                None => None,
            },
        };
        match sample {
            Some(s) => model.predict_keyframe(&s, MAX_DETECTIONS_PER_KEYFRAME),
            None => Ok(vec![]),
        }
    });
    let mut dets = Vec::new();
    for d in per_keyframe {
        dets.extend(d?);
    }
    let mut notes = Vec::new();
    if let Some(set) = tracks {
        let missing: Vec<&str> = ds
            .annotations
            .videos
            .iter()
            .filter(|v| set.video(&v.video_id).is_none())
            .map(|v| v.video_id.as_str())
            .collect();
        if !missing.is_empty() {
            notes.push(format!(
                "{} videos have no supplied trajectories; their keyframes count only as misses: {}",
                missing.len(),
                missing.join(", ")
            ));
        }
    }
    Ok((dets, notes))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedReports {
    pub oracle: EvalReport,
    pub detection: EvalReport,
}

/// Evaluate `model` twice on `ds`: once on its annotated trajectories and
/// once on `detected`. Scoring is identical; only the trajectory source
/// changes.
pub fn paired_mode_run(
    model: &Model,
    ds: &Dataset,
    detected: &TrajectorySet,
    rarity: &RaritySplit,
    exec: Exec,
) -> Result<PairedReports> {
    let gts = gt_instances(ds)?;
    let (oracle_dets, _) = predict_dataset(model, ds, None, exec)?;
    let oracle = evaluate(
        &oracle_dets,
        &gts,
        &ds.keyframes,
        &ds.taxonomy,
        rarity,
        EvalMode::Oracle,
    )?;
    let (det_dets, notes) = predict_dataset(model, ds, Some(detected), exec)?;
    let mut detection = evaluate(
        &det_dets,
        &gts,
        &ds.keyframes,
        &ds.taxonomy,
        rarity,
        EvalMode::Detection,
    )?;
    detection.notes.extend(notes);
    Ok(PairedReports { oracle, detection })
}
