//! Keyframe triplet-mAP protocol: greedy both-box matching, all-point AP,
//! Full/Rare/Non-rare and temporal/spatial splits, predicate-wise AP.

mod protocol;

pub use protocol::{gt_instances, paired_mode_run, predict_dataset, PairedReports};

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::{BufRead, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{RaritySplit, Taxonomy, Triplet};
use crate::error::{Error, Result};
use crate::geometry::{iou, BBox};

/// Keyframes keep at most this many detections.
pub const MAX_DETECTIONS_PER_KEYFRAME: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Detection {
    pub video_id: String,
    pub keyframe: usize,
    pub human_box: BBox,
    pub object_box: BBox,
    pub object_category: String,
    pub predicate: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GtInstance {
    pub video_id: String,
    pub keyframe: usize,
    pub human_box: BBox,
    pub object_box: BBox,
    pub object_category: String,
    pub predicate: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvalMode {
    Oracle,
    Detection,
}

fn cmp_box(a: &BBox, b: &BBox) -> Ordering {
    a.x1.total_cmp(&b.x1)
        .then(a.y1.total_cmp(&b.y1))
        .then(a.x2.total_cmp(&b.x2))
        .then(a.y2.total_cmp(&b.y2))
}

/// Canonical ranking: score descending, then video, keyframe, human box,
/// object box, predicate (and category, for a total order).
pub fn canonical_cmp(a: &Detection, b: &Detection) -> Ordering {
    b.score
        .total_cmp(&a.score)
        .then_with(|| a.video_id.cmp(&b.video_id))
        .then(a.keyframe.cmp(&b.keyframe))
        .then_with(|| cmp_box(&a.human_box, &b.human_box))
        .then_with(|| cmp_box(&a.object_box, &b.object_box))
        .then_with(|| a.predicate.cmp(&b.predicate))
        .then_with(|| a.object_category.cmp(&b.object_category))
}

/// Greedy TP/FP flags for `dets` in ranked order. Each detection takes the
/// unmatched same-keyframe ground truth with the largest
/// `min(iou_h, iou_o)`; it is a TP iff that value exceeds 0.5.
pub fn match_category(dets: &[&Detection], gts: &[&GtInstance]) -> Vec<bool> {
    let mut by_keyframe: HashMap<(&str, usize), Vec<usize>> = HashMap::new();
    for (i, g) in gts.iter().enumerate() {
        by_keyframe
            .entry((g.video_id.as_str(), g.keyframe))
            .or_default()
            .push(i);
    }
    let mut taken = vec![false; gts.len()];
    dets.iter()
        .map(|d| {
            let Some(cands) = by_keyframe.get(&(d.video_id.as_str(), d.keyframe)) else {
                return false;
            };
            let mut best: Option<(usize, f64)> = None;
            for &i in cands {
                if taken[i] {
                    continue;
                }
                let q = iou(&d.human_box, &gts[i].human_box)
                    .min(iou(&d.object_box, &gts[i].object_box));
                if best.is_none_or(|(_, b)| q > b) {
                    best = Some((i, q));
                }
            }
            match best {
                Some((i, q)) if q > 0.5 => {
                    taken[i] = true;
                    true
                }
                _ => false,
            }
        })
        .collect()
}

/// All-point interpolated AP. `None` when there is no ground truth (the
/// category is excluded rather than scored 0).
pub fn average_precision(flags: &[bool], n_gt: usize) -> Result<Option<f64>> {
    let tp_total = flags.iter().filter(|&&f| f).count();
    if tp_total > n_gt {
        return Err(Error::TooManyTruePositives { tp: tp_total, n_gt });
    }
    if n_gt == 0 {
        return Ok(None);
    }
    let mut precision = Vec::with_capacity(flags.len());
    let mut tp = 0usize;
    for (i, &f) in flags.iter().enumerate() {
        tp += f as usize;
        precision.push(tp as f64 / (i + 1) as f64);
    }
    // make the envelope non-increasing from the right
    for i in (0..precision.len().saturating_sub(1)).rev() {
        precision[i] = precision[i].max(precision[i + 1]);
    }
    let n = n_gt as f64;
    Ok(Some(
        flags
            .iter()
            .zip(&precision)
            .filter(|(f, _)| **f)
            .map(|(_, p)| p / n)
            .sum(),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TripletAp {
    pub predicate: String,
    pub category: String,
    pub n_gt: usize,
    pub n_det: usize,
    pub ap: f64,
    pub rare: bool,
    pub temporal: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredicateAp {
    pub predicate: String,
    pub temporal: bool,
    pub n_gt: usize,
    pub n_det: usize,
    pub ap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mode: EvalMode,
    pub interpolation: String,
    pub notes: Vec<String>,
    pub num_keyframes: usize,
    pub num_detections: usize,
    pub num_gt: usize,
    pub map_full: Option<f64>,
    pub map_rare: Option<f64>,
    pub map_nonrare: Option<f64>,
    pub map_temporal: Option<f64>,
    pub map_spatial: Option<f64>,
    pub triplets: Vec<TripletAp>,
    pub predicates: Vec<PredicateAp>,
}

fn mean<'a>(v: impl Iterator<Item = &'a f64>) -> Option<f64> {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

impl EvalReport {
    pub fn map_where(&self, keep: impl Fn(&TripletAp) -> bool) -> Option<f64> {
        mean(self.triplets.iter().filter(|t| keep(t)).map(|t| &t.ap))
    }

    pub fn predicate_ap(&self, name: &str) -> Option<f64> {
        self.predicates
            .iter()
            .find(|p| p.predicate == name)
            .map(|p| p.ap)
    }

    /// Per-triplet table as CSV.
    pub fn triplets_csv(&self) -> String {
        let mut s = String::from("predicate,category,n_gt,n_det,ap,rare,temporal\n");
        for t in &self.triplets {
            s += &format!(
                "{},{},{},{},{:.6},{},{}\n",
                t.predicate, t.category, t.n_gt, t.n_det, t.ap, t.rare, t.temporal
            );
        }
        s
    }

    /// Predicate-wise AP table as CSV.
    pub fn predicates_csv(&self) -> String {
        let mut s = String::from("predicate,temporal,n_gt,n_det,ap\n");
        for p in &self.predicates {
            s += &format!(
                "{},{},{},{},{:.6}\n",
                p.predicate, p.temporal, p.n_gt, p.n_det, p.ap
            );
        }
        s
    }

    /// Write `report.json`, `triplet_ap.csv` and `predicate_ap.csv`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        crate::data::save_json(&dir.join("report.json"), self)?;
        for (name, body) in [
            ("triplet_ap.csv", self.triplets_csv()),
            ("predicate_ap.csv", self.predicates_csv()),
        ] {
            let p = dir.join(name);
            std::fs::write(&p, body).map_err(|e| Error::io(&p, e))?;
        }
        Ok(())
    }
}

/// Score every triplet present in `gts` over the keyframes in `keyframes`.
pub fn evaluate(
    dets: &[Detection],
    gts: &[GtInstance],
    keyframes: &[(String, usize)],
    taxonomy: &Taxonomy,
    rarity: &RaritySplit,
    mode: EvalMode,
) -> Result<EvalReport> {
    let known: BTreeSet<(&str, usize)> = keyframes.iter().map(|(v, k)| (v.as_str(), *k)).collect();
    for d in dets {
        if !known.contains(&(d.video_id.as_str(), d.keyframe)) {
            return Err(Error::UnknownKeyframe {
                video_id: d.video_id.clone(),
                keyframe: d.keyframe,
            });
        }
        if taxonomy.predicate_index(&d.predicate).is_none() {
            return Err(Error::Unknown {
                kind: "predicate",
                name: d.predicate.clone(),
            });
        }
        if !(d.score.is_finite() && d.score > 0.0) {
            return Err(Error::Annotation(format!(
                "detection score {} must be finite and positive",
                d.score
            )));
        }
    }
    for g in gts {
        if !known.contains(&(g.video_id.as_str(), g.keyframe)) {
            return Err(Error::UnknownKeyframe {
                video_id: g.video_id.clone(),
                keyframe: g.keyframe,
            });
        }
    }
    let mut notes = vec![
        "AP uses all-point interpolation".to_string(),
        "triplets without ground truth in this split are excluded from every mAP".to_string(),
        "predicate-wise AP pools detections and ground truth across object categories".to_string(),
        "ties are broken by (score desc, video, keyframe, human box, object box, predicate)"
            .to_string(),
    ];

    // canonical order, then at most 100 per keyframe
    let mut ranked: Vec<&Detection> = dets.iter().collect();
    ranked.sort_by(|a, b| canonical_cmp(a, b));
    let mut per_keyframe: HashMap<(&str, usize), usize> = HashMap::new();
    let before = ranked.len();
    ranked.retain(|d| {
        let n = per_keyframe
            .entry((d.video_id.as_str(), d.keyframe))
            .or_insert(0);
        *n += 1;
        *n <= MAX_DETECTIONS_PER_KEYFRAME
    });
    if ranked.len() < before {
        notes.push(format!(
            "{} detections beyond the per-keyframe limit of {MAX_DETECTIONS_PER_KEYFRAME} were dropped",
            before - ranked.len()
        ));
    }

    let mut gt_by_triplet: BTreeMap<Triplet, Vec<&GtInstance>> = BTreeMap::new();
    for g in gts {
        gt_by_triplet
            .entry(Triplet::new(g.predicate.clone(), g.object_category.clone()))
            .or_default()
            .push(g);
    }
    let mut det_by_triplet: HashMap<Triplet, Vec<&Detection>> = HashMap::new();
    for d in &ranked {
        det_by_triplet
            .entry(Triplet::new(d.predicate.clone(), d.object_category.clone()))
            .or_default()
            .push(d);
    }
    let temporal = |p: &str| taxonomy.is_temporal(p).unwrap_or(false);
    let mut triplets = Vec::new();
    for (t, g) in &gt_by_triplet {
        let d = det_by_triplet.get(t).map(Vec::as_slice).unwrap_or(&[]);
        let flags = match_category(d, g);
        let ap = average_precision(&flags, g.len())?.expect("n_gt > 0");
        triplets.push(TripletAp {
            predicate: t.predicate.clone(),
            category: t.category.clone(),
            n_gt: g.len(),
            n_det: d.len(),
            ap,
            rare: rarity.is_rare(t),
            temporal: temporal(&t.predicate),
        });
    }

    let mut predicates = Vec::new();
    for p in &taxonomy.predicates {
        let g: Vec<&GtInstance> = gts.iter().filter(|g| g.predicate == p.name).collect();
        if g.is_empty() {
            continue;
        }
        let d: Vec<&Detection> = ranked
            .iter()
            .copied()
            .filter(|d| d.predicate == p.name)
            .collect();
        let flags = match_category(&d, &g);
        predicates.push(PredicateAp {
            predicate: p.name.clone(),
            temporal: p.temporal,
            n_gt: g.len(),
            n_det: d.len(),
            ap: average_precision(&flags, g.len())?.expect("n_gt > 0"),
        });
    }

    let mut report = EvalReport {
        mode,
        interpolation: "all-point".into(),
        notes,
        num_keyframes: known.len(),
        num_detections: ranked.len(),
        num_gt: gts.len(),
        map_full: None,
        map_rare: None,
        map_nonrare: None,
        map_temporal: None,
        map_spatial: None,
        triplets,
        predicates,
    };
    report.map_full = report.map_where(|_| true);
    report.map_rare = report.map_where(|t| t.rare);
    report.map_nonrare = report.map_where(|t| !t.rare);
    report.map_temporal = report.map_where(|t| t.temporal);
    report.map_spatial = report.map_where(|t| !t.temporal);
    Ok(report)
}

/// Detections as JSON lines.
pub fn write_detections(path: &Path, dets: &[Detection]) -> Result<()> {
    let mut out = Vec::new();
    for d in dets {
        serde_json::to_writer(&mut out, d).map_err(|e| Error::Json {
            context: path.display().to_string(),
            message: e.to_string(),
        })?;
        out.push(b'\n');
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&out).map_err(|e| Error::io(path, e))
}

pub fn read_detections(path: &Path) -> Result<Vec<Detection>> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in std::io::BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(crate::data::parse_json(
            line.as_bytes(),
            &format!("{}:{}", path.display(), i + 1),
        )?);
    }
    Ok(out)
}
