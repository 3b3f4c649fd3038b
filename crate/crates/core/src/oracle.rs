//! Brute-force reference implementations used by the verification suites.
//!
//! Each function here recomputes a quantity along a deliberately different
//! path from the production code (full-grid sums instead of tap lists,
//! exhaustive enumeration instead of sweeps) and favours obviousness over
//! speed. Nothing in the pipeline calls into this module.

use std::collections::BTreeMap;

use crate::features::RoiConfig;
use crate::geometry::{BBox, PairProposal};
use crate::nn::Tensor;

fn tent(d: f64) -> f64 {
    (1.0 - d.abs()).max(0.0)
}

/// RoIAlign by summing the bilinear tent kernel over every map pixel for
/// every sample point.
pub fn roi_align_bruteforce(map: &Tensor, spatial_scale: f64, b: &BBox, cfg: &RoiConfig) -> Tensor {
    let (d, h, w) = (map.shape()[0], map.shape()[1], map.shape()[2]);
    let mut out = Tensor::zeros(&[d, cfg.out_h, cfg.out_w]);
    if b.width() <= 0.0 || b.height() <= 0.0 {
        return out;
    }
    let s = cfg.samples_per_bin as f64;
    let bin_w = b.width() * spatial_scale / cfg.out_w as f64;
    let bin_h = b.height() * spatial_scale / cfg.out_h as f64;
    for c in 0..d {
        for oy in 0..cfg.out_h {
            for ox in 0..cfg.out_w {
                let mut acc = 0.0;
                for sy in 0..cfg.samples_per_bin {
                    for sx in 0..cfg.samples_per_bin {
                        let y = b.y1 * spatial_scale + bin_h * (oy as f64 + (sy as f64 + 0.5) / s)
                            - 0.5;
                        let x = b.x1 * spatial_scale + bin_w * (ox as f64 + (sx as f64 + 0.5) / s)
                            - 0.5;
                        for i in 0..h {
                            for j in 0..w {
                                acc += tent(y - i as f64) * tent(x - j as f64) * map.at(&[c, i, j]);
                            }
                        }
                    }
                }
                out.set(&[c, oy, ox], acc / (s * s));
            }
        }
    }
    out
}

/// Plain-data detection/ground-truth record for the AP oracle.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleDet {
    pub keyframe: (String, usize),
    pub human: BBox,
    pub object: BBox,
    pub category: String,
    pub predicate: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleGt {
    pub keyframe: (String, usize),
    pub human: BBox,
    pub object: BBox,
    pub category: String,
    pub predicate: String,
}

fn overlap(a: &BBox, b: &BBox) -> f64 {
    // recomputed independently of geometry::iou
    let w = (a.x2.min(b.x2) - a.x1.max(b.x1)).max(0.0);
    let h = (a.y2.min(b.y2) - a.y1.max(b.y1)).max(0.0);
    let i = w * h;
    let u = (a.x2 - a.x1) * (a.y2 - a.y1) + (b.x2 - b.x1) * (b.y2 - b.y1) - i;
    if u > 0.0 {
        i / u
    } else {
        0.0
    }
}

/// Greedy TP/FP flags for detections already in ranked order.
pub fn match_bruteforce(dets: &[&OracleDet], gts: &[&OracleGt]) -> Vec<bool> {
    let mut used = vec![false; gts.len()];
    let mut flags = Vec::with_capacity(dets.len());
    for d in dets {
        let mut best: Option<(usize, f64)> = None;
        for (k, g) in gts.iter().enumerate() {
            if used[k] || g.keyframe != d.keyframe {
                continue;
            }
            let q = overlap(&d.human, &g.human).min(overlap(&d.object, &g.object));
            if best.is_none_or(|(_, bq)| q > bq) {
                best = Some((k, q));
            }
        }
        match best {
            Some((k, q)) if q > 0.5 => {
                used[k] = true;
                flags.push(true);
            }
            _ => flags.push(false),
        }
    }
    flags
}

/// All-point AP by enumerating every prefix of the ranking: each TP at
/// rank i contributes `1/n_gt × max_{j ≥ i} precision_j`.
pub fn ap_enumerate(flags: &[bool], n_gt: usize) -> Option<f64> {
    if n_gt == 0 {
        return None;
    }
    let precision: Vec<f64> = (0..flags.len())
        .map(|i| flags[..=i].iter().filter(|&&f| f).count() as f64 / (i + 1) as f64)
        .collect();
    let mut ap = 0.0;
    for i in 0..flags.len() {
        if flags[i] {
            let best = precision[i..].iter().cloned().fold(0.0, f64::max);
            ap += best / n_gt as f64;
        }
    }
    Some(ap)
}

/// Greedy is optimal when no alternative one-to-one assignment produces
/// more matches; enumerate every assignment of ≤5 detections to ≤5 GTs.
pub fn max_matches_bruteforce(dets: &[&OracleDet], gts: &[&OracleGt]) -> usize {
    fn go(i: usize, dets: &[&OracleDet], gts: &[&OracleGt], used: &mut Vec<bool>) -> usize {
        if i == dets.len() {
            return 0;
        }
        let mut best = go(i + 1, dets, gts, used);
        for k in 0..gts.len() {
            if !used[k]
                && gts[k].keyframe == dets[i].keyframe
                && overlap(&dets[i].human, &gts[k].human) > 0.5
                && overlap(&dets[i].object, &gts[k].object) > 0.5
            {
                used[k] = true;
                best = best.max(1 + go(i + 1, dets, gts, used));
                used[k] = false;
            }
        }
        best
    }
    go(0, dets, gts, &mut vec![false; gts.len()])
}

/// Canonical ordering: score desc, then video, keyframe, human box,
/// object box, predicate.
pub fn rank_detections<'a>(dets: &[&'a OracleDet]) -> Vec<&'a OracleDet> {
    let mut v = dets.to_vec();
    v.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.keyframe.cmp(&b.keyframe))
            .then_with(|| cmp_box(&a.human, &b.human))
            .then_with(|| cmp_box(&a.object, &b.object))
            .then_with(|| a.predicate.cmp(&b.predicate))
    });
    v
}

fn cmp_box(a: &BBox, b: &BBox) -> std::cmp::Ordering {
    a.to_array()
        .iter()
        .zip(b.to_array().iter())
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(std::cmp::Ordering::Equal)
}

/// Per-triplet AP for every (predicate, category) present in `gts`.
pub fn triplet_aps(dets: &[OracleDet], gts: &[OracleGt]) -> BTreeMap<(String, String), f64> {
    let mut out = BTreeMap::new();
    let mut keys: Vec<(String, String)> = gts
        .iter()
        .map(|g| (g.predicate.clone(), g.category.clone()))
        .collect();
    keys.sort();
    keys.dedup();
    for (p, c) in keys {
        let d: Vec<&OracleDet> = dets
            .iter()
            .filter(|d| d.predicate == p && d.category == c)
            .collect();
        let g: Vec<&OracleGt> = gts
            .iter()
            .filter(|g| g.predicate == p && g.category == c)
            .collect();
        let ranked = rank_detections(&d);
        let flags = match_bruteforce(&ranked, &g);
        out.insert((p, c), ap_enumerate(&flags, g.len()).expect("n_gt > 0"));
    }
    out
}

/// Ground-truth pair labels at a keyframe by scanning every relation for
/// every candidate pair.
pub fn keyframe_labels_bruteforce(
    relations: &[(String, String, usize, usize, usize)],
    instance_ids: &[String],
    pairs: &[PairProposal],
    frame: usize,
    num_predicates: usize,
) -> Vec<Vec<u8>> {
    pairs
        .iter()
        .map(|p| {
            (0..num_predicates)
                .map(|c| {
                    relations.iter().any(|(s, o, pc, b, e)| {
                        *s == instance_ids[p.human_index]
                            && *o == instance_ids[p.object_index]
                            && *pc == c
                            && *b <= frame
                            && frame < *e
                    }) as u8
                })
                .collect()
        })
        .collect()
}
