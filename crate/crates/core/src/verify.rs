//! Verification suites: gradient checks, pooling equivalence and
//! divergence, AP against the brute-force oracle, and the synthetic twin
//! property. Each suite reports how many cases it ran and the worst error
//! seen against its bound.
//!
//! Pooling checks run against a [`PoolingImpl`], so a deliberately broken
//! implementation can be passed in as a negative control.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::data::taxonomy::PredicateInfo;
use crate::data::{
    convert_labels, generate_synthetic, twin_pairs, RaritySplit, SyntheticSpec, Taxonomy,
};
use crate::error::Result;
use crate::eval::{evaluate, Detection, EvalMode, GtInstance};
use crate::features::{
    naive_temporal_roi_pool, roi_align, toi_align_var, toi_pool, FeatureMap, RoiConfig,
};
use crate::geometry::{BBox, Trajectory};
use crate::nn::{grad_check, Graph, Tensor};
use crate::oracle::{roi_align_bruteforce, triplet_aps, OracleDet, OracleGt};
use crate::par::Exec;

pub const GRAD_TOL: f64 = 1e-4;
pub const ROI_TOL: f64 = 1e-9;
pub const STATIC_TOL: f64 = 1e-9;
pub const DIVERGENCE_MIN: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteResult {
    pub name: String,
    pub cases: usize,
    pub failures: usize,
    /// Worst observed error (or, for lower-bound checks, the smallest
    /// observed margin quantity).
    pub worst: f64,
    pub bound: f64,
    pub messages: Vec<String>,
}

impl SuiteResult {
    fn new(name: &str, bound: f64) -> Self {
        SuiteResult {
            name: name.to_string(),
            cases: 0,
            failures: 0,
            worst: 0.0,
            bound,
            messages: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0 && self.cases > 0
    }

    fn fail(&mut self, msg: String) {
        self.failures += 1;
        if self.messages.len() < 10 {
            self.messages.push(msg);
        }
    }

    /// Record an error value that must stay below `bound`.
    fn upper(&mut self, label: &str, err: f64) {
        self.cases += 1;
        self.worst = self.worst.max(err);
        if !(err < self.bound) {
            self.fail(format!("{label}: {err:.3e} ≥ {:.0e}", self.bound));
        }
    }

    fn merge(&mut self, other: SuiteResult) {
        self.cases += other.cases;
        self.failures += other.failures;
        self.messages.extend(other.messages);
    }
}

fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::from_fn(shape, |_| rng.random_range(-1.0..1.0))
}

/// Values bounded away from zero so relu never sits on its kink.
fn off_kink(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    Tensor::from_fn(shape, |_| {
        let v = rng.random_range(0.05..1.0);
        if rng.random_bool(0.5) {
            v
        } else {
            -v
        }
    })
}

fn random_box(rng: &mut ChaCha8Rng, w: f64, h: f64) -> BBox {
    let x1 = rng.random_range(-0.2 * w..0.8 * w);
    let y1 = rng.random_range(-0.2 * h..0.8 * h);
    let bw = rng.random_range(0.1 * w..0.9 * w);
    let bh = rng.random_range(0.1 * h..0.9 * h);
    BBox::new(x1, y1, x1 + bw, y1 + bh).expect("positive extent")
}

fn random_roi(rng: &mut ChaCha8Rng) -> RoiConfig {
    RoiConfig {
        out_h: rng.random_range(1..=3),
        out_w: rng.random_range(1..=3),
        samples_per_bin: rng.random_range(1..=2),
    }
}

/// Central-difference checks of every differentiable op on randomized
/// shapes, one round per seed.
pub fn gradcheck_suite(seeds: &[u64]) -> Result<SuiteResult> {
    let mut r = SuiteResult::new("gradcheck", GRAD_TOL);
    let eps = 1e-6;
    for &seed in seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (n, k, m) = (
            rng.random_range(1..4),
            rng.random_range(1..6),
            rng.random_range(1..5),
        );
        let inputs = [
            random(&[n, k], &mut rng),
            random(&[m, k], &mut rng),
            random(&[m], &mut rng),
        ];
        r.upper(
            &format!("linear seed {seed}"),
            grad_check(&inputs, eps, |g, v| g.linear(v[0], v[1], v[2]))?,
        );

        let c = rng.random_range(1..3);
        let o = rng.random_range(1..3);
        let t = rng.random_range(1..4);
        let (hh, ww) = (rng.random_range(3..6), rng.random_range(3..6));
        let kt = [1, 3][rng.random_range(0..2)];
        let stride = [
            rng.random_range(1..3),
            rng.random_range(1..3),
            rng.random_range(1..3),
        ];
        let pad = [kt / 2, rng.random_range(0..2), rng.random_range(0..2)];
        let inputs = [
            random(&[c, t, hh, ww], &mut rng),
            random(&[o, c, kt, 3, 3], &mut rng),
            random(&[o], &mut rng),
        ];
        r.upper(
            &format!("conv3d seed {seed}"),
            grad_check(&inputs, eps, |g, v| g.conv3d(v[0], v[1], v[2], stride, pad))?,
        );

        let len = rng.random_range(2..12);
        r.upper(
            &format!("relu seed {seed}"),
            grad_check(&[off_kink(&[len], &mut rng)], eps, |g, v| g.relu(v[0]))?,
        );
        r.upper(
            &format!("sigmoid seed {seed}"),
            grad_check(&[random(&[len], &mut rng)], eps, |g, v| g.sigmoid(v[0]))?,
        );

        let shape = [
            rng.random_range(1..3),
            rng.random_range(1..4),
            rng.random_range(1..4),
            rng.random_range(1..4),
        ];
        let mut axes: Vec<usize> = (0..4).filter(|_| rng.random_bool(0.5)).collect();
        if axes.is_empty() {
            axes.push(rng.random_range(0..4));
        }
        r.upper(
            &format!("mean_pool {axes:?} seed {seed}"),
            grad_check(&[random(&shape, &mut rng)], eps, |g, v| {
                g.mean_pool(v[0], &axes)
            })?,
        );

        let axis = rng.random_range(0..2);
        let (a, b) = (rng.random_range(1..4), rng.random_range(1..4));
        let (sa, sb) = if axis == 0 {
            ([a, 3], [b, 3])
        } else {
            ([3, a], [3, b])
        };
        r.upper(
            &format!("concat+reshape seed {seed}"),
            grad_check(
                &[random(&sa, &mut rng), random(&sb, &mut rng)],
                eps,
                |g, v| {
                    let x = g.concat(&[v[0], v[1]], axis)?;
                    let total = g.value(x).len();
                    g.reshape(x, &[total])
                },
            )?,
        );

        let (np, nc) = (rng.random_range(1..4), rng.random_range(1..5));
        let targets = Tensor::from_fn(&[np, nc], |_| if rng.random_bool(0.5) { 1.0 } else { 0.0 });
        r.upper(
            &format!("bce seed {seed}"),
            grad_check(&[random(&[np, nc], &mut rng)], eps, |g, v| {
                g.bce_multilabel(v[0], &targets)
            })?,
        );

        let (d, tn) = (rng.random_range(1..3), rng.random_range(1..4));
        let (mh, mw) = (rng.random_range(3..7), rng.random_range(3..7));
        let scale = [1.0, 0.5, 0.25][rng.random_range(0..3)];
        let boxes: Vec<BBox> = (0..tn)
            .map(|_| random_box(&mut rng, mw as f64 / scale, mh as f64 / scale))
            .collect();
        let roi = random_roi(&mut rng);
        r.upper(
            &format!("toi_align T={tn} seed {seed}"),
            grad_check(&[random(&[d, tn, mh, mw], &mut rng)], eps, |g, v| {
                toi_align_var(g, v[0], scale, &boxes, &roi)
            })?,
        );

        // a small head end to end: conv → relu → mean → linear → bce
        let x = random(&[2, 2, 4, 4], &mut rng);
        let inputs = [
            random(&[3, 2, 3, 3, 3], &mut rng),
            random(&[3], &mut rng),
            random(&[2, 3], &mut rng),
            random(&[2], &mut rng),
        ];
        let targets = Tensor::from_vec(&[1, 2], vec![1.0, 0.0])?;
        r.upper(
            &format!("composite seed {seed}"),
            grad_check(&inputs, eps, |g: &mut Graph, v| {
                let xi = g.input(x.clone())?;
                let h = g.conv3d(xi, v[0], v[1], [1; 3], [1; 3])?;
                let h = g.relu(h)?;
                let h = g.mean_pool(h, &[1, 2, 3])?;
                let h = g.reshape(h, &[1, 3])?;
                let z = g.linear(h, v[2], v[3])?;
                g.bce_multilabel(z, &targets)
            })?,
        );
    }
    Ok(r)
}

/// The three pooling entry points, so that a faulty variant can stand in
/// for the production one.
pub trait PoolingImpl: Sync {
    fn roi_align(
        &self,
        map: &Tensor,
        spatial_scale: f64,
        b: &BBox,
        cfg: &RoiConfig,
    ) -> Result<Tensor>;
    fn toi_pool(&self, map: &FeatureMap, traj: &Trajectory, cfg: &RoiConfig) -> Result<Tensor>;
    fn naive_pool(&self, map: &FeatureMap, keyframe_box: &BBox, cfg: &RoiConfig) -> Result<Tensor>;
}

/// The library kernels.
pub struct Production;

impl PoolingImpl for Production {
    fn roi_align(
        &self,
        map: &Tensor,
        spatial_scale: f64,
        b: &BBox,
        cfg: &RoiConfig,
    ) -> Result<Tensor> {
        roi_align(map, spatial_scale, b, cfg)
    }
    fn toi_pool(&self, map: &FeatureMap, traj: &Trajectory, cfg: &RoiConfig) -> Result<Tensor> {
        toi_pool(map, traj, cfg)
    }
    fn naive_pool(&self, map: &FeatureMap, keyframe_box: &BBox, cfg: &RoiConfig) -> Result<Tensor> {
        naive_temporal_roi_pool(map, keyframe_box, cfg)
    }
}

/// Negative control: RoIAlign that forgets the half-pixel offset, with
/// both temporal poolings built on top of it.
pub struct MissingHalfPixel;

impl PoolingImpl for MissingHalfPixel {
    fn roi_align(
        &self,
        map: &Tensor,
        spatial_scale: f64,
        b: &BBox,
        cfg: &RoiConfig,
    ) -> Result<Tensor> {
        let s = 0.5 / spatial_scale;
        let shifted = BBox {
            x1: b.x1 + s,
            y1: b.y1 + s,
            x2: b.x2 + s,
            y2: b.y2 + s,
        };
        roi_align(map, spatial_scale, &shifted, cfg)
    }
    fn toi_pool(&self, map: &FeatureMap, traj: &Trajectory, cfg: &RoiConfig) -> Result<Tensor> {
        let mut acc: Option<Tensor> = None;
        for (t, b) in traj.boxes.iter().enumerate() {
            let r = self.roi_align(&map.frame(t), map.spatial_scale, b, cfg)?;
            acc = Some(match acc {
                None => r,
                Some(a) => add(&a, &r)?,
            });
        }
        let n = traj.boxes.len() as f64;
        Ok(acc.expect("non-empty trajectory").map(|x| x / n))
    }
    fn naive_pool(&self, map: &FeatureMap, keyframe_box: &BBox, cfg: &RoiConfig) -> Result<Tensor> {
        let n = map.frames();
        let mut mean = map.frame(0);
        for t in 1..n {
            mean = add(&mean, &map.frame(t))?;
        }
        self.roi_align(
            &mean.map(|x| x / n as f64),
            map.spatial_scale,
            keyframe_box,
            cfg,
        )
    }
}

fn add(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    Tensor::from_vec(
        a.shape(),
        a.data().iter().zip(b.data()).map(|(x, y)| x + y).collect(),
    )
}

fn max_abs_diff(a: &Tensor, b: &Tensor) -> f64 {
    if a.shape() != b.shape() {
        return f64::INFINITY;
    }
    a.data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// RoIAlign against the full-grid bilinear oracle on `cases` random
/// (map, box, config) draws.
pub fn roi_oracle_suite(imp: &dyn PoolingImpl, cases: usize, seed: u64) -> Result<SuiteResult> {
    let mut r = SuiteResult::new("roi_align vs oracle", ROI_TOL);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..cases {
        let (d, h, w) = (
            rng.random_range(1..4),
            rng.random_range(2..10),
            rng.random_range(2..10),
        );
        let map = random(&[d, h, w], &mut rng);
        let scale = [1.0, 0.5, 0.25, 1.0 / 16.0][rng.random_range(0..4)];
        let b = random_box(&mut rng, w as f64 / scale, h as f64 / scale);
        let cfg = RoiConfig {
            out_h: rng.random_range(1..=4),
            out_w: rng.random_range(1..=4),
            samples_per_bin: rng.random_range(1..=3),
        };
        let got = imp.roi_align(&map, scale, &b, &cfg)?;
        let want = roi_align_bruteforce(&map, scale, &b, &cfg);
        r.upper(&format!("case {i}"), max_abs_diff(&got, &want));
    }
    Ok(r)
}

/// Static trajectories: ToI pooling and the naive order must agree.
pub fn static_equivalence_suite(
    imp: &dyn PoolingImpl,
    cases: usize,
    seed: u64,
) -> Result<SuiteResult> {
    let mut r = SuiteResult::new("static ToI = naive", STATIC_TOL);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for i in 0..cases {
        let (d, tn) = (rng.random_range(1..4), rng.random_range(1..6));
        let (h, w) = (rng.random_range(2..9), rng.random_range(2..9));
        let scale = [1.0, 0.5, 0.25][rng.random_range(0..3)];
        let map = FeatureMap::new(random(&[d, tn, h, w], &mut rng), scale)?;
        let b = random_box(&mut rng, w as f64 / scale, h as f64 / scale);
        let traj = Trajectory::from_boxes("s", "ball", vec![b; tn]);
        let cfg = random_roi(&mut rng);
        let toi = imp.toi_pool(&map, &traj, &cfg)?;
        let naive = imp.naive_pool(&map, &b, &cfg)?;
        r.upper(&format!("case {i}"), max_abs_diff(&toi, &naive));
    }
    Ok(r)
}

/// A 4×4 unit blob moving 2 px per frame; the feature map is exactly the
/// blob's indicator, and the trajectory follows it.
pub fn moving_blob_witness() -> (FeatureMap, Trajectory, usize) {
    let (tn, h, w) = (8, 8, 24);
    let mut map = Tensor::zeros(&[1, tn, h, w]);
    let mut boxes = Vec::new();
    for t in 0..tn {
        let x0 = 1 + 2 * t;
        for y in 2..6 {
            for x in x0..x0 + 4 {
                map.set(&[0, t, y, x], 1.0);
            }
        }
        boxes.push(BBox::new(x0 as f64, 2.0, x0 as f64 + 4.0, 6.0).expect("ordered"));
    }
    let fm = FeatureMap::new(map, 1.0).expect("rank 4");
    (fm, Trajectory::from_boxes("blob", "ball", boxes), tn / 2)
}

/// Smallest elementwise relative difference between ToI and naive pooling
/// on the moving-blob witness.
pub fn divergence_suite(imp: &dyn PoolingImpl) -> Result<SuiteResult> {
    let mut r = SuiteResult::new("moving-object divergence", DIVERGENCE_MIN);
    let (map, traj, key) = moving_blob_witness();
    let cfg = RoiConfig {
        out_h: 2,
        out_w: 2,
        samples_per_bin: 2,
    };
    let toi = imp.toi_pool(&map, &traj, &cfg)?;
    let naive = imp.naive_pool(&map, &traj.boxes[key], &cfg)?;
    let rel = toi
        .data()
        .iter()
        .zip(naive.data())
        .map(|(a, b)| (a - b).abs() / a.abs().max(b.abs()).max(1e-12))
        .fold(f64::INFINITY, f64::min);
    r.cases = 1;
    r.worst = rel;
    if !(rel > DIVERGENCE_MIN) {
        r.fail(format!(
            "min relative difference {rel:.3} ≤ {DIVERGENCE_MIN}"
        ));
    }
    Ok(r)
}

/// Oracle agreement, static equivalence and the divergence witness.
pub fn pooling_suite(imp: &dyn PoolingImpl, seed: u64) -> Result<SuiteResult> {
    let mut r = SuiteResult::new("pooling", 0.0);
    for part in [
        roi_oracle_suite(imp, 200, seed)?,
        static_equivalence_suite(imp, 200, seed + 1)?,
        divergence_suite(imp)?,
    ] {
        r.merge(part);
    }
    Ok(r)
}

const AP_PREDICATES: [&str; 2] = ["towards", "hold"];
const AP_CATEGORIES: [&str; 2] = ["ball", "cup"];

fn ap_taxonomy() -> Taxonomy {
    Taxonomy {
        predicates: AP_PREDICATES
            .iter()
            .map(|p| PredicateInfo {
                name: p.to_string(),
                temporal: *p == "towards",
            })
            .collect(),
        categories: ["person"]
            .iter()
            .chain(&AP_CATEGORIES)
            .map(|s| s.to_string())
            .collect(),
        triplets: vec![],
        note: None,
    }
}

fn anchored_box(rng: &mut ChaCha8Rng) -> BBox {
    let x = rng.random_range(0..3) as f64 * 30.0 + rng.random_range(0.0..4.0);
    let y = rng.random_range(0.0..4.0);
    BBox::new(x, y, x + 10.0, y + 10.0).expect("ordered")
}

/// One random scenario with at most five detections and five ground
/// truths per (predicate, category). Scores come from a coarse grid so
/// that ties occur.
pub fn ap_scenario(rng: &mut ChaCha8Rng) -> (Vec<Detection>, Vec<GtInstance>) {
    let mut dets = Vec::new();
    let mut gts = Vec::new();
    for p in AP_PREDICATES {
        for c in AP_CATEGORIES {
            for _ in 0..rng.random_range(0..=5) {
                gts.push(GtInstance {
                    video_id: "v".into(),
                    keyframe: rng.random_range(0..2),
                    human_box: anchored_box(rng),
                    object_box: anchored_box(rng),
                    object_category: c.into(),
                    predicate: p.into(),
                });
            }
            for _ in 0..rng.random_range(0..=5) {
                dets.push(Detection {
                    video_id: "v".into(),
                    keyframe: rng.random_range(0..2),
                    human_box: anchored_box(rng),
                    object_box: anchored_box(rng),
                    object_category: c.into(),
                    predicate: p.into(),
                    score: rng.random_range(1..6) as f64 / 8.0,
                });
            }
        }
    }
    (dets, gts)
}

/// `evaluate` against exhaustive matching and PR enumeration; every
/// triplet AP and the mAP must agree exactly.
pub fn ap_oracle_suite(scenarios: usize, seed: u64) -> Result<SuiteResult> {
    let mut r = SuiteResult::new("AP vs oracle", 0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let keyframes = vec![("v".to_string(), 0), ("v".to_string(), 1)];
    let taxonomy = ap_taxonomy();
    let rarity = RaritySplit::default();
    let mut run = 0;
    while run < scenarios {
        let (dets, gts) = ap_scenario(&mut rng);
        if gts.is_empty() {
            continue;
        }
        run += 1;
        r.cases += 1;
        let report = evaluate(
            &dets,
            &gts,
            &keyframes,
            &taxonomy,
            &rarity,
            EvalMode::Oracle,
        )?;
        let od: Vec<OracleDet> = dets
            .iter()
            .map(|d| OracleDet {
                keyframe: (d.video_id.clone(), d.keyframe),
                human: d.human_box,
                object: d.object_box,
                category: d.object_category.clone(),
                predicate: d.predicate.clone(),
                score: d.score,
            })
            .collect();
        let og: Vec<OracleGt> = gts
            .iter()
            .map(|g| OracleGt {
                keyframe: (g.video_id.clone(), g.keyframe),
                human: g.human_box,
                object: g.object_box,
                category: g.object_category.clone(),
                predicate: g.predicate.clone(),
            })
            .collect();
        let want = triplet_aps(&od, &og);
        let got: Vec<((String, String), f64)> = report
            .triplets
            .iter()
            .map(|t| ((t.predicate.clone(), t.category.clone()), t.ap))
            .collect();
        let want_v: Vec<((String, String), f64)> = want.clone().into_iter().collect();
        let want_map = want.values().sum::<f64>() / want.len() as f64;
        if got != want_v || report.map_full != Some(want_map) {
            r.fail(format!(
                "scenario {run}: got {got:?} mAP {:?}, oracle {want_v:?} mAP {want_map}",
                report.map_full
            ));
        }
    }
    Ok(r)
}

/// Every twin pair in a small synthetic set: frames are exact reversals
/// and keyframe labels map onto each other with towards and away swapped.
pub fn twin_suite(seed: u64) -> Result<SuiteResult> {
    let mut r = SuiteResult::new("synthetic twins", 0.0);
    let spec = SyntheticSpec {
        seed,
        num_train: 24,
        num_val: 0,
        width: 32,
        height: 32,
        ..Default::default()
    };
    let data = generate_synthetic(&spec, Exec::Sequential)?;
    let predicates = data.taxonomy.predicate_names();
    let swap: Vec<usize> = predicates
        .iter()
        .map(|p| {
            let q = match p.as_str() {
                "towards" => "away",
                "away" => "towards",
                other => other,
            };
            predicates.iter().position(|x| x == q).unwrap_or(0)
        })
        .collect();
    let fc = spec.frame_count();
    for (t, a) in twin_pairs(&data.train) {
        r.cases += 1;
        let (ft, fa) = (&data.frames[&t], &data.frames[&a]);
        if (0..fc).any(|f| ft.frame(f) != fa.frame(fc - 1 - f)) {
            r.fail(format!("{t}/{a}: frames are not reversed"));
            continue;
        }
        let (vt, va) = (
            data.train.video(&t).expect("listed"),
            data.train.video(&a).expect("listed"),
        );
        for k in vt.candidate_keyframes() {
            let lt = convert_labels(vt, k, &predicates)?;
            let la = convert_labels(va, fc - 1 - k, &predicates)?;
            let mapped: Vec<Vec<u8>> = lt
                .labels
                .iter()
                .map(|row| swap.iter().map(|&j| row[j]).collect())
                .collect();
            if lt.instance_ids != la.instance_ids || mapped != la.labels {
                r.fail(format!("{t}@{k} vs {a}@{}: labels do not swap", fc - 1 - k));
            }
        }
    }
    Ok(r)
}

/// All suites, in a fixed order.
pub fn run_all(imp: &dyn PoolingImpl, seed: u64) -> Result<Vec<SuiteResult>> {
    Ok(vec![
        gradcheck_suite(&[seed, seed + 1, seed + 2, seed + 3, seed + 4])?,
        pooling_suite(imp, seed)?,
        ap_oracle_suite(200, seed)?,
        twin_suite(seed)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clean_build_passes_every_suite() {
        for s in run_all(&Production, 0).unwrap() {
            assert!(s.passed(), "{}: {:?}", s.name, s.messages);
        }
    }

    #[test]
    fn missing_half_pixel_fails_pooling() {
        let r = pooling_suite(&MissingHalfPixel, 0).unwrap();
        assert!(!r.passed());
        assert!(r.messages.iter().any(|m| m.contains("case")));
        // the fault keeps both poolings consistent, so only the oracle catches it
        assert!(static_equivalence_suite(&MissingHalfPixel, 50, 1)
            .unwrap()
            .passed());
    }

    #[test]
    fn witness_values() {
        let (map, traj, key) = moving_blob_witness();
        let cfg = RoiConfig {
            out_h: 2,
            out_w: 2,
            samples_per_bin: 2,
        };
        let toi = toi_pool(&map, &traj, &cfg).unwrap();
        assert!(toi.data().iter().all(|&v| v == 1.0));
        // the blob covers each keyframe bin in two of the eight frames
        let naive = naive_temporal_roi_pool(&map, &traj.boxes[key], &cfg).unwrap();
        assert!(
            naive.data().iter().all(|&v| (v - 0.25).abs() < 1e-12),
            "{:?}",
            naive.data()
        );
    }

    #[test]
    fn suites_are_deterministic() {
        assert_eq!(
            ap_oracle_suite(20, 4).unwrap(),
            ap_oracle_suite(20, 4).unwrap()
        );
    }
}
