//! Acceptance suite. Runs every criterion in order, prints one PASS/FAIL
//! line each and exits nonzero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use sthoi_core::data::{
    generate_synthetic, rarity_split, AnnotationSet, Dataset, KeyframeFilter, PredicateInfo,
    RaritySplit, SampleSet, Taxonomy, TrajectorySet, Triplet, VideoAnnotation, RARE_THRESHOLD,
};
use sthoi_core::eval::{
    evaluate, paired_mode_run, Detection, EvalMode, GtInstance, MAX_DETECTIONS_PER_KEYFRAME,
};
use sthoi_core::experiment::{
    desk_synthetic, ordering_check, run_variant, summarize, temporal_discrimination_check,
    ExperimentConfig, RunResult,
};
use sthoi_core::geometry::BBox;
use sthoi_core::model::{Model, Variant};
use sthoi_core::par::Exec;
use sthoi_core::verify::{
    ap_oracle_suite, divergence_suite, gradcheck_suite, roi_oracle_suite,
    static_equivalence_suite, Production, SuiteResult, GRAD_TOL,
};

const SEED: u64 = 0;
const SEEDS: [u64; 3] = [0, 1, 2];

struct Outcome {
    passed: bool,
    detail: String,
}

fn suite_outcome(suites: &[SuiteResult]) -> Outcome {
    let detail = suites
        .iter()
        .map(|s| {
            format!(
                "{} {}/{} worst {:.3e} bound {:.1e}",
                s.name,
                s.cases - s.failures,
                s.cases,
                s.worst,
                s.bound
            )
        })
        .collect::<Vec<_>>()
        .join("; ");
    let messages: Vec<&String> = suites.iter().flat_map(|s| &s.messages).collect();
    Outcome {
        passed: suites.iter().all(SuiteResult::passed),
        detail: if messages.is_empty() {
            detail
        } else {
            format!("{detail}; first failure: {}", messages[0])
        },
    }
}

struct Report {
    failures: usize,
}

impl Report {
    /// Run one criterion and print its line. `budget` bounds wall time.
    fn run(
        &mut self,
        id: usize,
        name: &str,
        budget: Option<Duration>,
        f: impl FnOnce() -> Outcome,
    ) {
        let t0 = Instant::now();
        let mut out = f();
        let took = t0.elapsed();
        if let Some(b) = budget {
            if took > b {
                out.passed = false;
                out.detail += &format!("; over the {:.0} s budget", b.as_secs_f64());
            }
        }
        if !out.passed {
            self.failures += 1;
        }
        println!(
            "{} {id} {name} ({:.1} s): {}",
            if out.passed { "PASS" } else { "FAIL" },
            took.as_secs_f64(),
            out.detail
        );
    }
}

fn gradients() -> Outcome {
    let r = gradcheck_suite(&[SEED, SEED + 1, SEED + 2, SEED + 3, SEED + 4]).unwrap();
    let mut out = suite_outcome(std::slice::from_ref(&r));
    out.passed &= r.worst < GRAD_TOL;
    out
}

fn roi_oracle() -> Outcome {
    suite_outcome(&[roi_oracle_suite(&Production, 1000, SEED).unwrap()])
}

fn pooling_order() -> Outcome {
    suite_outcome(&[
        static_equivalence_suite(&Production, 500, SEED).unwrap(),
        divergence_suite(&Production).unwrap(),
    ])
}

fn ap_oracle() -> Outcome {
    let r = ap_oracle_suite(250, SEED).unwrap();
    let mut out = suite_outcome(std::slice::from_ref(&r));
    out.passed &= r.cases >= 200;
    out
}

/// The desk benchmark with its train and val splits.
struct Bench {
    cfg: ExperimentConfig,
    train: Dataset,
    val: Dataset,
    rarity: RaritySplit,
}

impl Bench {
    fn new() -> Self {
        let cfg = ExperimentConfig::default();
        let data = generate_synthetic(&desk_synthetic(SEED), Exec::Parallel).unwrap();
        let rarity = RaritySplit::from_taxonomy(&data.taxonomy);
        let window = cfg.model.window();
        let train = Dataset::new(
            data.train,
            data.taxonomy.clone(),
            data.frames.clone(),
            KeyframeFilter::ActiveRelation,
            window,
        )
        .unwrap();
        let val = Dataset::new(
            data.val,
            data.taxonomy,
            data.frames,
            KeyframeFilter::CoPresent,
            window,
        )
        .unwrap();
        Bench {
            cfg,
            train,
            val,
            rarity,
        }
    }

    fn run(&self, variant: Variant, seed: u64) -> RunResult {
        run_variant(
            &self.cfg,
            &self.train,
            &self.val,
            &self.rarity,
            variant,
            seed,
            Exec::Parallel,
        )
        .unwrap()
    }
}

fn timings(runs: &[RunResult]) -> String {
    runs.iter()
        .map(|r| format!("{} {:.0} s", r.variant, r.train_seconds + r.eval_seconds))
        .collect::<Vec<_>>()
        .join(", ")
}

fn temporal_discrimination(bench: &Bench, runs: &mut Vec<RunResult>) -> Outcome {
    for v in [Variant::Baseline2d, Variant::T, Variant::TVP] {
        runs.push(bench.run(v, SEED));
    }
    let c = temporal_discrimination_check(&summarize(runs));
    let epochs = bench.cfg.train.epochs;
    Outcome {
        passed: c.passed && epochs <= 20,
        detail: format!("{}; {epochs} epochs; {}", c.detail, timings(runs)),
    }
}

fn ablation_ordering(bench: &Bench, runs: &mut Vec<RunResult>) -> Outcome {
    let order = [Variant::Baseline2d, Variant::Naive3d, Variant::T, Variant::TVP];
    for seed in SEEDS {
        for v in order {
            if !runs.iter().any(|r| r.variant == v && r.seed == seed) {
                runs.push(bench.run(v, seed));
            }
        }
    }
    let per_seed: Vec<String> = runs
        .iter()
        .map(|r| {
            format!(
                "{}/s{} {:.3}",
                r.variant,
                r.seed,
                r.report.map_full.unwrap_or(f64::NAN)
            )
        })
        .collect();
    let c = ordering_check(&summarize(runs));
    Outcome {
        passed: c.passed,
        detail: format!("median {}; runs {}", c.detail, per_seed.join(", ")),
    }
}

fn same_bits(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

fn model_of(runs: &[RunResult], v: Variant) -> &Model {
    &runs
        .iter()
        .find(|r| r.variant == v && r.seed == SEED)
        .expect("trained above")
        .model
}

fn baseline_insensitivity(bench: &Bench, runs: &[RunResult]) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let base = model_of(runs, Variant::Baseline2d);
    let mut checked = 0;
    let mut identical = 0;
    for i in 0..bench.val.len() {
        let s = bench.val.get(i).unwrap().into_owned();
        let mut noisy = s.clone();
        let [c, tn, h, w] = [3, s.segment_len(), s.frame_h, s.frame_w];
        let centre = s.center();
        let data = noisy.frames.data_mut();
        for ch in 0..c {
            for t in (0..tn).filter(|&t| t != centre) {
                let start = (ch * tn + t) * h * w;
                for v in &mut data[start..start + h * w] {
                    *v = rng.random::<f64>();
                }
            }
        }
        let (a, b) = (
            base.logits_tensor(&s).unwrap(),
            base.logits_tensor(&noisy).unwrap(),
        );
        checked += 1;
        if let (Some(a), Some(b)) = (a, b) {
            if same_bits(a.data(), b.data()) {
                identical += 1;
            }
        }
    }

    let t = model_of(runs, Variant::T);
    let towards = bench
        .val
        .predicates()
        .iter()
        .position(|p| p == "towards")
        .unwrap();
    let mut reversed = 0;
    let mut changed = 0;
    for i in 0..bench.val.len() {
        let s = bench.val.get(i).unwrap().into_owned();
        if !s.gt.iter().any(|row| row[towards] == 1) {
            continue;
        }
        reversed += 1;
        let a = t.logits_tensor(&s).unwrap().unwrap();
        let b = t.logits_tensor(&s.time_reversed()).unwrap().unwrap();
        if !same_bits(a.data(), b.data()) {
            changed += 1;
        }
    }
    Outcome {
        passed: checked > 0 && identical == checked && reversed > 0 && changed == reversed,
        detail: format!(
            "baseline2d identical under noise on {identical}/{checked} keyframes; \
             T changed under reversal on {changed}/{reversed} towards keyframes"
        ),
    }
}

/// One video at 1 fps whose `hold` intervals give the cup 24 and the
/// ball 25 labelled keyframes.
fn rarity_boundary() -> (bool, String) {
    let frames = 30;
    let b = |x: f64| json!([x, 2.0, x + 4.0, 6.0]);
    let mut boxes = vec![];
    for f in 0..frames {
        boxes.push(json!({"frame": f, "instance_id": "p", "box": b(0.0)}));
        boxes.push(json!({"frame": f, "instance_id": "c", "box": b(10.0)}));
        boxes.push(json!({"frame": f, "instance_id": "b", "box": b(20.0)}));
    }
    let ann: AnnotationSet = serde_json::from_value(json!({"videos": [{
        "video_id": "r", "fps": 1.0, "width": 32, "height": 8, "frame_count": frames,
        "instances": [
            {"instance_id": "p", "category": "person"},
            {"instance_id": "c", "category": "cup"},
            {"instance_id": "b", "category": "ball"}
        ],
        "boxes": boxes,
        "relations": [
            {"subject_id": "p", "object_id": "c", "predicate_id": "hold", "begin_frame": 0, "end_frame": 24},
            {"subject_id": "p", "object_id": "b", "predicate_id": "hold", "begin_frame": 0, "end_frame": 25}
        ]
    }]}))
    .unwrap();
    ann.validate().unwrap();
    let tax = hold_taxonomy(&["cup", "ball"]);
    let split = rarity_split(&ann, &tax).unwrap();
    let cup = Triplet::new("hold", "cup");
    let ball = Triplet::new("hold", "ball");
    let ok = RARE_THRESHOLD == 25 && split.is_rare(&cup) && !split.is_rare(&ball);
    (
        ok,
        format!(
            "24 → {}, 25 → {}",
            if split.is_rare(&cup) { "Rare" } else { "Non-rare" },
            if split.is_rare(&ball) { "Rare" } else { "Non-rare" }
        ),
    )
}

fn hold_taxonomy(categories: &[&str]) -> Taxonomy {
    Taxonomy {
        predicates: vec![PredicateInfo {
            name: "hold".into(),
            temporal: false,
        }],
        categories: std::iter::once("person")
            .chain(categories.iter().copied())
            .map(String::from)
            .collect(),
        triplets: vec![],
        note: None,
    }
}

/// 150 detections at one keyframe; the only correct one sits at `rank`.
fn truncation_ap(rank: usize) -> (f64, usize) {
    let gt_box = BBox::new(0.0, 0.0, 10.0, 10.0).unwrap();
    let miss = BBox::new(50.0, 50.0, 60.0, 60.0).unwrap();
    let n = 150;
    let dets: Vec<Detection> = (0..n)
        .map(|i| Detection {
            video_id: "v".into(),
            keyframe: 0,
            human_box: gt_box,
            object_box: if i + 1 == rank { gt_box } else { miss },
            object_category: "cup".into(),
            predicate: "hold".into(),
            score: (n - i) as f64 / n as f64,
        })
        .collect();
    let gts = vec![GtInstance {
        video_id: "v".into(),
        keyframe: 0,
        human_box: gt_box,
        object_box: gt_box,
        object_category: "cup".into(),
        predicate: "hold".into(),
    }];
    let r = evaluate(
        &dets,
        &gts,
        &[("v".into(), 0)],
        &hold_taxonomy(&["cup"]),
        &RaritySplit::default(),
        EvalMode::Oracle,
    )
    .unwrap();
    (r.map_full.unwrap(), r.num_detections)
}

fn keyframes_at(fps: f64, frame_count: usize) -> Vec<usize> {
    let v: VideoAnnotation = serde_json::from_value(json!({
        "video_id": "k", "fps": fps, "width": 8, "height": 8, "frame_count": frame_count,
        "instances": []
    }))
    .unwrap();
    v.candidate_keyframes()
}

fn protocol(bench: &Bench, runs: &[RunResult]) -> Outcome {
    let mut parts = vec![];
    let mut passed = true;

    let (ok, d) = rarity_boundary();
    passed &= ok;
    parts.push(format!("rarity {d}"));

    let (at100, kept) = truncation_ap(MAX_DETECTIONS_PER_KEYFRAME);
    let (at101, _) = truncation_ap(MAX_DETECTIONS_PER_KEYFRAME + 1);
    let ok = kept == MAX_DETECTIONS_PER_KEYFRAME && at100 == 0.01 && at101 == 0.0;
    passed &= ok;
    parts.push(format!(
        "top-{MAX_DETECTIONS_PER_KEYFRAME}: kept {kept} of 150, AP with hit at rank 100 = {at100}, at rank 101 = {at101}"
    ));

    let grids = [
        (keyframes_at(30.0, 95), vec![0, 30, 60, 90]),
        (keyframes_at(29.97, 100), vec![0, 30, 60, 90]),
        (keyframes_at(8.0, 17), vec![0, 8, 16]),
    ];
    let ok = grids.iter().all(|(got, want)| got == want)
        && bench.val.keyframes.iter().all(|(_, k)| k % 8 == 0);
    passed &= ok;
    parts.push(format!(
        "1 Hz keyframes {:?}",
        grids.iter().map(|g| &g.0).collect::<Vec<_>>()
    ));

    let gt_tracks = TrajectorySet::from_annotations(&bench.val.annotations);
    let t = model_of(runs, Variant::T);
    let paired =
        paired_mode_run(t, &bench.val, &gt_tracks, &bench.rarity, Exec::Parallel).unwrap();
    let mut det = paired.detection.clone();
    let mode_ok = det.mode == EvalMode::Detection && paired.oracle.mode == EvalMode::Oracle;
    det.mode = EvalMode::Oracle;
    let ok = mode_ok && det == paired.oracle;
    passed &= ok;
    parts.push(format!(
        "Oracle = Detection with GT trajectories: {ok} (mAP {:.6} vs {:.6})",
        paired.oracle.map_full.unwrap_or(f64::NAN),
        paired.detection.map_full.unwrap_or(f64::NAN)
    ));

    Outcome {
        passed,
        detail: parts.join("; "),
    }
}

fn main() -> ExitCode {
    let mut report = Report { failures: 0 };
    let s = Duration::from_secs;
    report.run(1, "gradient correctness", Some(s(60)), gradients);
    report.run(2, "RoIAlign oracle equivalence", Some(s(30)), roi_oracle);
    report.run(3, "pooling order", Some(s(10)), pooling_order);
    report.run(4, "AP/mAP oracle equivalence", Some(s(60)), ap_oracle);

    let t0 = Instant::now();
    let bench = Bench::new();
    let setup = t0.elapsed();
    let mut runs = vec![];
    report.run(5, "temporal discrimination", Some(s(600) - setup), || {
        temporal_discrimination(&bench, &mut runs)
    });
    report.run(6, "ablation ordering", None, || {
        ablation_ordering(&bench, &mut runs)
    });
    report.run(7, "baseline insensitivity", None, || {
        baseline_insensitivity(&bench, &runs)
    });
    report.run(8, "protocol conformance", None, || protocol(&bench, &runs));

    if report.failures == 0 {
        println!("all 8 criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("{} of 8 criteria failed", report.failures);
        ExitCode::FAILURE
    }
}
