//! Variant ablations: train each variant under a shared recipe, evaluate
//! in Oracle mode, summarise as median over seeds, and render the two
//! result tables.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::{AugmentConfig, Dataset, RaritySplit, SyntheticSpec};
use crate::error::Result;
use crate::eval::{evaluate, gt_instances, predict_dataset, EvalMode, EvalReport};
use crate::features::{PoseConfig, RoiConfig};
use crate::model::{train, Model, ModelConfig, TrainOptions, TrainReport, Variant};
use crate::nn::TrainConfig;
use crate::par::Exec;

pub const TEMPORAL_MIN_AP: f64 = 0.90;
pub const BASELINE_MAX_AP: f64 = 0.60;
pub const ORDER_MARGIN: f64 = 0.02;

/// Everything except the data that a training run depends on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Template; variant, predicates and seed are set per run. Its
    /// `segment_len` and `frame_stride` also fix the data window.
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub augment: Option<AugmentConfig>,
}

impl Default for ExperimentConfig {
    /// The desk-scale recipe for 32×32 synthetic frames.
    fn default() -> Self {
        ExperimentConfig {
            model: ModelConfig {
                segment_len: 8,
                frame_stride: 2,
                backbone_channels: vec![4, 8],
                backbone_strides: vec![[1, 2, 2], [1, 2, 2]],
                roi: RoiConfig {
                    out_h: 3,
                    out_w: 3,
                    samples_per_bin: 2,
                },
                hidden: 512,
                pose: PoseConfig {
                    mask_size: 16,
                    channels: [4, 8],
                },
                ..Default::default()
            },
            train: TrainConfig {
                base_lr: 0.02,
                epochs: 20,
                decay_epochs: vec![15],
                batch_size: 8,
                ..Default::default()
            },
            augment: None,
        }
    }
}

/// Synthetic data sized for [`ExperimentConfig::default`].
pub fn desk_synthetic(seed: u64) -> SyntheticSpec {
    SyntheticSpec {
        seed,
        num_train: 300,
        num_val: 120,
        width: 32,
        height: 32,
        ..Default::default()
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub variant: Variant,
    pub seed: u64,
    pub epoch_losses: Vec<f64>,
    pub train_seconds: f64,
    pub eval_seconds: f64,
    pub report: EvalReport,
    pub model: Model,
}

/// Train one variant on `train_set` under the recipe in `cfg`.
pub fn train_variant(
    cfg: &ExperimentConfig,
    train_set: &Dataset,
    variant: Variant,
    seed: u64,
    exec: Exec,
) -> Result<(Model, TrainReport)> {
    let mut model_cfg = cfg.model.clone();
    model_cfg.variant = variant;
    model_cfg.predicates = train_set.predicates();
    model_cfg.seed = seed;
    let mut model = Model::new(model_cfg)?;
    let tc = TrainConfig {
        seed,
        ..cfg.train.clone()
    };
    let opts = TrainOptions {
        augment: cfg.augment,
        exec,
    };
    let rep = train(&mut model, train_set, &tc, &opts)?;
    Ok((model, rep))
}

/// Train one variant on `train_set` and evaluate it on `val` in Oracle
/// mode. Both sets must use the window of `cfg.model`.
pub fn run_variant(
    cfg: &ExperimentConfig,
    train_set: &Dataset,
    val: &Dataset,
    rarity: &RaritySplit,
    variant: Variant,
    seed: u64,
    exec: Exec,
) -> Result<RunResult> {
    let t0 = Instant::now();
    let (model, rep) = train_variant(cfg, train_set, variant, seed, exec)?;
    let train_seconds = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    let gts = gt_instances(val)?;
    let (dets, _) = predict_dataset(&model, val, None, exec)?;
    let report = evaluate(
        &dets,
        &gts,
        &val.keyframes,
        &val.taxonomy,
        rarity,
        EvalMode::Oracle,
    )?;
    Ok(RunResult {
        variant,
        seed,
        epoch_losses: rep.epoch_losses,
        train_seconds,
        eval_seconds: t1.elapsed().as_secs_f64(),
        report,
        model,
    })
}

/// Every (seed, variant) combination, in seed-major order. Jobs may run
/// concurrently; each owns its seed-derived streams.
pub fn run_grid(
    cfg: &ExperimentConfig,
    train_set: &Dataset,
    val: &Dataset,
    rarity: &RaritySplit,
    variants: &[Variant],
    seeds: &[u64],
    exec: Exec,
) -> Result<Vec<RunResult>> {
    let jobs: Vec<(u64, Variant)> = seeds
        .iter()
        .flat_map(|&s| variants.iter().map(move |&v| (s, v)))
        .collect();
    exec.map(&jobs, |&(s, v)| {
        log::info!("training {v} seed {s}");
        run_variant(cfg, train_set, val, rarity, v, s, exec)
    })
    .into_iter()
    .collect()
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

/// Median-over-seeds metrics of one variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: Variant,
    pub seeds: Vec<u64>,
    pub full: Option<f64>,
    pub nonrare: Option<f64>,
    pub rare: Option<f64>,
    pub temporal: Option<f64>,
    pub spatial: Option<f64>,
    pub towards: Option<f64>,
    pub away: Option<f64>,
}

/// One row per variant present in `runs`, in [`Variant::ALL`] order.
pub fn summarize(runs: &[RunResult]) -> Vec<AblationRow> {
    Variant::ALL
        .iter()
        .filter_map(|&v| {
            let mine: Vec<&RunResult> = runs.iter().filter(|r| r.variant == v).collect();
            if mine.is_empty() {
                return None;
            }
            let med = |f: &dyn Fn(&EvalReport) -> Option<f64>| {
                let xs: Vec<f64> = mine.iter().filter_map(|r| f(&r.report)).collect();
                median(&xs)
            };
            Some(AblationRow {
                variant: v,
                seeds: mine.iter().map(|r| r.seed).collect(),
                full: med(&|r| r.map_full),
                nonrare: med(&|r| r.map_nonrare),
                rare: med(&|r| r.map_rare),
                temporal: med(&|r| r.map_temporal),
                spatial: med(&|r| r.map_spatial),
                towards: med(&|r| r.predicate_ap("towards")),
                away: med(&|r| r.predicate_ap("away")),
            })
        })
        .collect()
}

fn cell(x: Option<f64>) -> String {
    x.map(|v| format!("{:.2}", 100.0 * v))
        .unwrap_or_else(|| "-".into())
}

fn relative(x: Option<f64>, base: Option<f64>) -> String {
    match (x, base) {
        (Some(x), Some(b)) if b > 0.0 => format!("{:+.1}", 100.0 * (x - b) / b),
        _ => "-".into(),
    }
}

fn baseline(rows: &[AblationRow]) -> Option<&AblationRow> {
    rows.iter().find(|r| r.variant == Variant::Baseline2d)
}

/// mAP in percent with the change of Full mAP relative to baseline2d.
pub fn map_table_csv(rows: &[AblationRow]) -> String {
    let base = baseline(rows).and_then(|b| b.full);
    let mut s = String::from("variant,full,nonrare,rare,relative_pct\n");
    for r in rows {
        let rel = if r.variant == Variant::Baseline2d {
            "-".to_string()
        } else {
            relative(r.full, base)
        };
        s += &format!(
            "{},{},{},{},{}\n",
            r.variant,
            cell(r.full),
            cell(r.nonrare),
            cell(r.rare),
            rel
        );
    }
    s
}

/// Temporal and spatial mAP with their changes relative to baseline2d.
pub fn temporal_table_csv(rows: &[AblationRow]) -> String {
    let b = baseline(rows);
    let (bt, bs) = (b.and_then(|b| b.temporal), b.and_then(|b| b.spatial));
    let mut s =
        String::from("variant,temporal,temporal_relative_pct,spatial,spatial_relative_pct\n");
    for r in rows {
        let is_base = r.variant == Variant::Baseline2d;
        let rel = |x, base| {
            if is_base {
                "-".to_string()
            } else {
                relative(x, base)
            }
        };
        s += &format!(
            "{},{},{},{},{}\n",
            r.variant,
            cell(r.temporal),
            rel(r.temporal, bt),
            cell(r.spatial),
            rel(r.spatial, bs)
        );
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

fn row(rows: &[AblationRow], v: Variant) -> Option<&AblationRow> {
    rows.iter().find(|r| r.variant == v)
}

/// T and T+V+P reach [`TEMPORAL_MIN_AP`] on towards and away while
/// baseline2d stays at or below [`BASELINE_MAX_AP`].
pub fn temporal_discrimination_check(rows: &[AblationRow]) -> Check {
    let mut parts = Vec::new();
    let mut passed = true;
    for (v, good) in [
        (Variant::T, true),
        (Variant::TVP, true),
        (Variant::Baseline2d, false),
    ] {
        let Some(r) = row(rows, v) else {
            passed = false;
            parts.push(format!("{v} missing"));
            continue;
        };
        for (name, ap) in [("towards", r.towards), ("away", r.away)] {
            let ok = match ap {
                Some(a) if good => a >= TEMPORAL_MIN_AP,
                Some(a) => a <= BASELINE_MAX_AP,
                None => false,
            };
            passed &= ok;
            let bound = if good {
                format!("≥ {TEMPORAL_MIN_AP}")
            } else {
                format!("≤ {BASELINE_MAX_AP}")
            };
            parts.push(format!(
                "{v} {name} {} ({bound})",
                ap.map(|a| format!("{a:.3}"))
                    .unwrap_or_else(|| "n/a".into())
            ));
        }
    }
    Check {
        name: "temporal discrimination".into(),
        passed,
        detail: parts.join("; "),
    }
}

/// Full mAP: T+V+P > T > naive3d and T > baseline2d, each by more than
/// [`ORDER_MARGIN`].
pub fn ordering_check(rows: &[AblationRow]) -> Check {
    let full = |v| row(rows, v).and_then(|r| r.full);
    let mut parts = Vec::new();
    let mut passed = true;
    for (hi, lo) in [
        (Variant::TVP, Variant::T),
        (Variant::T, Variant::Naive3d),
        (Variant::T, Variant::Baseline2d),
    ] {
        match (full(hi), full(lo)) {
            (Some(a), Some(b)) => {
                let ok = a - b > ORDER_MARGIN;
                passed &= ok;
                parts.push(format!("{hi} {a:.3} vs {lo} {b:.3} (gap {:+.3})", a - b));
            }
            _ => {
                passed = false;
                parts.push(format!("{hi} or {lo} missing"));
            }
        }
    }
    Check {
        name: "ablation ordering".into(),
        passed,
        detail: parts.join("; "),
    }
}
