//! `sthoi`: synthesize data, convert annotations, train, evaluate, run the
//! variant ablation and the verification suites.
//!
//! Exit codes: 0 success, 1 verification or runtime failure, 2 usage or
//! input error.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;

use sthoi_core::data::{
    convert_labels, generate_synthetic, load_json, rarity_split, sample_keyframes, save_json,
    write_synthetic, AnnotationSet, Dataset, KeyframeFilter, PredicateInfo, RaritySplit,
    SyntheticSpec, Taxonomy, TrajectorySet, Triplet, RARE_THRESHOLD,
};
use sthoi_core::eval::{
    evaluate, gt_instances, predict_dataset, write_detections, EvalMode, EvalReport,
};
use sthoi_core::experiment::{
    ordering_check, run_grid, summarize, map_table_csv, temporal_table_csv, temporal_discrimination_check,
    train_variant, AblationRow, Check, ExperimentConfig,
};
use sthoi_core::geometry::PERSON;
use sthoi_core::model::{Model, Variant};
use sthoi_core::par::Exec;
use sthoi_core::verify::{run_all, MissingHalfPixel, PoolingImpl, Production};

#[derive(Parser)]
#[command(
    name = "sthoi",
    version,
    about = "Video human-object interaction detection toolkit"
)]
struct Cli {
    /// Run every data-parallel step on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
    /// Log progress to stderr (-vv for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a synthetic dataset with time-reversal twins.
    Synth {
        /// SyntheticSpec JSON; defaults apply to missing fields.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the seed in the spec.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Turn clip-level annotations into keyframe labels.
    Convert {
        #[arg(long)]
        ann: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = ConvertMode::Train)]
        mode: ConvertMode,
        /// Taxonomy JSON; without it predicates and categories are read
        /// off the annotations and no predicate is marked temporal.
        #[arg(long)]
        taxonomy: Option<PathBuf>,
    },
    /// Train one variant and write a checkpoint.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        variant: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// ExperimentConfig JSON.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value = "train")]
        split: String,
    },
    /// Score a checkpoint on a split.
    Eval {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long, value_enum)]
        mode: ModeArg,
        /// Detected trajectories (required in detection mode).
        #[arg(long)]
        traj: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "val")]
        split: String,
    },
    /// Train and evaluate every variant over several seeds.
    Ablate {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
        seeds: Vec<u64>,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Subset of variants; all six by default.
        #[arg(long, value_delimiter = ',')]
        variants: Vec<String>,
        /// Exit 1 when an acceptance check fails.
        #[arg(long)]
        require_checks: bool,
    },
    /// Gradient, pooling, AP and synthetic-twin invariant suites.
    #[command(visible_alias = "gradcheck")]
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Swap in RoIAlign without the half-pixel offset.
        #[arg(long, hide = true)]
        inject_roi_fault: bool,
    },
    /// Print result tables from an ablation summary or an eval report.
    Report {
        input: PathBuf,
        /// Also write the tables as CSV here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum ConvertMode {
    Train,
    Eval,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Oracle,
    Detection,
}

enum Failure {
    /// Bad flags or unusable input files.
    Input(anyhow::Error),
    /// A verification suite or acceptance check failed.
    Verify(String),
    Runtime(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Runtime(e.into())
    }
}

trait InputExt<T> {
    fn input(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> InputExt<T> for Result<T, E> {
    fn input(self) -> Result<T, Failure> {
        self.map_err(|e| Failure::Input(e.into()))
    }
}

type Outcome = Result<(), Failure>;

/// Written next to every command's outputs. Runs with identical inputs
/// and seeds differ only in `wall_clock_seconds`.
#[derive(Serialize)]
struct RunManifest {
    command: String,
    config: serde_json::Value,
    seeds: Vec<u64>,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    tool_version: String,
    wall_clock_seconds: f64,
}

struct Run {
    command: &'static str,
    start: Instant,
    exec: Exec,
}

impl Run {
    fn finish(
        &self,
        path: &Path,
        config: serde_json::Value,
        seeds: Vec<u64>,
        inputs: Vec<PathBuf>,
        outputs: Vec<PathBuf>,
    ) -> anyhow::Result<()> {
        let m = RunManifest {
            command: self.command.into(),
            config,
            seeds,
            inputs,
            outputs,
            tool_version: env!("CARGO_PKG_VERSION").into(),
            wall_clock_seconds: self.start.elapsed().as_secs_f64(),
        };
        save_json(path, &m)?;
        Ok(())
    }
}

fn create_dir(dir: &Path) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))
}

fn write_text(path: &Path, body: &str) -> anyhow::Result<()> {
    std::fs::write(path, body).with_context(|| format!("cannot write {}", path.display()))
}

fn load_experiment(path: Option<&Path>) -> Result<ExperimentConfig, Failure> {
    let cfg: ExperimentConfig = match path {
        Some(p) => load_json(p).input()?,
        None => ExperimentConfig::default(),
    };
    // predicates come from the data, so check the template with a stand-in
    let mut probe = cfg.model.clone();
    probe.predicates = vec!["_".into()];
    probe.validate().input()?;
    cfg.train.validate().input()?;
    if let Some(a) = &cfg.augment {
        a.validate().input()?;
    }
    Ok(cfg)
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn cmd_synth(run: &Run, spec: Option<&Path>, out: &Path, seed: Option<u64>) -> Outcome {
    let mut s: SyntheticSpec = match spec {
        Some(p) => load_json(p).input()?,
        None => SyntheticSpec::default(),
    };
    if let Some(seed) = seed {
        s.seed = seed;
    }
    s.validate().input()?;
    let data = generate_synthetic(&s, run.exec)?;
    write_synthetic(out, &data)?;
    println!(
        "wrote {} train + {} val videos to {}",
        data.train.videos.len(),
        data.val.videos.len(),
        out.display()
    );
    run.finish(
        &out.join("manifest.json"),
        serde_json::to_value(&s)?,
        vec![s.seed],
        spec.map(Path::to_path_buf).into_iter().collect(),
        ["train.json", "val.json", "taxonomy.json", "frames"]
            .iter()
            .map(|f| out.join(f))
            .collect(),
    )?;
    Ok(())
}

/// Predicates and categories as they occur in `ann`.
fn inferred_taxonomy(ann: &AnnotationSet) -> Taxonomy {
    let preds: BTreeSet<&str> = ann
        .videos
        .iter()
        .flat_map(|v| v.relations.iter().map(|r| r.predicate_id.as_str()))
        .collect();
    let cats: BTreeSet<&str> = ann
        .videos
        .iter()
        .flat_map(|v| v.instances.iter().map(|i| i.category.as_str()))
        .filter(|c| *c != PERSON)
        .collect();
    Taxonomy {
        predicates: preds
            .into_iter()
            .map(|p| PredicateInfo {
                name: p.to_string(),
                temporal: false,
            })
            .collect(),
        categories: std::iter::once(PERSON)
            .chain(cats)
            .map(String::from)
            .collect(),
        triplets: vec![],
        note: Some("inferred from annotations; no temporal flags".into()),
    }
}

#[derive(Serialize)]
struct KeyframeRecord<'a> {
    video_id: &'a str,
    keyframe: usize,
    instance_ids: Vec<String>,
    /// (human, object) positions in `instance_ids`.
    pairs: Vec<[usize; 2]>,
    /// One multi-hot row per pair over the taxonomy predicates.
    labels: Vec<Vec<u8>>,
}

#[derive(Serialize)]
struct RarityRecord {
    predicate: String,
    category: String,
    count: usize,
    rare: bool,
}

fn cmd_convert(
    run: &Run,
    ann_path: &Path,
    out: &Path,
    mode: ConvertMode,
    taxonomy: Option<&Path>,
) -> Outcome {
    let ann = AnnotationSet::load(ann_path).input()?;
    let tax = match taxonomy {
        Some(p) => Taxonomy::load(p).input()?,
        None => inferred_taxonomy(&ann),
    };
    let tax = tax.with_counts_from(&ann).input()?;
    let filter = match mode {
        ConvertMode::Train => KeyframeFilter::ActiveRelation,
        ConvertMode::Eval => KeyframeFilter::CoPresent,
    };
    let predicates = tax.predicate_names();
    let keyframes = sample_keyframes(&ann, filter);
    let mut lines = String::new();
    for (vid, k) in &keyframes {
        let video = ann.video(vid).expect("sampled from this set");
        let kl = convert_labels(video, *k, &predicates).input()?;
        let rec = KeyframeRecord {
            video_id: vid,
            keyframe: *k,
            pairs: kl
                .pairs
                .iter()
                .map(|p| [p.human_index, p.object_index])
                .collect(),
            instance_ids: kl.instance_ids,
            labels: kl.labels,
        };
        lines += &serde_json::to_string(&rec)?;
        lines.push('\n');
    }
    let rarity = rarity_split(&ann, &tax).input()?;
    let counts: Vec<RarityRecord> = tax
        .triplets
        .iter()
        .map(|e| RarityRecord {
            predicate: e.predicate.clone(),
            category: e.category.clone(),
            count: e.count,
            rare: rarity.is_rare(&Triplet::new(e.predicate.clone(), e.category.clone())),
        })
        .collect();

    create_dir(out)?;
    let index: Vec<serde_json::Value> = keyframes
        .iter()
        .map(|(v, k)| json!({"video_id": v, "keyframe": k}))
        .collect();
    save_json(&out.join("keyframes.json"), &index)?;
    write_text(&out.join("labels.jsonl"), &lines)?;
    save_json(
        &out.join("rarity.json"),
        &json!({"threshold": RARE_THRESHOLD, "split": rarity, "triplets": counts}),
    )?;
    save_json(&out.join("taxonomy.json"), &tax)?;
    println!(
        "{} keyframes, {} triplets",
        keyframes.len(),
        tax.triplets.len()
    );
    run.finish(
        &out.join("manifest.json"),
        json!({"mode": mode, "filter": filter}),
        vec![],
        [Some(ann_path), taxonomy]
            .into_iter()
            .flatten()
            .map(Path::to_path_buf)
            .collect(),
        [
            "keyframes.json",
            "labels.jsonl",
            "rarity.json",
            "taxonomy.json",
        ]
        .iter()
        .map(|f| out.join(f))
        .collect(),
    )?;
    Ok(())
}

fn parse_variant(name: &str) -> Result<Variant, Failure> {
    name.parse::<Variant>().map_err(|e| {
        let known: Vec<&str> = Variant::ALL.iter().map(|v| v.name()).collect();
        Failure::Input(anyhow!("{e}; expected one of {}", known.join(", ")))
    })
}

#[allow(clippy::too_many_arguments)]
fn cmd_train(
    run: &Run,
    data: &Path,
    variant: &str,
    out: &Path,
    epochs: Option<usize>,
    seed: u64,
    config: Option<&Path>,
    split: &str,
) -> Outcome {
    let variant = parse_variant(variant)?;
    let mut cfg = load_experiment(config)?;
    if let Some(e) = epochs {
        cfg.train.epochs = e;
        cfg.train.decay_epochs.retain(|&d| d < e);
        cfg.train.validate().input()?;
    }
    let ds = Dataset::open(
        data,
        split,
        KeyframeFilter::ActiveRelation,
        cfg.model.window(),
    )
    .input()?;
    let (model, rep) = train_variant(&cfg, &ds, variant, seed, run.exec)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    model.save(out)?;
    let losses = with_suffix(out, ".losses.json");
    save_json(
        &losses,
        &json!({"epoch_losses": rep.epoch_losses, "steps": rep.steps}),
    )?;
    for (i, l) in rep.epoch_losses.iter().enumerate() {
        println!("epoch {:>3} loss {l:.6}", i + 1);
    }
    run.finish(
        &with_suffix(out, ".manifest.json"),
        json!({"variant": variant, "split": split, "experiment": cfg}),
        vec![seed],
        vec![data.to_path_buf()],
        vec![
            out.to_path_buf(),
            sthoi_core::model::config_path(out),
            losses,
        ],
    )?;
    Ok(())
}

/// Rarity from the taxonomy's training counts, falling back to counting
/// `<data>/train.json`.
fn dataset_rarity(data: &Path, ds: &Dataset) -> Result<RaritySplit, Failure> {
    if !ds.taxonomy.triplets.is_empty() {
        return Ok(RaritySplit::from_taxonomy(&ds.taxonomy));
    }
    let train = AnnotationSet::load(&data.join("train.json")).input()?;
    rarity_split(&train, &ds.taxonomy).input()
}

#[allow(clippy::too_many_arguments)]
fn cmd_eval(
    run: &Run,
    data: &Path,
    ckpt: &Path,
    mode: ModeArg,
    traj: Option<&Path>,
    out: &Path,
    split: &str,
) -> Outcome {
    let tracks = match (mode, traj) {
        (ModeArg::Detection, None) => {
            return Err(Failure::Input(anyhow!(
                "--mode detection requires --traj <file>"
            )));
        }
        (ModeArg::Oracle, Some(_)) => {
            return Err(Failure::Input(anyhow!(
                "--traj applies only to --mode detection"
            )));
        }
        (ModeArg::Detection, Some(p)) => Some(TrajectorySet::load(p).input()?),
        (ModeArg::Oracle, None) => None,
    };
    let model = Model::load(ckpt).input()?;
    let ds = Dataset::open(
        data,
        split,
        KeyframeFilter::CoPresent,
        model.config.window(),
    )
    .input()?;
    let rarity = dataset_rarity(data, &ds)?;
    let gts = gt_instances(&ds)?;
    let (dets, notes) = predict_dataset(&model, &ds, tracks.as_ref(), run.exec)?;
    let eval_mode = match mode {
        ModeArg::Oracle => EvalMode::Oracle,
        ModeArg::Detection => EvalMode::Detection,
    };
    let mut report = evaluate(&dets, &gts, &ds.keyframes, &ds.taxonomy, &rarity, eval_mode)?;
    report.notes.extend(notes);
    report.write(out)?;
    write_detections(&out.join("detections.jsonl"), &dets)?;
    print!("{}", render_report(&report));
    run.finish(
        &out.join("manifest.json"),
        json!({"mode": eval_mode, "split": split, "model": model.config}),
        vec![model.config.seed],
        [Some(data), Some(ckpt), traj]
            .into_iter()
            .flatten()
            .map(Path::to_path_buf)
            .collect(),
        [
            "report.json",
            "triplet_ap.csv",
            "predicate_ap.csv",
            "detections.jsonl",
        ]
        .iter()
        .map(|f| out.join(f))
        .collect(),
    )?;
    Ok(())
}

/// `summary.json` of an ablation run.
#[derive(Serialize, Deserialize)]
struct AblationSummary {
    rows: Vec<AblationRow>,
    checks: Vec<Check>,
}

fn cmd_ablate(
    run: &Run,
    data: &Path,
    out: &Path,
    seeds: &[u64],
    config: Option<&Path>,
    variants: &[String],
    require_checks: bool,
) -> Outcome {
    let cfg = load_experiment(config)?;
    let variants: Vec<Variant> = if variants.is_empty() {
        Variant::ALL.to_vec()
    } else {
        variants
            .iter()
            .map(|v| parse_variant(v))
            .collect::<Result<_, _>>()?
    };
    if seeds.is_empty() {
        return Err(Failure::Input(anyhow!(
            "--seeds must list at least one seed"
        )));
    }
    let window = cfg.model.window();
    let train = Dataset::open(data, "train", KeyframeFilter::ActiveRelation, window).input()?;
    let val = Dataset::open(data, "val", KeyframeFilter::CoPresent, window).input()?;
    let rarity = dataset_rarity(data, &val)?;
    let runs = run_grid(&cfg, &train, &val, &rarity, &variants, seeds, run.exec)?;

    let mut outputs = Vec::new();
    for r in &runs {
        let dir = out
            .join("runs")
            .join(format!("{}_seed{}", r.variant, r.seed));
        r.report.write(&dir)?;
        save_json(
            &dir.join("losses.json"),
            &json!({"epoch_losses": r.epoch_losses}),
        )?;
        outputs.push(dir);
    }
    let rows = summarize(&runs);
    let checks = vec![temporal_discrimination_check(&rows), ordering_check(&rows)];
    create_dir(out)?;
    write_text(&out.join("map_table.csv"), &map_table_csv(&rows))?;
    write_text(&out.join("temporal_table.csv"), &temporal_table_csv(&rows))?;
    save_json(&out.join("checks.json"), &checks)?;
    save_json(
        &out.join("summary.json"),
        &AblationSummary {
            rows: rows.clone(),
            checks: checks.clone(),
        },
    )?;
    for f in ["map_table.csv", "temporal_table.csv", "checks.json", "summary.json"] {
        outputs.push(out.join(f));
    }
    print!("{}", render_ablation(&rows));
    for c in &checks {
        println!(
            "{} {}: {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        );
    }
    run.finish(
        &out.join("manifest.json"),
        json!({"variants": variants, "experiment": cfg}),
        seeds.to_vec(),
        vec![data.to_path_buf()],
        outputs,
    )?;
    if require_checks && checks.iter().any(|c| !c.passed) {
        return Err(Failure::Verify("ablation checks failed".into()));
    }
    Ok(())
}

fn cmd_verify(run: &Run, seed: u64, out: Option<&Path>, fault: bool) -> Outcome {
    let imp: &dyn PoolingImpl = if fault {
        &MissingHalfPixel
    } else {
        &Production
    };
    let suites = run_all(imp, seed)?;
    for s in &suites {
        println!(
            "{} {:<12} {}/{} cases, worst {:.3e}, bound {:.3e}",
            if s.passed() { "PASS" } else { "FAIL" },
            s.name,
            s.cases - s.failures,
            s.cases,
            s.worst,
            s.bound
        );
        for m in &s.messages {
            println!("    {m}");
        }
    }
    if let Some(dir) = out {
        create_dir(dir)?;
        save_json(&dir.join("verify.json"), &suites)?;
        run.finish(
            &dir.join("manifest.json"),
            json!({"inject_roi_fault": fault}),
            vec![seed],
            vec![],
            vec![dir.join("verify.json")],
        )?;
    }
    let failed: Vec<&str> = suites
        .iter()
        .filter(|s| !s.passed())
        .map(|s| s.name.as_str())
        .collect();
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Verify(format!(
            "failed suites: {}",
            failed.join(", ")
        )))
    }
}

fn pct(x: Option<f64>) -> String {
    x.map(|v| format!("{:.2}", 100.0 * v))
        .unwrap_or_else(|| "-".into())
}

fn render_report(r: &EvalReport) -> String {
    let mut s = format!(
        "mode {:?}: {} keyframes, {} detections, {} gt\n",
        r.mode, r.num_keyframes, r.num_detections, r.num_gt
    );
    s += &format!(
        "mAP full {} rare {} nonrare {} temporal {} spatial {}\n",
        pct(r.map_full),
        pct(r.map_rare),
        pct(r.map_nonrare),
        pct(r.map_temporal),
        pct(r.map_spatial)
    );
    for p in &r.predicates {
        s += &format!(
            "  {:<16} {:>7}  (n_gt {})\n",
            p.predicate,
            pct(Some(p.ap)),
            p.n_gt
        );
    }
    s
}

fn render_ablation(rows: &[AblationRow]) -> String {
    let mut s = format!(
        "{:<12}{:>8}{:>9}{:>8}{:>10}{:>9}{:>9}{:>9}\n",
        "variant", "full", "nonrare", "rare", "temporal", "spatial", "towards", "away"
    );
    for r in rows {
        s += &format!(
            "{:<12}{:>8}{:>9}{:>8}{:>10}{:>9}{:>9}{:>9}\n",
            r.variant.name(),
            pct(r.full),
            pct(r.nonrare),
            pct(r.rare),
            pct(r.temporal),
            pct(r.spatial),
            pct(r.towards),
            pct(r.away)
        );
    }
    s
}

fn cmd_report(run: &Run, input: &Path, out: Option<&Path>) -> Outcome {
    let bytes = std::fs::read(input)
        .with_context(|| format!("cannot read {}", input.display()))
        .input()?;
    let mut tables: Vec<(&str, String)> = Vec::new();
    if let Ok(summary) = serde_json::from_slice::<AblationSummary>(&bytes) {
        print!("{}", render_ablation(&summary.rows));
        for c in &summary.checks {
            println!(
                "{} {}: {}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.detail
            );
        }
        tables.push(("map_table.csv", map_table_csv(&summary.rows)));
        tables.push(("temporal_table.csv", temporal_table_csv(&summary.rows)));
    } else {
        let report: EvalReport =
            sthoi_core::data::parse_json(&bytes, &input.display().to_string()).input()?;
        print!("{}", render_report(&report));
        tables.push(("triplet_ap.csv", report.triplets_csv()));
        tables.push(("predicate_ap.csv", report.predicates_csv()));
    }
    if let Some(dir) = out {
        create_dir(dir)?;
        let mut outputs = Vec::new();
        for (name, body) in &tables {
            write_text(&dir.join(name), body)?;
            outputs.push(dir.join(name));
        }
        run.finish(
            &dir.join("manifest.json"),
            json!({}),
            vec![],
            vec![input.to_path_buf()],
            outputs,
        )?;
    }
    Ok(())
}

fn dispatch(cli: Cli) -> Outcome {
    let name = match &cli.command {
        Command::Synth { .. } => "synth",
        Command::Convert { .. } => "convert",
        Command::Train { .. } => "train",
        Command::Eval { .. } => "eval",
        Command::Ablate { .. } => "ablate",
        Command::Verify { .. } => "verify",
        Command::Report { .. } => "report",
    };
    let run = Run {
        command: name,
        start: Instant::now(),
        exec: if cli.sequential {
            Exec::Sequential
        } else {
            Exec::Parallel
        },
    };
    match &cli.command {
        Command::Synth { spec, out, seed } => cmd_synth(&run, spec.as_deref(), out, *seed),
        Command::Convert {
            ann,
            out,
            mode,
            taxonomy,
        } => cmd_convert(&run, ann, out, *mode, taxonomy.as_deref()),
        Command::Train {
            data,
            variant,
            out,
            epochs,
            seed,
            config,
            split,
        } => cmd_train(
            &run,
            data,
            variant,
            out,
            *epochs,
            *seed,
            config.as_deref(),
            split,
        ),
        Command::Eval {
            data,
            ckpt,
            mode,
            traj,
            out,
            split,
        } => cmd_eval(&run, data, ckpt, *mode, traj.as_deref(), out, split),
        Command::Ablate {
            data,
            out,
            seeds,
            config,
            variants,
            require_checks,
        } => cmd_ablate(
            &run,
            data,
            out,
            seeds,
            config.as_deref(),
            variants,
            *require_checks,
        ),
        Command::Verify {
            seed,
            out,
            inject_roi_fault,
        } => cmd_verify(&run, *seed, out.as_deref(), *inject_roi_fault),
        Command::Report { input, out } => cmd_report(&run, input, out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).init();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Verify(msg)) => {
            eprintln!("verification failed: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
