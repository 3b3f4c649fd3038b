//! Sequential vs Parallel execution of the data-parallel stages.

use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use sthoi_core::data::{generate_synthetic, Dataset, KeyframeFilter, SyntheticSpec};
use sthoi_core::eval::predict_dataset;
use sthoi_core::experiment::ExperimentConfig;
use sthoi_core::model::{train, Model, TrainOptions, Variant};
use sthoi_core::nn::TrainConfig;
use sthoi_core::par::Exec;

const MODES: [(&str, Exec); 2] = [("sequential", Exec::Sequential), ("parallel", Exec::Parallel)];

fn spec() -> SyntheticSpec {
    SyntheticSpec {
        num_train: 16,
        num_val: 8,
        width: 32,
        height: 32,
        ..Default::default()
    }
}

fn bench_exec(c: &mut Criterion) {
    let spec = spec();
    let cfg = ExperimentConfig::default();
    let data = generate_synthetic(&spec, Exec::Sequential).unwrap();
    let ds = Dataset::new(
        data.train.clone(),
        data.taxonomy.clone(),
        data.frames.clone(),
        KeyframeFilter::ActiveRelation,
        cfg.model.window(),
    )
    .unwrap();
    let mut model_cfg = cfg.model.clone();
    model_cfg.variant = Variant::TVP;
    model_cfg.predicates = ds.predicates();
    let model = Model::new(model_cfg).unwrap();
    let one_epoch = TrainConfig {
        epochs: 1,
        decay_epochs: vec![],
        ..cfg.train.clone()
    };

    let mut g = c.benchmark_group("exec");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_with_input(BenchmarkId::new("synthesize", name), &exec, |b, &e| {
            b.iter(|| generate_synthetic(black_box(&spec), e).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("predict", name), &exec, |b, &e| {
            b.iter(|| predict_dataset(black_box(&model), &ds, None, e).unwrap())
        });
        g.bench_with_input(BenchmarkId::new("train_epoch", name), &exec, |b, &e| {
            b.iter(|| {
                let mut m = model.clone();
                let opts = TrainOptions {
                    augment: None,
                    exec: e,
                };
                train(&mut m, &ds, &one_epoch, &opts).unwrap()
            })
        });
    }
    g.finish();
}

criterion_group!(benches, bench_exec);
criterion_main!(benches);
