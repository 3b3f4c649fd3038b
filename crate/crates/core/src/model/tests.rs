use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::data::synthetic::synthetic_pose;
use crate::data::{
    generate_synthetic, Dataset, KeyframeFilter, SampleSet, SyntheticSpec, WindowConfig,
};
use crate::features::{PoseConfig, RoiConfig};
use crate::geometry::{pair_proposals, PERSON};
use crate::nn::TrainConfig;
use crate::par::Exec;

const PREDS: [&str; 5] = ["towards", "away", "next_to", "hold", "lift"];

fn preds() -> Vec<String> {
    PREDS.iter().map(|s| s.to_string()).collect()
}

fn tiny(variant: Variant) -> ModelConfig {
    ModelConfig {
        variant,
        predicates: preds(),
        segment_len: 4,
        backbone_channels: vec![4, 4],
        backbone_strides: vec![[1, 2, 2], [1, 1, 1]],
        roi: RoiConfig {
            out_h: 3,
            out_w: 3,
            samples_per_bin: 2,
        },
        hidden: 16,
        pose: PoseConfig {
            mask_size: 8,
            channels: [2, 3],
        },
        seed: 5,
        ..Default::default()
    }
}

/// `people` persons followed by objects, all moving right by `speed` px per
/// frame over a `t × size × size` window of random pixels.
fn toy_sample(
    people: usize,
    total: usize,
    t: usize,
    size: usize,
    speed: f64,
    seed: u64,
) -> KeyframeSample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let frames = Tensor::from_fn(&[3, t, size, size], |_| rng.random::<f64>());
    let s = size as f64;
    let mut trajectories = Vec::new();
    let mut poses = Vec::new();
    for i in 0..total {
        let x0 = rng.random_range(0.0..s / 2.0);
        let y0 = rng.random_range(0.0..s / 2.0);
        let (w, h) = (
            rng.random_range(2.0..s / 3.0),
            rng.random_range(2.0..s / 3.0),
        );
        let boxes: Vec<BBox> = (0..t)
            .map(|f| {
                let dx = speed * f as f64;
                BBox::new(x0 + dx, y0, x0 + dx + w, y0 + h)
                    .unwrap()
                    .clip(s, s)
            })
            .collect();
        let person = i < people;
        let cat = if person {
            PERSON.to_string()
        } else {
            format!("obj{i}")
        };
        poses.push(
            boxes
                .iter()
                .map(|b| person.then(|| synthetic_pose(b, i % 2 == 0)))
                .collect(),
        );
        trajectories.push(Trajectory::from_boxes(format!("i{i}"), cat, boxes));
    }
    let pairs = pair_proposals(&trajectories);
    let gt = pairs
        .iter()
        .map(|_| (0..PREDS.len()).map(|_| rng.random_range(0..2u8)).collect())
        .collect();
    KeyframeSample {
        video_id: format!("toy{seed}"),
        keyframe: 10,
        frame_w: size,
        frame_h: size,
        frames,
        trajectories,
        poses,
        pairs,
        gt,
    }
}

#[test]
fn default_backbone_shape() {
    let model = Model::new(ModelConfig::new(Variant::TVP, preds())).unwrap();
    let s = toy_sample(1, 2, 8, 64, 1.0, 0);
    let map = model.feature_map(&s).unwrap();
    assert_eq!(map.tensor.shape(), &[64, 8, 16, 16]);
    assert_eq!(map.spatial_scale, 0.25);
}

#[test]
fn zero_input_gives_zero_map() {
    let model = Model::new(tiny(Variant::T)).unwrap();
    let mut s = toy_sample(1, 2, 4, 16, 0.0, 0);
    s.frames.fill(0.0);
    let map = model.feature_map(&s).unwrap();
    assert!(map.tensor.data().iter().all(|&v| v == 0.0));
}

#[test]
fn one_row_per_pair() {
    for v in Variant::ALL {
        let model = Model::new(tiny(v)).unwrap();
        assert_eq!(
            model
                .forward(&toy_sample(1, 2, 4, 16, 1.0, 1))
                .unwrap()
                .len(),
            1
        );
        let out = model.forward(&toy_sample(2, 3, 4, 16, 1.0, 2)).unwrap();
        assert_eq!(out.len(), 4);
        assert!(out
            .iter()
            .all(|p| p.scores.len() == 5 && p.scores.iter().all(|&x| x > 0.0 && x < 1.0)));
        assert!(model
            .forward(&toy_sample(0, 3, 4, 16, 1.0, 3))
            .unwrap()
            .is_empty());
    }
}

#[test]
fn softmax_scores_sum_to_one() {
    let mut c = tiny(Variant::TV);
    c.score = ScoreMode::Softmax;
    let model = Model::new(c).unwrap();
    for p in model.forward(&toy_sample(2, 3, 4, 16, 1.0, 2)).unwrap() {
        assert!((p.scores.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn topk_truncation_and_order() {
    let model = Model::new(tiny(Variant::TVP)).unwrap();
    let d = model
        .predict_keyframe(&toy_sample(1, 2, 4, 16, 1.0, 4), 100)
        .unwrap();
    assert_eq!(d.len(), 5);
    let s = toy_sample(5, 7, 4, 16, 1.0, 5);
    assert_eq!(s.pairs.len(), 30);
    let d = model.predict_keyframe(&s, 100).unwrap();
    assert_eq!(d.len(), 100);
    assert!(d.windows(2).all(|w| w[0].score >= w[1].score));
    let c = s.center();
    for x in &d {
        assert_eq!(x.keyframe, s.keyframe);
        let t = s
            .trajectories
            .iter()
            .find(|t| t.boxes[c] == x.object_box)
            .unwrap();
        assert_eq!(t.category, x.object_category);
    }
}

#[test]
fn toi_and_naive_agree_on_static_sample() {
    let s = toy_sample(2, 3, 4, 16, 0.0, 6);
    let a = Model::new(tiny(Variant::T)).unwrap();
    let b = Model::new(tiny(Variant::TV)).unwrap();
    assert_eq!(
        checkpoint::checkpoint_bytes(&a.params),
        checkpoint::checkpoint_bytes(&b.params)
    );
    let (la, lb) = (
        a.logits_tensor(&s).unwrap().unwrap(),
        b.logits_tensor(&s).unwrap().unwrap(),
    );
    for (x, y) in la.data().iter().zip(lb.data()) {
        assert!((x - y).abs() < 1e-9, "{x} vs {y}");
    }
    // moving boxes separate the two pooling orders
    let s = toy_sample(2, 3, 4, 16, 2.0, 6);
    let (la, lb) = (
        a.logits_tensor(&s).unwrap().unwrap(),
        b.logits_tensor(&s).unwrap().unwrap(),
    );
    assert!(la
        .data()
        .iter()
        .zip(lb.data())
        .any(|(x, y)| (x - y).abs() > 1e-9));
}

#[test]
fn pair_scores_follow_trajectory_permutation() {
    let model = Model::new(tiny(Variant::TVP)).unwrap();
    let s = toy_sample(2, 4, 4, 16, 1.0, 7);
    let mut p = s.clone();
    let order = [1usize, 0, 3, 2];
    p.trajectories = order.iter().map(|&i| s.trajectories[i].clone()).collect();
    p.poses = order.iter().map(|&i| s.poses[i].clone()).collect();
    p.pairs = pair_proposals(&p.trajectories);
    let key = |s: &KeyframeSample, ps: &PairScores| {
        (
            s.trajectories[ps.pair.human_index].instance_id.clone(),
            s.trajectories[ps.pair.object_index].instance_id.clone(),
        )
    };
    let mut a: Vec<_> = model
        .forward(&s)
        .unwrap()
        .iter()
        .map(|x| (key(&s, x), x.scores.clone()))
        .collect();
    let mut b: Vec<_> = model
        .forward(&p)
        .unwrap()
        .iter()
        .map(|x| (key(&p, x), x.scores.clone()))
        .collect();
    a.sort_by(|x, y| x.0.cmp(&y.0));
    b.sort_by(|x, y| x.0.cmp(&y.0));
    assert_eq!(a.len(), b.len());
    for ((ka, sa), (kb, sb)) in a.iter().zip(&b) {
        assert_eq!(ka, kb);
        for (x, y) in sa.iter().zip(sb) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}

#[test]
fn baseline_reads_only_the_centre_frame() {
    let model = Model::new(tiny(Variant::Baseline2d)).unwrap();
    let s = toy_sample(1, 3, 4, 16, 1.0, 8);
    let mut noisy = s.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let (tn, plane) = (4, 16 * 16);
    let c = s.center();
    for ch in 0..3 {
        for t in (0..tn).filter(|&t| t != c) {
            let off = (ch * tn + t) * plane;
            for v in &mut noisy.frames.data_mut()[off..off + plane] {
                *v = rng.random();
            }
        }
    }
    assert_ne!(noisy.frames, s.frames);
    assert_eq!(
        model.logits_tensor(&s).unwrap(),
        model.logits_tensor(&noisy).unwrap()
    );
}

#[test]
fn trajectory_variant_sees_time_reversal() {
    let model = Model::new(tiny(Variant::T)).unwrap();
    let s = toy_sample(1, 2, 4, 16, 1.5, 9);
    let r = s.time_reversed();
    assert_ne!(
        model.logits_tensor(&s).unwrap(),
        model.logits_tensor(&r).unwrap()
    );
}

#[test]
fn rejects_wrong_segment_length() {
    let model = Model::new(tiny(Variant::T)).unwrap();
    assert!(model.forward(&toy_sample(1, 2, 6, 16, 1.0, 0)).is_err());
}

fn synth_samples(n: usize) -> Vec<KeyframeSample> {
    let spec = SyntheticSpec {
        num_train: 6,
        num_val: 1,
        width: 16,
        height: 16,
        ..Default::default()
    };
    let data = generate_synthetic(&spec, Exec::Sequential).unwrap();
    let ds = Dataset::new(
        data.train,
        data.taxonomy,
        data.frames,
        KeyframeFilter::ActiveRelation,
        WindowConfig {
            segment_len: 4,
            frame_stride: 1,
        },
    )
    .unwrap();
    (0..n).map(|i| ds.get(i).unwrap().into_owned()).collect()
}

fn quick_train(epochs: usize, lr: f64) -> TrainConfig {
    TrainConfig {
        base_lr: lr,
        epochs,
        decay_epochs: vec![],
        batch_size: 2,
        seed: 1,
        ..Default::default()
    }
}

#[test]
fn memorizes_four_samples() {
    let data = synth_samples(4);
    let mut model = Model::new(tiny(Variant::TVP)).unwrap();
    let report = train(
        &mut model,
        &data,
        &quick_train(60, 0.05),
        &TrainOptions::default(),
    )
    .unwrap();
    let first = report.epoch_losses[0];
    let last = *report.epoch_losses.last().unwrap();
    assert!(last < first * 0.5, "{first} -> {last}");
    for s in &data {
        for (ps, y) in model.forward(s).unwrap().iter().zip(&s.gt) {
            for (p, &t) in ps.scores.iter().zip(y) {
                assert_eq!(*p > 0.5, t == 1, "{:?} vs {y:?}", ps.scores);
            }
        }
    }
}

#[test]
fn training_is_deterministic_across_executors() {
    let data = synth_samples(3);
    let run = |exec| {
        let mut model = Model::new(tiny(Variant::TVP)).unwrap();
        let opts = TrainOptions {
            augment: Some(crate::data::AugmentConfig {
                short_side: [16, 20],
                crop: [16, 16],
                flip_prob: 0.5,
            }),
            exec,
        };
        train(&mut model, &data, &quick_train(2, 0.01), &opts).unwrap();
        checkpoint::checkpoint_bytes(&model.params)
    };
    let a = run(Exec::Sequential);
    assert_eq!(a, run(Exec::Sequential));
    assert_eq!(a, run(Exec::Parallel));
}

#[test]
fn save_load_roundtrip() {
    let model = Model::new(tiny(Variant::TP)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    model.save(&path).unwrap();
    assert!(config_path(&path).exists());
    let back = Model::load(&path).unwrap();
    assert_eq!(back.config, model.config);
    let s = toy_sample(1, 3, 4, 16, 1.0, 11);
    assert_eq!(
        back.logits_tensor(&s).unwrap(),
        model.logits_tensor(&s).unwrap()
    );
}

#[test]
fn load_rejects_mismatched_checkpoint() {
    let a = Model::new(tiny(Variant::TP)).unwrap();
    let b = Model::new(tiny(Variant::T)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.ckpt");
    a.save(&path).unwrap();
    b.save(&dir.path().join("other.ckpt")).unwrap();
    std::fs::copy(
        config_path(&dir.path().join("other.ckpt")),
        config_path(&path),
    )
    .unwrap();
    assert!(Model::load(&path).is_err());
}
