//! Backbone, per-pair feature fusion, classification head, training loop
//! and top-k inference.

mod config;
mod train;

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use config::{ModelConfig, ScoreMode, Variant};
pub use train::{train, TrainOptions, TrainReport};

use crate::data::{save_json, KeyframeSample};
use crate::error::{Error, Result};
use crate::eval::Detection;
use crate::features::{
    masking_pose_input, toi_align_var, FeatureMap, PoseEncoder, SkeletonEdgeTable,
};
use crate::geometry::{union_box, BBox, PairProposal, Trajectory};
use crate::nn::{checkpoint, ParamId, ParamStore, Tensor, Var};
use crate::nn::{Gradients, Graph};

/// Sigmoid (or softmax) scores of one pair over all predicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairScores {
    pub pair: PairProposal,
    pub scores: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
struct Layer {
    weight: ParamId,
    bias: ParamId,
}

#[derive(Debug, Clone)]
pub struct Model {
    pub config: ModelConfig,
    pub params: ParamStore,
    backbone: Vec<(Layer, [usize; 3])>,
    pose: Option<PoseEncoder>,
    fc1: Layer,
    fc2: Layer,
}

/// Per-frame boxes normalised by the frame size, subject then object:
/// `2 · T · 4` values in [0, 1].
pub fn trajectory_feature(
    human: &Trajectory,
    object: &Trajectory,
    frame_w: f64,
    frame_h: f64,
) -> Vec<f64> {
    let mut out = Vec::with_capacity(8 * human.len());
    for t in [human, object] {
        for b in &t.boxes {
            out.extend_from_slice(&[
                b.x1 / frame_w,
                b.y1 / frame_h,
                b.x2 / frame_w,
                b.y2 / frame_h,
            ]);
        }
    }
    out
}

/// Frame `t` of a `C × T × H × W` tensor as `C × 1 × H × W`.
fn select_frame(frames: &Tensor, t: usize) -> Result<Tensor> {
    let [c, tn, h, w] = [
        frames.shape()[0],
        frames.shape()[1],
        frames.shape()[2],
        frames.shape()[3],
    ];
    let plane = h * w;
    let mut out = Vec::with_capacity(c * plane);
    for ch in 0..c {
        let off = (ch * tn + t) * plane;
        out.extend_from_slice(&frames.data()[off..off + plane]);
    }
    Tensor::from_vec(&[c, 1, h, w], out)
}

fn union_trajectory(a: &Trajectory, b: &Trajectory) -> Vec<BBox> {
    a.boxes
        .iter()
        .zip(&b.boxes)
        .map(|(x, y)| union_box(x, y))
        .collect()
}

impl Model {
    /// Fresh model with seeded Kaiming-uniform weights and zero biases.
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        SkeletonEdgeTable::new(config.skeleton.edges().to_vec())?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut params = ParamStore::new();
        let mut backbone = Vec::new();
        let mut c_in = 3;
        for (i, (&c_out, &stride)) in config
            .backbone_channels
            .iter()
            .zip(&config.backbone_strides)
            .enumerate()
        {
            let weight = params.register_kaiming(
                format!("backbone.conv{}.weight", i + 1),
                &[c_out, c_in, 3, 3, 3],
                c_in * 27,
                &mut rng,
            );
            let bias = params.register(
                format!("backbone.conv{}.bias", i + 1),
                Tensor::zeros(&[c_out]),
            );
            backbone.push((Layer { weight, bias }, stride));
            c_in = c_out;
        }
        let pose = config
            .variant
            .uses_pose()
            .then(|| PoseEncoder::register(&mut params, &config.pose, &mut rng));
        let f = config.feature_len();
        let (h, c) = (config.hidden, config.num_predicates());
        let fc1 = Layer {
            weight: params.register_kaiming("head.fc1.weight", &[h, f], f, &mut rng),
            bias: params.register("head.fc1.bias", Tensor::zeros(&[h])),
        };
        let fc2 = Layer {
            weight: params.register_kaiming("head.fc2.weight", &[c, h], h, &mut rng),
            bias: params.register("head.fc2.bias", Tensor::zeros(&[c])),
        };
        Ok(Model {
            config,
            params,
            backbone,
            pose,
            fc1,
            fc2,
        })
    }

    pub fn variant(&self) -> Variant {
        self.config.variant
    }

    fn check_sample(&self, s: &KeyframeSample) -> Result<()> {
        if s.segment_len() != self.config.segment_len {
            return Err(Error::Length {
                op: "model input segment",
                expected: self.config.segment_len,
                got: s.segment_len(),
            });
        }
        if s.trajectories
            .iter()
            .any(|t| !t.is_filled() || t.len() != s.segment_len())
        {
            return Err(Error::Annotation(format!(
                "{}@{}: trajectories must be filled and span the window",
                s.video_id, s.keyframe
            )));
        }
        Ok(())
    }

    fn run_backbone(&self, g: &mut Graph, frames: Tensor) -> Result<Var> {
        let mut x = g.input(frames)?;
        for (layer, stride) in &self.backbone {
            let w = g.param(layer.weight);
            let b = g.param(layer.bias);
            x = g.conv3d(x, w, b, *stride, [1, 1, 1])?;
            x = g.relu(x)?;
        }
        Ok(x)
    }

    fn backbone_input(&self, s: &KeyframeSample) -> Result<Tensor> {
        if self.variant().temporal_input() {
            Ok(s.frames.clone())
        } else {
            select_frame(&s.frames, s.center())
        }
    }

    /// Backbone feature map of a sample (`d × T × H' × W'`, `T = 1` for
    /// the baseline).
    pub fn feature_map(&self, s: &KeyframeSample) -> Result<FeatureMap> {
        let mut g = Graph::with_params(&self.params);
        let v = self.run_backbone(&mut g, self.backbone_input(s)?)?;
        let t = g.value(v).clone();
        let scale = t.shape()[3] as f64 / s.frame_w as f64;
        FeatureMap::new(t, scale)
    }

    /// Record the forward pass; returns the `pairs × C` logits node, or
    /// `None` when the sample has no valid pair.
    pub fn logits(&self, g: &mut Graph, s: &KeyframeSample) -> Result<Option<Var>> {
        self.check_sample(s)?;
        if s.pairs.is_empty() {
            return Ok(None);
        }
        let cfg = &self.config;
        let map = self.run_backbone(g, self.backbone_input(s)?)?;
        let scale = g.value(map).shape()[3] as f64 / s.frame_w as f64;
        let c = s.center();
        let variant = self.variant();
        // the naive order averages over time once, then pools at keyframe boxes
        let naive_map = if variant.temporal_input() && !variant.uses_toi() {
            Some(g.mean_pool(map, &[1])?)
        } else {
            None
        };
        let visual_row = self.config.visual_len() / 3;
        let (fw, fh) = (s.frame_w as f64, s.frame_h as f64);
        let mut rows = Vec::with_capacity(s.pairs.len());
        for p in &s.pairs {
            let (h, o) = (
                &s.trajectories[p.human_index],
                &s.trajectories[p.object_index],
            );
            let union = union_trajectory(h, o);
            let mut parts = Vec::with_capacity(5);
            for boxes in [&h.boxes, &union, &o.boxes] {
                let pooled = match (variant.uses_toi(), naive_map) {
                    (true, _) => toi_align_var(g, map, scale, boxes, &cfg.roi)?,
                    (false, Some(m)) => toi_align_var(g, m, scale, &boxes[c..=c], &cfg.roi)?,
                    (false, None) => toi_align_var(g, map, scale, &boxes[c..=c], &cfg.roi)?,
                };
                parts.push(g.reshape(pooled, &[1, visual_row])?);
            }
            if variant.uses_trajectory() {
                let tf = trajectory_feature(h, o, fw, fh);
                let n = tf.len();
                parts.push(g.input(Tensor::from_vec(&[1, n], tf)?)?);
            }
            if let Some(enc) = &self.pose {
                let input = masking_pose_input(
                    &s.poses[p.human_index],
                    h,
                    o,
                    s.frame_h,
                    s.frame_w,
                    &cfg.skeleton,
                    &cfg.pose,
                )?;
                let x = g.input(input)?;
                parts.push(enc.forward(g, x)?);
            }
            rows.push(g.concat(&parts, 1)?);
        }
        let x = g.concat(&rows, 0)?;
        let width = g.value(x).shape()[1];
        if width != cfg.feature_len() {
            return Err(Error::shape(
                "fused features",
                format!("{width} columns, config implies {}", cfg.feature_len()),
            ));
        }
        let (w1, b1) = (g.param(self.fc1.weight), g.param(self.fc1.bias));
        let hdn = g.linear(x, w1, b1)?;
        let hdn = g.relu(hdn)?;
        let (w2, b2) = (g.param(self.fc2.weight), g.param(self.fc2.bias));
        Ok(Some(g.linear(hdn, w2, b2)?))
    }

    /// Raw logits as a plain tensor.
    pub fn logits_tensor(&self, s: &KeyframeSample) -> Result<Option<Tensor>> {
        let mut g = Graph::with_params(&self.params);
        Ok(self.logits(&mut g, s)?.map(|v| g.value(v).clone()))
    }

    /// Scores for every valid pair, in proposal order.
    pub fn forward(&self, s: &KeyframeSample) -> Result<Vec<PairScores>> {
        let Some(logits) = self.logits_tensor(s)? else {
            return Ok(vec![]);
        };
        let c = self.config.num_predicates();
        Ok(s.pairs
            .iter()
            .zip(logits.data().chunks_exact(c))
            .map(|(p, z)| PairScores {
                pair: *p,
                scores: score(z, self.config.score),
            })
            .collect())
    }

    /// Mean BCE of one sample and its parameter gradients; `None` when
    /// the sample has no valid pair.
    pub fn loss_and_grads(&self, s: &KeyframeSample) -> Result<Option<(f64, Gradients)>> {
        let c = self.config.num_predicates();
        if s.gt.len() != s.pairs.len() || s.gt.iter().any(|r| r.len() != c) {
            return Err(Error::Length {
                op: "training labels",
                expected: s.pairs.len() * c,
                got: s.gt.iter().map(Vec::len).sum(),
            });
        }
        let mut g = Graph::with_params(&self.params);
        let Some(logits) = self.logits(&mut g, s)? else {
            return Ok(None);
        };
        let targets = Tensor::from_vec(
            &[s.pairs.len(), c],
            s.gt.iter().flatten().map(|&y| y as f64).collect(),
        )?;
        let loss = g.bce_multilabel(logits, &targets)?;
        let value = g.value(loss).data()[0];
        Ok(Some((value, g.backward(loss)?)))
    }

    /// Expand pair scores into detections; sorted by score, ties by pair
    /// index then predicate index; truncated to `top_k`.
    pub fn predict_keyframe(&self, s: &KeyframeSample, top_k: usize) -> Result<Vec<Detection>> {
        let scores = self.forward(s)?;
        let c = s.center();
        let mut cand: Vec<(usize, usize, f64)> = scores
            .iter()
            .enumerate()
            .flat_map(|(i, ps)| ps.scores.iter().enumerate().map(move |(k, &v)| (i, k, v)))
            .collect();
        cand.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
        cand.truncate(top_k);
        Ok(cand
            .into_iter()
            .map(|(i, k, v)| {
                let p = scores[i].pair;
                let (h, o) = (
                    &s.trajectories[p.human_index],
                    &s.trajectories[p.object_index],
                );
                Detection {
                    video_id: s.video_id.clone(),
                    keyframe: s.keyframe,
                    human_box: h.boxes[c],
                    object_box: o.boxes[c],
                    object_category: o.category.clone(),
                    predicate: self.config.predicates[k].clone(),
                    score: v,
                }
            })
            .collect())
    }

    /// Write the checkpoint and its config (`<path>.config.json`).
    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = checkpoint::checkpoint_bytes(&self.params);
        std::fs::write(path, bytes).map_err(|e| Error::io(path, e))?;
        save_json(&config_path(path), &self.config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let config: ModelConfig = crate::data::load_json(&config_path(path))?;
        let mut model = Model::new(config)?;
        let mut f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let values = checkpoint::read_checkpoint(&mut std::io::BufReader::new(&mut f))?;
        model.params.load_values(values)?;
        Ok(model)
    }
}

/// Sidecar config path of a checkpoint.
pub fn config_path(ckpt: &Path) -> PathBuf {
    let mut s = ckpt.as_os_str().to_owned();
    s.push(".config.json");
    PathBuf::from(s)
}

fn score(logits: &[f64], mode: ScoreMode) -> Vec<f64> {
    match mode {
        // detection scores must stay strictly positive
        ScoreMode::Sigmoid => logits
            .iter()
            .map(|&z| crate::nn::sigmoid_scalar(z).max(f64::MIN_POSITIVE))
            .collect(),
        ScoreMode::Softmax => {
            let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = logits.iter().map(|&z| (z - m).exp()).collect();
            let s: f64 = e.iter().sum();
            e.iter().map(|v| (v / s).max(f64::MIN_POSITIVE)).collect()
        }
    }
}

#[cfg(test)]
mod tests;
