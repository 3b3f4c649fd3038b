//! Spatial-temporal masking pose features: a rasterized skeleton plus
//! binary human/object masks per frame, encoded by two 3D convolutions.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BBox, Trajectory};
use crate::nn::{Graph, ParamId, ParamStore, Tensor, Var};

pub const NUM_KEYPOINTS: usize = 17;

/// COCO-17 keypoints in frame pixel coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub keypoints: Vec<[f64; 2]>,
    pub valid: Vec<bool>,
}

impl Pose {
    pub fn new(keypoints: Vec<[f64; 2]>, valid: Vec<bool>) -> Result<Self> {
        if keypoints.len() != NUM_KEYPOINTS || valid.len() != NUM_KEYPOINTS {
            return Err(Error::Annotation(format!(
                "pose needs {NUM_KEYPOINTS} keypoints and flags, got {} and {}",
                keypoints.len(),
                valid.len()
            )));
        }
        if keypoints.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Annotation("non-finite keypoint".into()));
        }
        Ok(Pose { keypoints, valid })
    }

    pub fn invisible() -> Self {
        Pose {
            keypoints: vec![[0.0, 0.0]; NUM_KEYPOINTS],
            valid: vec![false; NUM_KEYPOINTS],
        }
    }

    /// Apply `f` to every keypoint (valid or not).
    pub fn map_points(&self, f: impl Fn([f64; 2]) -> [f64; 2]) -> Pose {
        Pose {
            keypoints: self.keypoints.iter().map(|&p| f(p)).collect(),
            valid: self.valid.clone(),
        }
    }
}

/// Ordered skeleton edges; later edges overwrite earlier ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkeletonEdgeTable {
    edges: Vec<(usize, usize, f64)>,
}

const COCO_EDGES: [(usize, usize); 16] = [
    (0, 1),   // nose - left eye
    (0, 2),   // nose - right eye
    (1, 3),   // left eye - left ear
    (2, 4),   // right eye - right ear
    (5, 7),   // left shoulder - left elbow
    (7, 9),   // left elbow - left wrist
    (6, 8),   // right shoulder - right elbow
    (8, 10),  // right elbow - right wrist
    (11, 13), // left hip - left knee
    (13, 15), // left knee - left ankle
    (12, 14), // right hip - right knee
    (14, 16), // right knee - right ankle
    (5, 6),   // shoulders
    (11, 12), // hips
    (5, 11),  // left torso
    (6, 12),  // right torso
];

impl Default for SkeletonEdgeTable {
    fn default() -> Self {
        Self::coco16()
    }
}

impl SkeletonEdgeTable {
    pub fn new(edges: Vec<(usize, usize, f64)>) -> Result<Self> {
        for (i, &(a, b, x)) in edges.iter().enumerate() {
            if a >= NUM_KEYPOINTS || b >= NUM_KEYPOINTS {
                return Err(Error::Config {
                    field: format!("skeleton.edges[{i}]"),
                    reason: format!("joint index out of range: ({a}, {b})"),
                });
            }
            if !(x > 0.0 && x <= 1.0) {
                return Err(Error::Config {
                    field: format!("skeleton.edges[{i}]"),
                    reason: format!("value {x} not in (0, 1]"),
                });
            }
            if edges[..i].iter().any(|e| e.2 == x) {
                return Err(Error::Config {
                    field: format!("skeleton.edges[{i}]"),
                    reason: format!("value {x} is not distinct"),
                });
            }
        }
        Ok(SkeletonEdgeTable { edges })
    }

    /// 16-edge COCO skeleton with values `(i + 1) / 16`.
    pub fn coco16() -> Self {
        let n = COCO_EDGES.len() as f64;
        SkeletonEdgeTable {
            edges: COCO_EDGES
                .iter()
                .enumerate()
                .map(|(i, &(a, b))| (a, b, (i + 1) as f64 / n))
                .collect(),
        }
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }
}

/// Pixels of a 1-pixel-wide 8-connected segment between two grid points
/// (Bresenham), endpoints included.
pub fn line_pixels(a: (i64, i64), b: (i64, i64)) -> Vec<(i64, i64)> {
    let (mut x, mut y) = a;
    let dx = (b.0 - a.0).abs();
    let dy = -(b.1 - a.1).abs();
    let sx = if a.0 < b.0 { 1 } else { -1 };
    let sy = if a.1 < b.1 { 1 } else { -1 };
    let mut err = dx + dy;
    let mut out = Vec::with_capacity((dx.max(-dy) + 1) as usize);
    loop {
        out.push((x, y));
        if (x, y) == b {
            return out;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}

fn to_pixel(p: [f64; 2], w: usize, h: usize) -> (i64, i64) {
    let x = p[0].floor().clamp(0.0, (w - 1) as f64) as i64;
    let y = p[1].floor().clamp(0.0, (h - 1) as f64) as i64;
    (x, y)
}

/// Zero mask with each edge whose endpoints are both valid drawn at its
/// value, in table order. Keypoints are clamped into the frame.
pub fn rasterize_skeleton(
    pose: Option<&Pose>,
    h: usize,
    w: usize,
    table: &SkeletonEdgeTable,
) -> Tensor {
    let mut mask = Tensor::zeros(&[1, h, w]);
    let Some(pose) = pose else { return mask };
    let data = mask.data_mut();
    for &(a, b, value) in table.edges() {
        if !(pose.valid[a] && pose.valid[b]) {
            continue;
        }
        let pa = to_pixel(pose.keypoints[a], w, h);
        let pb = to_pixel(pose.keypoints[b], w, h);
        for (x, y) in line_pixels(pa, pb) {
            data[y as usize * w + x as usize] = value;
        }
    }
    mask
}

/// Two channels: ones where the pixel centre lies in the human box, and
/// likewise for the object box.
pub fn pair_spatial_masks(hbox: &BBox, obox: &BBox, h: usize, w: usize) -> Tensor {
    let mut out = Tensor::zeros(&[2, h, w]);
    let data = out.data_mut();
    for (c, b) in [hbox, obox].into_iter().enumerate() {
        for y in 0..h {
            let cy = y as f64 + 0.5;
            if cy < b.y1 || cy >= b.y2 {
                continue;
            }
            for x in 0..w {
                let cx = x as f64 + 0.5;
                if cx >= b.x1 && cx < b.x2 {
                    data[(c * h + y) * w + x] = 1.0;
                }
            }
        }
    }
    out
}

/// Bilinear resize of a `C × H × W` tensor (half-pixel centres, edge
/// clamped).
pub fn resize_bilinear(input: &Tensor, out_h: usize, out_w: usize) -> Tensor {
    let (c, h, w) = (input.shape()[0], input.shape()[1], input.shape()[2]);
    if (h, w) == (out_h, out_w) {
        return input.clone();
    }
    let sy = h as f64 / out_h as f64;
    let sx = w as f64 / out_w as f64;
    let axis = |o: usize, scale: f64, n: usize| {
        let s = ((o as f64 + 0.5) * scale - 0.5).clamp(0.0, (n - 1) as f64);
        let i0 = s.floor() as usize;
        let i1 = (i0 + 1).min(n - 1);
        (i0, i1, s - i0 as f64)
    };
    let rows: Vec<_> = (0..out_h).map(|o| axis(o, sy, h)).collect();
    let cols: Vec<_> = (0..out_w).map(|o| axis(o, sx, w)).collect();
    let mut out = Vec::with_capacity(c * out_h * out_w);
    for ch in 0..c {
        let plane = &input.data()[ch * h * w..(ch + 1) * h * w];
        for &(y0, y1, fy) in &rows {
            for &(x0, x1, fx) in &cols {
                let top = plane[y0 * w + x0] * (1.0 - fx) + plane[y0 * w + x1] * fx;
                let bot = plane[y1 * w + x0] * (1.0 - fx) + plane[y1 * w + x1] * fx;
                out.push(top * (1.0 - fy) + bot * fy);
            }
        }
    }
    Tensor::from_vec(&[c, out_h, out_w], out).expect("resize shape")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoseConfig {
    pub mask_size: usize,
    pub channels: [usize; 2],
}

impl Default for PoseConfig {
    fn default() -> Self {
        PoseConfig {
            mask_size: 64,
            channels: [16, 32],
        }
    }
}

impl PoseConfig {
    pub fn feature_len(&self) -> usize {
        self.channels[1]
    }
}

/// Per-pair input volume `3 × T × m × m`: channels are human mask, object
/// mask, skeleton; each frame is assembled at frame resolution and then
/// downsampled.
pub fn masking_pose_input(
    poses: &[Option<Pose>],
    human: &Trajectory,
    object: &Trajectory,
    frame_h: usize,
    frame_w: usize,
    table: &SkeletonEdgeTable,
    cfg: &PoseConfig,
) -> Result<Tensor> {
    let tn = human.len();
    if object.len() != tn || poses.len() != tn {
        return Err(Error::Length {
            op: "masking_pose_input",
            expected: tn,
            got: if object.len() != tn {
                object.len()
            } else {
                poses.len()
            },
        });
    }
    if !(human.is_filled() && object.is_filled()) {
        return Err(Error::Annotation(
            "pose masks need filled trajectories".into(),
        ));
    }
    let m = cfg.mask_size;
    let plane = m * m;
    let mut out = vec![0.0; 3 * tn * plane];
    for t in 0..tn {
        let masks = pair_spatial_masks(&human.boxes[t], &object.boxes[t], frame_h, frame_w);
        let skeleton = rasterize_skeleton(poses[t].as_ref(), frame_h, frame_w, table);
        let frame = crate::nn::kernels::concat(&[&masks, &skeleton], 0)?;
        let small = resize_bilinear(&frame, m, m);
        for c in 0..3 {
            out[(c * tn + t) * plane..(c * tn + t + 1) * plane]
                .copy_from_slice(&small.data()[c * plane..(c + 1) * plane]);
        }
    }
    Tensor::from_vec(&[3, tn, m, m], out)
}

/// Two conv3d+relu layers (3×3×3, stride 1, pad 1) and a global
/// spatial-temporal mean.
#[derive(Debug, Clone, Copy)]
pub struct PoseEncoder {
    conv1_w: ParamId,
    conv1_b: ParamId,
    conv2_w: ParamId,
    conv2_b: ParamId,
    out_channels: usize,
}

impl PoseEncoder {
    pub fn register(store: &mut ParamStore, cfg: &PoseConfig, rng: &mut impl Rng) -> Self {
        let [c1, c2] = cfg.channels;
        PoseEncoder {
            conv1_w: store.register_kaiming("pose.conv1.weight", &[c1, 3, 3, 3, 3], 3 * 27, rng),
            conv1_b: store.register("pose.conv1.bias", Tensor::zeros(&[c1])),
            conv2_w: store.register_kaiming("pose.conv2.weight", &[c2, c1, 3, 3, 3], c1 * 27, rng),
            conv2_b: store.register("pose.conv2.bias", Tensor::zeros(&[c2])),
            out_channels: c2,
        }
    }

    pub fn from_store(store: &ParamStore, cfg: &PoseConfig) -> Option<Self> {
        Some(PoseEncoder {
            conv1_w: store.id("pose.conv1.weight")?,
            conv1_b: store.id("pose.conv1.bias")?,
            conv2_w: store.id("pose.conv2.weight")?,
            conv2_b: store.id("pose.conv2.bias")?,
            out_channels: cfg.channels[1],
        })
    }

    /// `input` is `3 × T × m × m`; returns a `1 × C` row.
    pub fn forward(&self, g: &mut Graph, input: Var) -> Result<Var> {
        let w1 = g.param(self.conv1_w);
        let b1 = g.param(self.conv1_b);
        let x = g.conv3d(input, w1, b1, [1; 3], [1; 3])?;
        let x = g.relu(x)?;
        let w2 = g.param(self.conv2_w);
        let b2 = g.param(self.conv2_b);
        let x = g.conv3d(x, w2, b2, [1; 3], [1; 3])?;
        let x = g.relu(x)?;
        let x = g.mean_pool(x, &[1, 2, 3])?;
        g.reshape(x, &[1, self.out_channels])
    }
}

/// Standalone evaluation of the pose feature vector for one pair.
#[allow(clippy::too_many_arguments)]
pub fn masking_pose_feature(
    encoder: &PoseEncoder,
    store: &ParamStore,
    poses: &[Option<Pose>],
    human: &Trajectory,
    object: &Trajectory,
    frame_h: usize,
    frame_w: usize,
    table: &SkeletonEdgeTable,
    cfg: &PoseConfig,
) -> Result<Vec<f64>> {
    let input = masking_pose_input(poses, human, object, frame_h, frame_w, table, cfg)?;
    let mut g = Graph::with_params(store);
    let x = g.input(input)?;
    let out = encoder.forward(&mut g, x)?;
    Ok(g.value(out).data().to_vec())
}
