//! RoIAlign and the two temporal pooling orders built on it.
//!
//! Sampling geometry: a box in frame coordinates is scaled by the map's
//! `spatial_scale`, split into `out_h × out_w` bins, and each bin averages
//! `samples_per_bin²` bilinear samples placed at the centres of a regular
//! sub-grid. A continuous coordinate `c` addresses array index `c − 0.5`;
//! bilinear neighbours that fall outside the map contribute 0.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BBox, Trajectory};
use crate::nn::kernels::mean_pool;
use crate::nn::{CustomOp, Graph, Tensor, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoiConfig {
    pub out_h: usize,
    pub out_w: usize,
    pub samples_per_bin: usize,
}

impl Default for RoiConfig {
    fn default() -> Self {
        RoiConfig {
            out_h: 7,
            out_w: 7,
            samples_per_bin: 2,
        }
    }
}

impl RoiConfig {
    pub fn validate(&self) -> Result<()> {
        if self.out_h == 0 || self.out_w == 0 || self.samples_per_bin == 0 {
            return Err(Error::Config {
                field: "roi".into(),
                reason: format!("{self:?} must have positive sizes"),
            });
        }
        Ok(())
    }
}

/// Backbone output `d × T × H × W` with its resolution relative to frames.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub tensor: Tensor,
    pub spatial_scale: f64,
}

impl FeatureMap {
    pub fn new(tensor: Tensor, spatial_scale: f64) -> Result<Self> {
        if tensor.rank() != 4 {
            return Err(Error::shape(
                "FeatureMap",
                format!("{:?} is not d×T×H×W", tensor.shape()),
            ));
        }
        if !(spatial_scale > 0.0 && spatial_scale <= 1.0) {
            return Err(Error::Config {
                field: "spatial_scale".into(),
                reason: format!("{spatial_scale} not in (0, 1]"),
            });
        }
        Ok(FeatureMap {
            tensor,
            spatial_scale,
        })
    }

    pub fn channels(&self) -> usize {
        self.tensor.shape()[0]
    }

    pub fn frames(&self) -> usize {
        self.tensor.shape()[1]
    }

    /// Frame `t` as a `d × H × W` tensor.
    pub fn frame(&self, t: usize) -> Tensor {
        let [d, tn, h, w] = dims4(&self.tensor);
        let plane = h * w;
        let mut data = Vec::with_capacity(d * plane);
        for c in 0..d {
            let off = (c * tn + t) * plane;
            data.extend_from_slice(&self.tensor.data()[off..off + plane]);
        }
        Tensor::from_vec(&[d, h, w], data).expect("frame shape")
    }
}

fn dims4(t: &Tensor) -> [usize; 4] {
    let s = t.shape();
    [s[0], s[1], s[2], s[3]]
}

/// One bilinear contribution: output bin `bin` reads `weight × map[pixel]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tap {
    pub bin: usize,
    pub pixel: usize,
    pub weight: f64,
}

/// Sample positions (array coordinates `(y, x)`) for every bin, row-major
/// over bins then sub-samples.
pub fn sample_points(b: &BBox, spatial_scale: f64, cfg: &RoiConfig) -> Vec<(usize, f64, f64)> {
    let s = cfg.samples_per_bin;
    let x1 = b.x1 * spatial_scale;
    let y1 = b.y1 * spatial_scale;
    let bin_w = b.width() * spatial_scale / cfg.out_w as f64;
    let bin_h = b.height() * spatial_scale / cfg.out_h as f64;
    let mut pts = Vec::with_capacity(cfg.out_h * cfg.out_w * s * s);
    for oy in 0..cfg.out_h {
        for ox in 0..cfg.out_w {
            let bin = oy * cfg.out_w + ox;
            for sy in 0..s {
                let y = y1 + bin_h * (oy as f64 + (sy as f64 + 0.5) / s as f64);
                for sx in 0..s {
                    let x = x1 + bin_w * (ox as f64 + (sx as f64 + 0.5) / s as f64);
                    pts.push((bin, y - 0.5, x - 0.5));
                }
            }
        }
    }
    pts
}

/// Bilinear taps for one box on an `h × w` grid. Empty for zero-area boxes.
pub fn roi_taps(b: &BBox, spatial_scale: f64, h: usize, w: usize, cfg: &RoiConfig) -> Vec<Tap> {
    if b.area() <= 0.0 {
        warn!(
            "degenerate RoI {:?}: pooled feature is all zeros",
            b.to_array()
        );
        return Vec::new();
    }
    let norm = 1.0 / (cfg.samples_per_bin * cfg.samples_per_bin) as f64;
    let mut taps = Vec::new();
    for (bin, ay, ax) in sample_points(b, spatial_scale, cfg) {
        let y0 = ay.floor();
        let x0 = ax.floor();
        let fy = ay - y0;
        let fx = ax - x0;
        for (dy, wy) in [(0, 1.0 - fy), (1, fy)] {
            let yi = y0 as i64 + dy;
            if yi < 0 || yi >= h as i64 || wy == 0.0 {
                continue;
            }
            for (dx, wx) in [(0, 1.0 - fx), (1, fx)] {
                let xi = x0 as i64 + dx;
                if xi < 0 || xi >= w as i64 || wx == 0.0 {
                    continue;
                }
                taps.push(Tap {
                    bin,
                    pixel: yi as usize * w + xi as usize,
                    weight: wy * wx * norm,
                });
            }
        }
    }
    taps
}

fn apply_taps(plane_data: &[f64], taps: &[Tap], out: &mut [f64], scale: f64) {
    for tap in taps {
        out[tap.bin] += scale * tap.weight * plane_data[tap.pixel];
    }
}

/// RoIAlign over one timestep. `map` is `d × H × W`; returns `d × h × w`.
pub fn roi_align(map: &Tensor, spatial_scale: f64, b: &BBox, cfg: &RoiConfig) -> Result<Tensor> {
    cfg.validate()?;
    if map.rank() != 3 {
        return Err(Error::shape(
            "roi_align",
            format!("{:?} is not d×H×W", map.shape()),
        ));
    }
    let (d, h, w) = (map.shape()[0], map.shape()[1], map.shape()[2]);
    let taps = roi_taps(b, spatial_scale, h, w, cfg);
    let bins = cfg.out_h * cfg.out_w;
    let mut out = vec![0.0; d * bins];
    for c in 0..d {
        apply_taps(
            &map.data()[c * h * w..(c + 1) * h * w],
            &taps,
            &mut out[c * bins..(c + 1) * bins],
            1.0,
        );
    }
    Tensor::from_vec(&[d, cfg.out_h, cfg.out_w], out)
}

/// Per-frame RoIAlign along `boxes` (one per frame) followed by the
/// temporal mean, on a `d × T × H × W` tensor.
fn toi_align_raw(
    map: &Tensor,
    spatial_scale: f64,
    boxes: &[BBox],
    cfg: &RoiConfig,
) -> Result<(Tensor, Vec<Vec<Tap>>)> {
    cfg.validate()?;
    if map.rank() != 4 {
        return Err(Error::shape(
            "toi_pool",
            format!("{:?} is not d×T×H×W", map.shape()),
        ));
    }
    let [d, tn, h, w] = dims4(map);
    if boxes.len() != tn {
        return Err(Error::Length {
            op: "toi_pool",
            expected: tn,
            got: boxes.len(),
        });
    }
    let taps: Vec<Vec<Tap>> = boxes
        .iter()
        .map(|b| roi_taps(b, spatial_scale, h, w, cfg))
        .collect();
    let bins = cfg.out_h * cfg.out_w;
    let plane = h * w;
    let inv_t = 1.0 / tn as f64;
    let mut out = vec![0.0; d * bins];
    for c in 0..d {
        let dst = &mut out[c * bins..(c + 1) * bins];
        // per-frame RoIAlign first, then the mean over frames
        for (t, frame_taps) in taps.iter().enumerate() {
            let mut frame_out = vec![0.0; bins];
            let off = (c * tn + t) * plane;
            apply_taps(
                &map.data()[off..off + plane],
                frame_taps,
                &mut frame_out,
                1.0,
            );
            for (o, f) in dst.iter_mut().zip(&frame_out) {
                *o += inv_t * f;
            }
        }
    }
    Ok((Tensor::from_vec(&[d, cfg.out_h, cfg.out_w], out)?, taps))
}

/// Tube-of-interest pooling: `(1/T) Σ_t RoIAlign(v_t, j_t)`.
pub fn toi_pool(map: &FeatureMap, traj: &Trajectory, cfg: &RoiConfig) -> Result<Tensor> {
    if !traj.is_filled() {
        return Err(Error::Annotation(format!(
            "trajectory {} must be filled before pooling",
            traj.instance_id
        )));
    }
    Ok(toi_align_raw(&map.tensor, map.spatial_scale, &traj.boxes, cfg)?.0)
}

/// Temporal mean first, then RoIAlign at the keyframe box. Equivalent to
/// [`toi_pool`] only when the instance does not move.
pub fn naive_temporal_roi_pool(
    map: &FeatureMap,
    keyframe_box: &BBox,
    cfg: &RoiConfig,
) -> Result<Tensor> {
    let pooled = mean_pool(&map.tensor, &[1])?;
    let [d, _, h, w] = dims4(&pooled);
    let frame = pooled.reshape(&[d, h, w])?;
    roi_align(&frame, map.spatial_scale, keyframe_box, cfg)
}

struct ToiAlignOp {
    taps: Vec<Vec<Tap>>,
    input_shape: [usize; 4],
    bins: usize,
}

impl CustomOp for ToiAlignOp {
    fn name(&self) -> &'static str {
        "toi_align"
    }

    fn backward(&self, _inputs: &[&Tensor], grad_out: &Tensor) -> Result<Vec<Tensor>> {
        let [d, tn, h, w] = self.input_shape;
        let plane = h * w;
        let inv_t = 1.0 / tn as f64;
        let mut g = vec![0.0; d * tn * plane];
        for c in 0..d {
            let go = &grad_out.data()[c * self.bins..(c + 1) * self.bins];
            for (t, frame_taps) in self.taps.iter().enumerate() {
                let dst = &mut g[(c * tn + t) * plane..(c * tn + t + 1) * plane];
                for tap in frame_taps {
                    dst[tap.pixel] += inv_t * tap.weight * go[tap.bin];
                }
            }
        }
        Ok(vec![Tensor::from_vec(&self.input_shape, g)?])
    }
}

/// Differentiable tube pooling on a graph node of shape `d × T × H × W`.
/// With `T = 1` this is plain RoIAlign.
pub fn toi_align_var(
    g: &mut Graph,
    map: Var,
    spatial_scale: f64,
    boxes: &[BBox],
    cfg: &RoiConfig,
) -> Result<Var> {
    let (out, taps) = toi_align_raw(g.value(map), spatial_scale, boxes, cfg)?;
    let input_shape = dims4(g.value(map));
    g.custom(
        &[map],
        out,
        Box::new(ToiAlignOp {
            taps,
            input_shape,
            bins: cfg.out_h * cfg.out_w,
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::roi_align_bruteforce;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn bx(x1: f64, y1: f64, x2: f64, y2: f64) -> BBox {
        BBox::new(x1, y1, x2, y2).unwrap()
    }

    #[test]
    fn constant_map() {
        let map = Tensor::full(&[2, 6, 6], 3.0);
        // sample points stay within [0, 5] in array coordinates
        let out = roi_align(&map, 1.0, &bx(1.0, 1.5, 5.0, 4.5), &RoiConfig::default()).unwrap();
        assert_eq!(out.shape(), &[2, 7, 7]);
        for v in out.data() {
            assert_abs_diff_eq!(*v, 3.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn two_by_two_center_sample() {
        let map = Tensor::from_vec(&[1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let cfg = RoiConfig {
            out_h: 1,
            out_w: 1,
            samples_per_bin: 1,
        };
        let out = roi_align(&map, 1.0, &bx(0.0, 0.0, 2.0, 2.0), &cfg).unwrap();
        assert_abs_diff_eq!(out.data()[0], 2.5, epsilon = 1e-15);
        let oracle = roi_align_bruteforce(&map, 1.0, &bx(0.0, 0.0, 2.0, 2.0), &cfg);
        assert_abs_diff_eq!(oracle.data()[0], 2.5, epsilon = 1e-15);
    }

    #[test]
    fn tiling_box_is_identity_with_centre_samples() {
        let n = 5;
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let map = Tensor::from_fn(&[1, n, n], |_| rng.random_range(-1.0..1.0));
        let cfg = RoiConfig {
            out_h: n,
            out_w: n,
            samples_per_bin: 1,
        };
        let out = roi_align(&map, 1.0, &bx(0.0, 0.0, n as f64, n as f64), &cfg).unwrap();
        for (a, b) in out.data().iter().zip(map.data()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-6);
        }
    }

    #[test]
    fn tiling_box_with_dense_samples_is_a_box_filter() {
        // Dense sampling averages the bilinear surface over each pixel
        // cell: interior result is 3/4 centre + 1/8 each neighbour.
        let n = 5;
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let map = Tensor::from_fn(&[1, n, n], |_| rng.random_range(-1.0..1.0));
        let cfg = RoiConfig {
            out_h: n,
            out_w: n,
            samples_per_bin: 200,
        };
        let out = roi_align(&map, 1.0, &bx(0.0, 0.0, n as f64, n as f64), &cfg).unwrap();
        let at = |y: usize, x: usize| map.data()[y * n + x];
        let smooth_1d =
            |f: &dyn Fn(usize) -> f64, i: usize| 0.75 * f(i) + 0.125 * (f(i - 1) + f(i + 1));
        for y in 1..n - 1 {
            for x in 1..n - 1 {
                let expected = smooth_1d(&|yy| smooth_1d(&|xx| at(yy, xx), x), y);
                assert_abs_diff_eq!(out.data()[y * n + x], expected, epsilon = 1e-4);
            }
        }
    }

    #[test]
    fn degenerate_box_zero_output() {
        let map = Tensor::full(&[1, 4, 4], 1.0);
        let out = roi_align(&map, 1.0, &bx(2.0, 1.0, 2.0, 3.0), &RoiConfig::default()).unwrap();
        assert!(out.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn toi_pool_is_mean_of_frames() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let map = Tensor::from_fn(&[2, 2, 6, 6], |_| rng.random_range(-1.0..1.0));
        let fm = FeatureMap::new(map, 0.5).unwrap();
        let traj = Trajectory::from_boxes(
            "h",
            "person",
            vec![bx(1.0, 2.0, 7.0, 9.0), bx(3.0, 1.0, 11.0, 8.0)],
        );
        let cfg = RoiConfig::default();
        let a = roi_align_bruteforce(&fm.frame(0), 0.5, &traj.boxes[0], &cfg);
        let b = roi_align_bruteforce(&fm.frame(1), 0.5, &traj.boxes[1], &cfg);
        let out = toi_pool(&fm, &traj, &cfg).unwrap();
        for ((o, x), y) in out.data().iter().zip(a.data()).zip(b.data()) {
            assert_abs_diff_eq!(*o, (x + y) / 2.0, epsilon = 1e-12);
        }
        let short = Trajectory::from_boxes("h", "person", vec![bx(1.0, 2.0, 7.0, 9.0)]);
        assert!(matches!(
            toi_pool(&fm, &short, &cfg),
            Err(Error::Length { .. })
        ));
    }

    #[test]
    fn static_trajectory_orders_commute() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let fm = FeatureMap::new(
            Tensor::from_fn(&[3, 4, 8, 8], |_| rng.random_range(-1.0..1.0)),
            0.25,
        )
        .unwrap();
        let b = bx(4.0, 6.0, 20.0, 30.0);
        let traj = Trajectory::from_boxes("o", "cup", vec![b; 4]);
        let cfg = RoiConfig::default();
        let toi = toi_pool(&fm, &traj, &cfg).unwrap();
        let naive = naive_temporal_roi_pool(&fm, &b, &cfg).unwrap();
        for (x, y) in toi.data().iter().zip(naive.data()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn time_constant_map_naive_equals_single_frame() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let frame = Tensor::from_fn(&[2, 1, 6, 6], |_| rng.random_range(-1.0..1.0));
        let map = crate::nn::kernels::concat(&[&frame, &frame, &frame], 1).unwrap();
        let fm = FeatureMap::new(map, 1.0).unwrap();
        let b = bx(0.5, 1.0, 4.0, 5.5);
        let cfg = RoiConfig::default();
        let naive = naive_temporal_roi_pool(&fm, &b, &cfg).unwrap();
        let single = roi_align(&fm.frame(1), 1.0, &b, &cfg).unwrap();
        for (x, y) in naive.data().iter().zip(single.data()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn graph_op_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let map = Tensor::from_fn(&[2, 3, 5, 5], |_| rng.random_range(-1.0..1.0));
        let boxes = vec![
            bx(0.3, 0.2, 4.1, 3.9),
            bx(1.0, 1.0, 5.0, 5.0),
            bx(-1.0, 2.0, 3.0, 6.0),
        ];
        let cfg = RoiConfig {
            out_h: 2,
            out_w: 3,
            samples_per_bin: 2,
        };
        let err = crate::nn::grad_check(&[map], 1e-6, |g, v| {
            toi_align_var(g, v[0], 1.0, &boxes, &cfg)
        })
        .unwrap();
        assert!(err < 1e-6, "toi_align rel err {err}");
    }
}
