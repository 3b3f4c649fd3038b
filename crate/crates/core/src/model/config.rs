use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::WindowConfig;
use crate::error::{Error, Result};
use crate::features::{PoseConfig, RoiConfig, SkeletonEdgeTable};

/// Ablation variants, from the keyframe-only baseline to the full model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// Centre frame only: 2D features at the keyframe boxes.
    #[serde(rename = "baseline2d")]
    Baseline2d,
    /// Temporal mean of the 3D map, pooled at the keyframe boxes.
    #[serde(rename = "naive3d")]
    Naive3d,
    #[serde(rename = "T")]
    T,
    #[serde(rename = "T+V")]
    TV,
    #[serde(rename = "T+P")]
    TP,
    #[serde(rename = "T+V+P")]
    TVP,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::Baseline2d,
        Variant::Naive3d,
        Variant::T,
        Variant::TV,
        Variant::TP,
        Variant::TVP,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Baseline2d => "baseline2d",
            Variant::Naive3d => "naive3d",
            Variant::T => "T",
            Variant::TV => "T+V",
            Variant::TP => "T+P",
            Variant::TVP => "T+V+P",
        }
    }

    /// Visual features follow the trajectories (ToI pooling).
    pub fn uses_toi(self) -> bool {
        matches!(self, Variant::TV | Variant::TVP)
    }

    pub fn uses_trajectory(self) -> bool {
        !matches!(self, Variant::Baseline2d | Variant::Naive3d)
    }

    pub fn uses_pose(self) -> bool {
        matches!(self, Variant::TP | Variant::TVP)
    }

    /// Whether the backbone sees the whole window or the centre frame.
    pub fn temporal_input(self) -> bool {
        self != Variant::Baseline2d
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Unknown {
                kind: "variant",
                name: s.to_string(),
            })
    }
}

/// Ranking score at inference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreMode {
    /// Independent per-predicate sigmoid, consistent with the BCE loss.
    #[default]
    Sigmoid,
    /// Softmax across predicates of one pair.
    Softmax,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub variant: Variant,
    pub predicates: Vec<String>,
    pub segment_len: usize,
    /// Frames between consecutive window entries; together with
    /// `segment_len` this fixes the input window.
    pub frame_stride: usize,
    /// Output channels of each 3×3×3 conv+relu layer.
    pub backbone_channels: Vec<usize>,
    /// `[t, h, w]` stride of each layer.
    pub backbone_strides: Vec<[usize; 3]>,
    pub roi: RoiConfig,
    pub hidden: usize,
    pub pose: PoseConfig,
    pub skeleton: SkeletonEdgeTable,
    pub score: ScoreMode,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            variant: Variant::TVP,
            predicates: vec![],
            segment_len: 8,
            frame_stride: 1,
            backbone_channels: vec![16, 32, 64],
            backbone_strides: vec![[1, 2, 2], [1, 2, 2], [1, 1, 1]],
            roi: RoiConfig::default(),
            hidden: 512,
            pose: PoseConfig::default(),
            skeleton: SkeletonEdgeTable::coco16(),
            score: ScoreMode::Sigmoid,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn new(variant: Variant, predicates: Vec<String>) -> Self {
        ModelConfig {
            variant,
            predicates,
            ..Default::default()
        }
    }

    pub fn num_predicates(&self) -> usize {
        self.predicates.len()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, reason: String| {
            Err(Error::Config {
                field: field.into(),
                reason,
            })
        };
        if self.predicates.is_empty() {
            return bad("predicates", "at least one predicate is required".into());
        }
        if self.segment_len == 0 || self.frame_stride == 0 {
            return bad(
                "segment_len",
                "segment_len and frame_stride must be positive".into(),
            );
        }
        if self.backbone_channels.is_empty() || self.backbone_channels.contains(&0) {
            return bad(
                "backbone_channels",
                format!(
                    "{:?} must be non-empty and positive",
                    self.backbone_channels
                ),
            );
        }
        if self.backbone_strides.len() != self.backbone_channels.len() {
            return bad("backbone_strides", "needs one stride per layer".into());
        }
        if self.backbone_strides.iter().flatten().any(|&s| s == 0) {
            return bad("backbone_strides", "strides must be positive".into());
        }
        if self.backbone_strides.iter().any(|s| s[0] != 1) {
            return bad("backbone_strides", "temporal stride must be 1".into());
        }
        if self.hidden == 0 {
            return bad("hidden", "must be positive".into());
        }
        if self.pose.mask_size == 0 || self.pose.channels.contains(&0) {
            return bad("pose", "mask_size and channels must be positive".into());
        }
        self.roi.validate()
    }

    pub fn window(&self) -> WindowConfig {
        WindowConfig {
            segment_len: self.segment_len,
            frame_stride: self.frame_stride,
        }
    }

    /// Backbone output channels `d`.
    pub fn feature_channels(&self) -> usize {
        *self.backbone_channels.last().expect("validated")
    }

    /// Total spatial stride of the backbone along `[h, w]`.
    pub fn spatial_stride(&self) -> [usize; 2] {
        self.backbone_strides
            .iter()
            .fold([1, 1], |acc, s| [acc[0] * s[1], acc[1] * s[2]])
    }

    pub fn visual_len(&self) -> usize {
        3 * self.feature_channels() * self.roi.out_h * self.roi.out_w
    }

    pub fn trajectory_len(&self) -> usize {
        2 * self.segment_len * 4
    }

    /// Length of the fused per-pair vector for this variant.
    pub fn feature_len(&self) -> usize {
        let v = self.variant;
        self.visual_len()
            + if v.uses_trajectory() {
                self.trajectory_len()
            } else {
                0
            }
            + if v.uses_pose() {
                self.pose.feature_len()
            } else {
                0
            }
    }
}
