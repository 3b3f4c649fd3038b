//! Per-pair feature extraction: trajectory-aligned RoI pooling and the
//! masking pose encoder.

pub mod pose;
pub mod roi;

pub use pose::{
    line_pixels, masking_pose_feature, masking_pose_input, pair_spatial_masks, rasterize_skeleton,
    resize_bilinear, Pose, PoseConfig, PoseEncoder, SkeletonEdgeTable, NUM_KEYPOINTS,
};
pub use roi::{
    naive_temporal_roi_pool, roi_align, roi_taps, sample_points, toi_align_var, toi_pool,
    FeatureMap, RoiConfig, Tap,
};
