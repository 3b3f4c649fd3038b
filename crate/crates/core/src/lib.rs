//! Spatial-temporal human-object interaction detection for video.
//!
//! The crate covers the full keyframe-centric pipeline: box geometry,
//! a small differentiable numeric core, trajectory-aligned feature pooling
//! and masking pose features, the fused classifier and its ablation
//! variants, benchmark construction, and the triplet-mAP evaluation
//! protocol.

pub mod data;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod features;
pub mod geometry;
pub mod model;
pub mod nn;
pub mod oracle;
pub mod par;
pub mod verify;

pub use error::{Error, Result};
