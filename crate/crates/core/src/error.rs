use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("non-finite value produced by {op}")]
    NonFinite { op: &'static str },

    #[error("axis {axis} out of range for tensor of rank {rank}")]
    Axis { axis: usize, rank: usize },

    #[error("target value {value} at index {index} is not binary")]
    NonBinaryTarget { index: usize, value: f64 },

    #[error("invalid box {0:?}")]
    InvalidBox([f64; 4]),

    #[error("trajectory {instance_id} has no box at the keyframe")]
    MissingKeyframeBox { instance_id: String },

    #[error("length mismatch in {op}: expected {expected}, got {got}")]
    Length {
        op: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid config field `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("annotation error: {0}")]
    Annotation(String),

    #[error("relation {subject_id} -{predicate}-> {object_id} in video {video_id} references unknown instance `{missing}`")]
    UnknownInstance {
        video_id: String,
        subject_id: String,
        predicate: String,
        object_id: String,
        missing: String,
    },

    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },

    #[error("detection references unknown keyframe {video_id}@{keyframe}")]
    UnknownKeyframe { video_id: String, keyframe: usize },

    #[error("{tp} true positives but only {n_gt} ground-truth instances")]
    TooManyTruePositives { tp: usize, n_gt: usize },

    #[error("checkpoint format: {0}")]
    Checkpoint(String),

    #[error("frame container format: {0}")]
    Frames(String),

    #[error("training diverged at epoch {epoch}: loss {loss}")]
    Diverged { epoch: usize, loss: f64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {message}")]
    Json { context: String, message: String },
}

impl Error {
    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
