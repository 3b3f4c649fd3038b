//! Minimal double-precision differentiable core: tensors, a reverse-mode
//! tape, convolution/linear kernels, the SGD schedule and checkpoints.

pub mod checkpoint;
pub mod gradcheck;
pub mod graph;
pub mod kernels;
pub mod optim;
pub mod params;
mod tensor;

pub use checkpoint::{read_checkpoint, write_checkpoint};
pub use gradcheck::grad_check;
pub use graph::{CustomOp, Gradients, Graph, Var};
pub use kernels::{bce_multilabel, conv3d, linear, mean_pool, sigmoid_scalar};
pub use optim::{sgd_step, TrainConfig};
pub use params::{ParamId, ParamStore, Parameter};
pub use tensor::Tensor;
