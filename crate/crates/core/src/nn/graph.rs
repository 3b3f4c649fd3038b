//! Tape-based reverse-mode differentiation.
//!
//! A [`Graph`] records every operation applied to its [`Var`]s in execution
//! order. [`Graph::backward`] walks the tape in reverse and returns the
//! gradient of a scalar output with respect to every recorded node,
//! including parameters borrowed from a [`ParamStore`].

use crate::error::{Error, Result};
use crate::nn::kernels;
use crate::nn::params::{ParamId, ParamStore};
use crate::nn::Tensor;

/// Handle to a node on a [`Graph`] tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

/// An operation defined outside this module. Forward is computed by the
/// caller; the graph stores the result and calls back for gradients.
pub trait CustomOp: Send + Sync {
    fn name(&self) -> &'static str;

    /// Gradients with respect to each input, in input order.
    fn backward(&self, inputs: &[&Tensor], grad_out: &Tensor) -> Result<Vec<Tensor>>;
}

enum Op {
    Input,
    Param(ParamId),
    Conv3d {
        input: Var,
        kernel: Var,
        bias: Var,
        stride: [usize; 3],
        pad: [usize; 3],
    },
    Linear {
        input: Var,
        weight: Var,
        bias: Var,
    },
    Relu(Var),
    Sigmoid(Var),
    MeanPool {
        input: Var,
        axes: Vec<usize>,
    },
    Concat {
        inputs: Vec<Var>,
        axis: usize,
    },
    Reshape(Var),
    Dot {
        input: Var,
        weights: Tensor,
    },
    Bce {
        logits: Var,
        dlogits: Tensor,
    },
    Custom {
        inputs: Vec<Var>,
        op: Box<dyn CustomOp>,
    },
}

struct Node {
    value: Option<Tensor>,
    op: Op,
}

pub struct Graph<'p> {
    store: Option<&'p ParamStore>,
    nodes: Vec<Node>,
}

impl Default for Graph<'_> {
    fn default() -> Self {
        Self::new()
    }
}

impl<'p> Graph<'p> {
    pub fn new() -> Self {
        Graph {
            store: None,
            nodes: Vec::new(),
        }
    }

    pub fn with_params(store: &'p ParamStore) -> Self {
        Graph {
            store: Some(store),
            nodes: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, name: &'static str) -> Result<Var> {
        value.check_finite(name)?;
        self.nodes.push(Node {
            value: Some(value),
            op,
        });
        Ok(Var(self.nodes.len() - 1))
    }

    pub fn value(&self, v: Var) -> &Tensor {
        let node = &self.nodes[v.0];
        match (&node.value, &node.op) {
            (Some(t), _) => t,
            (None, Op::Param(id)) => {
                &self
                    .store
                    .expect("parameter node without a store")
                    .get(*id)
                    .value
            }
            (None, _) => unreachable!("node without a value"),
        }
    }

    /// Constant leaf. Gradients still flow to it and can be read back.
    pub fn input(&mut self, value: Tensor) -> Result<Var> {
        self.push(value, Op::Input, "input")
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        let store = self.store.expect("graph built without a parameter store");
        assert!(id.index() < store.len(), "unknown parameter {id:?}");
        self.nodes.push(Node {
            value: None,
            op: Op::Param(id),
        });
        Var(self.nodes.len() - 1)
    }

    pub fn conv3d(
        &mut self,
        input: Var,
        kernel: Var,
        bias: Var,
        stride: [usize; 3],
        pad: [usize; 3],
    ) -> Result<Var> {
        let out = kernels::conv3d(
            self.value(input),
            self.value(kernel),
            self.value(bias),
            stride,
            pad,
        )?;
        self.push(
            out,
            Op::Conv3d {
                input,
                kernel,
                bias,
                stride,
                pad,
            },
            "conv3d",
        )
    }

    pub fn linear(&mut self, input: Var, weight: Var, bias: Var) -> Result<Var> {
        let out = kernels::linear(self.value(input), self.value(weight), self.value(bias))?;
        self.push(
            out,
            Op::Linear {
                input,
                weight,
                bias,
            },
            "linear",
        )
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        let out = self.value(x).map(|v| v.max(0.0));
        self.push(out, Op::Relu(x), "relu")
    }

    pub fn sigmoid(&mut self, x: Var) -> Result<Var> {
        let out = self.value(x).map(kernels::sigmoid_scalar);
        self.push(out, Op::Sigmoid(x), "sigmoid")
    }

    pub fn mean_pool(&mut self, x: Var, axes: &[usize]) -> Result<Var> {
        let out = kernels::mean_pool(self.value(x), axes)?;
        self.push(
            out,
            Op::MeanPool {
                input: x,
                axes: axes.to_vec(),
            },
            "mean_pool",
        )
    }

    pub fn concat(&mut self, inputs: &[Var], axis: usize) -> Result<Var> {
        let values: Vec<&Tensor> = inputs.iter().map(|&v| self.value(v)).collect();
        let out = kernels::concat(&values, axis)?;
        self.push(
            out,
            Op::Concat {
                inputs: inputs.to_vec(),
                axis,
            },
            "concat",
        )
    }

    pub fn reshape(&mut self, x: Var, shape: &[usize]) -> Result<Var> {
        let out = self.value(x).clone().reshape(shape)?;
        self.push(out, Op::Reshape(x), "reshape")
    }

    /// Scalar `Σ x ⊙ weights`.
    pub fn dot(&mut self, x: Var, weights: Tensor) -> Result<Var> {
        let value = self.value(x);
        if value.shape() != weights.shape() {
            return Err(Error::shape(
                "dot",
                format!("{:?} vs {:?}", value.shape(), weights.shape()),
            ));
        }
        let s: f64 = value
            .data()
            .iter()
            .zip(weights.data())
            .map(|(a, b)| a * b)
            .sum();
        self.push(Tensor::scalar(s), Op::Dot { input: x, weights }, "dot")
    }

    /// Mean per-entry binary cross-entropy against fixed binary targets.
    pub fn bce_multilabel(&mut self, logits: Var, targets: &Tensor) -> Result<Var> {
        let (loss, dlogits) = kernels::bce_multilabel(self.value(logits), targets)?;
        self.push(
            Tensor::scalar(loss),
            Op::Bce { logits, dlogits },
            "bce_multilabel",
        )
    }

    /// Record an externally computed forward value.
    pub fn custom(&mut self, inputs: &[Var], output: Tensor, op: Box<dyn CustomOp>) -> Result<Var> {
        let name = op.name();
        self.push(
            output,
            Op::Custom {
                inputs: inputs.to_vec(),
                op,
            },
            name,
        )
    }

    /// Reverse sweep from the scalar `output`, seeded with `seed`.
    pub fn backward_scaled(&self, output: Var, seed: f64) -> Result<Gradients> {
        if self.value(output).len() != 1 {
            return Err(Error::shape(
                "backward",
                format!(
                    "output must be scalar, got {:?}",
                    self.value(output).shape()
                ),
            ));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; output.0 + 1];
        grads[output.0] = Some(Tensor::full(self.value(output).shape(), seed));

        for idx in (0..=output.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            let node = &self.nodes[idx];
            match &node.op {
                Op::Input | Op::Param(_) => {
                    grads[idx] = Some(g);
                    continue;
                }
                Op::Conv3d {
                    input,
                    kernel,
                    bias,
                    stride,
                    pad,
                } => {
                    let cg = kernels::conv3d_backward(
                        self.value(*input),
                        self.value(*kernel),
                        &g,
                        *stride,
                        *pad,
                    )?;
                    accumulate(&mut grads, *input, cg.input);
                    accumulate(&mut grads, *kernel, cg.kernel);
                    accumulate(&mut grads, *bias, cg.bias);
                }
                Op::Linear {
                    input,
                    weight,
                    bias,
                } => {
                    let lg = kernels::linear_backward(
                        self.value(*input),
                        self.value(*weight),
                        self.value(*bias),
                        &g,
                    )?;
                    accumulate(&mut grads, *input, lg.input);
                    accumulate(&mut grads, *weight, lg.weight);
                    accumulate(&mut grads, *bias, lg.bias);
                }
                Op::Relu(x) => {
                    let x_val = self.value(*x);
                    let mut gx = g;
                    for (gv, &xv) in gx.data_mut().iter_mut().zip(x_val.data()) {
                        if xv <= 0.0 {
                            *gv = 0.0;
                        }
                    }
                    accumulate(&mut grads, *x, gx);
                }
                Op::Sigmoid(x) => {
                    let y = node.value.as_ref().expect("sigmoid value");
                    let mut gx = g;
                    for (gv, &s) in gx.data_mut().iter_mut().zip(y.data()) {
                        *gv *= s * (1.0 - s);
                    }
                    accumulate(&mut grads, *x, gx);
                }
                Op::MeanPool { input, axes } => {
                    let gx = kernels::mean_pool_backward(self.value(*input).shape(), axes, &g)?;
                    accumulate(&mut grads, *input, gx);
                }
                Op::Concat { inputs, axis } => {
                    let shapes: Vec<Vec<usize>> = inputs
                        .iter()
                        .map(|&v| self.value(v).shape().to_vec())
                        .collect();
                    for (v, gx) in inputs
                        .iter()
                        .zip(kernels::concat_backward(&shapes, *axis, &g))
                    {
                        accumulate(&mut grads, *v, gx);
                    }
                }
                Op::Reshape(x) => {
                    let gx = g.reshape(self.value(*x).shape())?;
                    accumulate(&mut grads, *x, gx);
                }
                Op::Dot { input, weights } => {
                    let mut gx = weights.clone();
                    gx.scale(g.data()[0]);
                    accumulate(&mut grads, *input, gx);
                }
                Op::Bce { logits, dlogits } => {
                    let mut gx = dlogits.clone();
                    gx.scale(g.data()[0]);
                    accumulate(&mut grads, *logits, gx);
                }
                Op::Custom { inputs, op } => {
                    let values: Vec<&Tensor> = inputs.iter().map(|&v| self.value(v)).collect();
                    let gxs = op.backward(&values, &g)?;
                    if gxs.len() != inputs.len() {
                        return Err(Error::Length {
                            op: op.name(),
                            expected: inputs.len(),
                            got: gxs.len(),
                        });
                    }
                    for (v, gx) in inputs.iter().zip(gxs) {
                        accumulate(&mut grads, *v, gx);
                    }
                }
            }
        }

        let mut params = Vec::new();
        for (idx, g) in grads.iter().enumerate() {
            if let (Op::Param(id), Some(g)) = (&self.nodes[idx].op, g) {
                g.check_finite("backward")?;
                params.push((*id, g.clone()));
            }
        }
        Ok(Gradients {
            nodes: grads,
            params,
        })
    }

    pub fn backward(&self, output: Var) -> Result<Gradients> {
        self.backward_scaled(output, 1.0)
    }
}

fn accumulate(grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
    match &mut grads[v.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

/// Result of a reverse sweep.
pub struct Gradients {
    nodes: Vec<Option<Tensor>>,
    params: Vec<(ParamId, Tensor)>,
}

impl Gradients {
    /// Gradient with respect to a leaf (`input` or `param`) node.
    pub fn wrt(&self, v: Var) -> Option<&Tensor> {
        self.nodes.get(v.0).and_then(|g| g.as_ref())
    }

    /// Parameter gradients in tape order; a parameter used twice appears twice.
    pub fn params(&self) -> &[(ParamId, Tensor)] {
        &self.params
    }

    pub fn into_params(self) -> Vec<(ParamId, Tensor)> {
        self.params
    }
}
