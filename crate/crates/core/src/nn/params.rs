use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Trainable tensor with its gradient and momentum buffer (all same shape).
#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub value: Tensor,
    pub grad: Tensor,
    pub momentum: Tensor,
}

impl Parameter {
    pub fn new(value: Tensor) -> Self {
        let zeros = Tensor::zeros(value.shape());
        Parameter {
            grad: zeros.clone(),
            momentum: zeros,
            value,
        }
    }
}

/// Ordered, named parameter collection. Order is registration order and is
/// what the checkpoint format serializes.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    params: Vec<Parameter>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn register(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        let name = name.into();
        assert!(
            !self.names.contains(&name),
            "duplicate parameter name {name}"
        );
        self.names.push(name);
        self.params.push(Parameter::new(value));
        ParamId(self.params.len() - 1)
    }

    /// Kaiming-uniform weights: U(-b, b), b = sqrt(6 / fan_in).
    pub fn register_kaiming(
        &mut self,
        name: impl Into<String>,
        shape: &[usize],
        fan_in: usize,
        rng: &mut impl Rng,
    ) -> ParamId {
        let bound = (6.0 / fan_in as f64).sqrt();
        let value = Tensor::from_fn(shape, |_| rng.random_range(-bound..bound));
        self.register(name, value)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Parameter {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter {
        &mut self.params[id.0]
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.names.iter().position(|n| n == name).map(ParamId)
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &str, &Parameter)> {
        self.names
            .iter()
            .zip(&self.params)
            .enumerate()
            .map(|(i, (n, p))| (ParamId(i), n.as_str(), p))
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut Parameter> {
        self.params.iter_mut()
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad.fill(0.0);
        }
    }

    /// `grad += scale * g` for each entry, in the given order.
    pub fn accumulate(&mut self, grads: &[(ParamId, Tensor)], scale: f64) -> Result<()> {
        for (id, g) in grads {
            let p = &mut self.params[id.0];
            if p.grad.shape() != g.shape() {
                return Err(Error::shape(
                    "accumulate",
                    format!(
                        "{} grad {:?} vs {:?}",
                        self.names[id.0],
                        g.shape(),
                        p.grad.shape()
                    ),
                ));
            }
            p.grad.scaled_add_assign(scale, g);
        }
        Ok(())
    }

    /// Replace values by name; used when loading checkpoints.
    pub fn load_values(&mut self, values: Vec<(String, Tensor)>) -> Result<()> {
        if values.len() != self.params.len() {
            return Err(Error::Checkpoint(format!(
                "checkpoint has {} parameters, model expects {}",
                values.len(),
                self.params.len()
            )));
        }
        for (name, t) in values {
            let id = self
                .id(&name)
                .ok_or_else(|| Error::Checkpoint(format!("unexpected parameter {name}")))?;
            let p = &mut self.params[id.0];
            if p.value.shape() != t.shape() {
                return Err(Error::Checkpoint(format!(
                    "{name}: shape {:?} vs model {:?}",
                    t.shape(),
                    p.value.shape()
                )));
            }
            *p = Parameter::new(t);
        }
        Ok(())
    }
}
