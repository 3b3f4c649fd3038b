use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::ParamStore;

/// SGD-momentum schedule with step decay. Epochs are numbered from 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub base_lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub decay_epochs: Vec<usize>,
    pub decay_factor: f64,
    pub seed: u64,
    pub batch_size: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            base_lr: 1e-2,
            momentum: 0.9,
            weight_decay: 1e-7,
            epochs: 20,
            decay_epochs: vec![10, 15],
            decay_factor: 0.1,
            seed: 0,
            batch_size: 16,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, reason: &str| {
            Err(Error::Config {
                field: field.to_string(),
                reason: reason.to_string(),
            })
        };
        if !(self.base_lr > 0.0 && self.base_lr.is_finite()) {
            return bad("base_lr", "must be positive");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum", "must lie in [0, 1)");
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad("weight_decay", "must be non-negative");
        }
        if self.epochs == 0 {
            return bad("epochs", "must be at least 1");
        }
        if self.decay_epochs.iter().any(|&e| e < 1 || e > self.epochs) {
            return bad("decay_epochs", "must lie in [1, epochs]");
        }
        if !(self.decay_factor > 0.0 && self.decay_factor.is_finite()) {
            return bad("decay_factor", "must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size", "must be at least 1");
        }
        Ok(())
    }

    /// `base_lr · decay_factor^{#decay epochs ≤ epoch}`.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        let steps = self.decay_epochs.iter().filter(|&&e| epoch >= e).count();
        self.base_lr * self.decay_factor.powi(steps as i32)
    }
}

/// One SGD-momentum update with coupled L2 decay:
/// `v ← m·v + g + wd·w; w ← w − lr·v`.
pub fn sgd_step(params: &mut ParamStore, cfg: &TrainConfig, epoch: usize) {
    let lr = cfg.lr_at(epoch);
    for p in params.params_mut() {
        let value = p.value.data_mut();
        let grad = p.grad.data();
        let vel = p.momentum.data_mut();
        for ((w, &g), v) in value.iter_mut().zip(grad).zip(vel.iter_mut()) {
            *v = cfg.momentum * *v + g + cfg.weight_decay * *w;
            *w -= lr * *v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Tensor;
    use approx::assert_abs_diff_eq;

    #[test]
    fn schedule_defaults() {
        let cfg = TrainConfig::default();
        assert_eq!(cfg.lr_at(1), 1e-2);
        assert_eq!(cfg.lr_at(9), 1e-2);
        assert_abs_diff_eq!(cfg.lr_at(10), 1e-3, epsilon = 1e-18);
        assert_abs_diff_eq!(cfg.lr_at(14), 1e-3, epsilon = 1e-18);
        assert_abs_diff_eq!(cfg.lr_at(15), 1e-4, epsilon = 1e-18);
        assert_abs_diff_eq!(cfg.lr_at(20), 1e-4, epsilon = 1e-18);
        cfg.validate().unwrap();
    }

    #[test]
    fn zero_grad_zero_decay_is_noop() {
        let mut store = ParamStore::new();
        let id = store.register("w", Tensor::from_vec(&[3], vec![1.0, -2.0, 0.5]).unwrap());
        let before = store.get(id).value.clone();
        let cfg = TrainConfig {
            weight_decay: 0.0,
            ..TrainConfig::default()
        };
        sgd_step(&mut store, &cfg, 1);
        assert_eq!(store.get(id).value, before);
    }

    #[test]
    fn hand_computed_update() {
        let mut store = ParamStore::new();
        let id = store.register("w", Tensor::scalar(1.0));
        store.get_mut(id).grad = Tensor::scalar(0.5);
        let cfg = TrainConfig {
            base_lr: 0.01,
            momentum: 0.9,
            weight_decay: 0.0,
            ..TrainConfig::default()
        };
        sgd_step(&mut store, &cfg, 1);
        assert_abs_diff_eq!(store.get(id).momentum.data()[0], 0.5, epsilon = 1e-15);
        assert_abs_diff_eq!(store.get(id).value.data()[0], 0.995, epsilon = 1e-15);
        // second step: v = 0.9*0.5 + 0.5 = 0.95
        sgd_step(&mut store, &cfg, 1);
        assert_abs_diff_eq!(store.get(id).momentum.data()[0], 0.95, epsilon = 1e-15);
        assert_abs_diff_eq!(
            store.get(id).value.data()[0],
            0.995 - 0.0095,
            epsilon = 1e-15
        );
    }

    #[test]
    fn invalid_configs_name_the_field() {
        let cfg = TrainConfig {
            decay_epochs: vec![25],
            ..TrainConfig::default()
        };
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("decay_epochs"), "{err}");
        let cfg = TrainConfig {
            base_lr: -1.0,
            ..TrainConfig::default()
        };
        assert!(cfg.validate().unwrap_err().to_string().contains("base_lr"));
    }
}
