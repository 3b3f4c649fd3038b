use log::info;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::Model;
use crate::data::{augment, AugmentConfig, SampleSet};
use crate::error::{Error, Result};
use crate::nn::{sgd_step, ParamId, Tensor, TrainConfig};
use crate::par::Exec;

#[derive(Debug, Clone, Default)]
pub struct TrainOptions {
    pub augment: Option<AugmentConfig>,
    pub exec: Exec,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean per-sample loss of each epoch.
    pub epoch_losses: Vec<f64>,
    pub steps: usize,
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Mini-batch SGD over `data`. Per-sample gradients may be computed
/// concurrently but are summed in sample order, so the result does not
/// depend on `opts.exec`.
pub fn train(
    model: &mut Model,
    data: &dyn SampleSet,
    cfg: &TrainConfig,
    opts: &TrainOptions,
) -> Result<TrainReport> {
    cfg.validate()?;
    if let Some(a) = &opts.augment {
        a.validate()?;
    }
    if data.is_empty() {
        return Err(Error::Config {
            field: "dataset".into(),
            reason: "no training samples".into(),
        });
    }
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    let mut steps = 0;
    for epoch in 1..=cfg.epochs {
        let mut order: Vec<usize> = (0..data.len()).collect();
        order.shuffle(&mut rng_for(cfg.seed, epoch as u64));
        let mut total = 0.0;
        let mut counted = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            let model_ref: &Model = model;
            let results = opts.exec.map(
                batch,
                |&i| -> Result<Option<(f64, Vec<(ParamId, Tensor)>)>> {
                    let sample = data.get(i)?;
                    let sample = match &opts.augment {
                        Some(a) => {
                            let mut rng = rng_for(cfg.seed, ((epoch as u64) << 32) | i as u64);
                            std::borrow::Cow::Owned(augment(&sample, a, &mut rng)?)
                        }
                        None => sample,
                    };
                    Ok(model_ref
                        .loss_and_grads(&sample)?
                        .map(|(l, g)| (l, g.into_params())))
                },
            );
            let mut contributions = Vec::with_capacity(results.len());
            for r in results {
                if let Some(c) = r? {
                    contributions.push(c);
                }
            }
            if contributions.is_empty() {
                continue;
            }
            let scale = 1.0 / contributions.len() as f64;
            model.params.zero_grad();
            for (loss, grads) in &contributions {
                if !loss.is_finite() {
                    return Err(Error::Diverged { epoch, loss: *loss });
                }
                total += loss;
                counted += 1;
                model.params.accumulate(grads, scale)?;
            }
            sgd_step(&mut model.params, cfg, epoch);
            steps += 1;
        }
        let mean = if counted == 0 {
            0.0
        } else {
            total / counted as f64
        };
        if !mean.is_finite() {
            return Err(Error::Diverged { epoch, loss: mean });
        }
        info!(
            "epoch {epoch}/{} lr {:.2e} loss {mean:.6}",
            cfg.epochs,
            cfg.lr_at(epoch)
        );
        epoch_losses.push(mean);
    }
    Ok(TrainReport {
        epoch_losses,
        steps,
    })
}
