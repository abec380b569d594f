//! Maximum-likelihood fitting of a [`Maf`] with exact gradients.

mod optim;

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use optim::{adam_step, adamax_step, OptimizerKind, OptimizerState, BETA1, BETA2, EPSILON};

use crate::error::{Error, Result};
use crate::flow::{Maf, ALPHA_CLAMP};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    pub optimizer: OptimizerKind,
    /// Number of MADE blocks.
    pub blocks: usize,
    /// Hidden width per block (0 = direct masked heads).
    pub hidden: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 256,
            learning_rate: 5e-4,
            epochs: 8,
            seed: 0,
            optimizer: OptimizerKind::Adamax,
            blocks: 3,
            hidden: 8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("train.batch_size must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "train.learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.blocks == 0 {
            return Err(Error::Config("flow.blocks must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    /// 1-based epoch index.
    pub epoch: usize,
    /// Sample-weighted mean of the minibatch losses seen during the epoch.
    pub mean_nll: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub flow: Maf,
    pub history: Vec<EpochStats>,
    pub param_count: usize,
    /// Full-data loss of the freshly initialized flow.
    pub initial_nll: f64,
}

fn check_batch<V: AsRef<[f64]>>(flow: &Maf, batch: &[V]) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::Validation("batch is empty".into()));
    }
    if let Some(bad) = batch.iter().find(|x| x.as_ref().len() != flow.dim()) {
        return Err(Error::Validation(format!(
            "sample has dimension {}, flow expects {}",
            bad.as_ref().len(),
            flow.dim()
        )));
    }
    Ok(())
}

/// Mean negative log-likelihood over the batch.
pub fn nll_loss<V: AsRef<[f64]>>(flow: &Maf, batch: &[V]) -> Result<f64> {
    check_batch(flow, batch)?;
    let mut total = 0.0;
    for x in batch {
        total -= flow.log_prob(x.as_ref())?;
    }
    Ok(total / batch.len() as f64)
}

/// Mean loss and its exact gradient, in the layout of [`Maf::params`].
///
/// Masked slots always receive exactly zero.
pub fn nll_and_grad<V: AsRef<[f64]>>(flow: &Maf, batch: &[V]) -> Result<(f64, Vec<f64>)> {
    check_batch(flow, batch)?;
    let weight = 1.0 / batch.len() as f64;
    let mut grad = vec![0.0; flow.n_slots()];
    let mut total = 0.0;
    for x in batch {
        total += flow.accumulate_nll_grad(x.as_ref(), weight, &mut grad)?;
    }
    Ok((total * weight, grad))
}

pub fn grad_nll<V: AsRef<[f64]>>(flow: &Maf, batch: &[V]) -> Result<Vec<f64>> {
    nll_and_grad(flow, batch).map(|(_, g)| g)
}

/// Trains a fresh flow on `data` (already standardized vectors of equal length).
///
/// Each epoch reshuffles with a seeded ChaCha stream; the trailing partial batch is kept.
pub fn train<V: AsRef<[f64]>>(data: &[V], cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let Some(first) = data.first() else {
        return Err(Error::Validation("no training samples".into()));
    };
    let dim = first.as_ref().len();
    if dim == 0 {
        return Err(Error::Validation("training samples are empty vectors".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut flow = Maf::new(dim, cfg.blocks, cfg.hidden, &mut rng)?;
    let initial_nll = nll_loss(&flow, data)?;
    let mut params = flow.params();
    let mut state = OptimizerState::new(params.len());
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut batch: Vec<&[f64]> = Vec::with_capacity(cfg.batch_size);

    for epoch in 1..=cfg.epochs {
        let started = Instant::now();
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| data[i].as_ref()));
            let (loss, grad) = nll_and_grad(&flow, &batch).map_err(|e| diverged(e, epoch, b, cfg))?;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(diverged(
                    Error::Numeric("non-finite loss or gradient".into()),
                    epoch,
                    b,
                    cfg,
                ));
            }
            loss_sum += loss * chunk.len() as f64;
            cfg.optimizer.step(&mut params, &grad, &mut state, cfg.learning_rate);
            flow.set_params(&params);
        }
        history.push(EpochStats {
            epoch,
            mean_nll: loss_sum / data.len() as f64,
            seconds: started.elapsed().as_secs_f64(),
        });
    }

    let param_count = flow.param_count();
    Ok(TrainOutcome {
        flow,
        history,
        param_count,
        initial_nll,
    })
}

fn diverged(err: Error, epoch: usize, batch: usize, cfg: &TrainConfig) -> Error {
    match err {
        Error::Numeric(msg) => Error::Numeric(format!(
            "training diverged at epoch {epoch}, batch {batch}: {msg} \
             (learning rate {}, log-scale clamp +/-{ALPHA_CLAMP}); try a smaller learning rate",
            cfg.learning_rate
        )),
        other => other,
    }
}
