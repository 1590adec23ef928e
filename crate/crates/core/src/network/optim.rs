use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{MultiViewModel, Objective};
use crate::data::MultiViewDataset;
use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Optimizer {
    Adam {
        lr: f64,
        beta1: f64,
        beta2: f64,
        eps: f64,
    },
    Sgd {
        lr: f64,
    },
}

impl Optimizer {
    pub fn adam(lr: f64) -> Self {
        Optimizer::Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    fn validate(&self) -> Result<()> {
        let lr = match *self {
            Optimizer::Adam { lr, beta1, beta2, eps } => {
                if !((0.0..1.0).contains(&beta1) && (0.0..1.0).contains(&beta2) && eps > 0.0) {
                    return Err(Error::Config("adam betas must lie in [0, 1) and eps > 0".into()));
                }
                lr
            }
            Optimizer::Sgd { lr } => lr,
        };
        if !(lr.is_finite() && lr > 0.0) {
            return Err(Error::Config(format!("learning rate must be positive, got {lr}")));
        }
        Ok(())
    }
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::adam(1e-3)
    }
}

/// Stop once the epoch loss has improved by less than `min_delta` over `patience` epochs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EarlyStop {
    pub patience: usize,
    pub min_delta: f64,
}

impl Default for EarlyStop {
    fn default() -> Self {
        EarlyStop {
            patience: 10,
            min_delta: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: Optimizer,
    pub objective: Objective,
    pub early_stop: Option<EarlyStop>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 200,
            batch_size: 64,
            optimizer: Optimizer::default(),
            objective: Objective::default(),
            early_stop: None,
        }
    }
}

/// Progress of a training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainState {
    /// Epochs completed.
    pub epoch: usize,
    pub seed: u64,
    /// Mean per-sample objective of each completed epoch.
    pub loss_history: Vec<f64>,
    #[serde(skip)]
    moments: Vec<Moments>,
    #[serde(skip)]
    step: u64,
}

#[derive(Debug, Clone, PartialEq, Default)]
struct Moments {
    m: Vec<f64>,
    v: Vec<f64>,
}

impl TrainState {
    fn new(model: &MultiViewModel, seed: u64) -> Self {
        TrainState {
            epoch: 0,
            seed,
            loss_history: Vec::new(),
            moments: model
                .nets()
                .iter()
                .map(|n| Moments {
                    m: vec![0.0; n.params().len()],
                    v: vec![0.0; n.params().len()],
                })
                .collect(),
            step: 0,
        }
    }
}

fn apply_update(
    model: &mut MultiViewModel,
    grads: &[Vec<f64>],
    opt: &Optimizer,
    state: &mut TrainState,
) {
    state.step += 1;
    match *opt {
        Optimizer::Sgd { lr } => {
            for (net, g) in model.nets_mut().iter_mut().zip(grads) {
                for (p, gi) in net.params_mut().iter_mut().zip(g) {
                    *p -= lr * gi;
                }
            }
        }
        Optimizer::Adam { lr, beta1, beta2, eps } => {
            let t = state.step as i32;
            let c1 = 1.0 - beta1.powi(t);
            let c2 = 1.0 - beta2.powi(t);
            for ((net, g), mom) in model.nets_mut().iter_mut().zip(grads).zip(&mut state.moments) {
                for (((p, gi), m), v) in net
                    .params_mut()
                    .iter_mut()
                    .zip(g)
                    .zip(mom.m.iter_mut())
                    .zip(mom.v.iter_mut())
                {
                    *m = beta1 * *m + (1.0 - beta1) * gi;
                    *v = beta2 * *v + (1.0 - beta2) * gi * gi;
                    *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
                }
            }
        }
    }
}

/// Seeded mini-batch training. Epoch `t` (0-based) uses the KL weight
/// `lambda_t`; batches come from a per-epoch shuffle of the rows.
pub fn train(
    model: &mut MultiViewModel,
    data: &MultiViewDataset,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<TrainState> {
    model.check_compatible(data)?;
    cfg.optimizer.validate()?;
    if cfg.batch_size == 0 {
        return Err(Error::Config("batch size must be positive".into()));
    }
    let mut state = TrainState::new(model, seed);
    if cfg.epochs == 0 {
        return Ok(state);
    }
    if data.is_empty() {
        return Err(Error::Data("cannot train on an empty dataset".into()));
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    for epoch in 0..cfg.epochs {
        let objective = Objective {
            loss: cfg.objective.loss.at_epoch(epoch),
            ..cfg.objective
        };
        order.shuffle(&mut stream_rng(seed, Stream::Shuffle, epoch as u64));
        let mut epoch_total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let (loss, grads) = model.backward(data, batch, &objective)?;
            let batch_total = match objective.reduction {
                super::Reduction::Mean => loss * batch.len() as f64,
                super::Reduction::Sum => loss,
            };
            if !batch_total.is_finite() || grads.per_view.iter().flatten().any(|g| !g.is_finite()) {
                return Err(Error::Divergence {
                    epoch,
                    loss: batch_total,
                });
            }
            epoch_total += batch_total;
            apply_update(model, &grads.per_view, &cfg.optimizer, &mut state);
        }
        let mean = epoch_total / data.len() as f64;
        state.loss_history.push(mean);
        state.epoch = epoch + 1;

        if let Some(es) = cfg.early_stop {
            let h = &state.loss_history;
            if h.len() > es.patience && h[h.len() - 1 - es.patience] - mean < es.min_delta {
                break;
            }
        }
    }
    Ok(state)
}
