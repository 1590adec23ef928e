use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::MultiViewDataset;
use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};

/// Stratified split: each class contributes `round(fraction * n_k)` samples
/// (clamped to `[1, n_k - 1]`) to the training side. Row order is preserved
/// within each side.
pub fn split(
    data: &MultiViewDataset,
    train_fraction: f64,
    seed: u64,
) -> Result<(MultiViewDataset, MultiViewDataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Config(format!(
            "train fraction must lie in (0, 1), got {train_fraction}"
        )));
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for k in 0..data.num_classes() {
        let mut idx = data.class_indices(k);
        if idx.is_empty() {
            continue;
        }
        if idx.len() < 2 {
            return Err(Error::Data(format!(
                "class {k} has {} sample(s); a split needs at least 2",
                idx.len()
            )));
        }
        let n_train = ((idx.len() as f64 * train_fraction).round() as usize).clamp(1, idx.len() - 1);
        idx.shuffle(&mut stream_rng(seed, Stream::Split, k as u64));
        train.extend_from_slice(&idx[..n_train]);
        test.extend_from_slice(&idx[n_train..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((data.subset(&train), data.subset(&test)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DecayForm {
    /// `P(k) = eta^(k / (K - 1))`: the head keeps everything, the last class keeps `eta`.
    NormalizedExponent,
    /// `P(k) = eta^k`.
    GeometricPerClass,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LongTailConfig {
    pub eta: f64,
    pub decay_form: DecayForm,
    /// Survivors guaranteed per class (topped up at random from the dropped rows).
    pub min_per_class: usize,
    pub seed: u64,
}

impl Default for LongTailConfig {
    fn default() -> Self {
        LongTailConfig {
            eta: 0.3,
            decay_form: DecayForm::NormalizedExponent,
            min_per_class: 2,
            seed: 0,
        }
    }
}

/// Per-class retention probabilities, nonincreasing in the class index.
pub fn retention_probabilities(num_classes: usize, eta: f64, form: DecayForm) -> Result<Vec<f64>> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::Config(format!("decay rate must lie in (0, 1], got {eta}")));
    }
    let last = (num_classes.max(2) - 1) as f64;
    Ok((0..num_classes)
        .map(|k| match form {
            DecayForm::NormalizedExponent => eta.powf(k as f64 / last),
            DecayForm::GeometricPerClass => eta.powi(k as i32),
        })
        .collect())
}

/// Keeps each class-`k` row with probability `P(k)`.
pub fn make_long_tailed(data: &MultiViewDataset, cfg: &LongTailConfig) -> Result<MultiViewDataset> {
    let probs = retention_probabilities(data.num_classes(), cfg.eta, cfg.decay_form)?;
    if cfg.eta == 1.0 {
        return Ok(data.clone());
    }
    let mut keep = Vec::new();
    for (k, &p) in probs.iter().enumerate() {
        let idx = data.class_indices(k);
        if idx.is_empty() {
            continue;
        }
        let mut rng = stream_rng(cfg.seed, Stream::LongTail, k as u64);
        let (mut kept, mut dropped): (Vec<usize>, Vec<usize>) =
            idx.iter().partition(|_| rng.random_bool(p));
        let floor = cfg.min_per_class.min(idx.len());
        if kept.len() < floor {
            dropped.shuffle(&mut rng);
            kept.extend(dropped.drain(..floor - kept.len()));
        }
        if kept.is_empty() {
            return Err(Error::Data(format!(
                "long-tail subsampling removed every sample of class {k}"
            )));
        }
        keep.extend(kept);
    }
    keep.sort_unstable();
    Ok(data.subset(&keep))
}
