use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::MultiViewDataset;
use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};

/// Test-time corruption applied before evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NoiseConfig {
    #[default]
    None,
    /// Additive i.i.d. zero-mean Gaussian noise on every feature of every view.
    Gaussian { sigma: f64 },
    /// Swap one view of a fraction of samples with the same view of a different-class sample.
    Conflictive { fraction: f64 },
}

impl NoiseConfig {
    pub fn validate(&self) -> Result<()> {
        match *self {
            NoiseConfig::None => Ok(()),
            NoiseConfig::Gaussian { sigma } if sigma.is_finite() && sigma >= 0.0 => Ok(()),
            NoiseConfig::Gaussian { sigma } => {
                Err(Error::Config(format!("noise sigma must be >= 0, got {sigma}")))
            }
            NoiseConfig::Conflictive { fraction } if (0.0..=1.0).contains(&fraction) => Ok(()),
            NoiseConfig::Conflictive { fraction } => Err(Error::Config(format!(
                "conflictive fraction must lie in [0, 1], got {fraction}"
            ))),
        }
    }

    pub fn apply(&self, data: &MultiViewDataset, seed: u64) -> Result<MultiViewDataset> {
        self.validate()?;
        match *self {
            NoiseConfig::None => Ok(data.clone()),
            NoiseConfig::Gaussian { sigma } => inject_gaussian(data, sigma, seed),
            NoiseConfig::Conflictive { fraction } => {
                inject_conflictive(data, fraction, seed).map(|(d, _)| d)
            }
        }
    }
}

pub fn inject_gaussian(data: &MultiViewDataset, sigma: f64, seed: u64) -> Result<MultiViewDataset> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::Config(format!("noise sigma must be >= 0, got {sigma}")));
    }
    let mut out = data.clone();
    if sigma == 0.0 {
        return Ok(out);
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::Config(e.to_string()))?;
    for (v, m) in out.views_mut().iter_mut().enumerate() {
        let mut rng = stream_rng(seed, Stream::Gaussian, v as u64);
        for x in m.as_mut_slice() {
            *x += normal.sample(&mut rng);
        }
    }
    Ok(out)
}

/// One view replacement made by [`inject_conflictive`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConflictSwap {
    pub sample: usize,
    pub view: usize,
    pub donor: usize,
}

/// Corrupts `floor(fraction * N)` random samples: for each, one uniformly
/// chosen view is replaced by that view of a random sample from another
/// class. Donors are drawn from the clean input; labels are unchanged.
pub fn inject_conflictive(
    data: &MultiViewDataset,
    fraction: f64,
    seed: u64,
) -> Result<(MultiViewDataset, Vec<ConflictSwap>)> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::Config(format!(
            "conflictive fraction must lie in [0, 1], got {fraction}"
        )));
    }
    let count = (fraction * data.len() as f64).floor() as usize;
    let mut out = data.clone();
    if count == 0 {
        return Ok((out, Vec::new()));
    }
    let present: Vec<usize> = data
        .class_counts()
        .iter()
        .enumerate()
        .filter(|(_, c)| **c > 0)
        .map(|(k, _)| k)
        .collect();
    if present.len() < 2 {
        return Err(Error::Data(
            "conflictive noise needs samples from at least 2 classes".into(),
        ));
    }
    let by_class: Vec<Vec<usize>> = (0..data.num_classes()).map(|k| data.class_indices(k)).collect();

    let mut rng = stream_rng(seed, Stream::Conflictive, 0);
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut rng);
    let mut chosen = order[..count].to_vec();
    chosen.sort_unstable();

    let mut swaps = Vec::with_capacity(count);
    for sample in chosen {
        let own = data.labels()[sample];
        let view = rng.random_range(0..data.num_views());
        // uniform over samples of the other classes
        let others = data.len() - by_class[own].len();
        let mut pick = rng.random_range(0..others);
        let mut donor = 0;
        for (k, idx) in by_class.iter().enumerate() {
            if k == own {
                continue;
            }
            if pick < idx.len() {
                donor = idx[pick];
                break;
            }
            pick -= idx.len();
        }
        let src = data.view(view).row(donor).to_vec();
        out.views_mut()[view].row_mut(sample).copy_from_slice(&src);
        swaps.push(ConflictSwap { sample, view, donor });
    }
    Ok((out, swaps))
}
