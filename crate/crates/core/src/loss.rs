//! Evidential losses on a Dirichlet `alpha = e + 1`.
//!
//! * adjusted cross-entropy: `sum_k y_k (psi(S) - psi(alpha_k))`
//! * KL regularizer: `KL[Dir(alpha~) || Dir(1)]` where `alpha~` masks the
//!   true-class parameter to 1, so only misleading evidence is penalized
//! * total: `ace + lambda_t * kl` with `lambda_t = min(1, t / T)`
//!
//! Labels are passed as class indices; they stand for the one-hot vector `y`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::opinion::{DirichletParams, Evidence};
use crate::special::{digamma_unchecked, log_gamma_unchecked, trigamma_unchecked};

/// Annealing schedule position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LossConfig {
    /// Epochs over which the KL weight ramps from 0 to 1.
    pub anneal_epochs: usize,
    pub current_epoch: usize,
}

impl LossConfig {
    pub fn new(anneal_epochs: usize, current_epoch: usize) -> Result<Self> {
        if anneal_epochs == 0 {
            return Err(Error::Config("anneal_epochs must be positive".into()));
        }
        Ok(LossConfig {
            anneal_epochs,
            current_epoch,
        })
    }

    pub fn at_epoch(self, epoch: usize) -> Self {
        LossConfig {
            current_epoch: epoch,
            ..self
        }
    }

    /// `lambda_t = min(1, t / T)`.
    pub fn lambda(&self) -> f64 {
        (self.current_epoch as f64 / self.anneal_epochs as f64).min(1.0)
    }
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            anneal_epochs: 10,
            current_epoch: 0,
        }
    }
}

/// Dirichlet parameters with the true-class slot set to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjustedAlphas(Vec<f64>);

impl AdjustedAlphas {
    pub fn new(alphas: &DirichletParams, label: usize) -> Result<Self> {
        check_label(label, alphas.num_classes())?;
        let mut tilde = alphas.alphas().to_vec();
        tilde[label] = 1.0;
        Ok(AdjustedAlphas(tilde))
    }

    pub fn alphas(&self) -> &[f64] {
        &self.0
    }
}

fn check_label(label: usize, k: usize) -> Result<()> {
    if label >= k {
        return Err(Error::invalid(format!("label {label} out of range for {k} classes")));
    }
    Ok(())
}

pub fn loss_ace(alphas: &DirichletParams, label: usize) -> Result<f64> {
    check_label(label, alphas.num_classes())?;
    Ok(ace(alphas.alphas(), label))
}

pub fn loss_kl(alphas: &DirichletParams, label: usize) -> Result<f64> {
    let tilde = AdjustedAlphas::new(alphas, label)?;
    Ok(kl_to_uniform(tilde.alphas()))
}

pub fn loss_total(alphas: &DirichletParams, label: usize, cfg: &LossConfig) -> Result<f64> {
    check_label(label, alphas.num_classes())?;
    Ok(total_and_grad(alphas.alphas(), label, cfg.lambda(), None))
}

/// Gradient of [`loss_total`] with respect to the evidence (`d alpha / d e = 1`).
pub fn loss_grad_evidence(e: &Evidence, label: usize, cfg: &LossConfig) -> Result<Vec<f64>> {
    check_label(label, e.num_classes())?;
    let alphas: Vec<f64> = e.masses().iter().map(|m| m + 1.0).collect();
    let mut grad = vec![0.0; alphas.len()];
    total_and_grad(&alphas, label, cfg.lambda(), Some(&mut grad));
    Ok(grad)
}

fn ace(alphas: &[f64], label: usize) -> f64 {
    let s: f64 = alphas.iter().sum();
    digamma_unchecked(s) - digamma_unchecked(alphas[label])
}

fn kl_to_uniform(tilde: &[f64]) -> f64 {
    let k = tilde.len() as f64;
    let s: f64 = tilde.iter().sum();
    let psi_s = digamma_unchecked(s);
    let mut kl = log_gamma_unchecked(s) - log_gamma_unchecked(k);
    // alpha = 1 slots contribute ln Gamma(1) = 0 and a zero second term.
    for &a in tilde.iter().filter(|a| **a != 1.0) {
        kl += (a - 1.0) * (digamma_unchecked(a) - psi_s) - log_gamma_unchecked(a);
    }
    // Rounding can leave a tiny negative value at the minimum.
    kl.max(0.0)
}

/// Loss for one Dirichlet, optionally accumulating `d loss / d alpha` into `grad`.
///
/// `d ace / d alpha_j = psi'(S) - [j = y] psi'(alpha_y)`
/// `d kl / d alpha_j = (alpha~_j - 1) psi'(alpha~_j) - (S~ - K) psi'(S~)` for `j != y`, 0 for `j = y`.
pub(crate) fn total_and_grad(
    alphas: &[f64],
    label: usize,
    lambda: f64,
    grad: Option<&mut [f64]>,
) -> f64 {
    let k = alphas.len();
    let s: f64 = alphas.iter().sum();
    let mut loss = digamma_unchecked(s) - digamma_unchecked(alphas[label]);

    let s_tilde = s - alphas[label] + 1.0;
    if lambda > 0.0 {
        let mut tilde = alphas.to_vec();
        tilde[label] = 1.0;
        loss += lambda * kl_to_uniform(&tilde);
    }

    if let Some(g) = grad {
        let tri_s = trigamma_unchecked(s);
        let kl_common = if lambda > 0.0 {
            (s_tilde - k as f64) * trigamma_unchecked(s_tilde)
        } else {
            0.0
        };
        for (j, gj) in g.iter_mut().enumerate() {
            let mut d = tri_s;
            if j == label {
                d -= trigamma_unchecked(alphas[j]);
            } else if lambda > 0.0 {
                let a = alphas[j];
                d += lambda * ((a - 1.0) * trigamma_unchecked(a) - kl_common);
            }
            *gj += d;
        }
    }
    loss
}
