//! Subjective-logic primitives: evidence, Dirichlet parameters, multinomial
//! opinions and their projected probabilities.
//!
//! Evidence `e` maps to a Dirichlet with `alpha_k = e_k + 1` and strength
//! `S = sum(alpha)`. The opinion carries belief `b_k = e_k / S`, uncertainty
//! `u = K / S` and a base-rate vector `a`; its projection is `P_k = b_k + a_k u`.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};

/// Tolerance for the additivity checks `sum(b) + u = 1` and `sum(a) = 1`.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// Nonnegative per-class evidence mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Evidence(Vec<f64>);

impl Evidence {
    pub fn new(masses: Vec<f64>) -> Result<Self> {
        if masses.len() < 2 {
            return Err(Error::invalid(format!(
                "evidence needs at least 2 classes, got {}",
                masses.len()
            )));
        }
        if let Some((k, m)) = masses
            .iter()
            .enumerate()
            .find(|(_, m)| !m.is_finite() || **m < 0.0)
        {
            return Err(Error::invalid(format!(
                "evidence component {k} is {m}; must be finite and >= 0"
            )));
        }
        Ok(Evidence(masses))
    }

    /// All-zero evidence for `k` classes (the vacuous opinion).
    pub fn zeros(k: usize) -> Result<Self> {
        Self::new(vec![0.0; k])
    }

    pub fn masses(&self) -> &[f64] {
        &self.0
    }

    pub fn num_classes(&self) -> usize {
        self.0.len()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Dirichlet strength `S = sum_k (e_k + 1)`.
    pub fn strength(&self) -> f64 {
        self.0.iter().sum::<f64>() + self.0.len() as f64
    }

    pub fn dirichlet(&self) -> DirichletParams {
        DirichletParams::from_evidence(self)
    }

    pub fn to_opinion(&self, base_rates: &BaseRates) -> Result<Opinion> {
        Opinion::from_evidence(self, base_rates)
    }

    /// Index of the largest mass; ties go to the lowest class id.
    pub fn argmax(&self) -> usize {
        argmax(&self.0)
    }
}

impl TryFrom<Vec<f64>> for Evidence {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Evidence::new(v)
    }
}

impl From<Evidence> for Vec<f64> {
    fn from(e: Evidence) -> Self {
        e.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DirichletParams {
    alphas: Vec<f64>,
    strength: f64,
}

impl DirichletParams {
    pub fn from_evidence(e: &Evidence) -> Self {
        let alphas: Vec<f64> = e.masses().iter().map(|m| m + 1.0).collect();
        let strength = alphas.iter().sum();
        DirichletParams { alphas, strength }
    }

    /// Builds parameters directly; every alpha must be finite and `>= 1`.
    pub fn new(alphas: Vec<f64>) -> Result<Self> {
        if alphas.len() < 2 {
            return Err(Error::invalid("dirichlet needs at least 2 classes"));
        }
        if alphas.iter().any(|a| !a.is_finite() || *a < 1.0) {
            return Err(Error::invalid(format!(
                "dirichlet parameters must be finite and >= 1, got {alphas:?}"
            )));
        }
        let strength = alphas.iter().sum();
        Ok(DirichletParams { alphas, strength })
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn strength(&self) -> f64 {
        self.strength
    }

    pub fn num_classes(&self) -> usize {
        self.alphas.len()
    }
}

/// Prior probability vector used when projecting an opinion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct BaseRates(Vec<f64>);

impl BaseRates {
    pub fn new(rates: Vec<f64>) -> Result<Self> {
        if rates.len() < 2 {
            return Err(Error::invalid("base rates need at least 2 classes"));
        }
        if rates.iter().any(|a| !a.is_finite() || *a < 0.0 || *a > 1.0) {
            return Err(Error::invalid(format!(
                "base rates must lie in [0, 1], got {rates:?}"
            )));
        }
        let sum: f64 = rates.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::invalid(format!("base rates sum to {sum}, not 1")));
        }
        Ok(BaseRates(rates))
    }

    pub fn uniform(k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::invalid("base rates need at least 2 classes"));
        }
        Ok(BaseRates(vec![1.0 / k as f64; k]))
    }

    pub fn rates(&self) -> &[f64] {
        &self.0
    }

    pub fn num_classes(&self) -> usize {
        self.0.len()
    }
}

impl TryFrom<Vec<f64>> for BaseRates {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        BaseRates::new(v)
    }
}

impl From<BaseRates> for Vec<f64> {
    fn from(b: BaseRates) -> Self {
        b.0
    }
}

/// Multinomial opinion `(b, u, a)`.
///
/// Opinions derived from finite evidence always have `u > 0`. Directly
/// constructed opinions may be dogmatic (`u = 0`); operations that divide by
/// the uncertainty reject those with [`Error::DegenerateOpinion`].
#[derive(Debug, Clone, PartialEq)]
pub struct Opinion {
    beliefs: Vec<f64>,
    uncertainty: f64,
    base_rates: BaseRates,
}

impl Opinion {
    /// Validates and builds an opinion. Invalid triples are rejected, never renormalized.
    pub fn new(beliefs: Vec<f64>, uncertainty: f64, base_rates: BaseRates) -> Result<Self> {
        check_len(base_rates.num_classes(), beliefs.len(), "opinion beliefs vs base rates")?;
        if beliefs.iter().any(|b| !b.is_finite() || *b < 0.0 || *b > 1.0) {
            return Err(Error::invalid(format!(
                "beliefs must lie in [0, 1], got {beliefs:?}"
            )));
        }
        if !uncertainty.is_finite() || !(0.0..=1.0).contains(&uncertainty) {
            return Err(Error::invalid(format!(
                "uncertainty must lie in [0, 1], got {uncertainty}"
            )));
        }
        let total = beliefs.iter().sum::<f64>() + uncertainty;
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::invalid(format!(
                "beliefs plus uncertainty sum to {total}, not 1"
            )));
        }
        Ok(Opinion {
            beliefs,
            uncertainty,
            base_rates,
        })
    }

    pub fn from_evidence(e: &Evidence, base_rates: &BaseRates) -> Result<Self> {
        check_len(base_rates.num_classes(), e.num_classes(), "evidence vs base rates")?;
        let s = e.strength();
        let beliefs = e.masses().iter().map(|m| m / s).collect();
        Ok(Opinion {
            beliefs,
            uncertainty: e.num_classes() as f64 / s,
            base_rates: base_rates.clone(),
        })
    }

    pub fn beliefs(&self) -> &[f64] {
        &self.beliefs
    }

    pub fn uncertainty(&self) -> f64 {
        self.uncertainty
    }

    pub fn base_rates(&self) -> &BaseRates {
        &self.base_rates
    }

    pub fn num_classes(&self) -> usize {
        self.beliefs.len()
    }

    /// Projected probability `P_k = b_k + a_k u`.
    pub fn project(&self) -> ProjectionProbability {
        let probs = self
            .beliefs
            .iter()
            .zip(self.base_rates.rates())
            .map(|(b, a)| b + a * self.uncertainty)
            .collect();
        ProjectionProbability(probs)
    }

    /// Inverts the evidence mapping: `S = K / u`, `e_k = b_k S`.
    pub fn to_evidence(&self) -> Result<Evidence> {
        if self.uncertainty <= 0.0 {
            return Err(Error::DegenerateOpinion(
                "zero uncertainty has no finite evidence".into(),
            ));
        }
        let s = self.num_classes() as f64 / self.uncertainty;
        Evidence::new(self.beliefs.iter().map(|b| b * s).collect())
    }

    /// Class with the largest belief; ties go to the lowest class id.
    pub fn decision(&self) -> usize {
        argmax(&self.beliefs)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionProbability(Vec<f64>);

impl ProjectionProbability {
    pub fn probs(&self) -> &[f64] {
        &self.0
    }
}

pub(crate) fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in xs.iter().enumerate().skip(1) {
        if *x > xs[best] {
            best = i;
        }
    }
    best
}
