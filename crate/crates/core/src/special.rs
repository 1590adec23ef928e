//! Digamma, trigamma and log-gamma for positive real arguments.
//!
//! Digamma and trigamma shift the argument upward with their recurrences
//! until `x >= 10` and then apply the asymptotic series. Log-gamma uses the
//! Lanczos approximation (g = 7, 9 terms) with reflection below 1/2.

use std::f64::consts::PI;

use crate::error::{Error, Result};

const ASYMPTOTIC_FROM: f64 = 10.0;

/// B_{2k} / (2k) for k = 1..7.
const DIGAMMA_SERIES: [f64; 7] = [
    1.0 / 12.0,
    -1.0 / 120.0,
    1.0 / 252.0,
    -1.0 / 240.0,
    1.0 / 132.0,
    -691.0 / 32760.0,
    1.0 / 12.0,
];

/// B_{2k} for k = 1..7.
const BERNOULLI_EVEN: [f64; 7] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
];

const LANCZOS_G: f64 = 7.0;
#[allow(clippy::excessive_precision)]
const LANCZOS_COEF: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

fn check_domain(x: f64, name: &str) -> Result<()> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("{name} requires x > 0, got {x}")))
    }
}

/// Digamma `psi(x) = d/dx ln Gamma(x)` for `x > 0`.
pub fn digamma(x: f64) -> Result<f64> {
    check_domain(x, "digamma")?;
    Ok(digamma_unchecked(x))
}

pub(crate) fn digamma_unchecked(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < ASYMPTOTIC_FROM {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let inv2 = 1.0 / (x * x);
    let mut term = inv2;
    let mut tail = 0.0;
    for c in DIGAMMA_SERIES {
        tail += c * term;
        term *= inv2;
    }
    acc + x.ln() - 0.5 / x - tail
}

/// Trigamma `psi'(x)` for `x > 0`. Needed for analytic loss gradients.
pub fn trigamma(x: f64) -> Result<f64> {
    check_domain(x, "trigamma")?;
    Ok(trigamma_unchecked(x))
}

pub(crate) fn trigamma_unchecked(mut x: f64) -> f64 {
    let mut acc = 0.0;
    while x < ASYMPTOTIC_FROM {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    // psi'(x) ~ 1/x + 1/(2x^2) + sum_k B_2k / x^(2k+1)
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let mut term = inv * inv2;
    let mut series = inv + 0.5 * inv2;
    for b in BERNOULLI_EVEN {
        series += b * term;
        term *= inv2;
    }
    acc + series
}

/// Natural log of the gamma function for `x > 0`.
pub fn log_gamma(x: f64) -> Result<f64> {
    check_domain(x, "log_gamma")?;
    Ok(log_gamma_unchecked(x))
}

pub(crate) fn log_gamma_unchecked(x: f64) -> f64 {
    if x < 0.5 {
        // Gamma(x) Gamma(1 - x) = pi / sin(pi x)
        return PI.ln() - (PI * x).sin().ln() - log_gamma_unchecked(1.0 - x);
    }
    let z = x - 1.0;
    let mut sum = LANCZOS_COEF[0];
    for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        sum += c / (z + i as f64);
    }
    let t = z + LANCZOS_G + 0.5;
    0.5 * (2.0 * PI).ln() + (z + 0.5) * t.ln() - t + sum.ln()
}
