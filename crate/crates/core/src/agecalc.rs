//! Optimal average age when source and channel alphabets coincide, and the
//! fractional-part averages it is built on.
//!
//! With the last-generated-first, no-buffer policy the slot-averaged age splits into a
//! channel term `(1 + eps) / (2 mu (1 - eps))` and a sampling term `E[frac] / lambda`,
//! where `E[frac]` is the long-run mean of the fractional parts `[i rho]`. That mean is
//! `1/2` when rho is irrational and `(l - 1) / (2 l)` when rho = m/l in lowest terms.

use num_integer::Integer;
use serde::Serialize;
use thiserror::Error;

use crate::numeric::{frac_of_product, KahanSum};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AgeCalcError {
    #[error("erasure probability {0} outside [0, 1)")]
    InvalidErasure(f64),
    #[error("average age diverges at erasure probability 1")]
    Diverges,
    #[error("rates must be positive and finite (lambda = {lambda}, mu = {mu})")]
    InvalidTiming { lambda: f64, mu: f64 },
    #[error("utilization must be positive: {0}")]
    InvalidUtilization(String),
    #[error("declared utilization {declared} does not match lambda/mu = {actual}")]
    Mismatch { declared: f64, actual: f64 },
}

/// Ratio of generation rate to channel-use rate, with its arithmetic kind declared by the
/// caller. A float is never classified as rational or irrational automatically.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Utilization {
    /// `m / l` in lowest terms, `l >= 1`.
    Rational { m: u64, l: u64 },
    DeclaredIrrational { value: f64 },
}

impl Utilization {
    /// Reduces `m / l`.
    pub fn rational(m: u64, l: u64) -> Result<Self, AgeCalcError> {
        if m == 0 || l == 0 {
            return Err(AgeCalcError::InvalidUtilization(format!("{m}/{l}")));
        }
        let g = m.gcd(&l);
        Ok(Utilization::Rational { m: m / g, l: l / g })
    }

    pub fn irrational(value: f64) -> Result<Self, AgeCalcError> {
        if !(value.is_finite() && value > 0.0) {
            return Err(AgeCalcError::InvalidUtilization(value.to_string()));
        }
        Ok(Utilization::DeclaredIrrational { value })
    }

    pub fn value(&self) -> f64 {
        match *self {
            Utilization::Rational { m, l } => m as f64 / l as f64,
            Utilization::DeclaredIrrational { value } => value,
        }
    }

    /// Checks the declared value against `lambda / mu`.
    pub fn check_against(&self, timing: &TimingSpec) -> Result<(), AgeCalcError> {
        let actual = timing.lambda / timing.mu;
        let ok = match *self {
            // m mu == l lambda, up to rounding of the rates themselves
            Utilization::Rational { m, l } => {
                let lhs = m as f64 * timing.mu;
                let rhs = l as f64 * timing.lambda;
                (lhs - rhs).abs() <= 1e-12 * lhs.abs().max(rhs.abs())
            }
            Utilization::DeclaredIrrational { value } => {
                (value - actual).abs() <= 1e-9 * actual.abs()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(AgeCalcError::Mismatch {
                declared: self.value(),
                actual,
            })
        }
    }
}

/// Message generation rate `lambda` and channel-use rate `mu`, both per second.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TimingSpec {
    pub lambda: f64,
    pub mu: f64,
}

impl TimingSpec {
    pub fn new(lambda: f64, mu: f64) -> Result<Self, AgeCalcError> {
        let valid = |x: f64| x.is_finite() && x > 0.0;
        if !valid(lambda) || !valid(mu) {
            return Err(AgeCalcError::InvalidTiming { lambda, mu });
        }
        Ok(Self { lambda, mu })
    }

    /// Source period `T_s`.
    pub fn source_period(&self) -> f64 {
        1.0 / self.lambda
    }

    /// Channel period `T_c`.
    pub fn channel_period(&self) -> f64 {
        1.0 / self.mu
    }
}

pub(crate) fn check_erasure(eps: f64) -> Result<(), AgeCalcError> {
    if eps == 1.0 {
        return Err(AgeCalcError::Diverges);
    }
    if !(0.0..1.0).contains(&eps) {
        return Err(AgeCalcError::InvalidErasure(eps));
    }
    Ok(())
}

/// Closed-form optimal average age (seconds) for equal source and channel alphabets.
pub fn optimal_age_same_alphabet(
    eps: f64,
    timing: &TimingSpec,
    rho: &Utilization,
) -> Result<f64, AgeCalcError> {
    check_erasure(eps)?;
    rho.check_against(timing)?;
    let channel = (1.0 + eps) / (2.0 * timing.mu * (1.0 - eps));
    Ok(fractional_limit(rho) / timing.lambda + channel)
}

/// Long-run mean of the fractional parts `[i rho]`.
pub fn fractional_limit(rho: &Utilization) -> f64 {
    match *rho {
        Utilization::Rational { l, .. } => (l - 1) as f64 / (2 * l) as f64,
        Utilization::DeclaredIrrational { .. } => 0.5,
    }
}

/// Multiplier for an empirical fractional-part average.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Alpha {
    /// Exact `m / l`; fractional parts are computed in integer arithmetic.
    Rational { m: u64, l: u64 },
    Real(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FractionalMean {
    pub mean: f64,
    pub terms: u64,
    /// Visit counts of `x / l` for `x = 0 .. l-1`; present only for exact rationals.
    pub histogram: Option<Vec<u64>>,
}

/// Average of `[i alpha]` over `i = 0 .. terms-1` with compensated summation.
pub fn fractional_mean_empirical(alpha: Alpha, terms: u64) -> FractionalMean {
    let terms = terms.max(1);
    let mut sum = KahanSum::new();
    let histogram = match alpha {
        Alpha::Rational { m, l } => {
            let g = m.gcd(&l).max(1);
            let (m, l) = (m / g, (l / g).max(1));
            let mut hist = vec![0u64; l as usize];
            // residue of i m mod l, stepped incrementally
            let step = m % l;
            let mut r = 0u64;
            for _ in 0..terms {
                hist[r as usize] += 1;
                sum.add(r as f64 / l as f64);
                r += step;
                if r >= l {
                    r -= l;
                }
            }
            Some(hist)
        }
        Alpha::Real(a) => {
            for i in 0..terms {
                sum.add(frac_of_product(a, i as f64));
            }
            None
        }
    };
    FractionalMean {
        mean: sum.value() / terms as f64,
        terms,
        histogram,
    }
}

/// Visit counts of the lattice `{0, 1/l, .., (l-1)/l}` by `[i m / l]` for
/// `i = start .. start+len-1`.
pub fn lattice_histogram(m: u64, l: u64, start: u64, len: u64) -> Vec<u64> {
    let mut hist = vec![0u64; l as usize];
    for i in start..start + len {
        hist[((i as u128 * m as u128) % l as u128) as usize] += 1;
    }
    hist
}
