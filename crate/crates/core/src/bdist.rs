//! Law of the decode count `B`: channel uses until a receiver holds `k` linearly
//! independent coded symbols of one packet.
//!
//! The receiver's rank is an absorbing birth chain on `{0, .., k}` that moves from `s` to
//! `s + 1` with probability
//!
//! ```text
//! p_s = (1 - eps) (q^k - q^s) / (q^k - 1)
//! ```
//!
//! so `B` is a sum of independent geometrics `L_s ~ Geom(p_s)`. The pmf is computed by
//! propagating the chain's transient mass forward; the mass still transient after `x`
//! steps is exactly `P(B > x)`, which gives the tail without cancellation.

use std::sync::Arc;

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::agecalc::{check_erasure, AgeCalcError};
use crate::galois::FieldSpec;
use crate::numeric::KahanSum;

/// Default residual-mass target for truncating the pmf.
pub const DEFAULT_TAIL_TARGET: f64 = 1e-12;
/// Hard cap on the truncation point.
pub const MAX_SUPPORT: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DistError {
    #[error("erasure probability {0} outside [0, 1)")]
    InvalidErasure(f64),
    #[error("erasure probability 1: the rank chain never absorbs")]
    Diverges,
    #[error("alphabet size q = {0} must be at least 2")]
    InvalidAlphabet(u64),
    #[error("message dimension k must be at least 1")]
    InvalidDimension,
    #[error("state {s} outside [0, {k})")]
    StateOutOfRange { s: u32, k: u32 },
    #[error("blocklength n = {n} is smaller than k = {k}")]
    ShortBlock { n: usize, k: u32 },
    #[error("MGF argument {t} is outside the convergence region t < {radius}")]
    MgfDiverges { t: f64, radius: f64 },
    #[error("P(B <= {n}) is zero; no packet can be decoded")]
    NoSuccess { n: usize },
    #[error("invalid negative binomial parameters (count {count}, success probability {p})")]
    InvalidNegBin { count: u32, p: f64 },
    #[error("invalid geometric success probability {0}")]
    InvalidGeometric(f64),
}

impl From<AgeCalcError> for DistError {
    fn from(e: AgeCalcError) -> Self {
        match e {
            AgeCalcError::InvalidErasure(x) => DistError::InvalidErasure(x),
            _ => DistError::Diverges,
        }
    }
}

/// An `(n, k)` random linear scheme over a finite field.
#[derive(Debug, Clone, PartialEq)]
pub struct CodeSpec {
    pub n: usize,
    pub k: usize,
    pub field: Arc<FieldSpec>,
}

impl CodeSpec {
    pub fn new(n: usize, k: usize, field: Arc<FieldSpec>) -> Result<Self, DistError> {
        if k == 0 {
            return Err(DistError::InvalidDimension);
        }
        if n < k {
            return Err(DistError::ShortBlock { n, k: k as u32 });
        }
        Ok(Self { n, k, field })
    }

    pub fn q(&self) -> u64 {
        self.field.q() as u64
    }
}

fn check(k: u32, q: u64, eps: f64) -> Result<(), DistError> {
    check_erasure(eps)?;
    if q < 2 {
        return Err(DistError::InvalidAlphabet(q));
    }
    if k == 0 {
        return Err(DistError::InvalidDimension);
    }
    Ok(())
}

/// `p_s`, the probability of moving from rank `s` to `s + 1` in one channel use.
pub fn jump_prob(s: u32, k: u32, q: u64, eps: f64) -> Result<f64, DistError> {
    check(k, q, eps)?;
    if s >= k {
        return Err(DistError::StateOutOfRange { s, k });
    }
    Ok(jump_prob_unchecked(s, k, q, eps))
}

// (q^k - q^s)/(q^k - 1) written in negative powers so large q^k cannot overflow
fn jump_prob_unchecked(s: u32, k: u32, q: u64, eps: f64) -> f64 {
    let qf = q as f64;
    let num = 1.0 - qf.powi(s as i32 - k as i32);
    let den = 1.0 - qf.powi(-(k as i32));
    (1.0 - eps) * (num / den)
}

/// All jump probabilities `p_0 .. p_{k-1}`.
pub fn jump_probs(k: u32, q: u64, eps: f64) -> Result<Vec<f64>, DistError> {
    check(k, q, eps)?;
    Ok((0..k).map(|s| jump_prob_unchecked(s, k, q, eps)).collect())
}

/// Truncated law of `B`.
#[derive(Debug, Clone, Serialize)]
pub struct BDistribution {
    k: u32,
    q: u64,
    eps: f64,
    /// `pmf[x] = P(B = x)` for `x = 0 ..= x_max`.
    pmf: Vec<f64>,
    /// `survival[x] = P(B > x)`.
    survival: Vec<f64>,
    /// `cdf[x] = P(B <= x)`, compensated prefix sums of `pmf`.
    cdf: Vec<f64>,
    tail_bound: f64,
    mean: f64,
}

impl BDistribution {
    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Largest `x` with a stored probability.
    pub fn x_max(&self) -> usize {
        self.pmf.len() - 1
    }

    pub fn pmf(&self, x: usize) -> f64 {
        self.pmf.get(x).copied().unwrap_or(0.0)
    }

    pub fn pmf_slice(&self) -> &[f64] {
        &self.pmf
    }

    /// Upper bound on `P(B > x_max)`.
    pub fn tail_bound(&self) -> f64 {
        self.tail_bound
    }

    /// `E[B]` from the closed form.
    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// `P(B <= x)`; beyond `x_max` this is a lower estimate off by at most `tail_bound`.
    pub fn cdf(&self, x: usize) -> f64 {
        self.cdf[x.min(self.x_max())]
    }

    /// `P(B > x)`; beyond `x_max` the stored tail bound is returned.
    pub fn survival(&self, x: usize) -> f64 {
        if x <= self.x_max() {
            self.survival[x]
        } else {
            self.tail_bound
        }
    }

    /// Pmf-weighted mean over the stored support.
    pub fn pmf_mean(&self) -> f64 {
        let mut s = KahanSum::new();
        for (x, &p) in self.pmf.iter().enumerate() {
            s.add(x as f64 * p);
        }
        s.value()
    }

    /// `E[B 1{B <= n}]`.
    pub fn partial_first_moment(&self, n: usize) -> f64 {
        let mut s = KahanSum::new();
        for (x, &p) in self.pmf.iter().enumerate().take(n.min(self.x_max()) + 1) {
            s.add(x as f64 * p);
        }
        s.value()
    }
}

/// Law of `B` truncated once the residual chain mass drops below `tail_target`.
pub fn b_pmf(k: u32, q: u64, eps: f64, tail_target: f64) -> Result<BDistribution, DistError> {
    b_pmf_covering(k, q, eps, tail_target, 0)
}

/// Like [`b_pmf`], but the support always extends at least to `min_support`, so
/// quantities at a blocklength `n <= min_support` are exact rather than tail-bounded.
pub fn b_pmf_covering(
    k: u32,
    q: u64,
    eps: f64,
    tail_target: f64,
    min_support: usize,
) -> Result<BDistribution, DistError> {
    check(k, q, eps)?;
    let probs = jump_probs(k, q, eps)?;
    let ks = k as usize;
    let mut mass = vec![0.0f64; ks];
    mass[0] = 1.0;
    let mut next = vec![0.0f64; ks];
    let mut pmf = vec![0.0];
    let mut survival = vec![1.0];
    let cap = MAX_SUPPORT.max(min_support);
    loop {
        let x = pmf.len();
        let absorbed = mass[ks - 1] * probs[ks - 1];
        next[0] = mass[0] * (1.0 - probs[0]);
        for s in 1..ks {
            next[s] = mass[s] * (1.0 - probs[s]) + mass[s - 1] * probs[s - 1];
        }
        std::mem::swap(&mut mass, &mut next);
        let residual: f64 = mass.iter().copied().collect::<KahanSum>().value();
        pmf.push(absorbed);
        survival.push(residual);
        if (x >= min_support && x >= ks && residual <= tail_target) || x >= cap {
            break;
        }
    }
    let mut acc = KahanSum::new();
    let cdf = pmf
        .iter()
        .map(|&p| {
            acc.add(p);
            acc.value()
        })
        .collect::<Vec<_>>();
    let last = *survival.last().expect("non-empty");
    let tail_bound = last.max(1.0 - cdf.last().copied().unwrap_or(0.0)).max(0.0);
    Ok(BDistribution {
        k,
        q,
        eps,
        pmf,
        survival,
        cdf,
        tail_bound,
        mean: b_mean(k, q, eps)?,
    })
}

/// Moment generating function `E[e^{tB}]`.
pub fn b_mgf(t: f64, k: u32, q: u64, eps: f64) -> Result<f64, DistError> {
    let probs = jump_probs(k, q, eps)?;
    let slowest = probs[k as usize - 1];
    let radius = if slowest >= 1.0 {
        f64::INFINITY
    } else {
        -(1.0 - slowest).ln()
    };
    if !(t < radius) {
        return Err(DistError::MgfDiverges { t, radius });
    }
    let et = t.exp();
    Ok(probs
        .iter()
        .map(|&p| p * et / (1.0 - (1.0 - p) * et))
        .product())
}

/// `E[B] = (q^k - 1)/(1 - eps) * sum_s 1/(q^k - q^s)`.
pub fn b_mean(k: u32, q: u64, eps: f64) -> Result<f64, DistError> {
    check(k, q, eps)?;
    let exact_powers = (0..=k).try_fold(1u128, |acc, _| acc.checked_mul(q as u128));
    let value = match exact_powers {
        Some(_) => {
            let qk = (q as u128).pow(k);
            let sum: f64 = (0..k)
                .map(|s| 1.0 / (qk - (q as u128).pow(s)) as f64)
                .collect::<KahanSum>()
                .value();
            (qk - 1) as f64 * sum / (1.0 - eps)
        }
        None => {
            let qf = q as f64;
            let scale = 1.0 - qf.powi(-(k as i32));
            (0..k)
                .map(|s| scale / (1.0 - qf.powi(s as i32 - k as i32)))
                .collect::<KahanSum>()
                .value()
                / (1.0 - eps)
        }
    };
    debug_assert!({
        let alt = b_mean_from_jumps(k, q, eps).unwrap();
        (alt - value).abs() <= 1e-12 * value
    });
    Ok(value)
}

/// `E[B] = sum_s 1/p_s`.
pub fn b_mean_from_jumps(k: u32, q: u64, eps: f64) -> Result<f64, DistError> {
    Ok(jump_probs(k, q, eps)?
        .into_iter()
        .map(|p| 1.0 / p)
        .collect::<KahanSum>()
        .value())
}

/// Packet erasure probability `P(B > n)` with the truncation slack that applies to it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErasureProb {
    pub value: f64,
    /// Width of the interval `[value, value + tail_width]` known to contain the true value.
    pub tail_width: f64,
    /// `false` when `n < k`: no packet can ever be decoded.
    pub decodable: bool,
}

pub fn packet_erasure_prob(n: usize, dist: &BDistribution) -> ErasureProb {
    if n < dist.k as usize {
        return ErasureProb {
            value: 1.0,
            tail_width: 0.0,
            decodable: false,
        };
    }
    if n <= dist.x_max() {
        ErasureProb {
            value: dist.survival[n],
            tail_width: 0.0,
            decodable: true,
        }
    } else {
        ErasureProb {
            value: 0.0,
            tail_width: dist.tail_bound,
            decodable: true,
        }
    }
}

/// `E[T] = E[B 1{B <= n}] / P(B <= n)`: mean decode delay of a successful packet.
pub fn expected_decode_delay(n: usize, dist: &BDistribution) -> Result<f64, DistError> {
    if n < dist.k as usize {
        return Err(DistError::ShortBlock { n, k: dist.k });
    }
    let success = dist.cdf(n);
    if success <= 0.0 {
        return Err(DistError::NoSuccess { n });
    }
    let mean = dist.partial_first_moment(n) / success;
    Ok(mean.clamp(dist.k as f64, n as f64))
}

/// Geometric law on `{1, 2, ..}` with success probability `success_prob`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeometricSpec {
    pub success_prob: f64,
}

impl GeometricSpec {
    pub fn new(success_prob: f64) -> Result<Self, DistError> {
        if !(success_prob > 0.0 && success_prob <= 1.0) {
            return Err(DistError::InvalidGeometric(success_prob));
        }
        Ok(Self { success_prob })
    }

    pub fn pmf(&self, x: u64) -> f64 {
        if x == 0 {
            return 0.0;
        }
        (1.0 - self.success_prob).powi((x - 1) as i32) * self.success_prob
    }

    pub fn mean(&self) -> f64 {
        1.0 / self.success_prob
    }

    /// Inverse-transform sample.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        if self.success_prob >= 1.0 {
            return 1;
        }
        // u in (0, 1]
        let u: f64 = 1.0 - rng.gen::<f64>();
        let x = (u.ln() / (1.0 - self.success_prob).ln()).ceil();
        if x < 1.0 {
            1
        } else if x >= u64::MAX as f64 {
            u64::MAX
        } else {
            x as u64
        }
    }
}

/// Sum of `count` i.i.d. geometrics with a shared success probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NegBinSpec {
    pub count: u32,
    pub success_prob: f64,
}

impl NegBinSpec {
    pub fn new(count: u32, success_prob: f64) -> Result<Self, DistError> {
        if count == 0 || !(success_prob > 0.0 && success_prob <= 1.0) {
            return Err(DistError::InvalidNegBin {
                count,
                p: success_prob,
            });
        }
        Ok(Self {
            count,
            success_prob,
        })
    }

    pub fn mean(&self) -> f64 {
        self.count as f64 / self.success_prob
    }

    fn ln_pmf_start(&self) -> f64 {
        self.count as f64 * self.success_prob.ln()
    }
}

fn ln_binomial(n: u64, r: u64) -> f64 {
    let r = r.min(n - r);
    (1..=r)
        .map(|i| ((n - r + i) as f64 / i as f64).ln())
        .collect::<KahanSum>()
        .value()
}

/// `P(X = x) = C(x-1, c-1) p^c (1-p)^(x-c)`, evaluated in log space.
pub fn negbin_pmf(spec: &NegBinSpec, x: u64) -> f64 {
    let c = spec.count as u64;
    if x < c {
        return 0.0;
    }
    let p = spec.success_prob;
    if x == c {
        return spec.ln_pmf_start().exp();
    }
    if p >= 1.0 {
        return 0.0;
    }
    (ln_binomial(x - 1, c - 1) + spec.ln_pmf_start() + (x - c) as f64 * (1.0 - p).ln()).exp()
}

/// `P(X <= x)` by forward summation of the pmf recurrence
/// `P(X = y+1) = P(X = y) * y/(y - c + 1) * (1 - p)`, carried in log space.
pub fn negbin_cdf(spec: &NegBinSpec, x: u64) -> f64 {
    let c = spec.count as u64;
    if x < c {
        return 0.0;
    }
    let p = spec.success_prob;
    if p >= 1.0 {
        return 1.0;
    }
    let ln_fail = (1.0 - p).ln();
    let mut ln_term = spec.ln_pmf_start();
    let mut sum = KahanSum::new();
    sum.add(ln_term.exp());
    for y in c..x {
        ln_term += (y as f64 / (y - c + 1) as f64).ln() + ln_fail;
        sum.add(ln_term.exp());
    }
    sum.value().min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1e-300)
    }

    #[test]
    fn jump_prob_examples() {
        for (k, q, eps) in [(1, 2, 0.0), (3, 5, 0.3), (7, 256, 0.9)] {
            assert_eq!(jump_prob(0, k, q, eps).unwrap(), 1.0 - eps);
        }
        assert!(close(jump_prob(1, 2, 2, 0.0).unwrap(), 2.0 / 3.0, 1e-15));
        let big = jump_prob(2, 3, 1 << 16, 0.3).unwrap();
        assert!((big - 0.7).abs() < 1e-4);
        assert_eq!(
            jump_prob(3, 3, 5, 0.1),
            Err(DistError::StateOutOfRange { s: 3, k: 3 })
        );
        assert_eq!(jump_prob(0, 3, 5, 1.0), Err(DistError::Diverges));
        assert_eq!(jump_prob(0, 3, 1, 0.0), Err(DistError::InvalidAlphabet(1)));
    }

    #[test]
    fn geometric_when_k_is_one() {
        let eps = 0.37;
        let d = b_pmf(1, 7, eps, DEFAULT_TAIL_TARGET).unwrap();
        for x in 1..25 {
            assert!(close(d.pmf(x), eps.powi(x as i32 - 1) * (1.0 - eps), 1e-12));
        }
        assert_eq!(d.pmf(0), 0.0);
    }

    #[test]
    fn hand_convolution_k2_q2() {
        let d = b_pmf(2, 2, 0.0, DEFAULT_TAIL_TARGET).unwrap();
        assert_eq!(d.pmf(1), 0.0);
        assert!(close(d.pmf(2), 2.0 / 3.0, 1e-15));
        assert!(close(d.pmf(3), 2.0 / 9.0, 1e-15));
        assert!(close(d.pmf(4), 2.0 / 27.0, 1e-15));
        assert!(d.cdf(d.x_max()) >= 1.0 - 1e-12);
        assert!(d.tail_bound() <= 1e-12);
    }

    #[test]
    fn truncation_contract() {
        for (k, q, eps) in [(1, 2, 0.0), (3, 5, 0.3), (3, 25, 0.8), (6, 2, 0.5), (4, 256, 0.95)] {
            let d = b_pmf(k, q, eps, DEFAULT_TAIL_TARGET).unwrap();
            assert!(d.cdf(d.x_max()) >= 1.0 - 1e-12, "({k},{q},{eps})");
            assert!(1.0 - d.cdf(d.x_max()) <= d.tail_bound() + 1e-15);
            assert!(d.pmf_slice()[..k as usize].iter().all(|&p| p == 0.0));
            assert!(d.pmf_slice().iter().all(|&p| p >= 0.0));
        }
        assert_eq!(b_pmf(2, 2, 1.0, 1e-12).unwrap_err(), DistError::Diverges);
    }

    #[test]
    fn mgf_examples() {
        assert!(close(b_mgf(0.0, 3, 5, 0.3).unwrap(), 1.0, 1e-15));
        let eps = 0.4;
        let t: f64 = 0.2;
        let geo = (1.0 - eps) * t.exp() / (1.0 - eps * t.exp());
        assert!(close(b_mgf(t, 1, 3, eps).unwrap(), geo, 1e-14));
        // finite-difference derivative at 0 reproduces the mean
        for (k, q, eps) in [(2, 2, 0.0), (3, 5, 0.3), (4, 25, 0.6)] {
            let h = 1e-6;
            let d = (b_mgf(h, k, q, eps).unwrap() - b_mgf(-h, k, q, eps).unwrap()) / (2.0 * h);
            assert!(close(d, b_mean(k, q, eps).unwrap(), 1e-6));
        }
        let radius = -(1.0 - jump_prob(2, 3, 5, 0.3).unwrap()).ln();
        assert!(matches!(b_mgf(radius, 3, 5, 0.3), Err(DistError::MgfDiverges { .. })));
    }

    #[test]
    fn mgf_matches_truncated_pmf() {
        let (k, q, eps) = (3, 5, 0.3);
        let d = b_pmf(k, q, eps, 1e-15).unwrap();
        let t = 0.05;
        let direct: f64 = (0..=d.x_max()).map(|x| (t * x as f64).exp() * d.pmf(x)).sum();
        assert!(close(direct, b_mgf(t, k, q, eps).unwrap(), 1e-10));
    }

    #[test]
    fn mean_examples() {
        assert_eq!(b_mean(1, 2, 0.0).unwrap(), 1.0);
        assert!(close(b_mean(2, 2, 0.0).unwrap(), 2.5, 1e-15));
        let m = b_mean(3, 5, 0.3).unwrap();
        let d = b_pmf(3, 5, 0.3, DEFAULT_TAIL_TARGET).unwrap();
        assert!(close(d.pmf_mean(), m, 1e-9));
        assert!(close(b_mean_from_jumps(3, 5, 0.3).unwrap(), m, 1e-12));
        // overflow path for q^k
        let big = b_mean(5, 1 << 16, 0.2).unwrap();
        assert!(close(big, b_mean_from_jumps(5, 1 << 16, 0.2).unwrap(), 1e-12));
    }

    #[test]
    fn erasure_and_delay_examples() {
        let d = b_pmf(2, 2, 0.0, DEFAULT_TAIL_TARGET).unwrap();
        assert!(close(packet_erasure_prob(3, &d).value, 1.0 / 9.0, 1e-14));
        assert!(close(packet_erasure_prob(2, &d).value, 1.0 / 3.0, 1e-14));
        let far = packet_erasure_prob(d.x_max() + 10, &d);
        assert!(far.value + far.tail_width <= 1e-12);
        let short = packet_erasure_prob(1, &d);
        assert!(!short.decodable && short.value == 1.0);

        assert!(close(expected_decode_delay(3, &d).unwrap(), 2.25, 1e-14));
        let g = b_pmf(1, 3, 0.0, DEFAULT_TAIL_TARGET).unwrap();
        for n in 1..6 {
            assert_eq!(expected_decode_delay(n, &g).unwrap(), 1.0);
        }
        assert!(matches!(expected_decode_delay(1, &d), Err(DistError::ShortBlock { .. })));
    }

    #[test]
    fn covering_extends_support() {
        let d = b_pmf_covering(2, 5, 0.0, DEFAULT_TAIL_TARGET, 500).unwrap();
        assert!(d.x_max() >= 500);
    }

    // Constant-probability chain: k states all jumping with probability p.
    fn constant_chain_pmf(k: usize, p: f64, upto: usize) -> Vec<f64> {
        let mut mass = vec![0.0; k];
        mass[0] = 1.0;
        let mut out = vec![0.0];
        for _ in 1..=upto {
            out.push(mass[k - 1] * p);
            for s in (1..k).rev() {
                mass[s] = mass[s] * (1.0 - p) + mass[s - 1] * p;
            }
            mass[0] *= 1.0 - p;
        }
        out
    }

    #[test]
    fn negbin_examples() {
        let geo = NegBinSpec::new(1, 0.3).unwrap();
        for x in 1..20 {
            assert!(close(negbin_pmf(&geo, x), GeometricSpec::new(0.3).unwrap().pmf(x), 1e-13));
        }
        let (k, eps) = (4u32, 0.35);
        let nb = NegBinSpec::new(k, 1.0 - eps).unwrap();
        assert!(close(negbin_pmf(&nb, k as u64), (1.0 - eps).powi(k as i32), 1e-14));
        assert_eq!(negbin_pmf(&nb, 3), 0.0);
        assert_eq!(negbin_cdf(&nb, 3), 0.0);
        let oracle = constant_chain_pmf(k as usize, 1.0 - eps, 60);
        let mut cum = 0.0;
        for x in 0..=60u64 {
            assert!((negbin_pmf(&nb, x) - oracle[x as usize]).abs() < 1e-14);
            cum += oracle[x as usize];
            assert!((negbin_cdf(&nb, x) - cum).abs() < 1e-13);
        }
        assert!(NegBinSpec::new(0, 0.5).is_err());
        assert!(NegBinSpec::new(2, 0.0).is_err());
        let sure = NegBinSpec::new(3, 1.0).unwrap();
        assert_eq!(negbin_pmf(&sure, 3), 1.0);
        assert_eq!(negbin_pmf(&sure, 4), 0.0);
        assert_eq!(negbin_cdf(&sure, 3), 1.0);
    }

    #[test]
    fn negbin_is_stable_far_in_the_tail() {
        let nb = NegBinSpec::new(3, 0.001).unwrap();
        let v = negbin_pmf(&nb, 100_000);
        assert!(v.is_finite() && v > 0.0);
        assert!(negbin_cdf(&nb, 100_000) <= 1.0);
    }

    #[test]
    fn geometric_sampler_mean() {
        let g = GeometricSpec::new(0.25).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 200_000;
        let mean = (0..n).map(|_| g.sample(&mut rng) as f64).sum::<f64>() / n as f64;
        let sd = (0.75f64).sqrt() / 0.25 / (n as f64).sqrt();
        assert!((mean - 4.0).abs() < 4.0 * sd);
        assert_eq!(GeometricSpec::new(1.0).unwrap().sample(&mut rng), 1);
    }

    proptest! {
        #[test]
        fn jump_probs_never_increase(k in 2u32..10, q in 2u64..300, eps in 0.0f64..0.99) {
            let p = jump_probs(k, q, eps).unwrap();
            for w in p.windows(2) {
                // adjacent values can round to the same double when q^k is huge
                prop_assert!(w[0] >= w[1]);
            }
            prop_assert!(p.iter().all(|&x| x > 0.0 && x <= 1.0 - eps));
        }

        #[test]
        fn erasure_prob_monotone(k in 1u32..5, q in 2u64..30, e1 in 0.0f64..0.9, e2 in 0.0f64..0.9) {
            let (lo, hi) = if e1 <= e2 { (e1, e2) } else { (e2, e1) };
            let a = b_pmf_covering(k, q, lo, 1e-12, 60).unwrap();
            let b = b_pmf_covering(k, q, hi, 1e-12, 60).unwrap();
            for n in k as usize..60 {
                let (pa, pb) = (packet_erasure_prob(n, &a).value, packet_erasure_prob(n, &b).value);
                prop_assert!(pa <= pb + 1e-15);
                prop_assert!(packet_erasure_prob(n + 1, &a).value <= pa);
            }
        }

        #[test]
        fn mean_forms_agree(k in 1u32..12, q in 2u64..1000, eps in 0.0f64..0.99) {
            let a = b_mean(k, q, eps).unwrap();
            let b = b_mean_from_jumps(k, q, eps).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a);
        }

        #[test]
        fn decode_delay_in_support(k in 1u32..6, q in 2u64..30, eps in 0.0f64..0.95, extra in 0usize..30) {
            let n = k as usize + extra;
            let d = b_pmf_covering(k, q, eps, 1e-12, n).unwrap();
            let t = expected_decode_delay(n, &d).unwrap();
            prop_assert!(t >= k as f64 && t <= n as f64);
        }
    }
}
