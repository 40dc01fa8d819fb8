//! Average age of the random linear `(n, k)` scheme and the bounds around it.
//!
//! All ages are in channel uses with unit generation and channel-use rates; multiply by
//! the channel period to get seconds (see [`AgeReport::scale_time`]).
//!
//! Derivation of the two negative-binomial bounds. Start from
//! `age = E[T] - 1 + n(1 + eps_p) / (2(1 - eps_p))` and replace `B` by a negative
//! binomial `X ~ NB(k, p)`, `X2 ~ NB(k + 1, p)`:
//!
//! ```text
//! E[X 1{X <= n}] = (k / p) P(X2 <= n + 1)
//! bound = k P(X2 <= n+1) / (p P(X <= n)) - 1 + n (2 - P(X <= n)) / (2 P(X <= n))
//!       = (2 n p - p P(X <= n)(n + 2) + 2 k P(X2 <= n+1)) / (2 p P(X <= n))
//! ```
//!
//! With `p = p_{k-1}` this is the upper bound, with `p = 1 - eps` the lower bound. Both
//! forms are evaluated below and checked against each other in the tests.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::bdist::{
    self, b_pmf_covering, expected_decode_delay, negbin_cdf, packet_erasure_prob, BDistribution,
    DistError, NegBinSpec, DEFAULT_TAIL_TARGET,
};
use crate::galois::prime_power;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoundsError {
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error("{metric} age diverges at n = {n} (success probability below {floor:e})")]
    Diverged { metric: Metric, n: usize, floor: f64 },
    #[error("every blocklength in [{n_min}, {n_max}] diverges")]
    AllDiverged { n_min: usize, n_max: usize },
    #[error("n_max = {n_max} is smaller than k = {k}")]
    EmptyRange { n_max: usize, k: u32 },
    #[error("{0} is not a prime power")]
    InvalidAlphabet(u64),
}

impl BoundsError {
    pub fn is_divergence(&self) -> bool {
        matches!(
            self,
            BoundsError::Diverged { .. }
                | BoundsError::AllDiverged { .. }
                | BoundsError::Dist(DistError::Diverges)
                | BoundsError::Dist(DistError::NoSuccess { .. })
        )
    }
}

/// Which age expression to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Exact,
    Lb,
    Ub,
    Star,
    Hat,
}

impl Metric {
    pub const ALL: [Metric; 5] = [Metric::Exact, Metric::Lb, Metric::Ub, Metric::Star, Metric::Hat];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Exact => "exact",
            Metric::Lb => "lb",
            Metric::Ub => "ub",
            Metric::Star => "star",
            Metric::Hat => "hat",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Metric::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown metric '{s}' (expected exact, lb, ub, star or hat)"))
    }
}

/// An age value, or an explicit marker that the expression is infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AgeValue {
    Finite(f64),
    Diverged,
}

impl AgeValue {
    pub fn finite(self) -> Option<f64> {
        match self {
            AgeValue::Finite(v) => Some(v),
            AgeValue::Diverged => None,
        }
    }

    fn scaled(self, factor: f64) -> Self {
        match self {
            AgeValue::Finite(v) => AgeValue::Finite(v * factor),
            AgeValue::Diverged => AgeValue::Diverged,
        }
    }

    fn from_result(r: Result<f64, BoundsError>) -> Result<Self, BoundsError> {
        match r {
            Ok(v) => Ok(AgeValue::Finite(v)),
            Err(e) if e.is_divergence() => Ok(AgeValue::Diverged),
            Err(e) => Err(e),
        }
    }
}

impl Serialize for AgeValue {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            AgeValue::Finite(v) => s.serialize_f64(*v),
            AgeValue::Diverged => s.serialize_str("diverged"),
        }
    }
}

/// The negative-binomial quantities feeding the bounds at one `(n, k, q, eps)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundBundle {
    pub n: usize,
    pub k: u32,
    pub q: u64,
    pub eps: f64,
    pub p_last: f64,
    pub cdf_bhat_n: f64,
    pub cdf_bhathat_n1: f64,
    pub cdf_btilde_n: f64,
    pub cdf_btildetilde_n1: f64,
    pub mu_tilde_n: f64,
}

impl BoundBundle {
    pub fn new(n: usize, k: u32, q: u64, eps: f64) -> Result<Self, BoundsError> {
        check_block(n, k)?;
        let p_last = bdist::jump_prob(k - 1, k, q, eps)?;
        let (cdf_btilde_n, cdf_btildetilde_n1) = negbin_pair(n, k, 1.0 - eps)?;
        let (cdf_bhat_n, cdf_bhathat_n1) = negbin_pair(n, k, p_last)?;
        let mu_tilde_n = k as f64 * cdf_btildetilde_n1 / ((1.0 - eps) * cdf_btilde_n);
        Ok(Self {
            n,
            k,
            q,
            eps,
            p_last,
            cdf_bhat_n,
            cdf_bhathat_n1,
            cdf_btilde_n,
            cdf_btildetilde_n1,
            mu_tilde_n,
        })
    }
}

fn check_block(n: usize, k: u32) -> Result<(), BoundsError> {
    if k == 0 {
        return Err(DistError::InvalidDimension.into());
    }
    if n < k as usize {
        return Err(DistError::ShortBlock { n, k }.into());
    }
    Ok(())
}

/// `(P(NB(k, p) <= n), P(NB(k + 1, p) <= n + 1))`.
fn negbin_pair(n: usize, k: u32, p: f64) -> Result<(f64, f64), BoundsError> {
    let x = NegBinSpec::new(k, p)?;
    let x2 = NegBinSpec::new(k + 1, p)?;
    Ok((negbin_cdf(&x, n as u64), negbin_cdf(&x2, n as u64 + 1)))
}

fn diverged(metric: Metric, n: usize) -> BoundsError {
    BoundsError::Diverged {
        metric,
        n,
        floor: DEFAULT_TAIL_TARGET,
    }
}

/// Renewal-reward age with the law of `B` already in hand (support must cover `n`).
pub fn avg_age_exact_from(n: usize, dist: &BDistribution) -> Result<f64, BoundsError> {
    check_block(n, dist.k())?;
    let eps_p = packet_erasure_prob(n, dist);
    let success = dist.cdf(n);
    if success <= DEFAULT_TAIL_TARGET {
        return Err(diverged(Metric::Exact, n));
    }
    let mean_t = expected_decode_delay(n, dist)?;
    let n = n as f64;
    Ok(mean_t - 1.0 + n * (1.0 + eps_p.value) / (2.0 * success))
}

/// Exact average age of the random `(n, k)` scheme.
pub fn avg_age_exact(n: usize, k: u32, q: u64, eps: f64) -> Result<f64, BoundsError> {
    check_block(n, k)?;
    let dist = b_pmf_covering(k, q, eps, DEFAULT_TAIL_TARGET, n)?;
    avg_age_exact_from(n, &dist)
}

fn negbin_bound(metric: Metric, n: usize, k: u32, p: f64) -> Result<f64, BoundsError> {
    let (c1, c2) = negbin_pair(n, k, p)?;
    if c1 <= DEFAULT_TAIL_TARGET {
        return Err(diverged(metric, n));
    }
    let nf = n as f64;
    let kf = k as f64;
    Ok((2.0 * nf * p - p * c1 * (nf + 2.0) + 2.0 * kf * c2) / (2.0 * p * c1))
}

/// Upper bound obtained by slowing every rank step to `p_{k-1}`.
pub fn avg_age_upper(n: usize, k: u32, q: u64, eps: f64) -> Result<f64, BoundsError> {
    check_block(n, k)?;
    let p_last = bdist::jump_prob(k - 1, k, q, eps)?;
    negbin_bound(Metric::Ub, n, k, p_last)
}

/// Lower bound: the age of an MDS scheme, valid for every linear code; independent of q.
pub fn avg_age_lower(n: usize, k: u32, eps: f64) -> Result<f64, BoundsError> {
    check_block(n, k)?;
    crate::agecalc::check_erasure(eps).map_err(DistError::from)?;
    negbin_bound(Metric::Lb, n, k, 1.0 - eps)
}

/// The lower bound with `mu_tilde_n` replaced by its ceiling `k / (1 - eps)`.
pub fn avg_age_star(n: usize, k: u32, eps: f64) -> Result<f64, BoundsError> {
    check_block(n, k)?;
    crate::agecalc::check_erasure(eps).map_err(DistError::from)?;
    let c = negbin_cdf(&NegBinSpec::new(k, 1.0 - eps)?, n as u64);
    if c <= DEFAULT_TAIL_TARGET {
        return Err(diverged(Metric::Star, n));
    }
    let nf = n as f64;
    Ok(k as f64 / (1.0 - eps) - 1.0 + nf * (2.0 - c) / (2.0 * c))
}

/// Upper bound `(E[B] - 1) / P(B_hat <= n) + n/2`.
pub fn avg_age_hat(n: usize, k: u32, q: u64, eps: f64) -> Result<f64, BoundsError> {
    check_block(n, k)?;
    let mean_b = bdist::b_mean(k, q, eps)?;
    let p_last = bdist::jump_prob(k - 1, k, q, eps)?;
    let c = negbin_cdf(&NegBinSpec::new(k, p_last)?, n as u64);
    if c <= DEFAULT_TAIL_TARGET {
        return Err(diverged(Metric::Hat, n));
    }
    Ok((mean_b - 1.0) / c + n as f64 / 2.0)
}

pub fn metric_value(metric: Metric, n: usize, k: u32, q: u64, eps: f64) -> Result<AgeValue, BoundsError> {
    AgeValue::from_result(match metric {
        Metric::Exact => avg_age_exact(n, k, q, eps),
        Metric::Lb => avg_age_lower(n, k, eps),
        Metric::Ub => avg_age_upper(n, k, q, eps),
        Metric::Star => avg_age_star(n, k, eps),
        Metric::Hat => avg_age_hat(n, k, q, eps),
    })
}

/// All five ages plus the packet statistics at one blocklength.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgeReport {
    pub n: usize,
    pub k: u32,
    pub q: u64,
    pub eps: f64,
    pub exact: AgeValue,
    pub lb: AgeValue,
    pub ub: AgeValue,
    pub star: AgeValue,
    pub hat: AgeValue,
    pub eps_p: f64,
    pub mean_t: Option<f64>,
}

impl AgeReport {
    pub fn get(&self, metric: Metric) -> AgeValue {
        match metric {
            Metric::Exact => self.exact,
            Metric::Lb => self.lb,
            Metric::Ub => self.ub,
            Metric::Star => self.star,
            Metric::Hat => self.hat,
        }
    }

    /// Ages rescaled from channel uses to seconds for channel period `t_c`.
    pub fn scale_time(mut self, t_c: f64) -> Self {
        self.exact = self.exact.scaled(t_c);
        self.lb = self.lb.scaled(t_c);
        self.ub = self.ub.scaled(t_c);
        self.star = self.star.scaled(t_c);
        self.hat = self.hat.scaled(t_c);
        self.mean_t = self.mean_t.map(|t| t * t_c);
        self
    }
}

fn report_from(n: usize, dist: &BDistribution) -> Result<AgeReport, BoundsError> {
    let (k, q, eps) = (dist.k(), dist.q(), dist.eps());
    check_block(n, k)?;
    let eps_p = packet_erasure_prob(n, dist);
    Ok(AgeReport {
        n,
        k,
        q,
        eps,
        exact: AgeValue::from_result(avg_age_exact_from(n, dist))?,
        lb: AgeValue::from_result(avg_age_lower(n, k, eps))?,
        ub: AgeValue::from_result(avg_age_upper(n, k, q, eps))?,
        star: AgeValue::from_result(avg_age_star(n, k, eps))?,
        hat: AgeValue::from_result(avg_age_hat(n, k, q, eps))?,
        eps_p: eps_p.value,
        mean_t: expected_decode_delay(n, dist).ok(),
    })
}

pub fn age_report(n: usize, k: u32, q: u64, eps: f64) -> Result<AgeReport, BoundsError> {
    check_block(n, k)?;
    let dist = b_pmf_covering(k, q, eps, DEFAULT_TAIL_TARGET, n)?;
    report_from(n, &dist)
}

/// Reports for every `n` in `[n_min, n_max]`, in increasing `n`.
pub fn sweep(k: u32, q: u64, eps: f64, n_min: usize, n_max: usize) -> Result<Vec<AgeReport>, BoundsError> {
    let n_min = n_min.max(k as usize);
    if n_max < n_min {
        return Err(BoundsError::EmptyRange { n_max, k });
    }
    let dist = b_pmf_covering(k, q, eps, DEFAULT_TAIL_TARGET, n_max)?;
    (n_min..=n_max)
        .into_par_iter()
        .map(|n| report_from(n, &dist))
        .collect()
}

/// `max(10k, ceil(3k / (1 - eps)))`.
pub fn default_n_max(k: u32, eps: f64) -> usize {
    let k = k as usize;
    let by_eps = (3.0 * k as f64 / (1.0 - eps)).ceil();
    let by_eps = if by_eps.is_finite() && by_eps < 1e9 {
        by_eps as usize
    } else {
        1_000_000_000
    };
    (10 * k).max(by_eps)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BlocklengthOpt {
    pub metric: Metric,
    pub n_star: usize,
    pub value: f64,
    pub sweep: Vec<(usize, AgeValue)>,
}

/// Exhaustive minimization over `n in [k, n_max]`; ties go to the smallest `n`.
pub fn optimal_blocklength(
    k: u32,
    q: u64,
    eps: f64,
    metric: Metric,
    n_max: usize,
) -> Result<BlocklengthOpt, BoundsError> {
    if k == 0 {
        return Err(DistError::InvalidDimension.into());
    }
    if n_max < k as usize {
        return Err(BoundsError::EmptyRange { n_max, k });
    }
    let ns: Vec<usize> = (k as usize..=n_max).collect();
    let values: Vec<AgeValue> = match metric {
        Metric::Exact => {
            let dist = b_pmf_covering(k, q, eps, DEFAULT_TAIL_TARGET, n_max)?;
            ns.par_iter()
                .map(|&n| AgeValue::from_result(avg_age_exact_from(n, &dist)))
                .collect::<Result<_, _>>()?
        }
        _ => ns
            .par_iter()
            .map(|&n| metric_value(metric, n, k, q, eps))
            .collect::<Result<_, _>>()?,
    };
    let mut best: Option<(usize, f64)> = None;
    for (&n, v) in ns.iter().zip(&values) {
        if let AgeValue::Finite(v) = *v {
            if best.is_none_or(|(_, b)| v < b) {
                best = Some((n, v));
            }
        }
    }
    let (n_star, value) = best.ok_or(BoundsError::AllDiverged { n_min: k as usize, n_max })?;
    Ok(BlocklengthOpt {
        metric,
        n_star,
        value,
        sweep: ns.into_iter().zip(values).collect(),
    })
}

/// `(q, exact - lb)` for each alphabet size, sorted by q.
pub fn q_convergence_gap(n: usize, k: u32, eps: f64, q_list: &[u64]) -> Result<Vec<(u64, f64)>, BoundsError> {
    let mut qs = q_list.to_vec();
    qs.sort_unstable();
    qs.dedup();
    if let Some(&bad) = qs.iter().find(|&&q| prime_power(q).is_none()) {
        return Err(BoundsError::InvalidAlphabet(bad));
    }
    let lb = avg_age_lower(n, k, eps)?;
    qs.into_iter()
        .map(|q| Ok((q, avg_age_exact(n, k, q, eps)? - lb)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn exact_examples() {
        assert!(close(avg_age_exact(3, 2, 2, 0.0).unwrap(), 3.125, 1e-14));
        assert!(close(avg_age_exact(1, 1, 2, 0.0).unwrap(), 0.5, 1e-15));
        // q huge behaves like an MDS code at eps = 0
        for n in 3..10 {
            let v = avg_age_exact(n, 3, 1 << 40, 0.0).unwrap();
            assert!(close(v, 2.0 + n as f64 / 2.0, 1e-9), "n = {n}: {v}");
        }
    }

    #[test]
    fn upper_examples() {
        assert!(close(avg_age_upper(3, 2, 2, 0.0).unwrap(), 3.95, 1e-14));
        for n in [3, 5, 9] {
            let ub = avg_age_upper(n, 3, 1 << 50, 0.3).unwrap();
            let lb = avg_age_lower(n, 3, 0.3).unwrap();
            assert!(close(ub, lb, 1e-9));
        }
    }

    #[test]
    fn lower_and_star_examples() {
        assert!(close(avg_age_lower(3, 2, 0.0).unwrap(), 2.5, 1e-15));
        assert!(close(avg_age_lower(3, 3, 0.0).unwrap(), 3.5, 1e-15));
        assert!(close(avg_age_star(3, 2, 0.0).unwrap(), 2.5, 1e-15));
        assert!(close(avg_age_star(7, 4, 1e-12).unwrap(), 3.0 + 3.5, 1e-9));
    }

    #[test]
    fn hat_examples() {
        assert!(close(avg_age_hat(3, 2, 2, 0.0).unwrap(), 3.525, 1e-14));
        let mean_b = bdist::b_mean(3, 5, 0.2).unwrap();
        assert!(close(avg_age_hat(200, 3, 5, 0.2).unwrap(), mean_b - 1.0 + 100.0, 1e-12));
    }

    // The rearranged form k P(X2 <= n+1)/(p P(X <= n)) - 1 + n(2 - P)/(2P) of both bounds.
    #[test]
    fn bound_forms_agree() {
        for (k, q, eps) in [(3u32, 5u64, 0.3), (2, 2, 0.1), (4, 25, 0.7)] {
            for n in k as usize..40 {
                let b = BoundBundle::new(n, k, q, eps).unwrap();
                let lb = b.mu_tilde_n - 1.0
                    + n as f64 * (2.0 - b.cdf_btilde_n) / (2.0 * b.cdf_btilde_n);
                assert!(close(avg_age_lower(n, k, eps).unwrap(), lb, 1e-12));
                let ub = k as f64 * b.cdf_bhathat_n1 / (b.p_last * b.cdf_bhat_n) - 1.0
                    + n as f64 * (2.0 - b.cdf_bhat_n) / (2.0 * b.cdf_bhat_n);
                assert!(close(avg_age_upper(n, k, q, eps).unwrap(), ub, 1e-12));
            }
        }
    }

    #[test]
    fn mu_tilde_is_bounded() {
        for eps in [0.0, 0.1, 0.5, 0.9] {
            for n in 3..60 {
                let b = BoundBundle::new(n, 3, 5, eps).unwrap();
                assert!(b.mu_tilde_n <= (n as f64).min(3.0 / (1.0 - eps)) * (1.0 + 1e-12));
                for c in [b.cdf_bhat_n, b.cdf_bhathat_n1, b.cdf_btilde_n, b.cdf_btildetilde_n1] {
                    assert!((0.0..=1.0).contains(&c));
                }
            }
        }
    }

    #[test]
    fn optimal_blocklength_examples() {
        let opt = optimal_blocklength(2, 2, 0.0, Metric::Exact, 10).unwrap();
        assert_eq!(opt.n_star, 2);
        assert!(close(opt.value, 3.0, 1e-14));
        let v4 = opt.sweep[2].1.finite().unwrap();
        assert!(close(v4, 3.0 + 7.0 / 13.0, 1e-12));

        let opt = optimal_blocklength(1, 7, 0.0, Metric::Exact, 10).unwrap();
        assert_eq!(opt.n_star, 1);
        assert!(close(opt.value, 0.5, 1e-15));

        assert!(matches!(
            optimal_blocklength(3, 5, 0.1, Metric::Lb, 2),
            Err(BoundsError::EmptyRange { .. })
        ));
    }

    #[test]
    fn optimal_blocklength_is_exhaustive() {
        for metric in Metric::ALL {
            let opt = optimal_blocklength(3, 5, 0.5, metric, 40).unwrap();
            for (n, v) in &opt.sweep {
                let v = v.finite().unwrap();
                assert!(opt.value <= v);
                if v == opt.value {
                    assert!(opt.n_star <= *n);
                }
            }
        }
    }

    #[test]
    fn minimizer_moves_right_with_erasures() {
        let lo = optimal_blocklength(3, 5, 0.1, Metric::Exact, 80).unwrap();
        let hi = optimal_blocklength(3, 5, 0.8, Metric::Exact, 80).unwrap();
        assert!(hi.n_star > lo.n_star);
    }

    #[test]
    fn divergence_is_reported() {
        assert_eq!(
            metric_value(Metric::Exact, 3, 2, 2, 1.0).unwrap(),
            AgeValue::Diverged
        );
        assert_eq!(metric_value(Metric::Lb, 3, 3, 2, 1.0 - 1e-9).unwrap(), AgeValue::Diverged);
        let e = avg_age_lower(3, 3, 1.0 - 1e-9).unwrap_err();
        assert!(e.is_divergence());
    }

    #[test]
    fn ages_blow_up_near_full_erasure() {
        for metric in Metric::ALL {
            let a = metric_value(metric, 6, 3, 5, 0.9).unwrap().finite().unwrap();
            let b = metric_value(metric, 6, 3, 5, 0.99).unwrap().finite().unwrap();
            assert!(b > 10.0 * a, "{metric}: {a} -> {b}");
        }
    }

    #[test]
    fn q_gap_rejects_non_prime_powers() {
        assert_eq!(
            q_convergence_gap(5, 3, 0.3, &[2, 6]),
            Err(BoundsError::InvalidAlphabet(6))
        );
    }

    #[test]
    fn report_scaling() {
        let r = age_report(3, 2, 2, 0.0).unwrap().scale_time(2.0);
        assert!(close(r.exact.finite().unwrap(), 6.25, 1e-14));
        assert!(close(r.mean_t.unwrap(), 4.5, 1e-14));
    }

    #[test]
    fn sweep_is_ordered() {
        let rows = sweep(3, 5, 0.3, 3, 40).unwrap();
        assert_eq!(rows.len(), 38);
        assert!(rows.windows(2).all(|w| w[1].n == w[0].n + 1));
    }

    proptest! {
        #[test]
        fn sandwich_holds(k in 1u32..5, q in prop::sample::select(vec![2u64, 3, 4, 5, 7, 8, 9, 16, 25]),
                          eps in 0.0f64..0.9, extra in 0usize..30) {
            let n = k as usize + extra;
            let r = age_report(n, k, q, eps).unwrap();
            let (ex, lb, ub, st, hat) = (
                r.exact.finite().unwrap(), r.lb.finite().unwrap(), r.ub.finite().unwrap(),
                r.star.finite().unwrap(), r.hat.finite().unwrap());
            let tol = 1e-9 * ex;
            prop_assert!(lb <= ex + tol);
            prop_assert!(ex <= ub + tol);
            prop_assert!(ex <= hat + tol);
            prop_assert!(lb <= st + tol);
        }
    }
}
