//! Exact rational evaluation of the rank-chain quantities.
//!
//! For a blocklength `n` only `P(B = x)` for `x <= n` and the residual mass `P(B > n)`
//! enter the average age, so the whole computation is a finite rational recursion.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::bdist::DistError;

fn int(x: u64) -> BigRational {
    BigRational::from_integer(BigInt::from(x))
}

/// `p_s = (1 - eps)(q^k - q^s)/(q^k - 1)` as an exact rational.
pub fn jump_prob(s: u32, k: u32, q: u64, eps: &BigRational) -> BigRational {
    let qk = BigInt::from(q).pow(k);
    let qs = BigInt::from(q).pow(s);
    (BigRational::one() - eps) * BigRational::new(qk.clone() - qs, qk - BigInt::one())
}

fn validate(k: u32, q: u64, eps: &BigRational) -> Result<(), DistError> {
    if k == 0 {
        return Err(DistError::InvalidDimension);
    }
    if q < 2 {
        return Err(DistError::InvalidAlphabet(q));
    }
    if eps.is_one() {
        return Err(DistError::Diverges);
    }
    if *eps < BigRational::zero() || *eps > BigRational::one() {
        return Err(DistError::InvalidErasure(f64::NAN));
    }
    Ok(())
}

/// `P(B = x)` for `x = 0 ..= upto`, and `P(B > upto)`.
pub fn b_pmf_prefix(
    k: u32,
    q: u64,
    eps: &BigRational,
    upto: usize,
) -> Result<(Vec<BigRational>, BigRational), DistError> {
    validate(k, q, eps)?;
    let ks = k as usize;
    let probs: Vec<BigRational> = (0..k).map(|s| jump_prob(s, k, q, eps)).collect();
    let mut mass = vec![BigRational::zero(); ks];
    mass[0] = BigRational::one();
    let mut pmf = vec![BigRational::zero()];
    for _ in 1..=upto {
        pmf.push(&mass[ks - 1] * &probs[ks - 1]);
        for s in (1..ks).rev() {
            let stay = &mass[s] * (BigRational::one() - &probs[s]);
            let enter = &mass[s - 1] * &probs[s - 1];
            mass[s] = stay + enter;
        }
        mass[0] = &mass[0] * (BigRational::one() - &probs[0]);
    }
    let residual = mass.into_iter().fold(BigRational::zero(), |a, b| a + b);
    Ok((pmf, residual))
}

/// Exact average age `E[T] - 1 + n(1 + eps_p) / (2(1 - eps_p))` with unit rates.
pub fn avg_age_exact(n: usize, k: u32, q: u64, eps: &BigRational) -> Result<BigRational, DistError> {
    if n < k as usize {
        return Err(DistError::ShortBlock { n, k });
    }
    let (pmf, eps_p) = b_pmf_prefix(k, q, eps, n)?;
    let success = BigRational::one() - &eps_p;
    if success.is_zero() {
        return Err(DistError::NoSuccess { n });
    }
    let first_moment = pmf
        .iter()
        .enumerate()
        .fold(BigRational::zero(), |acc, (x, p)| acc + int(x as u64) * p);
    let mean_t = first_moment / &success;
    let nn = int(n as u64);
    let two = int(2);
    Ok(mean_t - BigRational::one() + nn * (BigRational::one() + &eps_p) / (two * success))
}
