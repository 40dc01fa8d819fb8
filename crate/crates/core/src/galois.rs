//! Arithmetic over GF(q), q = p^m.
//!
//! Elements are stored as an index in `[0, q)`: the coefficients `c_0 .. c_{m-1}` of the
//! polynomial representative are the base-p digits of the index, least significant first.
//! With the default reduction polynomial every `(p, m)` pair maps to exactly one
//! representation, so seeded generator matrices are reproducible across builds.

use std::fmt;

use serde::Serialize;
use thiserror::Error;

/// Default cap on the field order.
pub const DEFAULT_MAX_ORDER: u32 = 1 << 16;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FieldError {
    #[error("characteristic {0} is not prime")]
    NotPrime(u64),
    #[error("{0} is not a prime power")]
    NotPrimePower(u64),
    #[error("extension degree {0} must be at least 1")]
    DegreeOutOfRange(u32),
    #[error("field order {p}^{m} exceeds the cap {cap}")]
    OrderTooLarge { p: u32, m: u32, cap: u32 },
    #[error("reduction polynomial must be monic of degree {0} with coefficients below p")]
    BadPolynomial(u32),
    #[error("reduction polynomial is reducible over GF({0})")]
    Reducible(u32),
    #[error("element index {index} out of range for GF({q})")]
    OutOfRange { index: u32, q: u32 },
    #[error("zero has no multiplicative inverse")]
    ZeroInverse,
}

/// An element of GF(q), identified by its index in `[0, q)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize)]
pub struct FieldElement(u32);

impl FieldElement {
    pub const ZERO: FieldElement = FieldElement(0);
    pub const ONE: FieldElement = FieldElement(1);

    pub fn index(self) -> u32 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone)]
struct LogTables {
    // exp has length 2(q-1) so that log a + log b never needs a reduction.
    exp: Vec<u32>,
    log: Vec<u32>,
    generator: u32,
}

/// A finite field GF(p^m) with a fixed reduction polynomial.
#[derive(Debug, Clone)]
pub struct FieldSpec {
    p: u32,
    m: u32,
    q: u32,
    reduction_poly: Vec<u32>,
    tables: Option<LogTables>,
}

impl PartialEq for FieldSpec {
    fn eq(&self, other: &Self) -> bool {
        self.p == other.p && self.m == other.m && self.reduction_poly == other.reduction_poly
    }
}

impl Eq for FieldSpec {}

impl FieldSpec {
    /// GF(p^m) with the default reduction polynomial and log/exp tables.
    ///
    /// The default polynomial is the monic irreducible polynomial of degree `m` whose
    /// coefficient vector `(c_0, .., c_{m-1})`, read as a base-p number, is smallest.
    /// For m = 1 the polynomial is `x` and arithmetic is plain modular arithmetic.
    pub fn new(p: u32, m: u32) -> Result<Self, FieldError> {
        Self::new_capped(p, m, DEFAULT_MAX_ORDER)
    }

    pub fn new_capped(p: u32, m: u32, max_order: u32) -> Result<Self, FieldError> {
        let q = check_params(p, m, max_order)?;
        let poly = if m == 1 {
            vec![0, 1]
        } else {
            smallest_irreducible(p, m)
        };
        Ok(Self::build(p, m, q, poly))
    }

    /// GF(q) for a prime power q.
    pub fn from_order(q: u32) -> Result<Self, FieldError> {
        let (p, m) = prime_power(q as u64).ok_or(FieldError::NotPrimePower(q as u64))?;
        Self::new(p as u32, m)
    }

    /// GF(p^m) with a caller-chosen reduction polynomial, given low-order coefficient first
    /// (length m + 1, last coefficient 1).
    pub fn with_reduction_poly(p: u32, m: u32, poly: &[u32]) -> Result<Self, FieldError> {
        let q = check_params(p, m, DEFAULT_MAX_ORDER)?;
        if poly.len() != m as usize + 1 || poly[m as usize] != 1 || poly.iter().any(|&c| c >= p) {
            return Err(FieldError::BadPolynomial(m));
        }
        if m > 1 && !is_irreducible(poly, p) {
            return Err(FieldError::Reducible(p));
        }
        Ok(Self::build(p, m, q, poly.to_vec()))
    }

    /// The same field with log tables dropped; multiplication falls back to polynomial
    /// arithmetic modulo the reduction polynomial.
    pub fn without_tables(&self) -> Self {
        Self {
            tables: None,
            ..self.clone()
        }
    }

    fn build(p: u32, m: u32, q: u32, reduction_poly: Vec<u32>) -> Self {
        let mut spec = Self {
            p,
            m,
            q,
            reduction_poly,
            tables: None,
        };
        spec.tables = Some(spec.build_tables());
        spec
    }

    fn build_tables(&self) -> LogTables {
        let order = self.q - 1;
        let generator = (1..self.q)
            .find(|&g| self.multiplicative_order_is_full(g))
            .expect("the multiplicative group of a finite field is cyclic");
        let mut exp = vec![0u32; 2 * order as usize];
        let mut log = vec![0u32; self.q as usize];
        let mut x = 1u32;
        for i in 0..order {
            exp[i as usize] = x;
            log[x as usize] = i;
            x = self.poly_mul(x, generator);
        }
        for i in order..2 * order {
            exp[i as usize] = exp[(i - order) as usize];
        }
        LogTables {
            exp,
            log,
            generator,
        }
    }

    fn multiplicative_order_is_full(&self, g: u32) -> bool {
        let order = (self.q - 1) as u64;
        prime_factors(order)
            .into_iter()
            .all(|r| self.poly_pow(g, order / r) != 1)
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    /// Reduction polynomial coefficients, low order first.
    pub fn reduction_poly(&self) -> &[u32] {
        &self.reduction_poly
    }

    pub fn has_tables(&self) -> bool {
        self.tables.is_some()
    }

    /// Generator of the multiplicative group used by the log tables.
    pub fn generator(&self) -> Option<FieldElement> {
        self.tables.as_ref().map(|t| FieldElement(t.generator))
    }

    pub fn element(&self, index: u32) -> Result<FieldElement, FieldError> {
        if index < self.q {
            Ok(FieldElement(index))
        } else {
            Err(FieldError::OutOfRange { index, q: self.q })
        }
    }

    /// All q elements in index order.
    pub fn elements(&self) -> impl Iterator<Item = FieldElement> {
        (0..self.q).map(FieldElement)
    }

    pub fn add(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        FieldElement(self.digit_op(a.0, b.0, |x, y, p| (x + y) % p))
    }

    pub fn sub(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        FieldElement(self.digit_op(a.0, b.0, |x, y, p| (x + p - y) % p))
    }

    pub fn neg(&self, a: FieldElement) -> FieldElement {
        self.sub(FieldElement::ZERO, a)
    }

    pub fn mul(&self, a: FieldElement, b: FieldElement) -> FieldElement {
        if a.0 == 0 || b.0 == 0 {
            return FieldElement::ZERO;
        }
        match &self.tables {
            Some(t) => FieldElement(t.exp[(t.log[a.0 as usize] + t.log[b.0 as usize]) as usize]),
            None => FieldElement(self.poly_mul(a.0, b.0)),
        }
    }

    pub fn inv(&self, a: FieldElement) -> Result<FieldElement, FieldError> {
        if a.0 == 0 {
            return Err(FieldError::ZeroInverse);
        }
        let order = self.q - 1;
        Ok(match &self.tables {
            Some(t) => FieldElement(t.exp[((order - t.log[a.0 as usize]) % order) as usize]),
            // a^(q-2) = a^-1
            None => FieldElement(self.poly_pow(a.0, (order - 1) as u64)),
        })
    }

    pub fn div(&self, a: FieldElement, b: FieldElement) -> Result<FieldElement, FieldError> {
        Ok(self.mul(a, self.inv(b)?))
    }

    pub fn pow(&self, a: FieldElement, mut e: u64) -> FieldElement {
        let mut base = a;
        let mut acc = FieldElement::ONE;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.mul(acc, base);
            }
            base = self.mul(base, base);
            e >>= 1;
        }
        acc
    }

    fn digit_op(&self, a: u32, b: u32, op: impl Fn(u32, u32, u32) -> u32) -> u32 {
        if self.m == 1 {
            return op(a, b, self.p);
        }
        if self.p == 2 {
            // only add/sub reach here and both are XOR in characteristic 2
            return a ^ b;
        }
        let (mut a, mut b) = (a, b);
        let mut out = 0;
        let mut place = 1;
        for _ in 0..self.m {
            out += op(a % self.p, b % self.p, self.p) * place;
            a /= self.p;
            b /= self.p;
            place *= self.p;
        }
        out
    }

    fn to_digits(&self, mut x: u32) -> Vec<u32> {
        let mut d = Vec::with_capacity(self.m as usize);
        for _ in 0..self.m {
            d.push(x % self.p);
            x /= self.p;
        }
        d
    }

    fn from_digits(&self, d: &[u32]) -> u32 {
        d.iter().rev().fold(0, |acc, &c| acc * self.p + c)
    }

    /// Schoolbook product modulo the reduction polynomial.
    fn poly_mul(&self, a: u32, b: u32) -> u32 {
        let p = self.p as u64;
        if self.m == 1 {
            return ((a as u64 * b as u64) % p) as u32;
        }
        let m = self.m as usize;
        let (da, db) = (self.to_digits(a), self.to_digits(b));
        let mut prod = vec![0u64; 2 * m - 1];
        for (i, &x) in da.iter().enumerate() {
            for (j, &y) in db.iter().enumerate() {
                prod[i + j] = (prod[i + j] + x as u64 * y as u64) % p;
            }
        }
        // reduce from the top: x^m = -(c_0 + .. + c_{m-1} x^{m-1})
        for top in (m..prod.len()).rev() {
            let c = prod[top];
            if c == 0 {
                continue;
            }
            prod[top] = 0;
            for (i, &r) in self.reduction_poly[..m].iter().enumerate() {
                let idx = top - m + i;
                prod[idx] = (prod[idx] + (p - c) * r as u64) % p;
            }
        }
        let digits: Vec<u32> = prod[..m].iter().map(|&c| c as u32).collect();
        self.from_digits(&digits)
    }

    fn poly_pow(&self, a: u32, mut e: u64) -> u32 {
        let mut base = a;
        let mut acc = 1;
        while e > 0 {
            if e & 1 == 1 {
                acc = self.poly_mul(acc, base);
            }
            base = self.poly_mul(base, base);
            e >>= 1;
        }
        acc
    }
}

impl fmt::Display for FieldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "GF({})", self.q)
    }
}

fn check_params(p: u32, m: u32, max_order: u32) -> Result<u32, FieldError> {
    if !is_prime(p as u64) {
        return Err(FieldError::NotPrime(p as u64));
    }
    if m == 0 {
        return Err(FieldError::DegreeOutOfRange(m));
    }
    match (p as u64).checked_pow(m) {
        Some(q) if q <= max_order as u64 => Ok(q as u32),
        _ => Err(FieldError::OrderTooLarge {
            p,
            m,
            cap: max_order,
        }),
    }
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

/// Decomposes `q = p^m`, or `None` if q is not a prime power.
pub fn prime_power(q: u64) -> Option<(u64, u32)> {
    let factors = prime_factors(q);
    if factors.len() != 1 {
        return None;
    }
    let p = factors[0];
    let (mut rest, mut m) = (q, 0);
    while rest % p == 0 {
        rest /= p;
        m += 1;
    }
    Some((p, m))
}

/// Distinct prime factors in increasing order.
fn prime_factors(mut n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            out.push(d);
            while n % d == 0 {
                n /= d;
            }
        }
        d += 1;
    }
    if n > 1 {
        out.push(n);
    }
    out
}

fn smallest_irreducible(p: u32, m: u32) -> Vec<u32> {
    let count = p.pow(m);
    // c_0 = 0 means x divides the polynomial, so start at 1
    (1..count)
        .map(|idx| {
            let mut poly = Vec::with_capacity(m as usize + 1);
            let mut x = idx;
            for _ in 0..m {
                poly.push(x % p);
                x /= p;
            }
            poly.push(1);
            poly
        })
        .find(|poly| is_irreducible(poly, p))
        .expect("irreducible polynomials exist in every degree")
}

/// Exhaustive trial division by every monic polynomial of degree 1..=deg/2.
fn is_irreducible(poly: &[u32], p: u32) -> bool {
    let deg = poly.len() - 1;
    if deg <= 1 {
        return deg == 1;
    }
    for d in 1..=deg / 2 {
        for idx in 0..p.pow(d as u32) {
            let mut divisor = Vec::with_capacity(d + 1);
            let mut x = idx;
            for _ in 0..d {
                divisor.push(x % p);
                x /= p;
            }
            divisor.push(1);
            if poly_rem_is_zero(poly, &divisor, p) {
                return false;
            }
        }
    }
    true
}

fn poly_rem_is_zero(num: &[u32], monic_div: &[u32], p: u32) -> bool {
    let p = p as u64;
    let mut rem: Vec<u64> = num.iter().map(|&c| c as u64).collect();
    let d = monic_div.len() - 1;
    for top in (d..rem.len()).rev() {
        let c = rem[top];
        if c == 0 {
            continue;
        }
        for (i, &g) in monic_div.iter().enumerate() {
            let idx = top - d + i;
            rem[idx] = (rem[idx] + (p - c) * g as u64 % p) % p;
        }
    }
    rem[..d].iter().all(|&c| c == 0)
}
