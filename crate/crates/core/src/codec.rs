//! Random linear block code over GF(q) and an on-the-fly rank decoder.
//!
//! Every packet gets a fresh `k x n` generator matrix whose columns are drawn uniformly
//! from the nonzero vectors of `GF(q)^k`. Sender and receiver draw it from the same
//! seeded stream. The receiver keeps its equations in reduced row echelon form and
//! decodes the moment it holds `k` independent ones.

use std::sync::Arc;

use rand::Rng;
use thiserror::Error;

use crate::galois::{FieldElement, FieldError, FieldSpec};

pub use crate::bdist::CodeSpec;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("decoder already holds k independent symbols")]
    AlreadyComplete,
    #[error("decoder rank {rank} is below k = {k}")]
    NotComplete { rank: usize, k: usize },
    #[error("generator matrix column {0} is all zero")]
    ZeroColumn(usize),
    #[error("message index {0} does not fit in k base-q digits")]
    IndexTooLarge(u128),
    #[error(transparent)]
    Field(#[from] FieldError),
}

/// `k x n` generator matrix, stored column by column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratorMatrix {
    k: usize,
    n: usize,
    data: Vec<FieldElement>,
}

impl GeneratorMatrix {
    pub fn from_columns(field: &FieldSpec, columns: &[Vec<FieldElement>]) -> Result<Self, CodecError> {
        let k = columns.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(k * columns.len());
        for (i, col) in columns.iter().enumerate() {
            if col.len() != k {
                return Err(CodecError::DimensionMismatch {
                    expected: k,
                    got: col.len(),
                });
            }
            if col.iter().all(|e| e.is_zero()) {
                return Err(CodecError::ZeroColumn(i));
            }
            for e in col {
                field.element(e.index())?;
            }
            data.extend_from_slice(col);
        }
        Ok(Self {
            k,
            n: columns.len(),
            data,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn column(&self, i: usize) -> &[FieldElement] {
        &self.data[i * self.k..(i + 1) * self.k]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[FieldElement]> {
        self.data.chunks(self.k)
    }
}

/// One column uniform over `GF(q)^k \ {0}`, by rejecting the all-zero draw.
pub fn sample_column<R: Rng + ?Sized>(field: &FieldSpec, k: usize, rng: &mut R, out: &mut Vec<FieldElement>) {
    let q = field.q();
    loop {
        out.clear();
        out.extend((0..k).map(|_| field.element(rng.gen_range(0..q)).expect("in range")));
        if out.iter().any(|e| !e.is_zero()) {
            return;
        }
    }
}

pub fn gen_matrix<R: Rng + ?Sized>(spec: &CodeSpec, rng: &mut R) -> GeneratorMatrix {
    let mut data = Vec::with_capacity(spec.k * spec.n);
    let mut col = Vec::with_capacity(spec.k);
    for _ in 0..spec.n {
        sample_column(&spec.field, spec.k, rng, &mut col);
        data.extend_from_slice(&col);
    }
    GeneratorMatrix {
        k: spec.k,
        n: spec.n,
        data,
    }
}

/// A source message: `k` channel-alphabet symbols.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Message(Vec<FieldElement>);

impl Message {
    pub fn new(symbols: Vec<FieldElement>) -> Self {
        Message(symbols)
    }

    /// Little-endian base-q digits of `index`.
    pub fn from_index(index: u128, k: usize, field: &FieldSpec) -> Result<Self, CodecError> {
        let q = field.q() as u128;
        let mut rest = index;
        let mut symbols = Vec::with_capacity(k);
        for _ in 0..k {
            symbols.push(field.element((rest % q) as u32)?);
            rest /= q;
        }
        if rest != 0 {
            return Err(CodecError::IndexTooLarge(index));
        }
        Ok(Message(symbols))
    }

    pub fn to_index(&self, field: &FieldSpec) -> u128 {
        let q = field.q() as u128;
        self.0.iter().rev().fold(0, |acc, e| acc * q + e.index() as u128)
    }

    pub fn random<R: Rng + ?Sized>(field: &FieldSpec, k: usize, rng: &mut R) -> Self {
        Message(
            (0..k)
                .map(|_| field.element(rng.gen_range(0..field.q())).expect("in range"))
                .collect(),
        )
    }

    pub fn symbols(&self) -> &[FieldElement] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Inner product of a message with one generator column.
pub fn encode_symbol(field: &FieldSpec, u: &[FieldElement], column: &[FieldElement]) -> FieldElement {
    u.iter()
        .zip(column)
        .fold(FieldElement::ZERO, |acc, (&a, &g)| field.add(acc, field.mul(a, g)))
}

/// Codeword `z = u^T G`.
pub fn encode(field: &FieldSpec, u: &Message, g: &GeneratorMatrix) -> Result<Vec<FieldElement>, CodecError> {
    if u.len() != g.k {
        return Err(CodecError::DimensionMismatch {
            expected: g.k,
            got: u.len(),
        });
    }
    Ok(g.columns().map(|col| encode_symbol(field, &u.0, col)).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AbsorbEvent {
    Erased,
    /// Received, but already in the span of earlier symbols.
    Dependent,
    Independent,
    /// Rank just reached `k`.
    Complete,
}

#[derive(Debug, Clone)]
struct Row {
    pivot: usize,
    coeffs: Vec<FieldElement>,
    symbol: FieldElement,
}

/// Receiver for one packet.
#[derive(Debug, Clone)]
pub struct DecoderState {
    field: Arc<FieldSpec>,
    k: usize,
    // sorted by pivot; each row has a 1 at its pivot and every other row has 0 there
    rows: Vec<Row>,
    received_count: usize,
}

impl DecoderState {
    pub fn new(field: Arc<FieldSpec>, k: usize) -> Self {
        Self {
            field,
            k,
            rows: Vec::with_capacity(k),
            received_count: 0,
        }
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Channel uses consumed, erasures included.
    pub fn received_count(&self) -> usize {
        self.received_count
    }

    pub fn is_complete(&self) -> bool {
        self.rows.len() == self.k
    }

    /// Clears the state for the next packet.
    pub fn reset(&mut self) {
        self.rows.clear();
        self.received_count = 0;
    }

    /// Feeds one channel use: the generator column and the symbol, or `None` if erased.
    pub fn absorb(
        &mut self,
        column: &[FieldElement],
        observation: Option<FieldElement>,
    ) -> Result<AbsorbEvent, CodecError> {
        if self.is_complete() {
            return Err(CodecError::AlreadyComplete);
        }
        if column.len() != self.k {
            return Err(CodecError::DimensionMismatch {
                expected: self.k,
                got: column.len(),
            });
        }
        self.received_count += 1;
        let Some(mut symbol) = observation else {
            return Ok(AbsorbEvent::Erased);
        };
        let f = &*self.field;
        let mut v = column.to_vec();
        for row in &self.rows {
            let c = v[row.pivot];
            if c.is_zero() {
                continue;
            }
            for (x, &r) in v.iter_mut().zip(&row.coeffs) {
                *x = f.sub(*x, f.mul(c, r));
            }
            symbol = f.sub(symbol, f.mul(c, row.symbol));
        }
        let Some(pivot) = v.iter().position(|e| !e.is_zero()) else {
            return Ok(AbsorbEvent::Dependent);
        };
        let scale = f.inv(v[pivot])?;
        for x in v.iter_mut() {
            *x = f.mul(*x, scale);
        }
        symbol = f.mul(symbol, scale);
        for row in &mut self.rows {
            let c = row.coeffs[pivot];
            if c.is_zero() {
                continue;
            }
            for (x, &r) in row.coeffs.iter_mut().zip(&v) {
                *x = f.sub(*x, f.mul(c, r));
            }
            row.symbol = f.sub(row.symbol, f.mul(c, symbol));
        }
        let at = self.rows.partition_point(|r| r.pivot < pivot);
        self.rows.insert(
            at,
            Row {
                pivot,
                coeffs: v,
                symbol,
            },
        );
        Ok(if self.is_complete() {
            AbsorbEvent::Complete
        } else {
            AbsorbEvent::Independent
        })
    }

    /// The decoded message; exact, never approximate.
    pub fn decode_solve(&self) -> Result<Message, CodecError> {
        if !self.is_complete() {
            return Err(CodecError::NotComplete {
                rank: self.rank(),
                k: self.k,
            });
        }
        // full rank RREF is the identity, so each row reads off one unknown
        Ok(Message(self.rows.iter().map(|r| r.symbol).collect()))
    }

    /// Checks the reduced-echelon invariant.
    pub fn is_reduced_echelon(&self) -> bool {
        self.rows.windows(2).all(|w| w[0].pivot < w[1].pivot)
            && self.rows.iter().enumerate().all(|(i, row)| {
                row.coeffs[..row.pivot].iter().all(|e| e.is_zero())
                    && row.coeffs[row.pivot] == FieldElement::ONE
                    && self
                        .rows
                        .iter()
                        .enumerate()
                        .all(|(j, other)| j == i || other.coeffs[row.pivot].is_zero())
            })
    }
}
