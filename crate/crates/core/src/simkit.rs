//! Seeded Monte Carlo simulators for both regimes.
//!
//! Randomness comes from ChaCha8 streams keyed by the run seed. The coded simulator
//! gives every renewal cycle its own stream (stream id = cycle index) and the
//! same-alphabet simulator gives one to each batch, so results never depend on how the
//! work is spread over threads. Partial sums are combined in batch order.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::agecalc::{check_erasure, AgeCalcError, TimingSpec, Utilization};
use crate::bdist::{jump_probs, CodeSpec, DistError, GeometricSpec};
use crate::codec::{encode_symbol, sample_column, AbsorbEvent, CodecError, DecoderState, Message};
use crate::galois::FieldSpec;
use crate::numeric::{frac_of_product, mean_and_std_error, KahanSum};

pub const DEFAULT_BATCHES: usize = 30;
pub const DEFAULT_TRACE_CAP: usize = 100_000;
pub const SAME_ALPHABET_WARMUP: u64 = 1_000;
/// Packets allowed in one renewal cycle before the run is abandoned.
pub const DEFAULT_MAX_PACKETS: u64 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("horizon must be at least 1 channel use")]
    InvalidHorizon,
    #[error("cycle count must be at least 1")]
    InvalidCycles,
    #[error("unknown simulation mode '{0}' (expected matrix or chain)")]
    InvalidMode(String),
    #[error("invalid renewal record: H = {h}, T = {t}, n = {n}")]
    InvalidRecord { h: u64, t: u64, n: u64 },
    #[error("trace needs at least two time-ordered breakpoints")]
    BadTrace,
    #[error("cycle {cycle} exceeded {limit} packets without a decode")]
    CycleOverflow { cycle: u64, limit: u64 },
    #[error("decoder returned a message different from the one sent")]
    DecodeMismatch,
    #[error(transparent)]
    Age(#[from] AgeCalcError),
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error(transparent)]
    Codec(#[from] CodecError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SimMode {
    /// Random generator matrix per packet, erasures, rank decoder.
    Matrix,
    /// Decode count drawn as a sum of geometrics.
    Chain,
    /// Same-alphabet LCFS simulation.
    Same,
}

impl SimMode {
    pub fn name(self) -> &'static str {
        match self {
            SimMode::Matrix => "matrix",
            SimMode::Chain => "chain",
            SimMode::Same => "same",
        }
    }
}

impl fmt::Display for SimMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SimMode {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "matrix" => Ok(SimMode::Matrix),
            "chain" => Ok(SimMode::Chain),
            other => Err(SimError::InvalidMode(other.to_string())),
        }
    }
}

/// One renewal cycle of the coded scheme: `h` erased packets, then a packet decoded
/// after `t` channel uses. `y` is the cycle length and `q` the area under the age curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RenewalRecord {
    pub h: u64,
    pub t: u64,
    pub y: u64,
    pub q: f64,
}

impl RenewalRecord {
    pub fn new(h: u64, t: u64, n: u64) -> Result<Self, SimError> {
        Ok(Self {
            h,
            t,
            y: n * (h + 1),
            q: area_q(h, t, n)?,
        })
    }
}

/// Area under the age curve over one cycle,
/// `(2n(n-1)H + 2nT(1+H) + n^2 H^2 + n(n-2)) / 2`.
pub fn area_q(h: u64, t: u64, n: u64) -> Result<f64, SimError> {
    if t == 0 || t > n {
        return Err(SimError::InvalidRecord { h, t, n });
    }
    let (h, t, n) = (h as u128, t as u128, n as u128);
    // twice the area is an integer once n(n-2) is taken with its sign
    let twice = 2 * n * (n - 1) * h + 2 * n * t * (1 + h) + n * n * h * h + n * n;
    Ok((twice as f64 - 2.0 * n as f64) / 2.0)
}

/// Aggregated age estimate of one simulation run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgeStats {
    pub mean_age: f64,
    pub std_error: f64,
    pub cycle_count: Option<u64>,
    pub horizon: Option<u64>,
    /// Erased packets per transmitted packet (coded) or erased symbols per channel use.
    pub eps_p_hat: f64,
    /// Mean decode delay of the successful packets (coded only).
    pub mean_t_hat: Option<f64>,
    pub seed: u64,
    pub mode: SimMode,
}

/// Breakpoints `(t, age)` of the piecewise-linear age curve. A decode shows up as two
/// breakpoints sharing the same `t`.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct AgeTrace {
    pub points: Vec<(f64, f64)>,
    pub truncated: bool,
}

impl AgeTrace {
    fn with_cap(cap: usize) -> TraceBuilder {
        TraceBuilder {
            trace: AgeTrace::default(),
            cap,
        }
    }
}

struct TraceBuilder {
    trace: AgeTrace,
    cap: usize,
}

impl TraceBuilder {
    fn room(&self, extra: usize) -> bool {
        self.trace.points.len() + extra <= self.cap
    }

    fn push(&mut self, t: f64, age: f64) {
        self.trace.points.push((t, age));
    }
}

/// Time-average of a trace by exact integration of its linear pieces.
pub fn integrate_trace(trace: &AgeTrace) -> Result<f64, SimError> {
    let pts = &trace.points;
    if pts.len() < 2 {
        return Err(SimError::BadTrace);
    }
    let mut area = KahanSum::new();
    for w in pts.windows(2) {
        let ((t0, a0), (t1, a1)) = (w[0], w[1]);
        if t1 < t0 {
            return Err(SimError::BadTrace);
        }
        area.add(0.5 * (a0 + a1) * (t1 - t0));
    }
    let elapsed = pts[pts.len() - 1].0 - pts[0].0;
    if elapsed <= 0.0 {
        return Err(SimError::BadTrace);
    }
    Ok(area.value() / elapsed)
}

fn cycle_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn batch_bounds(total: u64, batches: usize) -> Vec<(u64, u64)> {
    let b = (batches as u64).min(total).max(1);
    (0..b)
        .map(|i| (total * i / b, total * (i + 1) / b))
        .collect()
}

// ---------------------------------------------------------------------------------
// Same alphabet

#[derive(Debug, Clone)]
pub struct SameAlphabetRun {
    pub stats: AgeStats,
    pub trace: Option<AgeTrace>,
}

/// Per-slot mean age for the LCFS no-buffer policy. `trace_cap` enables a trace of the
/// first batch after its warm-up.
pub fn simulate_same_alphabet(
    eps: f64,
    timing: &TimingSpec,
    rho: &Utilization,
    horizon: u64,
    seed: u64,
    trace_cap: Option<usize>,
) -> Result<SameAlphabetRun, SimError> {
    check_erasure(eps)?;
    rho.check_against(timing)?;
    if horizon == 0 {
        return Err(SimError::InvalidHorizon);
    }
    let bounds = batch_bounds(horizon, DEFAULT_BATCHES);
    let timing = *timing;
    let rho = *rho;
    let parts: Vec<(f64, u64, Option<AgeTrace>)> = bounds
        .par_iter()
        .enumerate()
        .map(|(b, &(start, end))| {
            let cap = if b == 0 { trace_cap } else { None };
            same_alphabet_batch(eps, &timing, &rho, start, end, cycle_rng(seed, b as u64), cap)
        })
        .collect();

    let mut total = KahanSum::new();
    let mut erased = 0u64;
    let mut batch_means = Vec::with_capacity(parts.len());
    let mut trace = None;
    for ((sum, e, tr), &(start, end)) in parts.into_iter().zip(&bounds) {
        total.add(sum);
        erased += e;
        batch_means.push(sum / (end - start) as f64);
        if tr.is_some() {
            trace = tr;
        }
    }
    let (_, std_error) = mean_and_std_error(&batch_means);
    Ok(SameAlphabetRun {
        stats: AgeStats {
            mean_age: total.value() / horizon as f64,
            std_error,
            cycle_count: None,
            horizon: Some(horizon),
            eps_p_hat: erased as f64 / horizon as f64,
            mean_t_hat: None,
            seed,
            mode: SimMode::Same,
        },
        trace,
    })
}

/// Slots `start+1 ..= end` (1-based), preceded by a warm-up of the erasure-run chain.
fn same_alphabet_batch(
    eps: f64,
    timing: &TimingSpec,
    rho: &Utilization,
    start: u64,
    end: u64,
    mut rng: ChaCha8Rng,
    trace_cap: Option<usize>,
) -> (f64, u64, Option<AgeTrace>) {
    let tc = timing.channel_period();
    let ts = timing.source_period();
    // K is the number of channel uses since the last delivered symbol; the first slot
    // starts from K = 0.
    let mut k: u64 = 0;
    let step = |k: u64, rng: &mut ChaCha8Rng| -> (u64, bool) {
        if rng.gen::<f64>() < eps {
            (k + 1, true)
        } else {
            (0, false)
        }
    };
    for _ in 0..SAME_ALPHABET_WARMUP {
        k = step(k, &mut rng).0;
    }
    // the index can go negative in the first batch because the warm-up slots precede slot 1
    let frac = |j: i64| -> f64 {
        match *rho {
            Utilization::Rational { m, l } => (m as i128 * j as i128).rem_euclid(l as i128) as f64 / l as f64,
            Utilization::DeclaredIrrational { value } => frac_of_product(value, j as f64),
        }
    };
    let mut builder = trace_cap.map(AgeTrace::with_cap);
    let mut sum = KahanSum::new();
    let mut erased = 0u64;
    for slot in start + 1..=end {
        // age at the start of the slot; it then grows for one channel period
        let base = k as f64 * tc + frac(slot as i64 - 1 - k as i64) * ts;
        sum.add(base + 0.5 * tc);
        if let Some(b) = builder.as_mut() {
            if b.room(2) {
                b.push((slot - 1) as f64 * tc, base);
                b.push(slot as f64 * tc, base + tc);
            } else {
                b.trace.truncated = true;
            }
        }
        let (next, was_erased) = step(k, &mut rng);
        k = next;
        erased += was_erased as u64;
    }
    (sum.value(), erased, builder.map(|b| b.trace))
}

// ---------------------------------------------------------------------------------
// Coded scheme

#[derive(Debug, Clone)]
pub struct CodedOptions {
    pub batches: usize,
    pub keep_records: bool,
    pub trace_cap: Option<usize>,
    pub max_packets_per_cycle: u64,
}

impl Default for CodedOptions {
    fn default() -> Self {
        Self {
            batches: DEFAULT_BATCHES,
            keep_records: false,
            trace_cap: None,
            max_packets_per_cycle: DEFAULT_MAX_PACKETS,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CodedRun {
    pub stats: AgeStats,
    pub records: Option<Vec<RenewalRecord>>,
    pub trace: Option<AgeTrace>,
}

/// Draws the channel uses one packet needs, or `None` if it is not decodable within
/// `limit` uses.
trait PacketSampler: Sync {
    fn packet(&self, rng: &mut ChaCha8Rng, limit: u64) -> Result<Option<u64>, SimError>;
}

struct ChainSampler {
    geoms: Vec<GeometricSpec>,
}

impl ChainSampler {
    fn new(k: usize, q: u64, eps: f64) -> Result<Self, SimError> {
        let geoms = jump_probs(k as u32, q, eps)?
            .into_iter()
            .map(GeometricSpec::new)
            .collect::<Result<_, _>>()?;
        Ok(Self { geoms })
    }
}

impl PacketSampler for ChainSampler {
    fn packet(&self, rng: &mut ChaCha8Rng, limit: u64) -> Result<Option<u64>, SimError> {
        let mut b = 0u64;
        for g in &self.geoms {
            b = b.saturating_add(g.sample(rng));
            if b > limit {
                return Ok(None);
            }
        }
        Ok(Some(b))
    }
}

struct MatrixSampler {
    field: Arc<FieldSpec>,
    k: usize,
    eps: f64,
}

impl PacketSampler for MatrixSampler {
    fn packet(&self, rng: &mut ChaCha8Rng, limit: u64) -> Result<Option<u64>, SimError> {
        let f = &*self.field;
        let message = Message::random(f, self.k, rng);
        let mut decoder = DecoderState::new(self.field.clone(), self.k);
        let mut column = Vec::with_capacity(self.k);
        // columns of G are drawn as they are sent; unused columns never affect the outcome
        for _ in 0..limit {
            sample_column(f, self.k, rng, &mut column);
            let erased = rng.gen::<f64>() < self.eps;
            let obs = (!erased).then(|| encode_symbol(f, message.symbols(), &column));
            if decoder.absorb(&column, obs)? == AbsorbEvent::Complete {
                if decoder.decode_solve()? != message {
                    return Err(SimError::DecodeMismatch);
                }
                return Ok(Some(decoder.received_count() as u64));
            }
        }
        Ok(None)
    }
}

fn make_sampler(spec: &CodeSpec, eps: f64, mode: SimMode) -> Result<Box<dyn PacketSampler>, SimError> {
    match mode {
        SimMode::Chain => Ok(Box::new(ChainSampler::new(spec.k, spec.q(), eps)?)),
        SimMode::Matrix => Ok(Box::new(MatrixSampler {
            field: spec.field.clone(),
            k: spec.k,
            eps,
        })),
        SimMode::Same => Err(SimError::InvalidMode(mode.name().into())),
    }
}

#[derive(Default)]
struct CodedBatch {
    q: KahanSum,
    y: u64,
    h: u64,
    t: u64,
    records: Vec<RenewalRecord>,
}

/// Renewal-reward simulation of the blocklength-`n` scheme with just-in-time
/// transmission and unit rates.
pub fn simulate_coded(
    spec: &CodeSpec,
    eps: f64,
    cycles: u64,
    seed: u64,
    mode: SimMode,
    options: &CodedOptions,
) -> Result<CodedRun, SimError> {
    check_erasure(eps)?;
    if cycles == 0 {
        return Err(SimError::InvalidCycles);
    }
    let sampler = make_sampler(spec, eps, mode)?;
    let n = spec.n as u64;
    let trace_cycles = options.trace_cap.map_or(0, |cap| (cap.saturating_sub(1) / 3) as u64);
    let bounds = batch_bounds(cycles, options.batches);

    let batches: Vec<CodedBatch> = bounds
        .par_iter()
        .map(|&(start, end)| -> Result<CodedBatch, SimError> {
            let mut acc = CodedBatch::default();
            for cycle in start..end {
                let mut rng = cycle_rng(seed, cycle);
                let mut h = 0u64;
                let t = loop {
                    if let Some(t) = sampler.packet(&mut rng, n)? {
                        break t;
                    }
                    h += 1;
                    if h >= options.max_packets_per_cycle {
                        return Err(SimError::CycleOverflow {
                            cycle,
                            limit: options.max_packets_per_cycle,
                        });
                    }
                };
                let rec = RenewalRecord::new(h, t, n)?;
                acc.q.add(rec.q);
                acc.y += rec.y;
                acc.h += h;
                acc.t += t;
                if options.keep_records || cycle < trace_cycles {
                    acc.records.push(rec);
                }
            }
            Ok(acc)
        })
        .collect::<Result<_, _>>()?;

    let mut q_total = KahanSum::new();
    let (mut y_total, mut h_total, mut t_total) = (0u64, 0u64, 0u64);
    let mut ratios = Vec::with_capacity(batches.len());
    let mut records = Vec::new();
    for b in batches {
        q_total.add(b.q.value());
        y_total += b.y;
        h_total += b.h;
        t_total += b.t;
        ratios.push(b.q.value() / b.y as f64);
        records.extend(b.records);
    }
    let (_, std_error) = mean_and_std_error(&ratios);

    let trace = options.trace_cap.map(|cap| {
        let mut builder = AgeTrace::with_cap(cap);
        let nf = n as f64;
        let mut now = 0.0;
        builder.push(now, nf - 1.0);
        for rec in records.iter().take(trace_cycles as usize) {
            let decode_at = now + (n * rec.h + rec.t) as f64;
            builder.push(decode_at, nf - 1.0 + (n * rec.h + rec.t) as f64);
            builder.push(decode_at, rec.t as f64 - 1.0);
            now += rec.y as f64;
            builder.push(now, nf - 1.0);
        }
        builder.trace.truncated = trace_cycles < cycles;
        builder.trace
    });
    if !options.keep_records {
        records.clear();
    }

    Ok(CodedRun {
        stats: AgeStats {
            mean_age: q_total.value() / y_total as f64,
            std_error,
            cycle_count: Some(cycles),
            horizon: None,
            eps_p_hat: h_total as f64 / (h_total + cycles) as f64,
            mean_t_hat: Some(t_total as f64 / cycles as f64),
            seed,
            mode,
        },
        records: options.keep_records.then_some(records),
        trace,
    })
}

/// Histogram of the unconstrained decode count `B` over `trials` packets, index = count.
/// Trial `i` uses stream `i` of `seed`.
pub fn sample_decode_counts(
    k: usize,
    field: Arc<FieldSpec>,
    eps: f64,
    trials: u64,
    seed: u64,
    mode: SimMode,
) -> Result<Vec<u64>, SimError> {
    check_erasure(eps)?;
    if trials == 0 {
        return Err(SimError::InvalidCycles);
    }
    let spec = CodeSpec::new(k, k, field)?;
    let sampler = make_sampler(&spec, eps, mode)?;
    let bounds = batch_bounds(trials, 64);
    let parts: Vec<Vec<u64>> = bounds
        .par_iter()
        .map(|&(start, end)| -> Result<Vec<u64>, SimError> {
            let mut hist = Vec::new();
            for trial in start..end {
                let mut rng = cycle_rng(seed, trial);
                let b = sampler
                    .packet(&mut rng, DEFAULT_MAX_PACKETS)?
                    .ok_or(SimError::CycleOverflow {
                        cycle: trial,
                        limit: DEFAULT_MAX_PACKETS,
                    })? as usize;
                if hist.len() <= b {
                    hist.resize(b + 1, 0);
                }
                hist[b] += 1;
            }
            Ok(hist)
        })
        .collect::<Result<_, _>>()?;
    let mut hist = Vec::new();
    for part in parts {
        if hist.len() < part.len() {
            hist.resize(part.len(), 0);
        }
        for (h, c) in hist.iter_mut().zip(part) {
            *h += c;
        }
    }
    Ok(hist)
}
