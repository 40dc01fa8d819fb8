//! Age of information over erasure channels: finite fields, random linear block codes,
//! the decode-count distribution, average-age formulas and bounds, and Monte Carlo
//! simulators.

pub mod agecalc;
pub mod bdist;
pub mod bounds;
pub mod codec;
pub mod exact;
pub mod galois;
pub mod numeric;
pub mod simkit;

pub use agecalc::{optimal_age_same_alphabet, TimingSpec, Utilization};
pub use bdist::{b_pmf, BDistribution, CodeSpec};
pub use bounds::{age_report, AgeReport, AgeValue, Metric};
pub use galois::{FieldElement, FieldSpec};
pub use simkit::{simulate_coded, simulate_same_alphabet, AgeStats, SimMode};
