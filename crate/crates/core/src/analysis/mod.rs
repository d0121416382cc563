//! Exact combinatorics of faulty positions, expected step counts and their
//! brute-force oracles. All arithmetic is on unbounded integers and exact
//! rationals; floating point only appears when values are rendered.

mod combinatorics;
mod decimal;
mod expectations;
mod trials;

use thiserror::Error;

pub use combinatorics::{
    binomial, factorial, faulty_positions, fc_closed, fc_product, fc_recursive, feasible_k,
    list_merge_count, pair_type_counts, FcMemo, ListPair, PairTypeCounts,
};
pub use decimal::{format_decimal, format_exact, format_significant, to_f64, SIGNIFICANT_DIGITS};
pub use expectations::{
    pcs_equal_half, pcs_expected_steps, plcs_worst_case_steps, ppcs_worst_case_steps,
    reference_curves, ReferenceCurves,
};
pub use num_rational::BigRational as Rational;
pub use trials::{
    faulty_position_histogram, pt_bruteforce, pt_equal_half, pt_exact,
    sequential_trials_bruteforce, sequential_trials_exact, BRUTE_FORCE_MAX_N,
};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("domain error: {0}")]
pub struct DomainError(pub String);

impl DomainError {
    pub fn new(msg: String) -> Self {
        Self(msg)
    }
}
