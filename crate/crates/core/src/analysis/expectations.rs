//! Expected and worst-case step counts, plus the reference curves of the
//! protocols the probabilistic ones are compared against.

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::Serialize;

use super::trials::pt_equal_half;
use super::DomainError;

/// `(n1 n2) / (nf1 nf2)`: each random pair is all-good with probability
/// `nf1 nf2 / (n1 n2)`, independently of previous draws.
pub fn pcs_expected_steps(n1: u32, f1: u32, n2: u32, f2: u32) -> Result<BigRational, DomainError> {
    if f1 >= n1 || f2 >= n2 {
        return Err(DomainError::new(format!(
            "need f < n on both sides, got (n1, f1, n2, f2) = ({n1}, {f1}, {n2}, {f2})"
        )));
    }
    Ok(BigRational::new(
        BigInt::from(u64::from(n1) * u64::from(n2)),
        BigInt::from(u64::from(n1 - f1) * u64::from(n2 - f2)),
    ))
}

/// `4 - (4f+3)/(f+1)²`, the Pcs expectation for two clusters of `2f+1`.
pub fn pcs_equal_half(f: u32) -> BigRational {
    let f = BigInt::from(f);
    let one = BigInt::from(1);
    BigRational::from_integer(BigInt::from(4))
        - BigRational::new(BigInt::from(4) * &f + 3, (&f + &one) * (&f + &one))
}

/// Worst-case cs-steps of pruned Pcs: `(f1 + 1)(f2 + 1)`.
pub fn ppcs_worst_case_steps(f1: u32, f2: u32) -> u64 {
    u64::from(f1 + 1) * u64::from(f2 + 1)
}

/// Worst-case cs-steps of Plcs on lists with `m1`, `m2` faulty entries.
pub fn plcs_worst_case_steps(m1: u32, m2: u32) -> u64 {
    u64::from(m1) + u64::from(m2) + 1
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReferenceCurves {
    /// Worst-case optimal sending, `f1 + f2 + 1` steps.
    pub pbs_cs: u64,
    /// The same protocol family for `n > 3f` clusters, `max(n1, n2)` steps.
    pub pbs_cs_3f: u64,
    /// Global sharing with a non-faulty coordinating primary, `f2 + 1`.
    pub geobft_opt: u64,
    /// All-to-all multicast, `n1 n2`.
    pub chainspace: u64,
    #[serde(serialize_with = "ser_rational")]
    pub pcs_expected: BigRational,
    /// Only defined for `n1 = n2 = 2f + 1` with `f1 = f2 = f`.
    #[serde(serialize_with = "ser_opt_rational")]
    pub plcs_expected_equal_half: Option<BigRational>,
}

fn ser_rational<S: serde::Serializer>(r: &BigRational, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&r.to_string())
}

fn ser_opt_rational<S: serde::Serializer>(
    r: &Option<BigRational>,
    s: S,
) -> Result<S::Ok, S::Error> {
    match r {
        Some(r) => s.serialize_some(&r.to_string()),
        None => s.serialize_none(),
    }
}

pub fn reference_curves(
    n1: u32,
    f1: u32,
    n2: u32,
    f2: u32,
) -> Result<ReferenceCurves, DomainError> {
    let equal_half = n1 == n2 && f1 == f2 && n1 == 2 * f1 + 1;
    Ok(ReferenceCurves {
        pbs_cs: u64::from(f1) + u64::from(f2) + 1,
        pbs_cs_3f: u64::from(n1.max(n2)),
        geobft_opt: u64::from(f2) + 1,
        chainspace: u64::from(n1) * u64::from(n2),
        pcs_expected: pcs_expected_steps(n1, f1, n2, f2)?,
        plcs_expected_equal_half: equal_half.then(|| pt_equal_half(f1)),
    })
}
