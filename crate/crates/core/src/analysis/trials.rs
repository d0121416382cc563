//! Expected number of uniformly random position inspections until the first
//! non-faulty position of a random permutation pair.

use itertools::Itertools;
use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::Zero;

use super::combinatorics::{factorial, fc_closed, feasible_k};
use super::DomainError;

/// Exhaustive enumeration refuses lists longer than this (6!² = 518400 pairs).
pub const BRUTE_FORCE_MAX_N: u32 = 6;

fn ratio(num: impl Into<BigInt>, den: impl Into<BigInt>) -> BigRational {
    BigRational::new(num.into(), den.into())
}

fn require_non_faulty_position(n: u32, m1: u32, m2: u32) -> Result<(), DomainError> {
    if m1 + m2 >= n {
        return Err(DomainError::new(format!(
            "expectation undefined: m1 + m2 = {} must be below n = {n}",
            m1 + m2
        )));
    }
    Ok(())
}

/// Mixture over `k` of `weight(k)` with the FC distribution on permutation pairs.
fn fc_mixture(
    n: u32,
    m1: u32,
    m2: u32,
    weight: impl Fn(u32) -> BigRational,
) -> Result<BigRational, DomainError> {
    require_non_faulty_position(n, m1, m2)?;
    let mut sum = BigRational::zero();
    for k in feasible_k(n, m1, m2) {
        let count = BigInt::from(fc_closed(n, m1, m2, k)?);
        sum += weight(k) * BigRational::from_integer(count);
    }
    let total = factorial(n);
    Ok(sum / BigRational::from_integer(BigInt::from(&total * &total)))
}

/// `PT(n, m1, m2)`: average over all permutation pairs of `n / (n - k)`.
pub fn pt_exact(n: u32, m1: u32, m2: u32) -> Result<BigRational, DomainError> {
    fc_mixture(n, m1, m2, |k| ratio(n, n - k))
}

/// `PT(2f+1, f, f) = 4 - 2/(f+1) - f!²/(2f)!`.
pub fn pt_equal_half(f: u32) -> BigRational {
    let ff = BigInt::from(factorial(f));
    BigRational::from_integer(4.into())
        - ratio(2, f + 1)
        - BigRational::new(&ff * &ff, BigInt::from(factorial(2 * f)))
}

/// Expected steps when the positions of a random permutation pair are tried
/// in order (without replacement): with `k` faulty positions placed uniformly
/// the first good one sits at `(n + 1) / (n + 1 - k)` on average.
pub fn sequential_trials_exact(n: u32, m1: u32, m2: u32) -> Result<BigRational, DomainError> {
    fc_mixture(n, m1, m2, |k| ratio(n + 1, n + 1 - k))
}

/// Bitmask of faulty positions for every permutation of a list whose first
/// `m` entries are faulty.
fn permutation_masks(n: u32, m: u32) -> Vec<u32> {
    (0..n)
        .permutations(n as usize)
        .map(|perm| {
            perm.iter()
                .enumerate()
                .filter(|(_, entry)| **entry < m)
                .fold(0u32, |mask, (pos, _)| mask | (1 << pos))
        })
        .collect()
}

fn check_brute_force_size(n: u32, m1: u32, m2: u32) -> Result<(), DomainError> {
    if n > BRUTE_FORCE_MAX_N {
        return Err(DomainError::new(format!(
            "brute force limited to n <= {BRUTE_FORCE_MAX_N}, got n = {n}"
        )));
    }
    if m1 > n || m2 > n {
        return Err(DomainError::new(format!(
            "m1 = {m1}, m2 = {m2} exceed n = {n}"
        )));
    }
    Ok(())
}

/// Number of permutation pairs with exactly `k` faulty positions, for every
/// `k` in `0..=n`, by enumerating all `n!²` pairs.
pub fn faulty_position_histogram(n: u32, m1: u32, m2: u32) -> Result<Vec<BigUint>, DomainError> {
    check_brute_force_size(n, m1, m2)?;
    let first = permutation_masks(n, m1);
    let second = permutation_masks(n, m2);
    let mut counts = vec![0u64; n as usize + 1];
    for a in &first {
        for b in &second {
            counts[(a | b).count_ones() as usize] += 1;
        }
    }
    Ok(counts.into_iter().map(BigUint::from).collect())
}

/// `PT` by exhaustive enumeration of all permutation pairs.
pub fn pt_bruteforce(n: u32, m1: u32, m2: u32) -> Result<BigRational, DomainError> {
    require_non_faulty_position(n, m1, m2)?;
    let histogram = faulty_position_histogram(n, m1, m2)?;
    let pairs: BigUint = histogram.iter().sum();
    let mut sum = BigRational::zero();
    for (k, count) in histogram.into_iter().enumerate() {
        if count.is_zero() {
            continue;
        }
        sum += ratio(n, n - k as u32) * BigRational::from_integer(BigInt::from(count));
    }
    Ok(sum / BigRational::from_integer(BigInt::from(pairs)))
}

/// In-order trials by enumeration: for every permutation pair, the index of
/// the first non-faulty position plus one, averaged.
pub fn sequential_trials_bruteforce(n: u32, m1: u32, m2: u32) -> Result<BigRational, DomainError> {
    require_non_faulty_position(n, m1, m2)?;
    check_brute_force_size(n, m1, m2)?;
    let first = permutation_masks(n, m1);
    let second = permutation_masks(n, m2);
    let mut total_steps: u64 = 0;
    for a in &first {
        for b in &second {
            total_steps += u64::from((a | b).trailing_ones()) + 1;
        }
    }
    let pairs = (first.len() * second.len()) as u64;
    Ok(ratio(total_steps, pairs))
}
