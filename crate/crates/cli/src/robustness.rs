//! Expected Plcs cost per robustness row, over faulty placements.
//!
//! A list-pair function cuts or cycles the cluster lists to a common length
//! `N`, so the number of faulty entries `f(S)` of a list depends on where the
//! faulty replicas sit. For a list of length `N = q n + r` built from a
//! cluster of `n` replicas with `f` faulty ones, `f(S) = q f + h` where `h`
//! counts faulty replicas among the first `r`. Under a uniformly random
//! placement `h` is hypergeometric; an adversary picks the largest `h`.

use std::collections::BTreeMap;
use std::fmt;

use clustersend_core::analysis::{binomial, pt_exact, sequential_trials_exact, DomainError};
use clustersend_core::protocols::ListPairFunction;
use clustersend_core::Rational;
use num_bigint::BigInt;
use num_traits::Zero;

/// One Plcs robustness row with its expected-case bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Row {
    /// sf_min, expected at most 4.
    MinOverSum,
    /// sf_min, expected at most 2¼.
    MinOverTwiceSum,
    /// sf_max, expected at most 3.
    ThirdEach,
}

/// Each row is listed with one robustness condition, while its bound is
/// only argued under a stricter one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Condition {
    Listed,
    Strict,
}

impl Row {
    pub const ALL: [Row; 3] = [Row::MinOverSum, Row::MinOverTwiceSum, Row::ThirdEach];

    pub fn list_pair_function(self) -> ListPairFunction {
        match self {
            Row::ThirdEach => ListPairFunction::SfMax,
            _ => ListPairFunction::SfMin,
        }
    }

    pub fn expected_bound(self) -> Rational {
        match self {
            Row::MinOverSum => Rational::from_integer(4.into()),
            Row::MinOverTwiceSum => Rational::new(9.into(), 4.into()),
            Row::ThirdEach => Rational::from_integer(3.into()),
        }
    }

    pub fn holds(self, condition: Condition, n1: u32, f1: u32, n2: u32, f2: u32) -> bool {
        let min = n1.min(n2);
        let max_f = f1.max(f2);
        match (self, condition) {
            (Row::MinOverSum, Condition::Listed) => min > f1 + f2,
            (Row::MinOverSum, Condition::Strict) => min > 2 * max_f,
            (Row::MinOverTwiceSum, Condition::Listed) => min > 2 * (f1 + f2),
            (Row::MinOverTwiceSum, Condition::Strict) => min > 3 * max_f,
            (Row::ThirdEach, _) => n1 > 3 * f1 && n2 > 3 * f2,
        }
    }
}

impl fmt::Display for Row {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Row::MinOverSum => "sf_min, min(n1,n2) > f1+f2, expected 4",
            Row::MinOverTwiceSum => "sf_min, min(n1,n2) > 2(f1+f2), expected 2 1/4",
            Row::ThirdEach => "sf_max, n1 > 3f1 and n2 > 3f2, expected 3",
        })
    }
}

/// Length of the lists `sf` builds.
pub fn list_len(sf: ListPairFunction, n1: u32, n2: u32) -> u32 {
    match sf {
        ListPairFunction::SfMin => n1.min(n2),
        ListPairFunction::SfMax => n1.max(n2),
    }
}

/// Distribution of `f(S)` for a list of length `len` built from a cluster of
/// `n` replicas with `f` faulty ones placed uniformly at random.
pub fn faulty_entries(len: u32, n: u32, f: u32) -> Vec<(u32, Rational)> {
    let (q, r) = (len / n, len % n);
    let total = BigInt::from(binomial(n, r));
    (0..=f.min(r))
        .filter(|&h| r - h <= n - f)
        .map(|h| {
            let ways = BigInt::from(binomial(f, h) * binomial(n - f, r - h));
            (q * f + h, Rational::new(ways, total.clone()))
        })
        .collect()
}

/// Largest `f(S)` an adversarial placement can produce.
pub fn worst_faulty_entries(len: u32, n: u32, f: u32) -> u32 {
    let (q, r) = (len / n, len % n);
    q * f + f.min(r)
}

/// Memoised expectation of a list pair with given faulty counts.
#[derive(Debug, Default)]
pub struct Expectations {
    pt: BTreeMap<(u32, u32, u32), Option<Rational>>,
    in_order: BTreeMap<(u32, u32, u32), Option<Rational>>,
}

impl Expectations {
    pub fn new() -> Self {
        Self::default()
    }

    /// `PT(n, m1, m2)`, or `None` when `m1 + m2 >= n`.
    pub fn pt(&mut self, n: u32, m1: u32, m2: u32) -> Option<Rational> {
        self.pt
            .entry((n, m1, m2))
            .or_insert_with(|| pt_exact(n, m1, m2).ok())
            .clone()
    }

    /// Expected steps when positions are tried in list order.
    pub fn in_order(&mut self, n: u32, m1: u32, m2: u32) -> Option<Rational> {
        self.in_order
            .entry((n, m1, m2))
            .or_insert_with(|| sequential_trials_exact(n, m1, m2).ok())
            .clone()
    }

    /// In-order expectation averaged over uniformly random placements.
    pub fn random_placement(
        &mut self,
        sf: ListPairFunction,
        (n1, f1, n2, f2): (u32, u32, u32, u32),
    ) -> Result<Rational, DomainError> {
        let len = list_len(sf, n1, n2);
        let mut sum = Rational::zero();
        for (m1, p1) in faulty_entries(len, n1, f1) {
            for (m2, p2) in faulty_entries(len, n2, f2) {
                let e = self.in_order(len, m1, m2).ok_or_else(|| {
                    DomainError::new(format!(
                        "some placement leaves no non-faulty position (N = {len}, f(S1) = {m1}, f(S2) = {m2})"
                    ))
                })?;
                sum += e * &p1 * &p2;
            }
        }
        Ok(sum)
    }
}

/// `(n1, f1, n2, f2)`.
pub type Shape = (u32, u32, u32, u32);

/// Largest expectation of a row over a grid of cluster shapes.
#[derive(Debug, Clone, PartialEq)]
pub struct RowProbe {
    pub row: Row,
    pub condition: Condition,
    pub shapes: u64,
    /// Shapes where an adversarial placement leaves no non-faulty position.
    pub not_robust: u64,
    pub worst_pt: Option<(Rational, Shape)>,
    pub worst_in_order: Option<(Rational, Shape)>,
}

impl RowProbe {
    /// The row's expected-case bound holds for `PT` on every shape.
    pub fn pt_within_bound(&self) -> bool {
        self.not_robust == 0
            && self
                .worst_pt
                .as_ref()
                .is_none_or(|(v, _)| *v <= self.row.expected_bound())
    }

    pub fn in_order_within_bound(&self) -> bool {
        self.not_robust == 0
            && self
                .worst_in_order
                .as_ref()
                .is_none_or(|(v, _)| *v <= self.row.expected_bound())
    }
}

fn keep_max(slot: &mut Option<(Rational, Shape)>, v: Rational, shape: (u32, u32, u32, u32)) {
    if slot.as_ref().is_none_or(|(best, _)| v > *best) {
        *slot = Some((v, shape));
    }
}

/// Checks `row` on every shape with `n1, n2 <= max_n` and `n > 2f` that
/// satisfies `condition`, with the adversary placing faulty replicas.
pub fn probe(row: Row, condition: Condition, max_n: u32, memo: &mut Expectations) -> RowProbe {
    let sf = row.list_pair_function();
    let mut out = RowProbe {
        row,
        condition,
        shapes: 0,
        not_robust: 0,
        worst_pt: None,
        worst_in_order: None,
    };
    for n1 in 1..=max_n {
        for n2 in 1..=max_n {
            for f1 in 0..=(n1 - 1) / 2 {
                for f2 in 0..=(n2 - 1) / 2 {
                    if !row.holds(condition, n1, f1, n2, f2) {
                        continue;
                    }
                    out.shapes += 1;
                    let shape = (n1, f1, n2, f2);
                    let len = list_len(sf, n1, n2);
                    let m1 = worst_faulty_entries(len, n1, f1);
                    let m2 = worst_faulty_entries(len, n2, f2);
                    match (memo.pt(len, m1, m2), memo.in_order(len, m1, m2)) {
                        (Some(pt), Some(seq)) => {
                            keep_max(&mut out.worst_pt, pt, shape);
                            keep_max(&mut out.worst_in_order, seq, shape);
                        }
                        _ => out.not_robust += 1,
                    }
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::One;

    #[test]
    fn faulty_entry_distribution_sums_to_one() {
        for (len, n, f) in [(5, 9, 4), (7, 4, 1), (13, 5, 2), (4, 4, 1)] {
            let dist = faulty_entries(len, n, f);
            let total: Rational = dist.iter().map(|(_, p)| p.clone()).sum();
            assert!(total.is_one(), "{len} {n} {f}");
            let max = dist.iter().map(|(m, _)| *m).max().unwrap();
            assert_eq!(max, worst_faulty_entries(len, n, f));
        }
        // Cycling 4 replicas to 7 entries repeats the first three.
        assert_eq!(worst_faulty_entries(7, 4, 1), 2);
    }

    #[test]
    fn listed_condition_admits_a_placement_above_four() {
        assert!(Row::MinOverSum.holds(Condition::Listed, 9, 4, 5, 0));
        assert!(!Row::MinOverSum.holds(Condition::Strict, 9, 4, 5, 0));
        let mut memo = Expectations::new();
        let m1 = worst_faulty_entries(5, 9, 4);
        assert_eq!(memo.pt(5, m1, 0), Some(Rational::from_integer(5.into())));
    }
}
