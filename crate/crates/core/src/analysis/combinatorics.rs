//! Counting permutation pairs by their number of faulty positions.
//!
//! `FC(n, m1, m2, k)` is the number of pairs `(P1, P2)` of permutations of two
//! `n`-lists holding `m1` and `m2` faulty entries such that exactly `k`
//! positions have a faulty entry in `P1` or `P2`. Three independent routes are
//! provided: the four-way recursion over the first position, the factorial
//! closed form, and the unsimplified product of binomials and list-merge
//! counts the closed form is derived from.

use std::cell::RefCell;
use std::collections::HashMap;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use super::DomainError;
use crate::types::ReplicaId;

pub fn factorial(n: u32) -> BigUint {
    (1..=n).fold(BigUint::one(), |acc, i| acc * i)
}

pub fn binomial(n: u32, k: u32) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// `LM(v, w) = (v+w)! / (v! w!)`: interleavings of two disjoint lists that
/// preserve the internal order of both.
pub fn list_merge_count(v: u32, w: u32) -> BigUint {
    factorial(v + w) / (factorial(v) * factorial(w))
}

/// Feasible range `max(m1, m2) ..= min(n, m1 + m2)` of the faulty-position count.
pub fn feasible_k(n: u32, m1: u32, m2: u32) -> std::ops::RangeInclusive<u32> {
    m1.max(m2)..=n.min(m1 + m2)
}

fn check_domain(n: u32, m1: u32, m2: u32, k: u32) -> Result<(), DomainError> {
    if m1 > n || m2 > n {
        return Err(DomainError::new(format!(
            "faulty counts m1 = {m1}, m2 = {m2} exceed list length n = {n}"
        )));
    }
    if !feasible_k(n, m1, m2).contains(&k) {
        return Err(DomainError::new(format!(
            "k = {k} outside feasible range [{}, {}] for (n, m1, m2) = ({n}, {m1}, {m2})",
            m1.max(m2),
            n.min(m1 + m2)
        )));
    }
    Ok(())
}

/// Memo table for the FC recursion.
#[derive(Debug, Default)]
pub struct FcMemo {
    table: HashMap<(i64, i64, i64, i64), BigUint>,
}

impl FcMemo {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn fc(&mut self, n: u32, m1: u32, m2: u32, k: u32) -> BigUint {
        self.eval(n as i64, m1 as i64, m2 as i64, k as i64)
    }

    fn eval(&mut self, n: i64, m1: i64, m2: i64, k: i64) -> BigUint {
        if n < 0 || m1 < 0 || m2 < 0 || k < 0 || m1 > n || m2 > n {
            return BigUint::zero();
        }
        if k < m1.max(m2) || k > n.min(m1 + m2) {
            return BigUint::zero();
        }
        if n == 0 {
            // only (0, 0, 0, 0) survives the range checks above
            return BigUint::one();
        }
        if let Some(hit) = self.table.get(&(n, m1, m2, k)) {
            return hit.clone();
        }
        let coef = |x: i64| BigUint::from(x as u64);
        let mut total = BigUint::zero();
        if n > m1 && n > m2 {
            total += coef((n - m1) * (n - m2)) * self.eval(n - 1, m1, m2, k);
        }
        if m1 > 0 && n > m2 {
            total += coef(m1 * (n - m2)) * self.eval(n - 1, m1 - 1, m2, k - 1);
        }
        if n > m1 && m2 > 0 {
            total += coef((n - m1) * m2) * self.eval(n - 1, m1, m2 - 1, k - 1);
        }
        if m1 > 0 && m2 > 0 {
            total += coef(m1 * m2) * self.eval(n - 1, m1 - 1, m2 - 1, k - 1);
        }
        self.table.insert((n, m1, m2, k), total.clone());
        total
    }
}

thread_local! {
    static FC_MEMO: RefCell<FcMemo> = RefCell::new(FcMemo::new());
}

/// FC via the four-case recursion on the first position; zero outside the
/// feasible range.
pub fn fc_recursive(n: u32, m1: u32, m2: u32, k: u32) -> BigUint {
    FC_MEMO.with(|memo| memo.borrow_mut().fc(n, m1, m2, k))
}

/// `FC = m1! m2! (n-m1)! (n-m2)! n! / (b1! b2! b12! (n-k)!)`.
pub fn fc_closed(n: u32, m1: u32, m2: u32, k: u32) -> Result<BigUint, DomainError> {
    let b = pair_type_counts(n, m1, m2, k)?;
    let numerator =
        factorial(m1) * factorial(m2) * factorial(n - m1) * factorial(n - m2) * factorial(n);
    let denominator = factorial(b.b1) * factorial(b.b2) * factorial(b.b12) * factorial(b.good);
    Ok(numerator / denominator)
}

/// The unsimplified construction count: choose and order the 1-faulty and
/// 2-faulty pairs, order the both-faulty and non-faulty pairs, then merge the
/// four lists.
pub fn fc_product(n: u32, m1: u32, m2: u32, k: u32) -> Result<BigUint, DomainError> {
    let b = pair_type_counts(n, m1, m2, k)?;
    let sq = |x: BigUint| &x * &x;
    let type_a = sq(factorial(b.b1)) * binomial(m1, b.b1) * binomial(n - m2, b.b1);
    let type_b = sq(factorial(b.b2)) * binomial(n - m1, b.b2) * binomial(m2, b.b2);
    let type_c = sq(factorial(b.b12));
    let type_d = sq(factorial(b.good));
    Ok(type_a
        * type_b
        * list_merge_count(b.b1, b.b2)
        * type_c
        * list_merge_count(b.b1 + b.b2, b.b12)
        * type_d
        * list_merge_count(k, n - k))
}

/// Numbers of 1-faulty, 2-faulty, both-faulty and non-faulty position pairs
/// in any permutation pair with exactly `k` faulty positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairTypeCounts {
    pub b1: u32,
    pub b2: u32,
    pub b12: u32,
    pub good: u32,
}

pub fn pair_type_counts(n: u32, m1: u32, m2: u32, k: u32) -> Result<PairTypeCounts, DomainError> {
    check_domain(n, m1, m2, k)?;
    Ok(PairTypeCounts {
        b1: k - m2,
        b2: k - m1,
        b12: m1 + m2 - k,
        good: n - k,
    })
}

/// Two equal-length replica lists with per-position faulty flags.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ListPair {
    pub p1: Vec<ReplicaId>,
    pub p2: Vec<ReplicaId>,
    pub faulty1: Vec<bool>,
    pub faulty2: Vec<bool>,
}

impl ListPair {
    pub fn new(
        p1: Vec<ReplicaId>,
        p2: Vec<ReplicaId>,
        is_faulty: impl Fn(ReplicaId) -> bool,
    ) -> Result<Self, DomainError> {
        if p1.len() != p2.len() {
            return Err(DomainError::new(format!(
                "list lengths differ: {} vs {}",
                p1.len(),
                p2.len()
            )));
        }
        let faulty1 = p1.iter().map(|r| is_faulty(*r)).collect();
        let faulty2 = p2.iter().map(|r| is_faulty(*r)).collect();
        Ok(Self {
            p1,
            p2,
            faulty1,
            faulty2,
        })
    }

    pub fn len(&self) -> usize {
        self.p1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.p1.is_empty()
    }

    pub fn f1(&self) -> u32 {
        self.faulty1.iter().filter(|f| **f).count() as u32
    }

    pub fn f2(&self) -> u32 {
        self.faulty2.iter().filter(|f| **f).count() as u32
    }

    pub fn is_faulty_position(&self, i: usize) -> bool {
        self.faulty1[i] || self.faulty2[i]
    }
}

pub fn faulty_positions(pair: &ListPair) -> Result<u32, DomainError> {
    if pair.faulty1.len() != pair.faulty2.len() {
        return Err(DomainError::new("list lengths differ".to_string()));
    }
    Ok(pair
        .faulty1
        .iter()
        .zip(&pair.faulty2)
        .filter(|(a, b)| **a || **b)
        .count() as u32)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::ClusterId;

    fn lm_recursive(v: u32, w: u32) -> BigUint {
        if v == 0 || w == 0 {
            BigUint::one()
        } else {
            lm_recursive(v - 1, w) + lm_recursive(v, w - 1)
        }
    }

    #[test]
    fn list_merge_values() {
        for w in 0..8 {
            assert_eq!(list_merge_count(0, w), BigUint::one());
        }
        assert_eq!(list_merge_count(1, 1), BigUint::from(2u32));
        assert_eq!(list_merge_count(2, 3), BigUint::from(10u32));
        for v in 0..9 {
            for w in 0..9 {
                assert_eq!(list_merge_count(v, w), lm_recursive(v, w), "LM({v},{w})");
                assert_eq!(list_merge_count(v, w), list_merge_count(w, v));
            }
        }
    }

    #[test]
    fn fc_base_and_out_of_range() {
        assert_eq!(fc_recursive(0, 0, 0, 0), BigUint::one());
        assert_eq!(fc_recursive(5, 2, 2, 1), BigUint::zero());
        assert_eq!(fc_recursive(5, 2, 2, 5), BigUint::zero());
        assert_eq!(fc_recursive(3, 2, 2, 4), BigUint::zero());
    }

    #[test]
    fn fc_worked_example() {
        let expected = BigUint::from(8640u32);
        assert_eq!(fc_recursive(5, 3, 1, 3), expected);
        assert_eq!(fc_closed(5, 3, 1, 3).unwrap(), expected);
        assert_eq!(fc_product(5, 3, 1, 3).unwrap(), expected);
    }

    #[test]
    fn fc_closed_small_cases() {
        assert_eq!(fc_closed(1, 0, 0, 0).unwrap(), BigUint::one());
        assert_eq!(fc_closed(5, 2, 2, 2).unwrap(), fc_recursive(5, 2, 2, 2));
        assert_eq!(fc_product(4, 1, 1, 2).unwrap(), fc_recursive(4, 1, 1, 2));
        for n in 0..7 {
            let nf = factorial(n);
            assert_eq!(fc_product(n, 0, 0, 0).unwrap(), &nf * &nf);
        }
    }

    #[test]
    fn closed_forms_reject_infeasible_k() {
        assert!(fc_closed(5, 2, 2, 1).is_err());
        assert!(fc_product(5, 2, 2, 5).is_err());
        assert!(fc_closed(3, 4, 0, 4).is_err());
    }

    #[test]
    fn pair_types() {
        let counts = |n, m1, m2, k| {
            let p = pair_type_counts(n, m1, m2, k).unwrap();
            (p.b1, p.b2, p.b12, p.good)
        };
        assert_eq!(counts(5, 3, 1, 3), (2, 0, 1, 2));
        assert_eq!(counts(5, 2, 2, 2), (0, 0, 2, 3));
        assert_eq!(counts(5, 2, 2, 4), (2, 2, 0, 1));
        assert!(pair_type_counts(5, 2, 2, 1).is_err());
    }

    fn example_pair(first: [u32; 5], second: [u32; 5]) -> ListPair {
        // S1 and S2 have their first two replicas faulty
        let c1 = ClusterId(1);
        let c2 = ClusterId(2);
        ListPair::new(
            first.iter().map(|i| ReplicaId::new(c1, i - 1)).collect(),
            second.iter().map(|i| ReplicaId::new(c2, i - 1)).collect(),
            |r| r.index < 2,
        )
        .unwrap()
    }

    #[test]
    fn faulty_positions_of_worked_lists() {
        let p = example_pair([1, 5, 2, 4, 3], [1, 3, 2, 5, 4]);
        let q = example_pair([1, 3, 5, 4, 2], [5, 4, 3, 2, 1]);
        let r = example_pair([5, 4, 3, 2, 1], [1, 2, 3, 4, 5]);
        assert_eq!(faulty_positions(&p).unwrap(), 2);
        assert_eq!(faulty_positions(&q).unwrap(), 3);
        assert_eq!(faulty_positions(&r).unwrap(), 4);
    }

    #[test]
    fn list_pair_length_mismatch() {
        let c = ClusterId(1);
        assert!(ListPair::new(vec![ReplicaId::new(c, 0)], vec![], |_| false).is_err());
    }
}
