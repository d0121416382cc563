//! Failure bookkeeping for Ppcs.
//!
//! In a synchronous run a failed cs-step means one of its two endpoints is
//! faulty. A sender that failed with `f2 + 1` distinct receivers must itself
//! be faulty (not all of them can be), and symmetrically for receivers; such
//! replicas are excluded, and failed pairs are never tried again.
//!
//! Those three rules alone still allow about `2 f1 f2 + f1 + f2 + 1` steps in
//! the worst case. Reaching `(f1 + 1)(f2 + 1)` needs the observation that
//! the failures must be explainable by at most `f1` faulty senders and `f2`
//! faulty receivers *simultaneously*. A pair is kept only if some such
//! explanation leaves both of its endpoints non-faulty. The true faulty sets
//! are always one explanation, so a non-faulty pair is never pruned.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::ToPrimitive;

use crate::analysis::binomial;
use crate::types::{ClusterConfig, ReplicaId};

/// Upper limit on explanations enumerated per selection. Beyond it the
/// state falls back to the three basic rules.
const EXPLANATION_BUDGET: u64 = 200_000;

/// Clusters up to this size get the explanation filter (bitmask based).
const MASK_LIMIT: u32 = 128;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PruneState {
    c1: Vec<ReplicaId>,
    c2: Vec<ReplicaId>,
    f1: u32,
    f2: u32,
    tried: BTreeSet<(ReplicaId, ReplicaId)>,
    partners_1: BTreeMap<ReplicaId, BTreeSet<ReplicaId>>,
    partners_2: BTreeMap<ReplicaId, BTreeSet<ReplicaId>>,
    excluded_1: BTreeSet<ReplicaId>,
    excluded_2: BTreeSet<ReplicaId>,
    /// Per sender index, the receiver indices it failed with.
    failed_masks: Vec<u128>,
    /// Per sender index, the receiver indices it was paired with.
    tried_masks: Vec<u128>,
}

impl PruneState {
    pub fn new(c1: &ClusterConfig, c2: &ClusterConfig) -> Self {
        let masked = c1.n() <= MASK_LIMIT && c2.n() <= MASK_LIMIT;
        Self {
            c1: c1.list(),
            c2: c2.list(),
            f1: c1.f(),
            f2: c2.f(),
            tried: BTreeSet::new(),
            partners_1: BTreeMap::new(),
            partners_2: BTreeMap::new(),
            excluded_1: BTreeSet::new(),
            excluded_2: BTreeSet::new(),
            failed_masks: if masked {
                vec![0; c1.n() as usize]
            } else {
                Vec::new()
            },
            tried_masks: if masked {
                vec![0; c1.n() as usize]
            } else {
                Vec::new()
            },
        }
    }

    pub fn reset(&mut self) {
        self.tried.clear();
        self.partners_1.clear();
        self.partners_2.clear();
        self.excluded_1.clear();
        self.excluded_2.clear();
        self.failed_masks.iter_mut().for_each(|m| *m = 0);
        self.tried_masks.iter_mut().for_each(|m| *m = 0);
    }

    pub fn tried(&self) -> &BTreeSet<(ReplicaId, ReplicaId)> {
        &self.tried
    }

    pub fn excluded_1(&self) -> &BTreeSet<ReplicaId> {
        &self.excluded_1
    }

    pub fn excluded_2(&self) -> &BTreeSet<ReplicaId> {
        &self.excluded_2
    }

    /// Distinct receivers `r1` failed with.
    pub fn fail_count_1(&self, r1: ReplicaId) -> u32 {
        self.partners_1.get(&r1).map_or(0, |s| s.len() as u32)
    }

    /// Distinct senders `r2` failed with.
    pub fn fail_count_2(&self, r2: ReplicaId) -> u32 {
        self.partners_2.get(&r2).map_or(0, |s| s.len() as u32)
    }

    pub fn mark_tried(&mut self, r1: ReplicaId, r2: ReplicaId) {
        self.tried.insert((r1, r2));
        if let Some(mask) = self.tried_masks.get_mut(r1.index as usize) {
            *mask |= 1u128 << r2.index;
        }
    }

    pub fn record_failure(&mut self, r1: ReplicaId, r2: ReplicaId) {
        self.mark_tried(r1, r2);
        if let Some(mask) = self.failed_masks.get_mut(r1.index as usize) {
            *mask |= 1u128 << r2.index;
        }
        let p1 = self.partners_1.entry(r1).or_default();
        p1.insert(r2);
        if p1.len() as u32 > self.f2 {
            self.excluded_1.insert(r1);
        }
        let p2 = self.partners_2.entry(r2).or_default();
        p2.insert(r1);
        if p2.len() as u32 > self.f1 {
            self.excluded_2.insert(r2);
        }
    }

    /// For each sender index, the receivers it may be paired with under some
    /// explanation of the failures, or `None` when the lists are too long for
    /// masks or the enumeration would exceed the budget.
    fn explainable(&self) -> Option<Vec<u128>> {
        if self.failed_masks.is_empty() {
            return None;
        }
        let blamable: Vec<usize> = (0..self.failed_masks.len())
            .filter(|i| self.failed_masks[*i] != 0)
            .collect();
        let max_size = (self.f1 as usize).min(blamable.len());
        let count: u64 = (0..=max_size)
            .map(|j| {
                binomial(blamable.len() as u32, j as u32)
                    .to_u64()
                    .unwrap_or(u64::MAX)
            })
            .fold(0u64, u64::saturating_add);
        if count > EXPLANATION_BUDGET {
            return None;
        }
        let all_receivers = if self.c2.len() == 128 {
            u128::MAX
        } else {
            (1u128 << self.c2.len()) - 1
        };
        let mut allowed = vec![0u128; self.c1.len()];
        // Walk all subsets of `blamable` with at most f1 members. `blamed`
        // holds the senders assumed faulty, `rest` the receivers that must
        // then be faulty to explain the remaining failures.
        fn walk(
            state: &PruneState,
            blamable: &[usize],
            from: usize,
            budget: usize,
            blamed: u128,
            allowed: &mut [u128],
            all_receivers: u128,
        ) {
            let rest = blamable
                .iter()
                .filter(|i| blamed & (1u128 << **i) == 0)
                .fold(0u128, |m, i| m | state.failed_masks[*i]);
            if rest.count_ones() <= state.f2 {
                let good_receivers = all_receivers & !rest;
                for (i, slot) in allowed.iter_mut().enumerate() {
                    if blamed & (1u128 << i) == 0 {
                        *slot |= good_receivers;
                    }
                }
            }
            if budget == 0 {
                return;
            }
            for k in from..blamable.len() {
                walk(
                    state,
                    blamable,
                    k + 1,
                    budget - 1,
                    blamed | (1u128 << blamable[k]),
                    allowed,
                    all_receivers,
                );
            }
        }
        walk(self, &blamable, 0, max_size, 0, &mut allowed, all_receivers);
        Some(allowed)
    }

    /// Pairs still worth trying, in list order.
    pub fn candidates(&self) -> Vec<(ReplicaId, ReplicaId)> {
        let explainable = self.explainable();
        let mut out = Vec::new();
        for (i, a) in self.c1.iter().enumerate() {
            if self.excluded_1.contains(a) {
                continue;
            }
            for (j, b) in self.c2.iter().enumerate() {
                let tried = match self.tried_masks.get(i) {
                    Some(mask) => mask & (1u128 << j) != 0,
                    None => self.tried.contains(&(*a, *b)),
                };
                if tried || self.excluded_2.contains(b) {
                    continue;
                }
                if explainable
                    .as_ref()
                    .is_none_or(|ok| ok[i] & (1u128 << j) != 0)
                {
                    out.push((*a, *b));
                }
            }
        }
        out
    }
}
