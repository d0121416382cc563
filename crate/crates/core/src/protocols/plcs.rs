use std::fmt;

use serde::{Deserialize, Serialize};

use super::source::PairSource;
use super::step::ProtocolError;
use crate::analysis::{DomainError, ListPair};
use crate::simnet::SharedCoin;
use crate::types::{ClusterConfig, ReplicaId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ListPairFunction {
    SfMin,
    SfMax,
}

impl fmt::Display for ListPairFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ListPairFunction::SfMin => "sf_min",
            ListPairFunction::SfMax => "sf_max",
        })
    }
}

/// First `n` entries of `list` repeated cyclically.
fn repeat(n: u32, list: Vec<ReplicaId>) -> Vec<ReplicaId> {
    list.iter().copied().cycle().take(n as usize).collect()
}

/// Both cluster lists cut to the smaller size.
pub fn sf_min(c1: &ClusterConfig, c2: &ClusterConfig) -> (Vec<ReplicaId>, Vec<ReplicaId>) {
    let n = c1.n().min(c2.n());
    (repeat(n, c1.list()), repeat(n, c2.list()))
}

/// Both cluster lists cycled up to the larger size.
pub fn sf_max(c1: &ClusterConfig, c2: &ClusterConfig) -> (Vec<ReplicaId>, Vec<ReplicaId>) {
    let n = c1.n().max(c2.n());
    (repeat(n, c1.list()), repeat(n, c2.list()))
}

impl ListPairFunction {
    pub fn apply(self, c1: &ClusterConfig, c2: &ClusterConfig) -> (Vec<ReplicaId>, Vec<ReplicaId>) {
        match self {
            ListPairFunction::SfMin => sf_min(c1, c2),
            ListPairFunction::SfMax => sf_max(c1, c2),
        }
    }
}

/// Independent uniform shuffles of `s1` and `s2` drawn from `coin`.
pub fn random_permutation_pair(
    s1: &[ReplicaId],
    s2: &[ReplicaId],
    coin: &mut SharedCoin,
    is_faulty: impl Fn(ReplicaId) -> bool,
) -> Result<ListPair, DomainError> {
    if s1.len() != s2.len() {
        return Err(DomainError::new(format!(
            "list lengths differ: {} vs {}",
            s1.len(),
            s2.len()
        )));
    }
    let mut p1 = s1.to_vec();
    let mut p2 = s2.to_vec();
    coin.shuffle(&mut p1);
    coin.shuffle(&mut p2);
    ListPair::new(p1, p2, is_faulty)
}

/// Plcs pair selection: the positions of one random permutation pair, in order.
#[derive(Debug, Clone)]
pub struct ListPairs {
    s1: Vec<ReplicaId>,
    s2: Vec<ReplicaId>,
    faulty: Vec<ReplicaId>,
    current: Option<ListPair>,
    next: usize,
}

impl ListPairs {
    /// Fails when `n <= f(S1) + f(S2)`: then some permutation pairs have no
    /// non-faulty position at all.
    pub fn new(
        c1: &ClusterConfig,
        c2: &ClusterConfig,
        sf: ListPairFunction,
    ) -> Result<Self, ProtocolError> {
        let (s1, s2) = sf.apply(c1, c2);
        let f1 = s1.iter().filter(|r| c1.is_faulty(**r)).count() as u32;
        let f2 = s2.iter().filter(|r| c2.is_faulty(**r)).count() as u32;
        let n = s1.len() as u32;
        if n <= f1 + f2 {
            return Err(ProtocolError::Robustness { n, faulty: f1 + f2 });
        }
        let faulty = c1.faulty().iter().chain(c2.faulty()).copied().collect();
        Ok(Self {
            s1,
            s2,
            faulty,
            current: None,
            next: 0,
        })
    }

    pub fn lists(&self) -> (&[ReplicaId], &[ReplicaId]) {
        (&self.s1, &self.s2)
    }

    pub fn permutation(&self) -> Option<&ListPair> {
        self.current.as_ref()
    }

    fn draw(&mut self, coin: &mut SharedCoin) {
        let faulty = &self.faulty;
        let pair = random_permutation_pair(&self.s1, &self.s2, coin, |r| faulty.contains(&r))
            .expect("list-pair functions produce equal lengths");
        self.current = Some(pair);
        self.next = 0;
    }
}

impl PairSource for ListPairs {
    fn next_pair(&mut self, coin: &mut SharedCoin) -> Option<(ReplicaId, ReplicaId)> {
        if self.current.is_none() {
            self.draw(coin);
        }
        let pair = self.current.as_ref()?;
        if self.next >= pair.len() {
            return None;
        }
        let i = self.next;
        self.next += 1;
        Some((pair.p1[i], pair.p2[i]))
    }

    fn restart(&mut self, coin: &mut SharedCoin) -> bool {
        self.draw(coin);
        true
    }
}
