use crate::simnet::SharedCoin;
use crate::types::ReplicaId;

/// Where a protocol gets the replica pair for its next cs-step.
pub trait PairSource {
    /// The next pair, or `None` if the source has run dry.
    fn next_pair(&mut self, coin: &mut SharedCoin) -> Option<(ReplicaId, ReplicaId)>;

    /// Called when a step with this pair did not confirm in time.
    fn record_failure(&mut self, _r1: ReplicaId, _r2: ReplicaId) {}

    /// Starts over after running dry. Only the asynchronous driver calls
    /// this, since there failures may be the network's fault.
    fn restart(&mut self, _coin: &mut SharedCoin) -> bool {
        false
    }
}

/// Pcs: a uniformly random pair on every call, with replacement.
#[derive(Debug, Clone)]
pub struct UniformPairs {
    s1: Vec<ReplicaId>,
    s2: Vec<ReplicaId>,
}

impl UniformPairs {
    pub fn new(s1: Vec<ReplicaId>, s2: Vec<ReplicaId>) -> Self {
        assert!(!s1.is_empty() && !s2.is_empty());
        Self { s1, s2 }
    }
}

impl PairSource for UniformPairs {
    fn next_pair(&mut self, coin: &mut SharedCoin) -> Option<(ReplicaId, ReplicaId)> {
        let i = coin.draw((self.s1.len() * self.s2.len()) as u64) as usize;
        Some((self.s1[i / self.s2.len()], self.s2[i % self.s2.len()]))
    }
}
