use super::prune::PruneState;
use super::source::PairSource;
use crate::simnet::SharedCoin;
use crate::types::{ClusterConfig, ReplicaId};

/// Picks an index into the candidate list. The default draws it from the
/// shared coin; tests can script the choice.
pub type Chooser = Box<dyn FnMut(&[(ReplicaId, ReplicaId)]) -> usize + Send>;

/// Ppcs pair selection: uniform over the pairs the [`PruneState`] still allows.
pub struct PrunedPairs {
    state: PruneState,
    chooser: Option<Chooser>,
}

impl PrunedPairs {
    pub fn new(c1: &ClusterConfig, c2: &ClusterConfig) -> Self {
        Self {
            state: PruneState::new(c1, c2),
            chooser: None,
        }
    }

    pub fn with_chooser(mut self, chooser: Chooser) -> Self {
        self.chooser = Some(chooser);
        self
    }

    pub fn state(&self) -> &PruneState {
        &self.state
    }
}

impl PairSource for PrunedPairs {
    fn next_pair(&mut self, coin: &mut SharedCoin) -> Option<(ReplicaId, ReplicaId)> {
        let candidates = self.state.candidates();
        if candidates.is_empty() {
            return None;
        }
        let i = match self.chooser.as_mut() {
            Some(choose) => choose(&candidates).min(candidates.len() - 1),
            None => coin.draw(candidates.len() as u64) as usize,
        };
        let (r1, r2) = candidates[i];
        self.state.mark_tried(r1, r2);
        Some((r1, r2))
    }

    fn record_failure(&mut self, r1: ReplicaId, r2: ReplicaId) {
        self.state.record_failure(r1, r2);
    }

    fn restart(&mut self, _coin: &mut SharedCoin) -> bool {
        self.state.reset();
        true
    }
}
