//! Exhaustive search over every choice Ppcs could make.

use std::collections::HashMap;

use super::prune::PruneState;
use super::step::ProtocolError;
use crate::types::{ClusterConfig, ReplicaId};

/// The longest run found, as the candidate index picked at each step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorstPath {
    pub steps: u64,
    pub choices: Vec<usize>,
}

struct Search<'a> {
    c1: &'a ClusterConfig,
    c2: &'a ClusterConfig,
    memo: HashMap<u128, WorstPath>,
}

impl Search<'_> {
    fn bit(&self, (a, b): (ReplicaId, ReplicaId)) -> u128 {
        1u128 << (a.index * self.c2.n() + b.index)
    }

    fn fails(&self, (a, b): (ReplicaId, ReplicaId)) -> bool {
        self.c1.is_faulty(a) || self.c2.is_faulty(b)
    }

    fn longest(&mut self, state: &PruneState, failed: u128) -> Result<WorstPath, ProtocolError> {
        let candidates = state.candidates();
        if candidates.is_empty() {
            return Err(ProtocolError::Invariant(format!(
                "no candidates left with {} failed pairs",
                failed.count_ones()
            )));
        }
        let mut best = WorstPath {
            steps: 0,
            choices: Vec::new(),
        };
        for (i, pair) in candidates.iter().enumerate() {
            let path = if self.fails(*pair) {
                let key = failed | self.bit(*pair);
                let rest = match self.memo.get(&key) {
                    Some(hit) => hit.clone(),
                    None => {
                        let mut next = state.clone();
                        next.record_failure(pair.0, pair.1);
                        self.longest(&next, key)?
                    }
                };
                let mut choices = vec![i];
                choices.extend(rest.choices);
                WorstPath {
                    steps: rest.steps + 1,
                    choices,
                }
            } else {
                WorstPath {
                    steps: 1,
                    choices: vec![i],
                }
            };
            if path.steps > best.steps {
                best = path;
            }
        }
        self.memo.insert(failed, best.clone());
        Ok(best)
    }
}

/// Longest Ppcs run over all candidate choices when every pair with a faulty
/// endpoint fails, i.e. against the worst-case adversary under synchrony.
/// Limited to `n1 * n2 <= 128`.
pub fn ppcs_worst_case(c1: &ClusterConfig, c2: &ClusterConfig) -> Result<WorstPath, ProtocolError> {
    if c1.n() * c2.n() > 128 {
        return Err(ProtocolError::Invariant(
            "exhaustive search needs n1 * n2 <= 128".into(),
        ));
    }
    let mut search = Search {
        c1,
        c2,
        memo: HashMap::new(),
    };
    let state = PruneState::new(c1, c2);
    search.longest(&state, 0)
}
