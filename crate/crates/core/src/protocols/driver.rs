use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::plcs::{ListPairFunction, ListPairs};
use super::ppcs::{Chooser, PrunedPairs};
use super::source::{PairSource, UniformPairs};
use super::step::{cs_step, launch, ProtocolError};
use crate::simnet::{NetworkMode, Simulation, TrialStats};
use crate::types::{ClusterId, ReplicaId, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProtocolKind {
    Pcs,
    Ppcs,
    PlcsMin,
    PlcsMax,
}

impl ProtocolKind {
    pub const ALL: [ProtocolKind; 4] = [
        ProtocolKind::Pcs,
        ProtocolKind::Ppcs,
        ProtocolKind::PlcsMin,
        ProtocolKind::PlcsMax,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ProtocolKind::Pcs => "pcs",
            ProtocolKind::Ppcs => "ppcs",
            ProtocolKind::PlcsMin => "plcs-min",
            ProtocolKind::PlcsMax => "plcs-max",
        }
    }

    pub fn list_pair_function(self) -> Option<ListPairFunction> {
        match self {
            ProtocolKind::PlcsMin => Some(ListPairFunction::SfMin),
            ProtocolKind::PlcsMax => Some(ListPairFunction::SfMax),
            _ => None,
        }
    }
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProtocolKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        ProtocolKind::ALL
            .into_iter()
            .find(|k| k.as_str() == norm)
            .ok_or_else(|| {
                format!("unknown protocol {s:?} (expected pcs, ppcs, plcs-min or plcs-max)")
            })
    }
}

/// Default iteration cap for Pcs, which has no termination guarantee.
pub fn default_max_iters(f1: u32, f2: u32) -> u64 {
    10 * u64::from(f1 + 1) * u64::from(f2 + 1)
}

fn require_sync(sim: &Simulation, what: &'static str) -> Result<(), ProtocolError> {
    if sim.network().mode == NetworkMode::Sync {
        Ok(())
    } else {
        Err(ProtocolError::RequiresSync(what))
    }
}

fn finish(sim: &Simulation, confirmed: bool) -> TrialStats {
    TrialStats {
        confirmed,
        ..sim.stats()
    }
}

/// Synchronous loop shared by all protocols: agree, then one cs-step at a
/// time until the proof is agreed on. Hitting `max_steps` stops the run
/// unconfirmed; a source running dry under synchrony is a broken invariant.
pub fn run_sync(
    sim: &mut Simulation,
    c1: ClusterId,
    c2: ClusterId,
    v: &Value,
    source: &mut dyn PairSource,
    max_steps: Option<u64>,
) -> Result<TrialStats, ProtocolError> {
    let m = sim.agree(c1, c2, v)?;
    let mut steps = 0u64;
    loop {
        if sim.has_confirmed(&m) {
            return Ok(finish(sim, true));
        }
        if max_steps.is_some_and(|cap| steps >= cap) {
            return Ok(finish(sim, false));
        }
        let Some((r1, r2)) = source.next_pair(sim.coin(c1)?) else {
            return Err(ProtocolError::Invariant(format!(
                "no pair left to try after {steps} failed cs-steps under synchrony"
            )));
        };
        steps += 1;
        if !cs_step(sim, r1, r2, &m)?.success {
            source.record_failure(r1, r2);
        }
    }
}

/// Pcs: uniformly random pairs with replacement, at most `max_iters` steps.
pub fn pcs(
    sim: &mut Simulation,
    c1: ClusterId,
    c2: ClusterId,
    v: &Value,
    max_iters: u64,
) -> Result<TrialStats, ProtocolError> {
    require_sync(sim, "pcs")?;
    let mut source = UniformPairs::new(sim.cluster(c1)?.list(), sim.cluster(c2)?.list());
    run_sync(sim, c1, c2, v, &mut source, Some(max_iters))
}

/// Ppcs: Pcs with failed pairs and provably faulty replicas pruned.
pub fn ppcs(
    sim: &mut Simulation,
    c1: ClusterId,
    c2: ClusterId,
    v: &Value,
    max_iters: u64,
) -> Result<TrialStats, ProtocolError> {
    require_sync(sim, "ppcs")?;
    let mut source = PrunedPairs::new(sim.cluster(c1)?, sim.cluster(c2)?);
    run_sync(sim, c1, c2, v, &mut source, Some(max_iters))
}

/// Ppcs with a scripted choice among the candidate pairs instead of the coin.
pub fn ppcs_with_chooser(
    sim: &mut Simulation,
    c1: ClusterId,
    c2: ClusterId,
    v: &Value,
    max_iters: u64,
    chooser: Chooser,
) -> Result<(TrialStats, PrunedPairs), ProtocolError> {
    require_sync(sim, "ppcs")?;
    let mut source = PrunedPairs::new(sim.cluster(c1)?, sim.cluster(c2)?).with_chooser(chooser);
    let stats = run_sync(sim, c1, c2, v, &mut source, Some(max_iters))?;
    Ok((stats, source))
}

/// Plcs: in-order positions of one random permutation pair of `sf`'s lists.
pub fn plcs(
    sim: &mut Simulation,
    c1: ClusterId,
    c2: ClusterId,
    v: &Value,
    sf: ListPairFunction,
) -> Result<TrialStats, ProtocolError> {
    require_sync(sim, "plcs")?;
    let mut source = ListPairs::new(sim.cluster(c1)?, sim.cluster(c2)?, sf)?;
    run_sync(sim, c1, c2, v, &mut source, None)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AsyncParams {
    /// Deadline unit: step `i` must finish `delta * 2^i` pulses after agreement.
    pub delta: u64,
    /// Steps started at once before any deadline passes.
    pub parallel_rounds: u32,
}

impl AsyncParams {
    /// `delta` covers a round trip at the largest configured delay.
    pub fn for_max_delay(delay_max: u64) -> Self {
        Self {
            delta: 2 * delay_max + 3,
            parallel_rounds: 4,
        }
    }
}

fn deadline(t0: u64, delta: u64, index: u64) -> u64 {
    let factor = if index >= 63 { u64::MAX } else { 1u64 << index };
    t0.saturating_add(delta.saturating_mul(factor))
}

/// Builds the pair source a protocol uses.
pub fn pair_source(
    kind: ProtocolKind,
    sim: &Simulation,
    c1: ClusterId,
    c2: ClusterId,
) -> Result<Box<dyn PairSource>, ProtocolError> {
    let (a, b) = (sim.cluster(c1)?, sim.cluster(c2)?);
    Ok(match kind {
        ProtocolKind::Pcs => Box::new(UniformPairs::new(a.list(), b.list())),
        ProtocolKind::Ppcs => Box::new(PrunedPairs::new(a, b)),
        ProtocolKind::PlcsMin => Box::new(ListPairs::new(a, b, ListPairFunction::SfMin)?),
        ProtocolKind::PlcsMax => Box::new(ListPairs::new(a, b, ListPairFunction::SfMax)?),
    })
}

/// Drives a protocol over an unreliable network. Step `i` gets the deadline
/// `t0 + delta * 2^i`, where `t0` is the pulse of the agree decision;
/// `parallel_rounds` steps start immediately and each expiry starts the next
/// one. Proofs arriving after their step expired still complete the run.
/// Stops at confirmation or at the simulation's pulse cap.
pub fn async_drive(
    sim: &mut Simulation,
    c1: ClusterId,
    c2: ClusterId,
    v: &Value,
    source: &mut dyn PairSource,
    params: AsyncParams,
) -> Result<TrialStats, ProtocolError> {
    if params.delta == 0 || params.parallel_rounds == 0 {
        return Err(ProtocolError::Invariant(
            "delta and parallel_rounds must be positive".into(),
        ));
    }
    let m = sim.agree(c1, c2, v)?;
    let t0 = sim.pulse();
    let mut active: BTreeMap<u64, (ReplicaId, ReplicaId, u64)> = BTreeMap::new();
    let mut next_index = 0u64;

    let start_next = |sim: &mut Simulation,
                      source: &mut dyn PairSource,
                      active: &mut BTreeMap<u64, (ReplicaId, ReplicaId, u64)>,
                      next_index: &mut u64|
     -> Result<(), ProtocolError> {
        let coin = sim.coin(c1)?;
        let pair = match source.next_pair(coin) {
            Some(p) => Some(p),
            None if source.restart(coin) => source.next_pair(coin),
            None => None,
        };
        if let Some((r1, r2)) = pair {
            let due = deadline(t0, params.delta, *next_index);
            launch(sim, r1, r2, &m, due)?;
            active.insert(*next_index, (r1, r2, due));
            *next_index += 1;
        }
        Ok(())
    };

    for _ in 0..params.parallel_rounds {
        start_next(sim, source, &mut active, &mut next_index)?;
    }
    while !sim.has_confirmed(&m) && sim.pulse() < sim.max_pulses() {
        sim.advance_pulse();
        if sim.has_confirmed(&m) {
            break;
        }
        let now = sim.pulse();
        let expired: Vec<u64> = active
            .iter()
            .filter(|(_, (_, _, due))| *due <= now)
            .map(|(i, _)| *i)
            .collect();
        for index in expired {
            let (r1, r2, _) = active.remove(&index).expect("listed above");
            sim.note_step_expired(index, r1, r2);
            source.record_failure(r1, r2);
            start_next(sim, source, &mut active, &mut next_index)?;
        }
        if sim.is_idle() {
            let Some(wake) = active.values().map(|(_, _, due)| *due).min() else {
                break;
            };
            sim.fast_forward(wake.min(sim.max_pulses()));
        }
    }
    Ok(finish(sim, sim.has_confirmed(&m)))
}

/// Runs `kind` on a fresh simulation: the synchronous protocol when the
/// network is synchronous, otherwise through [`async_drive`].
pub fn run_protocol(
    kind: ProtocolKind,
    sim: &mut Simulation,
    c1: ClusterId,
    c2: ClusterId,
    v: &Value,
    max_iters: Option<u64>,
    params: AsyncParams,
) -> Result<TrialStats, ProtocolError> {
    let (f1, f2) = (sim.cluster(c1)?.f(), sim.cluster(c2)?.f());
    let cap = max_iters.unwrap_or_else(|| default_max_iters(f1, f2));
    if sim.network().mode == NetworkMode::Async {
        let mut source = pair_source(kind, sim, c1, c2)?;
        return async_drive(sim, c1, c2, v, source.as_mut(), params);
    }
    match kind {
        ProtocolKind::Pcs => pcs(sim, c1, c2, v, cap),
        ProtocolKind::Ppcs => ppcs(sim, c1, c2, v, cap),
        ProtocolKind::PlcsMin => plcs(sim, c1, c2, v, ListPairFunction::SfMin),
        ProtocolKind::PlcsMax => plcs(sim, c1, c2, v, ListPairFunction::SfMax),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn protocol_names_round_trip() {
        for k in ProtocolKind::ALL {
            assert_eq!(k.as_str().parse(), Ok(k));
        }
        assert_eq!("PLCS_MIN".parse(), Ok(ProtocolKind::PlcsMin));
        assert!("gossip".parse::<ProtocolKind>().is_err());
    }

    #[test]
    fn deadlines_double_and_saturate() {
        assert_eq!(deadline(5, 11, 0), 16);
        assert_eq!(deadline(5, 11, 3), 5 + 88);
        assert_eq!(deadline(0, 11, 80), u64::MAX);
    }
}
