use serde::Serialize;
use thiserror::Error;

use crate::analysis::DomainError;
use crate::simnet::Simulation;
use crate::types::{ClusterId, ConfigError, ReplicaId, SendMessage};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("cs-step precondition violated: {0} has not agreed on sending the value")]
    MissingAgree(ClusterId),
    #[error("{0} needs a synchronous network")]
    RequiresSync(&'static str),
    #[error("robustness precondition violated: n = {n} <= f(S1) + f(S2) = {faulty}")]
    Robustness { n: u32, faulty: u32 },
    #[error("invariant violated: {0}")]
    Invariant(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CsStepOutcome {
    pub success: bool,
    pub messages_sent: u64,
    pub initiating_pair: (ReplicaId, ReplicaId),
}

/// Pulses one synchronous cs-step takes before its outcome is observable.
pub const STEP_PULSES: u64 = 3;

/// Checks the agree precondition and hands the step to the simulator without
/// waiting for it.
pub(crate) fn launch(
    sim: &mut Simulation,
    r1: ReplicaId,
    r2: ReplicaId,
    m: &SendMessage,
    deadline: u64,
) -> Result<u64, ProtocolError> {
    if !sim.all_agreed(m.source(), &m.value) {
        return Err(ProtocolError::MissingAgree(m.source()));
    }
    let index = sim.cs_steps();
    sim.instruct(r1, r2, m, index, deadline)?;
    Ok(index)
}

/// One cluster-sending step: `r1` sends the certified `m` to `r2`, and the
/// call returns after the three pulses it takes to see whether the sending
/// cluster reached consensus on the proof of receipt.
pub fn cs_step(
    sim: &mut Simulation,
    r1: ReplicaId,
    r2: ReplicaId,
    m: &SendMessage,
) -> Result<CsStepOutcome, ProtocolError> {
    let before = sim.inter_cluster_msgs();
    launch(sim, r1, r2, m, sim.pulse() + STEP_PULSES)?;
    for _ in 0..STEP_PULSES {
        sim.advance_pulse();
    }
    Ok(CsStepOutcome {
        success: sim.has_confirmed(m),
        messages_sent: sim.inter_cluster_msgs() - before,
        initiating_pair: (r1, r2),
    })
}
