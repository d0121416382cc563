//! Cluster-sending protocols on top of [`crate::simnet`].
//!
//! Every protocol first has the sending cluster agree on the value, then
//! repeats [`cs_step`] with different replica pairs until the sending
//! cluster holds a certified proof of receipt. They differ only in how the
//! next pair is chosen, which is what [`PairSource`] abstracts.

mod driver;
mod exhaustive;
mod plcs;
mod ppcs;
mod prune;
mod source;
mod step;

pub use driver::{
    async_drive, default_max_iters, pair_source, pcs, plcs, ppcs, ppcs_with_chooser, run_protocol,
    run_sync, AsyncParams, ProtocolKind,
};
pub use exhaustive::{ppcs_worst_case, WorstPath};
pub use plcs::{random_permutation_pair, sf_max, sf_min, ListPairFunction, ListPairs};
pub use ppcs::{Chooser, PrunedPairs};
pub use prune::PruneState;
pub use source::{PairSource, UniformPairs};
pub use step::{cs_step, CsStepOutcome, ProtocolError, STEP_PULSES};
