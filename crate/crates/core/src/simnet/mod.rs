//! Deterministic pulse-driven simulation of two clusters.
//!
//! All randomness flows from the run seed: each cluster has a [`SharedCoin`],
//! and the network and the adversary draw from their own derived streams.
//! Two runs with equal configuration and seed produce identical traces.

mod adversary;
mod coin;
mod network;
mod sim;
mod trace;

pub use adversary::{AdversaryKind, AdversaryStrategy};
pub use coin::{coin_draw, derive_seed, SharedCoin};
pub use network::{DelayDist, NetworkConfig, NetworkMode, ReliabilityPhase};
pub use sim::{SimConfig, Simulation};
pub use trace::{EventKind, MessageKind, Trace, TraceEvent, TrialStats, Violation};
