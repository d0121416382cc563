//! Probabilistic Byzantine cluster-sending.
//!
//! [`analysis`] holds the exact combinatorics behind the expected step counts,
//! [`simnet`] a deterministic pulse simulator with a pluggable adversary, and
//! [`protocols`] the cluster-sending step together with Pcs, Ppcs and Plcs.

pub mod analysis;
pub mod protocols;
pub mod simnet;
pub mod types;

pub use analysis::Rational;
pub use types::*;
