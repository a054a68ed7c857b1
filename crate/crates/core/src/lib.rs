//! Uniformly expanding repellers approximating ergodic measures of
//! one-dimensional non-uniformly expanding maps.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod entropy;
pub mod error;
pub mod maps;
pub mod orbits;
pub mod pipeline;
pub mod potential;
pub mod recurrence;
pub mod repeller;
pub mod tempering;

pub use entropy::{EntropyEstimate, SeparatedSet};
pub use error::{Error, Result};
pub use maps::{make_builtin, Domain, MapKind, MapSystem, NonFlatnessFit};
pub use orbits::{BackwardOrbit, ErgodicEstimates, Orbit};
pub use potential::Potential;
pub use recurrence::{RecurrenceProfile, TailSums};
pub use repeller::{GoodSet, PeriodicPoint, RepellerIFS, ReturnClassing, VerificationReport};
pub use tempering::TemperingProfile;
