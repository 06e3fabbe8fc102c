//! Verification, fuzzing and reward harness for game code world models.
//!
//! A candidate engine is reached through a [`session::Session`], either
//! in-process ([`inprocess`]) or as a supervised subprocess ([`protocol`]),
//! and scored by four tiers: static API checks, dynamics fuzzing, scenario
//! replay and information consistency. [`reward`] combines tier scores into
//! the evaluation mean and the gated training reward; [`solver`] runs MCTS
//! and ISMCTS over any verified engine.

pub mod candidate;
pub mod fingerprint;
pub mod games;
pub mod inprocess;
pub mod model;
pub mod mutants;
pub mod protocol;
pub mod report;
pub mod reward;
pub mod session;
pub mod solver;
pub mod tiers;

pub use fingerprint::{canonical_fingerprint, Fingerprint};
pub use model::{ActionId, GameSpec, InfoKind, PlayerId, StructuredValue};

/// Harness-level failures. Candidate faults never surface here; they are
/// recorded as check results.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("failed to start candidate runtime: {0}")]
    Spawn(String),
    #[error(transparent)]
    Game(#[from] games::GameError),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
