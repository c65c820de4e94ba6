//! Linear contextual bandits on randomly projected contexts.
//!
//! The crate provides Thompson sampling in a Gaussian random projection of the
//! context space ([`policies::BcmabRp`]) alongside the usual linear baselines,
//! a synthetic and an offline-replay environment, a ratings ingestion pipeline
//! and an experiment driver.

pub mod bench;
pub mod environments;
pub mod error;
pub mod ingestion;
pub mod policies;
pub mod projection;
pub mod rng;
pub mod types;

pub use error::{Error, Result};
pub use policies::{Policy, PolicyDecision, PolicyKind};
pub use projection::ProjectionMatrix;
pub use rng::Rng;
pub use types::{AlgoParams, Context, ContextSet, RoundOutcome};
