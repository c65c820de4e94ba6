//! Reward-generating processes.

mod regret;
mod replay;
mod synthetic;

use nalgebra::DVector;

use crate::error::Result;
use crate::types::ContextSet;

pub use regret::RegretLedger;
pub use replay::{ReplayEnv, ReplayRound};
pub use synthetic::{draw_theta_star, ContextGen, SyntheticEnv, CONTEXT_STREAM};

/// A source of per-round contexts and rewards.
///
/// Rounds are 1-based. `feedback` and `regret` refer to the round most
/// recently produced by `contexts`.
pub trait Environment: Send {
    fn dim(&self) -> usize;

    fn num_arms(&self) -> usize;

    fn contexts(&mut self, t: u64) -> Result<ContextSet>;

    /// Realized reward in `[0, 1]` for pulling `arm` in round `t`.
    fn feedback(&mut self, t: u64, arm: usize) -> Result<f64>;

    /// Pseudo-regret of `arm` in the current round, when the environment
    /// knows its parameter.
    fn regret(&self, arm: usize) -> Result<Option<f64>>;

    fn theta_star(&self) -> Option<&DVector<f64>> {
        None
    }
}
