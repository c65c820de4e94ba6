//! Pseudo-regret bookkeeping against the true parameter.

use serde::{Deserialize, Serialize};

use super::synthetic::SyntheticEnv;
use crate::error::{Error, Result};
use crate::types::Context;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RegretLedger {
    /// `(θ*ᵀx_{a*}, θ*ᵀx_{chosen})` per round.
    pub per_round: Vec<(f64, f64)>,
    pub cumulative: f64,
}

impl RegretLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Append the increment for `chosen` and return it.
    pub fn record_regret(&mut self, env: &SyntheticEnv, contexts: &[Context], chosen: usize) -> Result<f64> {
        let (best, got) = env.regret_of(contexts, chosen)?;
        self.push(best, got)
    }

    /// Append a precomputed pair.
    pub fn push(&mut self, best: f64, chosen: f64) -> Result<f64> {
        let inc = best - chosen;
        if !(inc >= 0.0) {
            return Err(Error::invalid(format!(
                "chosen payoff {chosen} exceeds the best payoff {best}"
            )));
        }
        self.per_round.push((best, chosen));
        self.cumulative += inc;
        Ok(inc)
    }

    pub fn len(&self) -> usize {
        self.per_round.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_round.is_empty()
    }

    /// Running sums of the increments.
    pub fn cumulative_curve(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.per_round
            .iter()
            .map(|(b, c)| {
                acc += b - c;
                acc
            })
            .collect()
    }
}
