//! Bandit policies behind one interface: observe contexts, select an arm,
//! receive the reward, update.

mod greedy;
mod posterior;
mod random;
mod thompson;
mod ucb;

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::projection::ProjectionMatrix;
use crate::types::Context;

pub use greedy::{epsilon_greedy_select, EpsilonGreedy, DEFAULT_EGREEDY_EPSILON};
pub use posterior::{PosteriorState, DEFAULT_REFRESH_EVERY};
pub use random::{random_select, RandomPolicy};
pub use thompson::{
    bcmab_select, compute_alpha, compute_beta, compute_nu, compute_nu_unprojected, linear_ts_select,
    sample_parameter, BcmabRp, LinearTs,
};
pub use ucb::{cbrap_select, linucb_select, Cbrap, LinUcb, DEFAULT_ALPHA};

#[derive(Clone, Debug, PartialEq)]
pub struct PolicyDecision {
    pub arm: usize,
    pub index_values: Vec<f64>,
    /// The posterior draw `ψ̃` for Thompson-sampling policies.
    pub sampled_parameter: Option<DVector<f64>>,
}

pub trait Policy: Send {
    fn kind(&self) -> PolicyKind;

    fn select(&mut self, contexts: &[Context]) -> Result<PolicyDecision>;

    fn update(&mut self, arm: usize, context: &Context, reward: f64) -> Result<()>;

    fn posterior(&self) -> Option<&PosteriorState> {
        None
    }

    fn projection(&self) -> Option<&ProjectionMatrix> {
        None
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    BcmabRp,
    LinearTs,
    Linucb,
    Cbrap,
    Egreedy,
    Random,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 6] = [
        PolicyKind::BcmabRp,
        PolicyKind::LinearTs,
        PolicyKind::Linucb,
        PolicyKind::Cbrap,
        PolicyKind::Egreedy,
        PolicyKind::Random,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::BcmabRp => "bcmab-rp",
            PolicyKind::LinearTs => "linear-ts",
            PolicyKind::Linucb => "linucb",
            PolicyKind::Cbrap => "cbrap",
            PolicyKind::Egreedy => "egreedy",
            PolicyKind::Random => "random",
        }
    }

    /// Whether the policy works on projected contexts and so needs `d ≤ n`.
    pub fn is_projected(self) -> bool {
        matches!(self, PolicyKind::BcmabRp | PolicyKind::Cbrap)
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown policy '{s}'")))
    }
}

/// Index of the maximum, lowest index on ties. Errors on empty input or NaN.
pub fn argmax(values: &[f64]) -> Result<usize> {
    if values.is_empty() {
        return Err(Error::invalid("empty arm set"));
    }
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if v.is_nan() {
            return Err(Error::Numeric(format!("score for arm {i} is NaN")));
        }
        if *v > values[best] {
            best = i;
        }
    }
    Ok(best)
}

fn check_arms(contexts: &[Context]) -> Result<()> {
    if contexts.is_empty() {
        return Err(Error::invalid("empty arm set"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_ties_go_low() {
        assert_eq!(argmax(&[0.0, 0.0, 0.0]).unwrap(), 0);
        assert_eq!(argmax(&[0.1, 0.5, 0.5]).unwrap(), 1);
        assert_eq!(argmax(&[-1.0, -2.0]).unwrap(), 0);
        assert!(argmax(&[]).is_err());
        assert!(argmax(&[0.0, f64::NAN]).is_err());
    }

    #[test]
    fn kind_names_round_trip() {
        for k in PolicyKind::ALL {
            assert_eq!(k.as_str().parse::<PolicyKind>().unwrap(), k);
        }
        assert!("ucb".parse::<PolicyKind>().is_err());
    }
}
