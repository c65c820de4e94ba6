//! Shared domain types.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack on the `‖x‖₂ ≤ 1` context constraint, absorbing rounding from
/// ingestion normalization.
pub const NORM_SLACK: f64 = 1e-9;

/// Algorithm parameters shared by the Thompson-sampling and UCB policies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlgoParams {
    /// Reduced dimension.
    pub d: usize,
    /// Ridge regularizer, at least 1.
    pub lambda: f64,
    /// Confidence parameter in (0, 1).
    pub delta: f64,
    /// Projection-distortion parameter in [0, 1).
    pub epsilon: f64,
    /// Variance of the projection entries.
    pub kappa_sq: f64,
    /// Sub-Gaussian noise scale `R`.
    pub noise_scale: f64,
    /// Bound on reduced-context norms.
    pub l_z: f64,
    /// Bound on the reduced parameter norm.
    pub l_psi: f64,
}

impl AlgoParams {
    /// Defaults for reduced dimension `d`, with `κ² = 1/d`.
    pub fn new(d: usize) -> Self {
        Self {
            d,
            lambda: 1.0,
            delta: 0.1,
            epsilon: 0.01,
            kappa_sq: 1.0 / d.max(1) as f64,
            noise_scale: 0.5,
            l_z: 1.0,
            l_psi: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(Error::invalid("d must be positive"));
        }
        if !(self.lambda >= 1.0) || !self.lambda.is_finite() {
            return Err(Error::invalid(format!("lambda must be >= 1, got {}", self.lambda)));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::invalid(format!("delta must lie in (0,1), got {}", self.delta)));
        }
        if !(self.epsilon >= 0.0 && self.epsilon < 1.0) {
            return Err(Error::invalid(format!(
                "epsilon must lie in [0,1), got {}",
                self.epsilon
            )));
        }
        if !(self.kappa_sq > 0.0) || !self.kappa_sq.is_finite() {
            return Err(Error::invalid(format!("kappa_sq must be positive, got {}", self.kappa_sq)));
        }
        if !(self.noise_scale >= 0.0) || !self.noise_scale.is_finite() {
            return Err(Error::invalid(format!(
                "noise scale R must be >= 0, got {}",
                self.noise_scale
            )));
        }
        if !(self.l_z >= 1.0) || !self.l_z.is_finite() {
            return Err(Error::invalid(format!("L_z must be >= 1, got {}", self.l_z)));
        }
        if !(self.l_psi >= 1.0) || !self.l_psi.is_finite() {
            return Err(Error::invalid(format!("L_psi must be >= 1, got {}", self.l_psi)));
        }
        Ok(())
    }
}

/// A context vector `x ∈ ℝⁿ` with `‖x‖₂ ≤ 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct Context {
    x: DVector<f64>,
}

impl Context {
    pub fn as_vector(&self) -> &DVector<f64> {
        &self.x
    }

    pub fn as_slice(&self) -> &[f64] {
        self.x.as_slice()
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn norm(&self) -> f64 {
        self.x.norm()
    }

    pub fn into_vector(self) -> DVector<f64> {
        self.x
    }
}

/// Check finiteness and the unit-norm bound.
pub fn validate_context(x: &[f64]) -> Result<Context> {
    Context::try_from(DVector::from_column_slice(x))
}

impl TryFrom<DVector<f64>> for Context {
    type Error = Error;

    fn try_from(x: DVector<f64>) -> Result<Self> {
        if let Some(i) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::data(format!("context entry {i} is not finite")));
        }
        let norm = x.norm();
        if norm > 1.0 + NORM_SLACK {
            return Err(Error::Constraint(format!(
                "context L2 norm {norm} exceeds 1 (+{NORM_SLACK:e} slack)"
            )));
        }
        Ok(Context { x })
    }
}

/// The per-round collection of per-arm contexts.
pub type ContextSet = Vec<Context>;

/// A projected context `z = P·x ∈ ℝᵈ`.
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedContext {
    pub z: DVector<f64>,
}

impl ReducedContext {
    pub fn dim(&self) -> usize {
        self.z.len()
    }
}

/// What happened in one round of an experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct RoundOutcome {
    pub t: u64,
    pub chosen_arm: usize,
    pub reward: f64,
    /// Pseudo-regret increment, synthetic environments only.
    pub per_round_regret: Option<f64>,
    pub step_time_ns: u64,
}

impl RoundOutcome {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.reward) {
            return Err(Error::data(format!("reward {} outside [0,1]", self.reward)));
        }
        if let Some(r) = self.per_round_regret {
            if !(r >= 0.0) {
                return Err(Error::data(format!("negative regret {r}")));
            }
        }
        Ok(())
    }
}
