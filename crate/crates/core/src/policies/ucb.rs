//! Upper-confidence baselines: LinUCB on raw contexts and CBRAP on projected
//! contexts. Both share the ridge posterior update with the Thompson policies.

use super::{argmax, check_arms, Policy, PolicyDecision, PolicyKind, PosteriorState};
use crate::error::{Error, Result};
use crate::projection::{build_projection, ProjectionMatrix};
use crate::rng::{streams, Rng};
use crate::types::Context;

pub const DEFAULT_ALPHA: f64 = 1.0;

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha >= 0.0) || !alpha.is_finite() {
        return Err(Error::invalid(format!("alpha must be finite and >= 0, got {alpha}")));
    }
    Ok(())
}

fn ucb_index(state: &PosteriorState, v: &nalgebra::DVector<f64>, alpha: f64) -> f64 {
    state.psi_hat().dot(v) + alpha * state.width(v)
}

/// `argmax θ̂ᵀx + α√(xᵀX⁻¹x)`.
pub fn linucb_select(state: &PosteriorState, contexts: &[Context], alpha: f64) -> Result<PolicyDecision> {
    check_arms(contexts)?;
    check_alpha(alpha)?;
    let index_values = contexts
        .iter()
        .map(|x| {
            if x.dim() != state.dim() {
                return Err(Error::invalid("context dimension mismatch"));
            }
            Ok(ucb_index(state, x.as_vector(), alpha))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PolicyDecision {
        arm: argmax(&index_values)?,
        index_values,
        sampled_parameter: None,
    })
}

/// `argmax ψ̂ᵀz + α′√(zᵀZ⁻¹z)` with `z = P·x`.
pub fn cbrap_select(
    state: &PosteriorState,
    contexts: &[Context],
    projection: &ProjectionMatrix,
    alpha_prime: f64,
) -> Result<PolicyDecision> {
    check_arms(contexts)?;
    check_alpha(alpha_prime)?;
    let index_values = contexts
        .iter()
        .map(|x| Ok(ucb_index(state, &projection.apply(x.as_vector())?, alpha_prime)))
        .collect::<Result<Vec<_>>>()?;
    Ok(PolicyDecision {
        arm: argmax(&index_values)?,
        index_values,
        sampled_parameter: None,
    })
}

#[derive(Clone, Debug)]
pub struct LinUcb {
    alpha: f64,
    state: PosteriorState,
}

impl LinUcb {
    pub fn new(n: usize, lambda: f64, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        Ok(Self {
            alpha,
            state: PosteriorState::new(n, lambda)?,
        })
    }
}

impl Policy for LinUcb {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Linucb
    }

    fn select(&mut self, contexts: &[Context]) -> Result<PolicyDecision> {
        linucb_select(&self.state, contexts, self.alpha)
    }

    fn update(&mut self, _arm: usize, context: &Context, reward: f64) -> Result<()> {
        self.state.update(context.as_vector(), reward)
    }

    fn posterior(&self) -> Option<&PosteriorState> {
        Some(&self.state)
    }
}

#[derive(Clone, Debug)]
pub struct Cbrap {
    alpha: f64,
    projection: ProjectionMatrix,
    state: PosteriorState,
}

impl Cbrap {
    /// Draws `P` (`κ² = kappa_sq`) from the `projection` stream of `seed`, so
    /// CBRAP and BCMAB-RP with the same seed share the same projection.
    pub fn new(n: usize, d: usize, kappa_sq: f64, lambda: f64, alpha: f64, seed: u64) -> Result<Self> {
        let projection = build_projection(n, d, kappa_sq, &mut Rng::new(seed, streams::PROJECTION))?;
        Self::with_projection(projection, lambda, alpha)
    }

    pub fn with_projection(projection: ProjectionMatrix, lambda: f64, alpha: f64) -> Result<Self> {
        check_alpha(alpha)?;
        let state = PosteriorState::new(projection.d(), lambda)?;
        Ok(Self {
            alpha,
            projection,
            state,
        })
    }
}

impl Policy for Cbrap {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Cbrap
    }

    fn select(&mut self, contexts: &[Context]) -> Result<PolicyDecision> {
        cbrap_select(&self.state, contexts, &self.projection, self.alpha)
    }

    fn update(&mut self, _arm: usize, context: &Context, reward: f64) -> Result<()> {
        let z = self.projection.apply(context.as_vector())?;
        self.state.update(&z, reward)
    }

    fn posterior(&self) -> Option<&PosteriorState> {
        Some(&self.state)
    }

    fn projection(&self) -> Option<&ProjectionMatrix> {
        Some(&self.projection)
    }
}
