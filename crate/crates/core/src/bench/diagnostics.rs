//! Per-round checks of the concentration events behind the regret analysis.
//!
//! With `ψ* = Pθ*` and `s_a = √(z_aᵀZ⁻¹z_a)`:
//! - `E_ψ̂` holds when `|ψ̂ᵀz_a − ψ*ᵀz_a| ≤ α_t·s_a` for every arm;
//! - `E_ψ̃` holds when `|ψ̃ᵀz_a − ψ̂ᵀz_a| ≤ β_t·s_a` for every arm;
//! - the saturated set is `C(t) = {a : ψ*ᵀz_{a*} − ψ*ᵀz_a > γ_t·s_a}` with
//!   `γ_t = α_t + β_t` and `a*` the arm maximizing `θ*ᵀx`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::environments::Environment;
use crate::error::{Error, Result};
use crate::policies::{argmax, compute_alpha, compute_beta, PosteriorState};
use crate::projection::ProjectionMatrix;
use crate::types::{AlgoParams, Context};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticRecord {
    pub t: u64,
    /// `s_{a_t,t}` of the chosen arm.
    pub s_chosen: f64,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub e_psi_hat: bool,
    pub e_psi_tilde: bool,
    pub saturated: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticCounters {
    pub rounds: u64,
    pub e_psi_hat_rounds: u64,
    pub e_psi_tilde_rounds: u64,
    pub saturated_total: u64,
    /// Logged rounds only (subject to outcome thinning).
    pub trace: Vec<DiagnosticRecord>,
}

impl DiagnosticCounters {
    pub fn record(&mut self, r: DiagnosticRecord, keep: bool) {
        self.rounds += 1;
        self.e_psi_hat_rounds += u64::from(r.e_psi_hat);
        self.e_psi_tilde_rounds += u64::from(r.e_psi_tilde);
        self.saturated_total += r.saturated as u64;
        if keep {
            self.trace.push(r);
        }
    }

    pub fn e_psi_hat_frequency(&self) -> f64 {
        ratio(self.e_psi_hat_rounds, self.rounds)
    }

    pub fn e_psi_tilde_frequency(&self) -> f64 {
        ratio(self.e_psi_tilde_rounds, self.rounds)
    }

    pub fn mean_saturated(&self) -> f64 {
        ratio(self.saturated_total, self.rounds)
    }
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// Evaluate the diagnostics of one round from the posterior used to decide
/// it (before the round's update).
pub fn diagnose_round(
    env: &dyn Environment,
    state: &PosteriorState,
    projection: &ProjectionMatrix,
    params: &AlgoParams,
    contexts: &[Context],
    sampled: Option<&DVector<f64>>,
    chosen: usize,
) -> Result<DiagnosticRecord> {
    let theta = env
        .theta_star()
        .ok_or_else(|| Error::invalid("diagnostics need a known θ*; this environment has none"))?;
    if chosen >= contexts.len() {
        return Err(Error::invalid(format!("arm {chosen} out of range for {} arms", contexts.len())));
    }
    let t = state.t();
    let psi_star = projection.apply(theta)?;
    let alpha = compute_alpha(t, params)?;
    let beta = compute_beta(t, contexts.len(), params)?;
    let gamma = alpha + beta;

    let reduced = contexts
        .iter()
        .map(|x| projection.apply(x.as_vector()))
        .collect::<Result<Vec<_>>>()?;
    let widths: Vec<f64> = reduced.iter().map(|z| state.width(z)).collect();
    let payoffs: Vec<f64> = contexts.iter().map(|x| theta.dot(x.as_vector())).collect();
    let best = argmax(&payoffs)?;
    let best_reduced = psi_star.dot(&reduced[best]);

    let mut e_psi_hat = true;
    let mut e_psi_tilde = true;
    let mut saturated = 0;
    for (z, &s) in reduced.iter().zip(&widths) {
        let est = state.psi_hat().dot(z);
        let truth = psi_star.dot(z);
        e_psi_hat &= (est - truth).abs() <= alpha * s;
        if let Some(draw) = sampled {
            e_psi_tilde &= (draw.dot(z) - est).abs() <= beta * s;
        }
        if best_reduced - truth > gamma * s {
            saturated += 1;
        }
    }

    Ok(DiagnosticRecord {
        t,
        s_chosen: widths[chosen],
        alpha,
        beta,
        gamma,
        e_psi_hat,
        e_psi_tilde,
        saturated,
    })
}
