//! Experiment configuration and its validation.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::environments::ContextGen;
use crate::error::{Error, Result};
use crate::policies::{PolicyKind, DEFAULT_ALPHA, DEFAULT_EGREEDY_EPSILON};
use crate::types::AlgoParams;

/// Horizon up to which every round is logged; beyond it every
/// [`THIN_STRIDE`]-th round is.
pub const FULL_LOG_HORIZON: u64 = 20_000;
pub const THIN_STRIDE: u64 = 10;
pub const DEFAULT_CHECKPOINTS: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicySpec {
    pub kind: PolicyKind,
    /// `d` is the reduced dimension for projected policies and is ignored by
    /// the others.
    pub params: AlgoParams,
    /// Exploration weight of LinUCB and CBRAP.
    pub alpha: f64,
    pub egreedy_eps: f64,
    /// Replace `params.l_z` by `max(1, ‖P‖₂)`, a bound on `‖Px‖` over the unit
    /// ball.
    pub auto_l_z: bool,
}

impl PolicySpec {
    pub fn new(kind: PolicyKind, d: usize) -> Self {
        Self {
            kind,
            params: AlgoParams::new(d),
            alpha: DEFAULT_ALPHA,
            egreedy_eps: DEFAULT_EGREEDY_EPSILON,
            auto_l_z: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EnvSpec {
    Synthetic {
        n: usize,
        arms: usize,
        context_gen: ContextGen,
    },
    Replay {
        artifact: PathBuf,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub policy: PolicySpec,
    pub env: EnvSpec,
    pub horizon: u64,
    pub repetitions: usize,
    pub base_seed: u64,
    pub diagnostics: bool,
    /// Explicit checkpoint rounds; `None` means 100 log-spaced rounds.
    pub checkpoints: Option<Vec<u64>>,
    /// Explicit logging stride; `None` applies the default thinning rule.
    pub log_every: Option<u64>,
}

impl ExperimentConfig {
    pub fn synthetic(kind: PolicyKind, n: usize, d: usize, arms: usize, horizon: u64) -> Self {
        Self {
            policy: PolicySpec::new(kind, d),
            env: EnvSpec::Synthetic {
                n,
                arms,
                context_gen: ContextGen::Isotropic,
            },
            horizon,
            repetitions: 1,
            base_seed: 0,
            diagnostics: false,
            checkpoints: None,
            log_every: None,
        }
    }

    /// Checks that need only the config. Replay runs are re-checked against
    /// the artifact's `n` by [`Self::validate_with_dim`].
    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::invalid("T must be at least 1"));
        }
        if self.repetitions == 0 {
            return Err(Error::invalid("repetitions must be at least 1"));
        }
        if self.log_every == Some(0) {
            return Err(Error::invalid("log stride must be at least 1"));
        }
        let p = &self.policy;
        match p.kind {
            PolicyKind::BcmabRp | PolicyKind::Cbrap | PolicyKind::LinearTs | PolicyKind::Linucb => {
                let mut params = p.params.clone();
                params.d = params.d.max(1);
                params.validate()?;
            }
            PolicyKind::Egreedy | PolicyKind::Random => {}
        }
        if matches!(p.kind, PolicyKind::BcmabRp | PolicyKind::Cbrap) && p.params.d == 0 {
            return Err(Error::invalid("projected policies need d >= 1"));
        }
        if matches!(p.kind, PolicyKind::Linucb | PolicyKind::Cbrap) && !(p.alpha >= 0.0 && p.alpha.is_finite()) {
            return Err(Error::invalid(format!("alpha must be >= 0, got {}", p.alpha)));
        }
        if p.kind == PolicyKind::Egreedy && !(0.0..=1.0).contains(&p.egreedy_eps) {
            return Err(Error::invalid(format!(
                "egreedy epsilon must lie in [0,1], got {}",
                p.egreedy_eps
            )));
        }
        if self.diagnostics {
            if p.kind != PolicyKind::BcmabRp {
                return Err(Error::invalid("diagnostics are defined for bcmab-rp only"));
            }
            if matches!(self.env, EnvSpec::Replay { .. }) {
                return Err(Error::invalid("diagnostics need a synthetic environment (ψ* is unknown on replay)"));
            }
        }
        if let Some(cps) = &self.checkpoints {
            if cps.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::invalid("checkpoints must be strictly increasing"));
            }
            if cps.iter().any(|&c| c == 0 || c > self.horizon) {
                return Err(Error::invalid(format!("checkpoints must lie in [1, {}]", self.horizon)));
            }
        }
        if let EnvSpec::Synthetic { n, arms, context_gen } = &self.env {
            if *arms == 0 {
                return Err(Error::invalid("the synthetic environment needs at least one arm"));
            }
            context_gen.validate(*n)?;
            self.validate_with_dim(*n)?;
        }
        Ok(())
    }

    pub fn validate_with_dim(&self, n: usize) -> Result<()> {
        if n == 0 {
            return Err(Error::invalid("context dimension n must be at least 1"));
        }
        if self.policy.kind.is_projected() && self.policy.params.d > n {
            return Err(Error::invalid(format!(
                "projected policies need d <= n, got d={} and n={n}",
                self.policy.params.d
            )));
        }
        Ok(())
    }

    pub fn checkpoint_rounds(&self) -> Vec<u64> {
        match &self.checkpoints {
            Some(c) => c.clone(),
            None => log_spaced_checkpoints(self.horizon, DEFAULT_CHECKPOINTS),
        }
    }

    pub fn log_stride(&self) -> u64 {
        self.log_every.unwrap_or(if self.horizon <= FULL_LOG_HORIZON { 1 } else { THIN_STRIDE })
    }
}

/// Up to `count` distinct rounds, log-spaced over `[1, horizon]`, always
/// including both ends.
pub fn log_spaced_checkpoints(horizon: u64, count: usize) -> Vec<u64> {
    if horizon == 0 || count == 0 {
        return Vec::new();
    }
    if count == 1 {
        return vec![horizon];
    }
    let top = (horizon as f64).ln();
    let mut out: Vec<u64> = (0..count)
        .map(|i| {
            let r = (top * i as f64 / (count - 1) as f64).exp().round() as u64;
            r.clamp(1, horizon)
        })
        .collect();
    out.dedup();
    if *out.last().unwrap() != horizon {
        out.push(horizon);
    }
    out
}
