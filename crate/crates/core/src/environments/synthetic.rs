//! Linear environment with a known parameter θ*.
//!
//! Rewards are Bernoulli with mean `(θ*ᵀx + 1)/2`: bounded in `[0, 1]`, hence
//! sub-Gaussian with `R = 1/2`, and the best arm is still the argmax of `θ*ᵀx`.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::Environment;
use crate::error::{Error, Result};
use crate::rng::{streams, Rng};
use crate::types::{Context, ContextSet};

/// Stream label for per-round contexts; round `t` uses key index `t`.
pub const CONTEXT_STREAM: &str = "environment/contexts";

/// Per-round context distribution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ContextGen {
    /// Isotropic direction scaled by a `U[0, 1]` radius; fresh for every arm
    /// and round.
    Isotropic,
    /// Contexts confined to a random `rank`-dimensional subspace that also
    /// contains θ*. Arm `a` keeps a fixed unit anchor `u_a`; each round its
    /// direction is `normalize(w·u_a + (1−w)·g)` with `g` a fresh isotropic
    /// unit vector, scaled by a `U[0, 1]` radius. Arms thus have a persistent
    /// identity, as items do in recommendation data.
    Latent { rank: usize, anchor_weight: f64 },
}

impl ContextGen {
    pub fn validate(&self, n: usize) -> Result<()> {
        if let ContextGen::Latent { rank, anchor_weight } = *self {
            if rank == 0 || rank > n {
                return Err(Error::invalid(format!("latent rank must lie in 1..={n}, got {rank}")));
            }
            if !(0.0..=1.0).contains(&anchor_weight) {
                return Err(Error::invalid(format!(
                    "anchor weight must lie in [0,1], got {anchor_weight}"
                )));
            }
        }
        Ok(())
    }
}

impl fmt::Display for ContextGen {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ContextGen::Isotropic => f.write_str("isotropic"),
            ContextGen::Latent { rank, anchor_weight } => write!(f, "latent(rank={rank}, anchor={anchor_weight})"),
        }
    }
}

impl FromStr for ContextGen {
    type Err = Error;

    /// `isotropic`, `latent` (rank 4, anchor 0.5) or `latent:RANK:ANCHOR`.
    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.split(':');
        match parts.next() {
            Some("isotropic") if parts.next().is_none() => Ok(ContextGen::Isotropic),
            Some("latent") => {
                let rank = parts.next().map(str::parse).transpose();
                let anchor = parts.next().map(str::parse).transpose();
                match (rank, anchor, parts.next()) {
                    (Ok(rank), Ok(anchor), None) => Ok(ContextGen::Latent {
                        rank: rank.unwrap_or(4),
                        anchor_weight: anchor.unwrap_or(0.5),
                    }),
                    _ => Err(Error::invalid(format!("bad latent spec '{s}', want latent:RANK:ANCHOR"))),
                }
            }
            _ => Err(Error::invalid(format!("unknown context generator '{s}'"))),
        }
    }
}

/// Uniform direction with norm drawn from `U[0.5, 1]`.
pub fn draw_theta_star(dim: usize, rng: &mut Rng) -> DVector<f64> {
    let dir = unit_direction(dim, rng);
    dir * rng.uniform_range(0.5, 1.0)
}

fn unit_direction(dim: usize, rng: &mut Rng) -> DVector<f64> {
    loop {
        let g = DVector::from_fn(dim, |_, _| rng.standard_normal());
        let norm = g.norm();
        if norm > 0.0 {
            return g / norm;
        }
    }
}

#[derive(Clone, Debug)]
pub struct SyntheticEnv {
    theta_star: DVector<f64>,
    num_arms: usize,
    noise_scale: f64,
    context_gen: ContextGen,
    seed: u64,
    /// `n×rank` orthonormal columns and per-arm anchors, latent only.
    basis: Option<DMatrix<f64>>,
    anchors: Vec<DVector<f64>>,
    noise: Rng,
    current: ContextSet,
    current_round: u64,
}

impl SyntheticEnv {
    pub fn new(n: usize, num_arms: usize, context_gen: ContextGen, seed: u64) -> Result<Self> {
        if n == 0 || num_arms == 0 {
            return Err(Error::invalid(format!(
                "synthetic environment needs n >= 1 and A >= 1, got n={n}, A={num_arms}"
            )));
        }
        context_gen.validate(n)?;
        let mut setup = Rng::new(seed, "environment/theta");
        let (theta_star, basis, anchors) = match context_gen {
            ContextGen::Isotropic => (draw_theta_star(n, &mut setup), None, Vec::new()),
            ContextGen::Latent { rank, .. } => {
                let g = DMatrix::from_fn(n, rank, |_, _| setup.standard_normal());
                let basis = g.qr().q();
                let w = draw_theta_star(rank, &mut setup);
                let anchors = (0..num_arms).map(|_| unit_direction(rank, &mut setup)).collect();
                (&basis * w, Some(basis), anchors)
            }
        };
        Ok(Self {
            theta_star,
            num_arms,
            noise_scale: 0.5,
            context_gen,
            seed,
            basis,
            anchors,
            noise: Rng::new(seed, streams::NOISE),
            current: Vec::new(),
            current_round: 0,
        })
    }

    /// Replace θ*; it must match `n` and have norm at most 1.
    pub fn with_theta_star(mut self, theta: DVector<f64>) -> Result<Self> {
        if theta.len() != self.theta_star.len() {
            return Err(Error::invalid(format!(
                "theta has length {}, environment has n={}",
                theta.len(),
                self.theta_star.len()
            )));
        }
        if !(theta.norm() <= 1.0 + crate::types::NORM_SLACK) {
            return Err(Error::Constraint(format!("theta norm {} exceeds 1", theta.norm())));
        }
        self.theta_star = theta;
        Ok(self)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn context_gen(&self) -> ContextGen {
        self.context_gen
    }

    /// The sub-Gaussian scale of the reward noise.
    pub fn noise_scale(&self) -> f64 {
        self.noise_scale
    }

    /// Contexts of round `t`; a pure function of `(seed, t)`.
    pub fn synthetic_round(&self, t: u64) -> Result<ContextSet> {
        if t == 0 {
            return Err(Error::invalid("rounds are numbered from 1"));
        }
        let mut rng = Rng::indexed(self.seed, CONTEXT_STREAM, t);
        let n = self.theta_star.len();
        (0..self.num_arms)
            .map(|a| {
                let x = match (&self.basis, self.context_gen) {
                    (Some(basis), ContextGen::Latent { rank, anchor_weight }) => {
                        let g = unit_direction(rank, &mut rng);
                        let v = &self.anchors[a] * anchor_weight + g * (1.0 - anchor_weight);
                        let norm = v.norm();
                        let v = if norm > 0.0 { v / norm } else { v };
                        basis * v * rng.uniform()
                    }
                    _ => unit_direction(n, &mut rng) * rng.uniform(),
                };
                Context::try_from(x)
            })
            .collect()
    }

    /// `(θ*ᵀx + 1)/2`.
    pub fn mean_reward(&self, x: &Context) -> Result<f64> {
        Ok((self.expected_payoff(x)? + 1.0) / 2.0)
    }

    /// `θ*ᵀx`.
    pub fn expected_payoff(&self, x: &Context) -> Result<f64> {
        if x.dim() != self.theta_star.len() {
            return Err(Error::invalid(format!(
                "context has length {}, environment has n={}",
                x.dim(),
                self.theta_star.len()
            )));
        }
        Ok(self.theta_star.dot(x.as_vector()))
    }

    /// A Bernoulli draw with mean [`Self::mean_reward`].
    pub fn synthetic_reward(&self, x: &Context, rng: &mut Rng) -> Result<f64> {
        let m = self.mean_reward(x)?.clamp(0.0, 1.0);
        Ok(if rng.bernoulli(m) { 1.0 } else { 0.0 })
    }

    /// Pseudo-regret of `arm` against the best arm among `contexts`.
    pub fn regret_of(&self, contexts: &[Context], arm: usize) -> Result<(f64, f64)> {
        if arm >= contexts.len() {
            return Err(Error::invalid(format!("arm {arm} out of range for {} arms", contexts.len())));
        }
        let mut best = f64::NEG_INFINITY;
        for x in contexts {
            best = best.max(self.expected_payoff(x)?);
        }
        Ok((best, self.expected_payoff(&contexts[arm])?))
    }
}

impl Environment for SyntheticEnv {
    fn dim(&self) -> usize {
        self.theta_star.len()
    }

    fn num_arms(&self) -> usize {
        self.num_arms
    }

    fn contexts(&mut self, t: u64) -> Result<ContextSet> {
        self.current = self.synthetic_round(t)?;
        self.current_round = t;
        Ok(self.current.clone())
    }

    fn feedback(&mut self, t: u64, arm: usize) -> Result<f64> {
        if t != self.current_round {
            return Err(Error::invalid(format!(
                "feedback for round {t} but the current round is {}",
                self.current_round
            )));
        }
        let x = self
            .current
            .get(arm)
            .ok_or_else(|| Error::invalid(format!("arm {arm} out of range for {} arms", self.num_arms)))?;
        let m = self.mean_reward(x)?.clamp(0.0, 1.0);
        Ok(if self.noise.bernoulli(m) { 1.0 } else { 0.0 })
    }

    fn regret(&self, arm: usize) -> Result<Option<f64>> {
        let (best, got) = self.regret_of(&self.current, arm)?;
        Ok(Some(best - got))
    }

    fn theta_star(&self) -> Option<&DVector<f64>> {
        Some(&self.theta_star)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(n: usize, i: usize, s: f64) -> Context {
        let mut v = DVector::zeros(n);
        v[i] = s;
        Context::try_from(v).unwrap()
    }

    fn env_e1(n: usize, arms: usize) -> SyntheticEnv {
        SyntheticEnv::new(n, arms, ContextGen::Isotropic, 1)
            .unwrap()
            .with_theta_star(e(n, 0, 1.0).into_vector())
            .unwrap()
    }

    #[test]
    fn single_arm_round() {
        let env = SyntheticEnv::new(5, 1, ContextGen::Isotropic, 3).unwrap();
        assert_eq!(env.synthetic_round(1).unwrap().len(), 1);
        assert!(env.synthetic_round(0).is_err());
    }

    #[test]
    fn contexts_respect_unit_ball() {
        for gen in [
            ContextGen::Isotropic,
            ContextGen::Latent {
                rank: 3,
                anchor_weight: 0.7,
            },
        ] {
            let env = SyntheticEnv::new(12, 20, gen, 9).unwrap();
            for t in 1..=10_000 {
                for x in env.synthetic_round(t).unwrap() {
                    assert!(x.norm() <= 1.0);
                }
            }
        }
    }

    #[test]
    fn isotropic_contexts_are_centered() {
        let n = 6;
        let env = SyntheticEnv::new(n, 10, ContextGen::Isotropic, 4).unwrap();
        let mut sum = DVector::<f64>::zeros(n);
        let mut sq = DVector::<f64>::zeros(n);
        let mut count = 0.0;
        for t in 1..=3000 {
            for x in env.synthetic_round(t).unwrap() {
                sum += x.as_vector();
                sq += x.as_vector().component_mul(x.as_vector());
                count += 1.0;
            }
        }
        for i in 0..n {
            let mean = sum[i] / count;
            let var = sq[i] / count - mean * mean;
            let se = (var / count).sqrt();
            assert!(mean.abs() <= 3.0 * se, "component {i}: mean {mean}, se {se}");
        }
    }

    #[test]
    fn rounds_are_deterministic() {
        let a = SyntheticEnv::new(8, 4, ContextGen::Isotropic, 7).unwrap();
        let b = SyntheticEnv::new(8, 4, ContextGen::Isotropic, 7).unwrap();
        assert_eq!(a.synthetic_round(42).unwrap(), b.synthetic_round(42).unwrap());
        assert_ne!(a.synthetic_round(42).unwrap(), a.synthetic_round(43).unwrap());
        assert_eq!(a.theta_star(), b.theta_star());
    }

    #[test]
    fn theta_norm_in_range() {
        for seed in 0..50 {
            for gen in [
                ContextGen::Isotropic,
                ContextGen::Latent {
                    rank: 4,
                    anchor_weight: 0.5,
                },
            ] {
                let env = SyntheticEnv::new(30, 2, gen, seed).unwrap();
                let norm = env.theta_star().unwrap().norm();
                assert!((0.5 - 1e-12..=1.0 + 1e-12).contains(&norm), "norm {norm}");
            }
        }
    }

    #[test]
    fn latent_theta_lies_in_context_span() {
        let env = SyntheticEnv::new(
            20,
            3,
            ContextGen::Latent {
                rank: 2,
                anchor_weight: 0.3,
            },
            5,
        )
        .unwrap();
        let basis = env.basis.as_ref().unwrap();
        let theta = env.theta_star().unwrap();
        let residual = theta - basis * (basis.transpose() * theta);
        assert!(residual.norm() < 1e-12);
        for x in env.synthetic_round(3).unwrap() {
            let r = x.as_vector() - basis * (basis.transpose() * x.as_vector());
            assert!(r.norm() < 1e-12);
        }
    }

    #[test]
    fn mean_reward_endpoints() {
        let env = env_e1(3, 1);
        assert_eq!(env.mean_reward(&e(3, 0, 1.0)).unwrap(), 1.0);
        assert_eq!(env.mean_reward(&e(3, 0, -1.0)).unwrap(), 0.0);
    }

    #[test]
    fn bernoulli_mean_at_zero_context() {
        let env = env_e1(3, 1);
        let x = e(3, 0, 0.0);
        let mut rng = Rng::new(2, "noise");
        let draws = 50_000;
        let mut total = 0.0;
        for _ in 0..draws {
            let r = env.synthetic_reward(&x, &mut rng).unwrap();
            assert!(r == 0.0 || r == 1.0);
            total += r;
        }
        assert!((total / draws as f64 - 0.5).abs() <= 0.01);
    }

    #[test]
    fn generator_spec_parsing() {
        assert_eq!("isotropic".parse::<ContextGen>().unwrap(), ContextGen::Isotropic);
        assert_eq!(
            "latent:6:0.25".parse::<ContextGen>().unwrap(),
            ContextGen::Latent {
                rank: 6,
                anchor_weight: 0.25
            }
        );
        assert_eq!(
            "latent".parse::<ContextGen>().unwrap(),
            ContextGen::Latent {
                rank: 4,
                anchor_weight: 0.5
            }
        );
        assert!("latent:x".parse::<ContextGen>().is_err());
        assert!("gaussian".parse::<ContextGen>().is_err());
        assert!(SyntheticEnv::new(
            3,
            2,
            ContextGen::Latent {
                rank: 4,
                anchor_weight: 0.5
            },
            0
        )
        .is_err());
    }
}
