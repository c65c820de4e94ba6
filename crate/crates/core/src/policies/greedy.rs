use super::{argmax, Policy, PolicyDecision, PolicyKind};
use crate::error::{Error, Result};
use crate::rng::{streams, Rng};
use crate::types::Context;

pub const DEFAULT_EGREEDY_EPSILON: f64 = 0.1;

/// With probability `epsilon` a uniform arm, otherwise the arm with the best
/// empirical mean (lowest id on ties).
pub fn epsilon_greedy_select(means: &[f64], epsilon: f64, rng: &mut Rng) -> Result<PolicyDecision> {
    if means.is_empty() {
        return Err(Error::invalid("empty arm set"));
    }
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(Error::invalid(format!("epsilon must lie in [0,1], got {epsilon}")));
    }
    if rng.uniform() < epsilon {
        let arm = rng.index(means.len());
        let mut index_values = vec![0.0; means.len()];
        index_values[arm] = 1.0;
        return Ok(PolicyDecision {
            arm,
            index_values,
            sampled_parameter: None,
        });
    }
    Ok(PolicyDecision {
        arm: argmax(means)?,
        index_values: means.to_vec(),
        sampled_parameter: None,
    })
}

/// Context-blind ε-greedy over arm ids. Unplayed arms have mean 0.
#[derive(Clone, Debug)]
pub struct EpsilonGreedy {
    epsilon: f64,
    counts: Vec<u64>,
    sums: Vec<f64>,
    rng: Rng,
}

impl EpsilonGreedy {
    pub fn new(epsilon: f64, seed: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::invalid(format!("epsilon must lie in [0,1], got {epsilon}")));
        }
        Ok(Self {
            epsilon,
            counts: Vec::new(),
            sums: Vec::new(),
            rng: Rng::new(seed, streams::POLICY),
        })
    }

    pub fn means(&self) -> Vec<f64> {
        self.counts
            .iter()
            .zip(&self.sums)
            .map(|(&c, &s)| if c == 0 { 0.0 } else { s / c as f64 })
            .collect()
    }

    fn ensure_arms(&mut self, num_arms: usize) {
        if self.counts.len() < num_arms {
            self.counts.resize(num_arms, 0);
            self.sums.resize(num_arms, 0.0);
        }
    }
}

impl Policy for EpsilonGreedy {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Egreedy
    }

    fn select(&mut self, contexts: &[Context]) -> Result<PolicyDecision> {
        self.ensure_arms(contexts.len());
        let means = self.means();
        epsilon_greedy_select(&means[..contexts.len()], self.epsilon, &mut self.rng)
    }

    fn update(&mut self, arm: usize, _context: &Context, reward: f64) -> Result<()> {
        self.ensure_arms(arm + 1);
        self.counts[arm] += 1;
        self.sums[arm] += reward;
        Ok(())
    }
}
