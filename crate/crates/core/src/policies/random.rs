use super::{Policy, PolicyDecision, PolicyKind};
use crate::error::{Error, Result};
use crate::rng::{streams, Rng};
use crate::types::Context;

pub fn random_select(num_arms: usize, rng: &mut Rng) -> Result<PolicyDecision> {
    if num_arms == 0 {
        return Err(Error::invalid("empty arm set"));
    }
    let arm = rng.index(num_arms);
    let mut index_values = vec![0.0; num_arms];
    index_values[arm] = 1.0;
    Ok(PolicyDecision {
        arm,
        index_values,
        sampled_parameter: None,
    })
}

#[derive(Clone, Debug)]
pub struct RandomPolicy {
    rng: Rng,
}

impl RandomPolicy {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: Rng::new(seed, streams::POLICY),
        }
    }
}

impl Policy for RandomPolicy {
    fn kind(&self) -> PolicyKind {
        PolicyKind::Random
    }

    fn select(&mut self, contexts: &[Context]) -> Result<PolicyDecision> {
        random_select(contexts.len(), &mut self.rng)
    }

    fn update(&mut self, _arm: usize, _context: &Context, _reward: f64) -> Result<()> {
        Ok(())
    }
}
