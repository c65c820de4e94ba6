//! Offline replay over an ingested feature/reward artifact.
//!
//! Each round visits one user drawn uniformly from the user pool; the arms are
//! the artifact's candidate items and the reward is the stored binary label,
//! 0 when the pair was never rated.

use std::sync::Arc;

use super::Environment;
use crate::error::{Error, Result};
use crate::ingestion::FeatureArtifact;
use crate::rng::{streams, Rng};
use crate::types::ContextSet;

#[derive(Clone, Debug, PartialEq)]
pub struct ReplayRound {
    pub user: usize,
    pub contexts: ContextSet,
}

#[derive(Clone, Debug)]
pub struct ReplayEnv {
    artifact: Arc<FeatureArtifact>,
    /// User index visited in round `t` is `user_sequence[t - 1]`.
    user_sequence: Vec<usize>,
    current_round: u64,
}

impl ReplayEnv {
    /// Draw `horizon` users uniformly with replacement.
    pub fn new(artifact: Arc<FeatureArtifact>, horizon: u64, seed: u64) -> Result<Self> {
        if artifact.num_users() == 0 || artifact.num_arms() == 0 {
            return Err(Error::data("artifact has no users or no items"));
        }
        let mut rng = Rng::new(seed, streams::ENVIRONMENT).substream("users");
        let users = artifact.num_users();
        let user_sequence = (0..horizon).map(|_| rng.index(users)).collect();
        Ok(Self {
            artifact,
            user_sequence,
            current_round: 0,
        })
    }

    /// Replay an explicit sequence of user indices.
    pub fn from_sequence(artifact: Arc<FeatureArtifact>, user_sequence: Vec<usize>) -> Result<Self> {
        if let Some(&u) = user_sequence.iter().find(|&&u| u >= artifact.num_users()) {
            return Err(Error::invalid(format!(
                "user index {u} out of range for {} users",
                artifact.num_users()
            )));
        }
        Ok(Self {
            artifact,
            user_sequence,
            current_round: 0,
        })
    }

    pub fn artifact(&self) -> &FeatureArtifact {
        &self.artifact
    }

    pub fn user_sequence(&self) -> &[usize] {
        &self.user_sequence
    }

    fn user_at(&self, t: u64) -> Result<usize> {
        if t == 0 {
            return Err(Error::invalid("rounds are numbered from 1"));
        }
        self.user_sequence
            .get(t as usize - 1)
            .copied()
            .ok_or(Error::EndOfData { round: t })
    }

    /// The round's user and the contexts of every candidate item.
    pub fn replay_round(&self, t: u64) -> Result<ReplayRound> {
        let user = self.user_at(t)?;
        let contexts = (0..self.artifact.num_arms())
            .map(|i| self.artifact.context(user, i))
            .collect::<Result<_>>()?;
        Ok(ReplayRound { user, contexts })
    }

    /// Binary reward of `chosen` for the round's user.
    pub fn replay_feedback(&self, t: u64, chosen: usize) -> Result<f64> {
        let user = self.user_at(t)?;
        if chosen >= self.artifact.num_arms() {
            return Err(Error::invalid(format!(
                "arm {chosen} out of range for {} arms",
                self.artifact.num_arms()
            )));
        }
        Ok(f64::from(self.artifact.reward(user, chosen)?))
    }
}

impl Environment for ReplayEnv {
    fn dim(&self) -> usize {
        self.artifact.n()
    }

    fn num_arms(&self) -> usize {
        self.artifact.num_arms()
    }

    fn contexts(&mut self, t: u64) -> Result<ContextSet> {
        let round = self.replay_round(t)?;
        self.current_round = t;
        Ok(round.contexts)
    }

    fn feedback(&mut self, t: u64, arm: usize) -> Result<f64> {
        if t != self.current_round {
            return Err(Error::invalid(format!(
                "feedback for round {t} but the current round is {}",
                self.current_round
            )));
        }
        self.replay_feedback(t, arm)
    }

    fn regret(&self, _arm: usize) -> Result<Option<f64>> {
        Ok(None)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingestion::{build_feature_artifact, DatasetKind, FactorModel, Rating, RatingsTable};
    use nalgebra::DMatrix;

    /// Two users, three items, hand-picked factors.
    fn crafted() -> Arc<FeatureArtifact> {
        let model = FactorModel {
            user_ids: vec![1, 2],
            item_ids: vec![10, 11, 12],
            user_factors: DMatrix::from_row_slice(2, 2, &[0.6, 0.0, 0.2, 0.4]),
            item_factors: DMatrix::from_row_slice(3, 2, &[0.5, 0.5, 0.0, 0.8, 0.3, 0.1]),
            k: 2,
            reg: 0.0,
            iterations: 1,
            loss_history: vec![],
        };
        let rows = [(1, 10, 4.0), (1, 11, 3.0), (2, 12, 5.0), (2, 10, 1.0)];
        let table = RatingsTable::from_ratings(
            rows.iter()
                .map(|&(user, item, rating)| Rating { user, item, rating })
                .collect(),
            DatasetKind::Movielens.scale(),
        );
        Arc::new(build_feature_artifact(&model, &table, &[10, 11, 12], DatasetKind::Movielens).unwrap())
    }

    #[test]
    fn contexts_match_hand_concatenation() {
        let env = ReplayEnv::from_sequence(crafted(), vec![1, 0]).unwrap();
        // max user norm² = 0.36, max item norm² = 0.64 → c = 1
        let round = env.replay_round(1).unwrap();
        assert_eq!(round.user, 1);
        let expect = [[0.2, 0.4, 0.5, 0.5], [0.2, 0.4, 0.0, 0.8], [0.2, 0.4, 0.3, 0.1]];
        for (x, want) in round.contexts.iter().zip(expect) {
            for (a, b) in x.as_slice().iter().zip(want) {
                assert!((a - b).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn feedback_reads_binarized_table() {
        let env = ReplayEnv::from_sequence(crafted(), vec![0, 1]).unwrap();
        assert_eq!(env.replay_feedback(1, 0).unwrap(), 1.0); // 4.0
        assert_eq!(env.replay_feedback(1, 1).unwrap(), 0.0); // exactly 3
        assert_eq!(env.replay_feedback(1, 2).unwrap(), 0.0); // unrated
        assert_eq!(env.replay_feedback(2, 2).unwrap(), 1.0);
        assert_eq!(env.replay_feedback(2, 0).unwrap(), 0.0);
        assert!(matches!(env.replay_feedback(1, 3), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn unrated_user_always_pays_zero() {
        let mut art = (*crafted()).clone();
        art.rewards.retain(|e| e.user != 0);
        let env = ReplayEnv::from_sequence(Arc::new(art), vec![0]).unwrap();
        for arm in 0..3 {
            assert_eq!(env.replay_feedback(1, arm).unwrap(), 0.0);
        }
    }

    #[test]
    fn exhaustion_signals_end_of_data() {
        let mut env = ReplayEnv::new(crafted(), 2, 0).unwrap();
        env.contexts(2).unwrap();
        assert!(matches!(env.contexts(3), Err(Error::EndOfData { round: 3 })));
    }

    #[test]
    fn same_seed_same_users() {
        let a = ReplayEnv::new(crafted(), 500, 9).unwrap();
        let b = ReplayEnv::new(crafted(), 500, 9).unwrap();
        let c = ReplayEnv::new(crafted(), 500, 10).unwrap();
        assert_eq!(a.user_sequence(), b.user_sequence());
        assert_ne!(a.user_sequence(), c.user_sequence());
        let ones = a.user_sequence().iter().filter(|&&u| u == 1).count();
        assert!((200..=300).contains(&ones));
    }
}
