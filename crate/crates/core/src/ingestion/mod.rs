//! Ratings files → contexts and binary rewards for replay.

pub mod artifact;
pub mod factorize;
pub mod ratings;

use std::path::PathBuf;

use serde::Serialize;

pub use artifact::{build_feature_artifact, build_split_feature_artifact, ArtifactHeader, FeatureArtifact, RewardEntry};
pub use factorize::{factorize, rmse, FactorModel};
pub use ratings::{
    parse_ratings, parse_ratings_from, select_top_items, DatasetKind, HeaderMode, ParseOptions, Rating, RatingScale,
    RatingsTable,
};

use crate::error::{Error, Result};
use crate::rng::{streams, Rng};

#[derive(Clone, Debug, Serialize)]
pub struct IngestConfig {
    pub dataset: DatasetKind,
    pub input: PathBuf,
    pub k_user: usize,
    pub k_item: usize,
    pub top_items: usize,
    pub reg: f64,
    pub iterations: usize,
    pub seed: u64,
    /// Output prefix; files are `<out>.features.bin` and `<out>.rewards.bin`.
    pub out: PathBuf,
    #[serde(skip)]
    pub parse: ParseOptions,
}

#[derive(Clone, Debug, Serialize)]
pub struct IngestSummary {
    pub rows: usize,
    pub malformed: usize,
    pub header: ArtifactHeader,
    pub reward_entries: usize,
    pub positive_rewards: usize,
    pub user_rmse: f64,
    pub item_rmse: f64,
    pub user_loss_history: Vec<f64>,
    pub item_loss_history: Vec<f64>,
}

impl IngestConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_user == 0 || self.k_item == 0 {
            return Err(Error::invalid("k_user and k_item must be at least 1"));
        }
        if self.top_items == 0 {
            return Err(Error::invalid("top-items must be at least 1"));
        }
        if self.iterations == 0 {
            return Err(Error::invalid("iterations must be at least 1"));
        }
        if !(self.reg >= 0.0) || !self.reg.is_finite() {
            return Err(Error::invalid(format!("reg must be >= 0, got {}", self.reg)));
        }
        Ok(())
    }
}

/// Parse, keep the top items, factorize, build and save the artifact.
pub fn run_ingest(cfg: &IngestConfig) -> Result<(FeatureArtifact, IngestSummary)> {
    cfg.validate()?;
    let table = parse_ratings(&cfg.input, cfg.dataset, &cfg.parse)?;
    let top = select_top_items(&table, cfg.top_items)?;
    let restricted = table.restrict_items(&top);

    let base = Rng::new(cfg.seed, streams::FACTORIZATION);
    let user_model = factorize(&restricted, cfg.k_user, cfg.reg, cfg.iterations, &mut base.substream("user"))?;
    let item_model = if cfg.k_item == cfg.k_user {
        user_model.clone()
    } else {
        factorize(&restricted, cfg.k_item, cfg.reg, cfg.iterations, &mut base.substream("item"))?
    };

    let mut art = build_split_feature_artifact(&user_model, &item_model, &restricted, &top, cfg.dataset)?;
    art.seed = cfg.seed;
    art.save(&cfg.out)?;

    let summary = IngestSummary {
        rows: table.len(),
        malformed: table.malformed,
        header: art.header(),
        reward_entries: art.rewards.len(),
        positive_rewards: art.rewards.iter().filter(|e| e.bit == 1).count(),
        user_rmse: rmse(&user_model, &restricted)?,
        item_rmse: rmse(&item_model, &restricted)?,
        user_loss_history: user_model.loss_history.clone(),
        item_loss_history: item_model.loss_history.clone(),
    };
    Ok((art, summary))
}
