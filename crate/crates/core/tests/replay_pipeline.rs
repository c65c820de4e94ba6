use std::fs;

use rpbandit::bench::{run_experiment, EnvSpec, ExperimentConfig};
use rpbandit::ingestion::{run_ingest, DatasetKind, FeatureArtifact, IngestConfig, ParseOptions};
use rpbandit::{Error, PolicyKind, Rng};

fn write_ratings(path: &std::path::Path) {
    let mut rng = Rng::new(8, "ratings");
    let mut text = String::new();
    for user in 1..=30u64 {
        for item in 1..=15u64 {
            if rng.bernoulli(0.7) {
                // Jester ratings are continuous in [-10, 10]
                text += &format!("{user},{item},{:.2}\n", rng.uniform_range(-10.0, 10.0));
            }
        }
    }
    fs::write(path, text).unwrap();
}

fn ingest(dir: &std::path::Path) -> std::path::PathBuf {
    let input = dir.join("jester.csv");
    write_ratings(&input);
    let out = dir.join("jester");
    let cfg = IngestConfig {
        dataset: DatasetKind::Jester,
        input,
        k_user: 3,
        k_item: 3,
        top_items: 10,
        reg: 0.1,
        iterations: 8,
        seed: 1,
        out: out.clone(),
        parse: ParseOptions::default(),
    };
    let (art, summary) = run_ingest(&cfg).unwrap();
    assert_eq!(art.num_arms(), 10);
    assert_eq!(summary.header.n, 6);
    out
}

#[test]
fn ingest_then_replay_every_policy() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = ingest(dir.path());
    let art = FeatureArtifact::load(&prefix).unwrap();
    for u in 0..art.num_users() {
        for i in 0..art.num_arms() {
            assert!(art.context(u, i).unwrap().norm() <= 1.0 + 1e-12);
        }
    }
    for kind in PolicyKind::ALL {
        let mut cfg = ExperimentConfig::synthetic(kind, 0, 4, 0, 300);
        cfg.env = EnvSpec::Replay { artifact: prefix.clone() };
        cfg.repetitions = 2;
        let report = run_experiment(&cfg).unwrap();
        assert!(!report.partial, "{kind}");
        assert!(report.aggregate.mean_cumulative_regret.is_none());
        assert!(report.provenance.artifact.is_some());
        for rep in &report.repetitions {
            assert!(rep.outcomes.iter().all(|o| o.reward == 0.0 || o.reward == 1.0));
        }
    }
}

#[test]
fn replay_rejects_reduced_dimension_above_n() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = ingest(dir.path());
    let mut cfg = ExperimentConfig::synthetic(PolicyKind::BcmabRp, 0, 7, 0, 10);
    cfg.env = EnvSpec::Replay { artifact: prefix };
    assert!(matches!(run_experiment(&cfg), Err(Error::InvalidParameter(_))));
}

#[test]
fn missing_artifact_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::synthetic(PolicyKind::Random, 0, 1, 0, 10);
    cfg.env = EnvSpec::Replay {
        artifact: dir.path().join("absent"),
    };
    assert!(matches!(run_experiment(&cfg), Err(Error::Io(_))));
}
