//! End-to-end acceptance checks. Prints one `PASS`/`FAIL` line per criterion
//! and exits non-zero if any criterion fails.
//!
//! Run a subset with `cargo test --test acceptance -- 1 5 9`.

use std::fs;
use std::path::Path;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rpbandit::bench::{
    distortion_probe, run_experiment, runtime_scaling_probe, ExperimentConfig, ExperimentReport, ScalingOptions,
};
use rpbandit::environments::{ContextGen, Environment, SyntheticEnv};
use rpbandit::ingestion::{
    factorize, parse_ratings_from, rmse, run_ingest, DatasetKind, FeatureArtifact, HeaderMode, IngestConfig,
    ParseOptions, Rating, RatingsTable,
};
use rpbandit::policies::{BcmabRp, LinearTs, PosteriorState};
use rpbandit::projection::distortion_bound;
use rpbandit::rng::streams;
use rpbandit::{AlgoParams, Policy, PolicyKind, ProjectionMatrix, Rng};

struct Outcome {
    pass: bool,
    detail: String,
}

type Check = fn() -> Result<Outcome, String>;

fn main() {
    let criteria: [(&str, &str, Duration, Check); 9] = [
        ("1", "posterior oracle equivalence", secs(10), posterior_oracle),
        ("2", "identity projection reproduces Linear TS", secs(10), identity_projection),
        ("3", "sublinear regret", secs(300), sublinear_regret),
        ("4", "cumulative reward ordering", secs(300), reward_ordering),
        ("5", "projection concentration", secs(60), projection_concentration),
        ("6", "confidence event frequency", secs(120), event_frequency),
        ("7", "per-step runtime linear in n", secs(120), runtime_linearity),
        ("8", "ingestion correctness", secs(30), ingestion),
        ("9", "report determinism", secs(120), determinism),
    ];
    let selected: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();

    let mut failures = 0;
    for (id, name, budget, check) in criteria {
        if !selected.is_empty() && !selected.iter().any(|s| s == id) {
            continue;
        }
        let start = Instant::now();
        let result = check();
        let elapsed = start.elapsed();
        let (pass, detail) = match result {
            Ok(o) => (o.pass, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        let in_budget = elapsed <= budget;
        let ok = pass && in_budget;
        failures += usize::from(!ok);
        println!(
            "{} criterion {id} ({name}): {detail}; {:.1}s of {}s budget{}",
            if ok { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            budget.as_secs(),
            if in_budget { "" } else { " (over budget)" },
        );
    }
    if failures > 0 {
        println!("{failures} criterion/criteria failed");
        std::process::exit(1);
    }
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn unit_ball_vector(dim: usize, rng: &mut Rng) -> DVector<f64> {
    let g = DVector::from_fn(dim, |_, _| rng.standard_normal());
    let norm = g.norm();
    g / norm * rng.uniform()
}

/// Incremental ψ̂ against a from-scratch ridge solve on the whole history.
fn posterior_oracle() -> Result<Outcome, String> {
    let mut rng = Rng::new(2024, "acceptance/posterior");
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let d = 2 + rng.index(31);
        let lambda = [1.0, 2.0, 10.0][rng.index(3)];
        let len = 1 + rng.index(500);
        let mut state = PosteriorState::new(d, lambda).map_err(err)?;
        let mut gram = DMatrix::identity(d, d) * lambda;
        let mut b = DVector::zeros(d);
        for _ in 0..len {
            let z = unit_ball_vector(d, &mut rng);
            let r = if rng.bernoulli(0.4) { 1.0 } else { 0.0 };
            state.update(&z, r).map_err(err)?;
            gram += &z * z.transpose();
            b += &z * r;
        }
        let batch = gram.lu().solve(&b).ok_or("batch Gram matrix is singular")?;
        worst = worst.max((state.psi_hat() - batch).amax());
    }
    Ok(Outcome {
        pass: worst <= 1e-8,
        detail: format!("max |incremental - batch| = {worst:.2e} (tolerance 1e-8)"),
    })
}

/// With `P = I` and the same posterior stream, BCMAB-RP and Linear TS must
/// choose the same arm every round.
fn identity_projection() -> Result<Outcome, String> {
    let (n, arms, horizon, seed) = (10, 20, 2_000u64, 11);
    let mut params = AlgoParams::new(n);
    params.epsilon = 0.0;
    params.kappa_sq = 1.0 / n as f64;
    let p = ProjectionMatrix::identity(n).map_err(err)?;
    let mut bc = BcmabRp::with_projection(params.clone(), p, Rng::new(seed, streams::POSTERIOR)).map_err(err)?;
    let mut lt = LinearTs::new(params, seed).map_err(err)?;
    let mut env_a = SyntheticEnv::new(n, arms, ContextGen::Isotropic, seed).map_err(err)?;
    let mut env_b = SyntheticEnv::new(n, arms, ContextGen::Isotropic, seed).map_err(err)?;
    for t in 1..=horizon {
        let xs = env_a.contexts(t).map_err(err)?;
        let ys = env_b.contexts(t).map_err(err)?;
        let a = bc.select(&xs).map_err(err)?.arm;
        let b = lt.select(&ys).map_err(err)?.arm;
        if a != b {
            return Ok(Outcome {
                pass: false,
                detail: format!("arms diverge at round {t}: {a} vs {b}"),
            });
        }
        let ra = env_a.feedback(t, a).map_err(err)?;
        let rb = env_b.feedback(t, b).map_err(err)?;
        bc.update(a, &xs[a], ra).map_err(err)?;
        lt.update(b, &ys[b], rb).map_err(err)?;
    }
    Ok(Outcome {
        pass: true,
        detail: format!("identical arm sequences over T = {horizon}"),
    })
}

const DESK_N: usize = 120;
const DESK_D: usize = 24;
const DESK_ARMS: usize = 50;
const DESK_T: u64 = 20_000;
const DESK_SEEDS: usize = 5;

/// Latent contexts: arm directions concentrate near a rank-4 subspace that
/// contains θ*, so the best arm stands out from the rest.
fn desk_run(kind: PolicyKind) -> Result<ExperimentReport, String> {
    let mut cfg = ExperimentConfig::synthetic(kind, DESK_N, DESK_D, DESK_ARMS, DESK_T);
    cfg.env = rpbandit::bench::EnvSpec::Synthetic {
        n: DESK_N,
        arms: DESK_ARMS,
        context_gen: ContextGen::Latent {
            rank: 4,
            anchor_weight: 0.5,
        },
    };
    cfg.repetitions = DESK_SEEDS;
    cfg.log_every = Some(1);
    run_experiment(&cfg).map_err(err)
}

fn window_regret(report: &ExperimentReport, lo: u64, hi: u64) -> f64 {
    let mut total = 0.0;
    for rep in &report.repetitions {
        total += rep
            .outcomes
            .iter()
            .filter(|o| o.t > lo && o.t <= hi)
            .map(|o| o.regret.unwrap_or(0.0))
            .sum::<f64>();
    }
    total / ((hi - lo) as f64 * report.repetitions.len() as f64)
}

fn sublinear_regret() -> Result<Outcome, String> {
    let bc = desk_run(PolicyKind::BcmabRp)?;
    let rnd = desk_run(PolicyKind::Random)?;
    let early = window_regret(&bc, 0, DESK_T / 10);
    let late = window_regret(&bc, DESK_T / 2, DESK_T);
    let ratio = late / early;
    let reward_ratio = bc.aggregate.mean_cumulative_reward / rnd.aggregate.mean_cumulative_reward;
    Ok(Outcome {
        pass: ratio <= 0.6 && reward_ratio >= 1.3,
        detail: format!(
            "(a) late/early per-round regret {ratio:.3} (need <= 0.6); (b) reward vs Random {reward_ratio:.3} \
             (need >= 1.3), means over {DESK_SEEDS} seeds"
        ),
    })
}

fn reward_ordering() -> Result<Outcome, String> {
    let kinds = [PolicyKind::BcmabRp, PolicyKind::Cbrap, PolicyKind::Egreedy, PolicyKind::Random];
    let reports = kinds.iter().map(|&k| desk_run(k)).collect::<Result<Vec<_>, _>>()?;
    let reward = |i: usize, s: usize| reports[i].repetitions[s].cumulative_reward;
    let mut holds = 0;
    let mut rows = Vec::new();
    for s in 0..DESK_SEEDS {
        let (bc, cb, eg, rn) = (reward(0, s), reward(1, s), reward(2, s), reward(3, s));
        let ok = bc >= cb && cb >= eg && bc >= eg && eg >= rn;
        holds += usize::from(ok);
        rows.push(format!("seed {s}: {bc}/{cb}/{eg}/{rn}{}", if ok { "" } else { " x" }));
    }
    Ok(Outcome {
        pass: holds >= 4,
        detail: format!(
            "ordering holds on {holds}/{DESK_SEEDS} seeds (need 4); BCMAB-RP/CBRAP/egreedy/random = {}",
            rows.join(", ")
        ),
    })
}

fn projection_concentration() -> Result<Outcome, String> {
    let pts = distortion_probe(50, &[64, 512], 0.5, 20_000, 7).map_err(err)?;
    let slack = [0.01, 0.005];
    let pass = pts.iter().zip(slack).all(|(p, s)| p.violation_fraction <= p.bound + s);
    let detail = pts
        .iter()
        .zip(slack)
        .map(|(p, s)| format!("d = {}: {:.5} vs {:.5}", p.d, p.violation_fraction, p.bound + s))
        .collect::<Vec<_>>()
        .join(", ");
    Ok(Outcome { pass, detail })
}

fn event_frequency() -> Result<Outcome, String> {
    let (d, eps, delta) = (64, 0.5, 0.2);
    let mut cfg = ExperimentConfig::synthetic(PolicyKind::BcmabRp, DESK_N, d, DESK_ARMS, 2_000);
    cfg.policy.params.epsilon = eps;
    cfg.policy.params.delta = delta;
    cfg.repetitions = 20;
    cfg.diagnostics = true;
    let report = run_experiment(&cfg).map_err(err)?;
    let freq = report.aggregate.e_psi_hat_frequency.ok_or("no diagnostics in report")?;
    let floor = 0.9 * (1.0 - delta / 2.0) * (1.0 - distortion_bound(d, eps));
    Ok(Outcome {
        pass: freq >= floor,
        detail: format!("all-arm event frequency {freq:.4} (need >= {floor:.4})"),
    })
}

fn runtime_linearity() -> Result<Outcome, String> {
    let pts = runtime_scaling_probe(&[500, 1000, 2000, 4000], &ScalingOptions::new(20, 3)).map_err(err)?;
    let at = |n: usize| pts.iter().find(|p| p.n == n).map(|p| p.median_step_ns).unwrap_or(f64::NAN);
    let ratio = at(4000) / at(1000);
    let per_n = pts
        .iter()
        .map(|p| format!("{}:{:.0}ns", p.n, p.median_step_ns))
        .collect::<Vec<_>>()
        .join(" ");
    Ok(Outcome {
        pass: ratio <= 6.0,
        detail: format!("time(4000)/time(1000) = {ratio:.2} (need <= 6); {per_n}"),
    })
}

fn ingestion() -> Result<Outcome, String> {
    let mut notes = Vec::new();

    // rank-1 recovery
    let u = [1.0, 2.0, 1.5, 3.0, 2.5, 1.2, 0.7, 1.8];
    let v = [0.5, 1.0, 2.0, 1.5, 0.8, 1.1];
    let rows: Vec<Rating> = u
        .iter()
        .enumerate()
        .flat_map(|(a, ua)| {
            v.iter().enumerate().map(move |(b, vb)| Rating {
                user: a as u64,
                item: 100 + b as u64,
                rating: ua * vb,
            })
        })
        .collect();
    let table = RatingsTable::from_ratings(rows, DatasetKind::Jester.scale());
    let model = factorize(&table, 1, 1e-9, 50, &mut Rng::new(1, "acceptance/als")).map_err(err)?;
    let e = rmse(&model, &table).map_err(err)?;
    let rank_one = e <= 1e-3;
    notes.push(format!("rank-1 RMSE {e:.2e}"));

    // binarization grid, through the parser
    let mut grid_ok = true;
    let dir = tempfile::tempdir().map_err(err)?;
    for (kind, grid) in [
        (DatasetKind::Movielens, (1..=10).map(|k| k as f64 * 0.5).collect::<Vec<_>>()),
        (DatasetKind::Jester, (-40..=40).map(|k| k as f64 * 0.25).collect::<Vec<_>>()),
    ] {
        let text: String = grid.iter().enumerate().map(|(i, r)| format!("{i},7,{r}\n")).collect();
        let parsed = parse_ratings_from(text.as_bytes(), kind, &ParseOptions::default()).map_err(err)?;
        if parsed.len() != grid.len() {
            grid_ok = false;
        }
        for (rec, r) in parsed.triplets.iter().zip(&grid) {
            let expected = match kind {
                DatasetKind::Movielens => u8::from(*r > 3.0),
                DatasetKind::Jester => u8::from(*r > 0.0),
            };
            grid_ok &= kind.binarize(Some(rec.rating)) == expected;
        }
        grid_ok &= kind.binarize(None) == 0;
    }
    notes.push(format!("binarization grids {}", if grid_ok { "ok" } else { "mismatch" }));

    // artifact round trip
    let input = dir.path().join("ratings.csv");
    let mut csv = String::from("userId,movieId,rating,timestamp\n");
    let mut rng = Rng::new(5, "acceptance/ratings");
    for user in 1..=40u64 {
        for item in 1..=25u64 {
            if rng.bernoulli(0.6) {
                csv += &format!("{user},{item},{},0\n", 0.5 * (1 + rng.index(10)) as f64);
            }
        }
    }
    fs::write(&input, csv).map_err(err)?;
    let cfg = |out: &Path| IngestConfig {
        dataset: DatasetKind::Movielens,
        input: input.clone(),
        k_user: 4,
        k_item: 4,
        top_items: 20,
        reg: 0.1,
        iterations: 10,
        seed: 3,
        out: out.to_path_buf(),
        parse: ParseOptions {
            delimiter: ",".into(),
            header: HeaderMode::Auto,
        },
    };
    let first = dir.path().join("a");
    let second = dir.path().join("b");
    let resaved = dir.path().join("c");
    run_ingest(&cfg(&first)).map_err(err)?;
    run_ingest(&cfg(&second)).map_err(err)?;
    FeatureArtifact::load(&first).map_err(err)?.save(&resaved).map_err(err)?;
    let mut identical = true;
    for suffix in [".features.bin", ".rewards.bin"] {
        let read = |p: &Path| {
            let mut s = p.as_os_str().to_owned();
            s.push(suffix);
            fs::read(s)
        };
        let a = read(&first).map_err(err)?;
        identical &= a == read(&second).map_err(err)? && a == read(&resaved).map_err(err)?;
    }
    notes.push(format!("artifact bytes {}", if identical { "identical" } else { "differ" }));

    Ok(Outcome {
        pass: rank_one && grid_ok && identical,
        detail: notes.join(", "),
    })
}

fn determinism() -> Result<Outcome, String> {
    let dir = tempfile::tempdir().map_err(err)?;
    let bin = env!("CARGO_BIN_EXE_rpbandit");
    let mut notes = Vec::new();
    let mut pass = true;
    for (policy, format) in [("bcmab-rp", "json"), ("cbrap", "csv"), ("egreedy", "json"), ("linear-ts", "csv")] {
        let mut outputs = Vec::new();
        for attempt in 0..2 {
            let out = dir.path().join(format!("{policy}-{attempt}.{format}"));
            let status = Command::new(bin)
                .args(["run", "--policy", policy, "--n", "40", "--d", "8", "--arms", "10", "--T", "1500"])
                .args(["--reps", "3", "--seed", "42", "--format", format])
                .args((policy == "bcmab-rp").then_some("--diagnostics"))
                .arg("--out")
                .arg(&out)
                .stderr(Stdio::null())
                .status()
                .map_err(err)?;
            if !status.success() {
                return Err(format!("rpbandit run --policy {policy} exited with {status}"));
            }
            outputs.push(fs::read(&out).map_err(err)?);
        }
        let same = outputs[0] == outputs[1];
        pass &= same;
        notes.push(format!("{policy}/{format} {}", if same { "identical" } else { "differ" }));
    }
    Ok(Outcome {
        pass,
        detail: notes.join(", "),
    })
}
