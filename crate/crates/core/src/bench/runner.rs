//! The experiment driver.

use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;

use super::config::{EnvSpec, ExperimentConfig, PolicySpec};
use super::diagnostics::{diagnose_round, DiagnosticCounters};
use super::report::{
    Aggregate, CurvePoint, ExperimentReport, LoggedOutcome, Provenance, RepetitionReport, RepetitionTiming,
    TimingSummary, REPORT_SCHEMA_VERSION,
};
use crate::environments::{Environment, ReplayEnv, SyntheticEnv};
use crate::error::{Error, Result};
use crate::ingestion::FeatureArtifact;
use crate::policies::{BcmabRp, Cbrap, EpsilonGreedy, LinUcb, LinearTs, Policy, PolicyKind, RandomPolicy};
use crate::projection::{build_projection, ProjectionMatrix};
use crate::rng::{streams, Rng};
use crate::types::{AlgoParams, RoundOutcome};

/// Environment variable capping the number of repetitions run concurrently.
pub const THREADS_ENV: &str = "RPBANDIT_THREADS";

/// A policy together with the parameters it was built with.
pub struct BuiltPolicy {
    pub policy: Box<dyn Policy>,
    /// Effective Thompson-sampling parameters, `L_z` resolved.
    pub params: Option<AlgoParams>,
}

/// `max(1, ‖P‖₂)`: bounds `‖Px‖` for every context in the unit ball.
pub fn projected_norm_bound(p: &ProjectionMatrix) -> f64 {
    let s = p.entries().singular_values();
    s.iter().copied().fold(1.0, f64::max)
}

/// Instantiate the policy of `spec` for contexts of dimension `n`, drawing
/// every random choice from streams of `seed`. BCMAB-RP and CBRAP draw the
/// same projection for the same seed.
pub fn build_policy(spec: &PolicySpec, n: usize, seed: u64) -> Result<BuiltPolicy> {
    let p = &spec.params;
    let projected = |d: usize| build_projection(n, d, p.kappa_sq, &mut Rng::new(seed, streams::PROJECTION));
    Ok(match spec.kind {
        PolicyKind::BcmabRp => {
            let proj = projected(p.d)?;
            let mut params = p.clone();
            if spec.auto_l_z {
                params.l_z = projected_norm_bound(&proj);
            }
            let policy = BcmabRp::with_projection(params.clone(), proj, Rng::new(seed, streams::POSTERIOR))?;
            BuiltPolicy {
                policy: Box::new(policy),
                params: Some(params),
            }
        }
        PolicyKind::LinearTs => {
            let mut params = p.clone();
            params.d = n;
            params.kappa_sq = 1.0 / n as f64;
            if spec.auto_l_z {
                params.l_z = 1.0;
            }
            BuiltPolicy {
                policy: Box::new(LinearTs::new(params.clone(), seed)?),
                params: Some(params),
            }
        }
        PolicyKind::Linucb => BuiltPolicy {
            policy: Box::new(LinUcb::new(n, p.lambda, spec.alpha)?),
            params: None,
        },
        PolicyKind::Cbrap => BuiltPolicy {
            policy: Box::new(Cbrap::with_projection(projected(p.d)?, p.lambda, spec.alpha)?),
            params: None,
        },
        PolicyKind::Egreedy => BuiltPolicy {
            policy: Box::new(EpsilonGreedy::new(spec.egreedy_eps, seed)?),
            params: None,
        },
        PolicyKind::Random => BuiltPolicy {
            policy: Box::new(RandomPolicy::new(seed)),
            params: None,
        },
    })
}

/// What to record while running one repetition.
#[derive(Clone, Debug)]
pub struct RunOptions<'a> {
    pub horizon: u64,
    pub checkpoints: &'a [u64],
    pub log_stride: u64,
    /// Parameters for the per-round diagnostics; `None` disables them.
    pub diagnostics: Option<&'a AlgoParams>,
}

/// Run one repetition to the horizon or until the environment runs out of
/// data, in which case the result is flagged partial.
pub fn run_repetition(
    policy: &mut dyn Policy,
    env: &mut dyn Environment,
    opts: &RunOptions<'_>,
    repetition: usize,
    seed: u64,
) -> Result<(RepetitionReport, RepetitionTiming)> {
    let mut rewards = Vec::with_capacity(opts.horizon as usize);
    let mut regrets: Vec<f64> = Vec::new();
    let mut outcomes = Vec::new();
    let mut diagnostics = opts.diagnostics.map(|_| DiagnosticCounters::default());
    let mut total_ns = 0u64;
    let mut partial = false;
    let mut cumulative_regret = 0.0;

    for t in 1..=opts.horizon {
        let contexts = match env.contexts(t) {
            Ok(c) => c,
            Err(Error::EndOfData { .. }) => {
                partial = true;
                break;
            }
            Err(e) => return Err(e),
        };
        let keep = t == 1 || t % opts.log_stride == 0;

        let start = Instant::now();
        let decision = policy.select(&contexts)?;
        let mut step_ns = start.elapsed().as_nanos() as u64;
        let arm = decision.arm;

        if let (Some(params), Some(counters)) = (opts.diagnostics, diagnostics.as_mut()) {
            let (state, proj) = match (policy.posterior(), policy.projection()) {
                (Some(s), Some(p)) => (s, p),
                _ => return Err(Error::invalid("diagnostics need a projected posterior policy")),
            };
            let record = diagnose_round(
                &*env,
                state,
                proj,
                params,
                &contexts,
                decision.sampled_parameter.as_ref(),
                arm,
            )?;
            counters.record(record, keep);
        }

        let reward = env.feedback(t, arm)?;
        let regret = env.regret(arm)?;

        let start = Instant::now();
        policy.update(arm, &contexts[arm], reward)?;
        step_ns += start.elapsed().as_nanos() as u64;
        total_ns += step_ns;

        let outcome = RoundOutcome {
            t,
            chosen_arm: arm,
            reward,
            per_round_regret: regret,
            step_time_ns: step_ns,
        };
        outcome.validate()?;
        rewards.push(reward);
        if let Some(r) = regret {
            cumulative_regret += r;
            regrets.push(cumulative_regret);
        }
        if keep {
            outcomes.push(LoggedOutcome {
                t,
                arm,
                reward,
                regret,
            });
        }
    }

    let rounds = rewards.len() as u64;
    let has_regret = !regrets.is_empty() || (rounds == 0 && env.theta_star().is_some());
    let mut cumulative = 0.0;
    let mut prefix = Vec::with_capacity(rewards.len());
    for r in &rewards {
        cumulative += r;
        prefix.push(cumulative);
    }
    let curve = opts
        .checkpoints
        .iter()
        .filter(|&&c| c >= 1 && c <= rounds)
        .map(|&c| {
            let i = c as usize - 1;
            CurvePoint {
                round: c,
                ctr: prefix[i] / c as f64,
                cumulative_reward: prefix[i],
                cumulative_regret: has_regret.then(|| regrets[i]),
            }
        })
        .collect();

    let report = RepetitionReport {
        repetition,
        seed,
        rounds_completed: rounds,
        partial,
        cumulative_reward: cumulative,
        cumulative_regret: has_regret.then_some(cumulative_regret),
        curve,
        outcomes,
        diagnostics,
    };
    let timing = RepetitionTiming {
        repetition,
        total_ns,
        mean_step_ns: if rounds == 0 { 0.0 } else { total_ns as f64 / rounds as f64 },
    };
    Ok((report, timing))
}

fn thread_count(repetitions: usize) -> usize {
    let available = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1);
    let cap = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&v| v > 0)
        .unwrap_or(available);
    cap.min(repetitions).max(1)
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, count) = values.fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// Execute every repetition of `cfg` and assemble the report. Repetition `r`
/// uses seed `base_seed + r`; repetitions may run concurrently but the report
/// is assembled in repetition order, so it does not depend on scheduling.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let artifact = match &cfg.env {
        EnvSpec::Replay { artifact } => Some(Arc::new(FeatureArtifact::load(artifact)?)),
        EnvSpec::Synthetic { .. } => None,
    };
    let n = match (&cfg.env, &artifact) {
        (EnvSpec::Synthetic { n, .. }, _) => *n,
        (_, Some(a)) => a.n(),
        _ => unreachable!("replay artifact is loaded above"),
    };
    cfg.validate_with_dim(n)?;

    let checkpoints = cfg.checkpoint_rounds();
    let stride = cfg.log_stride();
    let seeds: Vec<u64> = (0..cfg.repetitions).map(|r| cfg.base_seed.wrapping_add(r as u64)).collect();

    let run_one = |rep: usize| -> Result<(RepetitionReport, RepetitionTiming, Option<f64>)> {
        let seed = seeds[rep];
        let mut env: Box<dyn Environment> = match (&cfg.env, &artifact) {
            (EnvSpec::Synthetic { n, arms, context_gen }, _) => {
                Box::new(SyntheticEnv::new(*n, *arms, *context_gen, seed)?)
            }
            (_, Some(a)) => Box::new(ReplayEnv::new(Arc::clone(a), cfg.horizon, seed)?),
            _ => unreachable!("replay artifact is loaded above"),
        };
        let mut built = build_policy(&cfg.policy, n, seed)?;
        let diag_params = if cfg.diagnostics { built.params.clone() } else { None };
        let opts = RunOptions {
            horizon: cfg.horizon,
            checkpoints: &checkpoints,
            log_stride: stride,
            diagnostics: diag_params.as_ref(),
        };
        let (report, timing) = run_repetition(built.policy.as_mut(), env.as_mut(), &opts, rep, seed)?;
        Ok((report, timing, built.params.map(|p| p.l_z)))
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count(cfg.repetitions))
        .build()
        .map_err(|e| Error::invalid(format!("cannot build thread pool: {e}")))?;
    let results: Vec<_> = pool.install(|| (0..cfg.repetitions).into_par_iter().map(run_one).collect());

    let mut repetitions = Vec::with_capacity(cfg.repetitions);
    let mut timings = Vec::with_capacity(cfg.repetitions);
    let mut l_z = Vec::new();
    for r in results {
        let (rep, timing, lz) = r?;
        repetitions.push(rep);
        timings.push(timing);
        l_z.extend(lz);
    }

    let aggregate = aggregate(&repetitions, &checkpoints);
    let timing = TimingSummary {
        mean_total_seconds: mean(timings.iter().map(|t| t.total_ns as f64 / 1e9)),
        mean_step_ns: mean(timings.iter().map(|t| t.mean_step_ns)),
        repetitions: timings,
    };
    Ok(ExperimentReport {
        schema_version: REPORT_SCHEMA_VERSION,
        config: cfg.clone(),
        provenance: Provenance {
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            seeds,
            artifact: artifact.map(|a| a.header()),
            l_z,
        },
        checkpoints,
        partial: repetitions.iter().any(|r| r.partial),
        repetitions,
        aggregate,
        timing: Some(timing),
    })
}

/// Means over repetitions; a checkpoint averages only the repetitions that
/// reached it.
pub fn aggregate(reps: &[RepetitionReport], checkpoints: &[u64]) -> Aggregate {
    let mean_curve = checkpoints
        .iter()
        .filter_map(|&c| {
            let points: Vec<&CurvePoint> = reps.iter().filter_map(|r| r.curve.iter().find(|p| p.round == c)).collect();
            if points.is_empty() {
                return None;
            }
            let regret = points
                .iter()
                .all(|p| p.cumulative_regret.is_some())
                .then(|| mean(points.iter().filter_map(|p| p.cumulative_regret)));
            Some(CurvePoint {
                round: c,
                ctr: mean(points.iter().map(|p| p.ctr)),
                cumulative_reward: mean(points.iter().map(|p| p.cumulative_reward)),
                cumulative_regret: regret,
            })
        })
        .collect();
    let diag: Vec<&DiagnosticCounters> = reps.iter().filter_map(|r| r.diagnostics.as_ref()).collect();
    let pooled = |f: fn(&DiagnosticCounters) -> u64| -> Option<f64> {
        let rounds: u64 = diag.iter().map(|d| d.rounds).sum();
        (!diag.is_empty() && rounds > 0).then(|| diag.iter().map(|d| f(d)).sum::<u64>() as f64 / rounds as f64)
    };
    Aggregate {
        mean_cumulative_reward: mean(reps.iter().map(|r| r.cumulative_reward)),
        mean_cumulative_regret: (!reps.is_empty() && reps.iter().all(|r| r.cumulative_regret.is_some()))
            .then(|| mean(reps.iter().filter_map(|r| r.cumulative_regret))),
        mean_curve,
        e_psi_hat_frequency: pooled(|d| d.e_psi_hat_rounds),
        e_psi_tilde_frequency: pooled(|d| d.e_psi_tilde_rounds),
    }
}
