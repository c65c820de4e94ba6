//! Standalone measurements: per-step cost against `n`, and the projection
//! distortion rate against `d`.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::environments::{ContextGen, Environment, SyntheticEnv};
use crate::error::{Error, Result};
use crate::policies::{BcmabRp, Policy};
use crate::projection::{distortion_bound, inner_product_distortion_trial};
use crate::rng::Rng;
use crate::types::{AlgoParams, Context, ContextSet};

pub const DEFAULT_SCALING_STEPS: usize = 2_000;
pub const DEFAULT_SCALING_WARMUP: usize = 200;
pub const DEFAULT_SCALING_ARMS: usize = 20;
pub const SCALING_RUNS: usize = 3;
/// Distinct context sets cycled through by the scaling probe.
const CONTEXT_POOL: usize = 64;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub n: usize,
    /// Median over runs of the mean select+update time per step.
    pub median_step_ns: f64,
    pub runs_step_ns: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingOptions {
    pub d: usize,
    pub arms: usize,
    pub steps: usize,
    pub warmup: usize,
    pub runs: usize,
    pub seed: u64,
}

impl ScalingOptions {
    pub fn new(d: usize, seed: u64) -> Self {
        Self {
            d,
            arms: DEFAULT_SCALING_ARMS,
            steps: DEFAULT_SCALING_STEPS,
            warmup: DEFAULT_SCALING_WARMUP,
            runs: SCALING_RUNS,
            seed,
        }
    }
}

/// Time BCMAB-RP's select+update per step at each `n` with the same `d`,
/// arm count and seed. Contexts and rewards are produced outside the timed
/// region; runs are sequential so they do not compete for cores.
pub fn runtime_scaling_probe(n_list: &[usize], opts: &ScalingOptions) -> Result<Vec<ScalingPoint>> {
    if opts.steps == 0 || opts.runs == 0 || opts.arms == 0 {
        return Err(Error::invalid("steps, runs and arms must be positive"));
    }
    n_list
        .iter()
        .map(|&n| {
            if opts.d > n {
                return Err(Error::invalid(format!("d={} exceeds n={n}", opts.d)));
            }
            let mut env = SyntheticEnv::new(n, opts.arms, ContextGen::Isotropic, opts.seed)?;
            let pool: Vec<(ContextSet, Vec<f64>)> = (1..=CONTEXT_POOL as u64)
                .map(|t| {
                    let xs = env.contexts(t)?;
                    let rewards = (0..opts.arms).map(|a| env.feedback(t, a)).collect::<Result<_>>()?;
                    Ok((xs, rewards))
                })
                .collect::<Result<_>>()?;
            let mut runs = Vec::with_capacity(opts.runs);
            for _ in 0..opts.runs {
                runs.push(time_run(n, opts, &pool)?);
            }
            let mut sorted = runs.clone();
            sorted.sort_by(f64::total_cmp);
            Ok(ScalingPoint {
                n,
                median_step_ns: sorted[sorted.len() / 2],
                runs_step_ns: runs,
            })
        })
        .collect()
}

fn time_run(n: usize, opts: &ScalingOptions, pool: &[(ContextSet, Vec<f64>)]) -> Result<f64> {
    let mut policy = BcmabRp::new(n, AlgoParams::new(opts.d), opts.seed)?;
    let mut step = |i: usize| -> Result<u64> {
        let (xs, rewards): &(Vec<Context>, Vec<f64>) = &pool[i % pool.len()];
        let start = Instant::now();
        let arm = policy.select(xs)?.arm;
        policy.update(arm, &xs[arm], rewards[arm])?;
        Ok(start.elapsed().as_nanos() as u64)
    };
    for i in 0..opts.warmup {
        step(i)?;
    }
    let mut total = 0u64;
    for i in 0..opts.steps {
        total += step(opts.warmup + i)?;
    }
    Ok(total as f64 / opts.steps as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistortionPoint {
    pub d: usize,
    pub violation_fraction: f64,
    /// `2·exp(−dε²/8)`.
    pub bound: f64,
}

/// Violation fraction of the inner-product distortion at each `d`, with
/// `θ = x = e₁ ∈ ℝⁿ`. Each `d` uses its own stream, so the result for one `d`
/// does not depend on the rest of the list.
pub fn distortion_probe(n: usize, d_list: &[usize], epsilon: f64, trials: usize, seed: u64) -> Result<Vec<DistortionPoint>> {
    if n == 0 {
        return Err(Error::invalid("n must be positive"));
    }
    let mut e1 = vec![0.0; n];
    e1[0] = 1.0;
    let x = crate::types::validate_context(&e1)?;
    d_list
        .par_iter()
        .map(|&d| {
            let mut rng = Rng::indexed(seed, "distortion", d as u64);
            Ok(DistortionPoint {
                d,
                violation_fraction: inner_product_distortion_trial(&e1, &x, d, epsilon, trials, &mut rng)?,
                bound: distortion_bound(d, epsilon),
            })
        })
        .collect()
}
