//! `rpbandit`: ingest ratings data, run bandit experiments and probes.
//!
//! Exit codes: 0 success, 2 invalid configuration, 3 data error, 4 I/O error.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use rpbandit::bench::{
    distortion_probe, emit_report, run_experiment, runtime_scaling_probe, write_json, EnvSpec, ExperimentConfig,
    ExperimentReport, PolicySpec, ReportFormat, ScalingOptions,
};
use rpbandit::environments::ContextGen;
use rpbandit::ingestion::{run_ingest, DatasetKind, HeaderMode, IngestConfig, ParseOptions};
use rpbandit::{AlgoParams, Error, PolicyKind};

#[derive(Parser, Debug)]
#[command(name = "rpbandit", version, about = "Contextual bandits on randomly projected contexts")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Turn a ratings file into a feature/reward artifact for replay.
    Ingest(IngestArgs),
    /// Run a policy against an environment and write a report.
    Run(RunArgs),
    /// Measure BCMAB-RP's per-step cost as n grows.
    Scaling(ScalingArgs),
    /// Measure the inner-product distortion rate of random projections.
    Distortion(DistortionArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Dataset {
    Movielens,
    Jester,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Header {
    Auto,
    Skip,
    None,
}

#[derive(Args, Debug)]
struct IngestArgs {
    #[arg(long, value_enum)]
    dataset: Dataset,
    #[arg(long)]
    input: PathBuf,
    /// Latent dimension of both halves unless overridden.
    #[arg(long, default_value_t = 100)]
    k: usize,
    #[arg(long)]
    k_user: Option<usize>,
    #[arg(long)]
    k_item: Option<usize>,
    #[arg(long, default_value_t = 1000)]
    top_items: usize,
    #[arg(long, default_value_t = 0.1)]
    reg: f64,
    #[arg(long, default_value_t = 15)]
    iters: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output prefix for `<out>.features.bin` and `<out>.rewards.bin`.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value = ",")]
    delimiter: String,
    #[arg(long, value_enum, default_value_t = Header::Auto)]
    header: Header,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum EnvKind {
    Synthetic,
    Replay,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[arg(long, value_parser = parse_policy)]
    policy: PolicyKind,
    #[arg(long, value_enum, default_value_t = EnvKind::Synthetic)]
    env: EnvKind,
    /// Artifact prefix written by `ingest` (replay only).
    #[arg(long)]
    artifact: Option<PathBuf>,
    #[arg(long, default_value_t = 120)]
    n: usize,
    #[arg(long, default_value_t = 24)]
    d: usize,
    #[arg(long, default_value_t = 50)]
    arms: usize,
    #[arg(long = "T", default_value_t = 10_000)]
    horizon: u64,
    #[arg(long, default_value_t = 1)]
    reps: usize,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    #[arg(long, default_value_t = 0.01)]
    epsilon: f64,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 0.1)]
    egreedy_eps: f64,
    /// Sub-Gaussian noise scale R used by the Thompson-sampling policies.
    #[arg(long, default_value_t = 0.5)]
    noise_scale: f64,
    /// Fixed L_z; by default it is derived from the projection.
    #[arg(long)]
    l_z: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    l_psi: f64,
    /// `isotropic`, `latent` or `latent:RANK:ANCHOR`.
    #[arg(long, default_value = "isotropic", value_parser = parse_context_gen)]
    context_gen: ContextGen,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    diagnostics: bool,
    /// Log every k-th round instead of the default thinning.
    #[arg(long)]
    log_every: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
}

#[derive(Args, Debug)]
struct ScalingArgs {
    #[arg(long, default_value_t = 20)]
    d: usize,
    #[arg(long, value_delimiter = ',', default_value = "500,1000,2000,4000")]
    n_list: Vec<usize>,
    #[arg(long, default_value_t = 2000)]
    steps: usize,
    #[arg(long, default_value_t = 200)]
    warmup: usize,
    #[arg(long, default_value_t = 20)]
    arms: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct DistortionArgs {
    #[arg(long, default_value_t = 50)]
    n: usize,
    #[arg(long, value_delimiter = ',', default_value = "64,512")]
    d_list: Vec<usize>,
    #[arg(long, default_value_t = 0.5)]
    epsilon: f64,
    #[arg(long, default_value_t = 20_000)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn parse_policy(s: &str) -> Result<PolicyKind, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_context_gen(s: &str) -> Result<ContextGen, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidParameter(_) | Error::Constraint(_) => 2,
        Error::Data(_) | Error::Numeric(_) | Error::EndOfData { .. } => 3,
        Error::Io(_) => 4,
    }
}

fn ingest(a: IngestArgs) -> rpbandit::Result<()> {
    let cfg = IngestConfig {
        dataset: match a.dataset {
            Dataset::Movielens => DatasetKind::Movielens,
            Dataset::Jester => DatasetKind::Jester,
        },
        input: a.input,
        k_user: a.k_user.unwrap_or(a.k),
        k_item: a.k_item.unwrap_or(a.k),
        top_items: a.top_items,
        reg: a.reg,
        iterations: a.iters,
        seed: a.seed,
        out: a.out,
        parse: ParseOptions {
            delimiter: a.delimiter,
            header: match a.header {
                Header::Auto => HeaderMode::Auto,
                Header::Skip => HeaderMode::Skip,
                Header::None => HeaderMode::None,
            },
        },
    };
    let (_, summary) = run_ingest(&cfg)?;
    let h = &summary.header;
    eprintln!(
        "ingested {} rows ({} malformed): {} users × {} arms, n = {}, {} rated pairs ({} positive), rmse {:.4}",
        summary.rows,
        summary.malformed,
        h.num_users,
        h.num_arms,
        h.n,
        summary.reward_entries,
        summary.positive_rewards,
        summary.item_rmse
    );
    let mut summary_path = cfg.out.into_os_string();
    summary_path.push(".summary.json");
    write_json(&summary, &PathBuf::from(summary_path))
}

fn run(a: RunArgs) -> rpbandit::Result<()> {
    let env = match a.env {
        EnvKind::Synthetic => EnvSpec::Synthetic {
            n: a.n,
            arms: a.arms,
            context_gen: a.context_gen,
        },
        EnvKind::Replay => EnvSpec::Replay {
            artifact: a
                .artifact
                .ok_or_else(|| Error::InvalidParameter("--env replay needs --artifact".into()))?,
        },
    };
    let params = AlgoParams {
        d: a.d,
        lambda: a.lambda,
        delta: a.delta,
        epsilon: a.epsilon,
        kappa_sq: 1.0 / a.d.max(1) as f64,
        noise_scale: a.noise_scale,
        l_z: a.l_z.unwrap_or(1.0),
        l_psi: a.l_psi,
    };
    let cfg = ExperimentConfig {
        policy: PolicySpec {
            kind: a.policy,
            params,
            alpha: a.alpha,
            egreedy_eps: a.egreedy_eps,
            auto_l_z: a.l_z.is_none(),
        },
        env,
        horizon: a.horizon,
        repetitions: a.reps,
        base_seed: a.seed,
        diagnostics: a.diagnostics,
        checkpoints: None,
        log_every: a.log_every,
    };
    let report = run_experiment(&cfg)?;
    let format = match a.format {
        Format::Csv => ReportFormat::Csv,
        Format::Json => ReportFormat::Json,
    };
    emit_report(&report, format, &a.out)?;
    eprintln!("{}", summary_line(&report));
    Ok(())
}

fn scaling(a: ScalingArgs) -> rpbandit::Result<()> {
    let opts = ScalingOptions {
        d: a.d,
        arms: a.arms,
        steps: a.steps,
        warmup: a.warmup,
        runs: rpbandit::bench::probes::SCALING_RUNS,
        seed: a.seed,
    };
    let points = runtime_scaling_probe(&a.n_list, &opts)?;
    for p in &points {
        eprintln!("n = {:>6}: {:>12.0} ns/step (median of {})", p.n, p.median_step_ns, p.runs_step_ns.len());
    }
    write_json(&points, &a.out)
}

fn distortion(a: DistortionArgs) -> rpbandit::Result<()> {
    let points = distortion_probe(a.n, &a.d_list, a.epsilon, a.trials, a.seed)?;
    for p in &points {
        eprintln!("d = {:>5}: violations {:.5}, bound {:.5}", p.d, p.violation_fraction, p.bound);
    }
    write_json(&points, &a.out)
}

fn summary_line(r: &ExperimentReport) -> String {
    let agg = &r.aggregate;
    let mut s = format!(
        "{} × {} reps: mean cumulative reward {:.1}",
        r.config.policy.kind,
        r.repetitions.len(),
        agg.mean_cumulative_reward
    );
    if let Some(reg) = agg.mean_cumulative_regret {
        s += &format!(", mean cumulative regret {reg:.2}");
    }
    if let Some(f) = agg.e_psi_hat_frequency {
        s += &format!(", E_psi_hat frequency {f:.4}");
    }
    if let Some(t) = &r.timing {
        s += &format!(", {:.3} s policy time per rep", t.mean_total_seconds);
    }
    if r.partial {
        s += " [PARTIAL]";
    }
    s
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Ingest(a) => ingest(a),
        Command::Run(a) => run(a),
        Command::Scaling(a) => scaling(a),
        Command::Distortion(a) => distortion(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
