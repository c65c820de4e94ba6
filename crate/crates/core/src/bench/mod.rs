//! Experiment driver, diagnostics, probes and reports.

pub mod config;
pub mod diagnostics;
pub mod probes;
pub mod report;
pub mod runner;

pub use config::{log_spaced_checkpoints, EnvSpec, ExperimentConfig, PolicySpec};
pub use diagnostics::{diagnose_round, DiagnosticCounters, DiagnosticRecord};
pub use probes::{distortion_probe, runtime_scaling_probe, DistortionPoint, ScalingOptions, ScalingPoint};
pub use report::{compute_ctr_curve, emit_report, timing_path, write_json, ExperimentReport, ReportFormat, TimingSummary};
pub use runner::{build_policy, run_experiment, run_repetition, BuiltPolicy, RunOptions};
