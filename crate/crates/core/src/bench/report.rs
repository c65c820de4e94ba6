//! Experiment reports and their CSV/JSON serializations.
//!
//! CSV schema (version [`REPORT_SCHEMA_VERSION`]), header
//! `repetition,round,ctr,cumulative_reward,cumulative_regret`:
//! - one row per checkpoint per repetition, `repetition` being its index;
//! - an aggregate block of one `mean` row per checkpoint (averages over the
//!   repetitions that reached it);
//! - one final `final` row at the shortest completed horizon.
//!
//! `cumulative_regret` is empty for environments without a known parameter.
//! Wall-clock timings never enter the report files, which are byte-identical
//! across identical runs; they go to a `<out>.timing.json` sidecar.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::diagnostics::DiagnosticCounters;
use crate::error::{Error, Result};
use crate::ingestion::ArtifactHeader;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::invalid(format!("unknown report format '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoggedOutcome {
    pub t: u64,
    pub arm: usize,
    pub reward: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub regret: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub round: u64,
    pub ctr: f64,
    pub cumulative_reward: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub cumulative_regret: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepetitionReport {
    pub repetition: usize,
    pub seed: u64,
    pub rounds_completed: u64,
    pub partial: bool,
    pub cumulative_reward: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub cumulative_regret: Option<f64>,
    pub curve: Vec<CurvePoint>,
    pub outcomes: Vec<LoggedOutcome>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub diagnostics: Option<DiagnosticCounters>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean_cumulative_reward: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mean_cumulative_regret: Option<f64>,
    pub mean_curve: Vec<CurvePoint>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub e_psi_hat_frequency: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub e_psi_tilde_frequency: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub crate_version: String,
    pub seeds: Vec<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub artifact: Option<ArtifactHeader>,
    /// `L_z` actually used by the policy of each repetition.
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub l_z: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepetitionTiming {
    pub repetition: usize,
    pub total_ns: u64,
    pub mean_step_ns: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingSummary {
    /// Mean over repetitions of the total select+update time, in seconds.
    pub mean_total_seconds: f64,
    pub mean_step_ns: f64,
    pub repetitions: Vec<RepetitionTiming>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    pub provenance: Provenance,
    pub checkpoints: Vec<u64>,
    pub partial: bool,
    pub repetitions: Vec<RepetitionReport>,
    pub aggregate: Aggregate,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub timing: Option<TimingSummary>,
}

impl ExperimentReport {
    /// Copy without wall-clock data; this is what report files contain.
    pub fn without_timing(&self) -> Self {
        Self {
            timing: None,
            ..self.clone()
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(&self.without_timing())
            .map_err(|e| Error::data(format!("report serialization failed: {e}")))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::data(format!("report parse failed: {e}")))
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let row = |out: &mut csv::Writer<W>, rep: &str, p: &CurvePoint| -> Result<()> {
            let regret = p.cumulative_regret.map(|r| r.to_string()).unwrap_or_default();
            out.write_record([
                rep,
                &p.round.to_string(),
                &p.ctr.to_string(),
                &p.cumulative_reward.to_string(),
                &regret,
            ])
            .map_err(csv_err)
        };
        out.write_record(["repetition", "round", "ctr", "cumulative_reward", "cumulative_regret"])
            .map_err(csv_err)?;
        for rep in &self.repetitions {
            let label = rep.repetition.to_string();
            for p in &rep.curve {
                row(&mut out, &label, p)?;
            }
        }
        for p in &self.aggregate.mean_curve {
            row(&mut out, "mean", p)?;
        }
        let horizon = self.repetitions.iter().map(|r| r.rounds_completed).min().unwrap_or(0);
        let mean_reward = self.aggregate.mean_cumulative_reward;
        row(
            &mut out,
            "final",
            &CurvePoint {
                round: horizon,
                ctr: if horizon == 0 { 0.0 } else { mean_reward / horizon as f64 },
                cumulative_reward: mean_reward,
                cumulative_regret: self.aggregate.mean_cumulative_regret,
            },
        )?;
        out.flush()?;
        Ok(())
    }

    /// Expected CSV data rows: `reps × checkpoints + checkpoints + 1`.
    pub fn csv_row_count(&self) -> usize {
        self.repetitions.iter().map(|r| r.curve.len()).sum::<usize>() + self.aggregate.mean_curve.len() + 1
    }
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::data(format!("csv write failed: {other:?}")),
    }
}

/// `CTR_t = (Σ_{τ≤t} r_τ)/t` at each checkpoint.
///
/// Checkpoints beyond the rewards' length are skipped.
pub fn compute_ctr_curve(rewards: &[f64], checkpoints: &[u64]) -> Vec<(u64, f64)> {
    let mut out = Vec::with_capacity(checkpoints.len());
    let mut sum = 0.0;
    let mut seen = 0u64;
    for &c in checkpoints {
        if c == 0 || c as usize > rewards.len() {
            continue;
        }
        while seen < c {
            sum += rewards[seen as usize];
            seen += 1;
        }
        out.push((c, sum / c as f64));
    }
    out
}

pub fn timing_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".timing.json");
    PathBuf::from(s)
}

/// Write the report in `format` to `out` and, when timings are present, the
/// `<out>.timing.json` sidecar.
pub fn emit_report(report: &ExperimentReport, format: ReportFormat, out: &Path) -> Result<()> {
    if let Some(dir) = out.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    match format {
        ReportFormat::Json => fs::write(out, report.to_json()? + "\n")?,
        ReportFormat::Csv => {
            let mut w = BufWriter::new(File::create(out)?);
            report.write_csv(&mut w)?;
            w.flush()?;
        }
    }
    if let Some(t) = &report.timing {
        write_json(t, &timing_path(out))?;
    }
    Ok(())
}

/// Pretty-printed JSON with a trailing newline, creating parent directories.
pub fn write_json<T: Serialize>(value: &T, out: &Path) -> Result<()> {
    if let Some(dir) = out.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::data(format!("serialization failed: {e}")))?;
    fs::write(out, text + "\n")?;
    Ok(())
}
