//! Results CSV, per-trial CSV and the run manifest.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use toricsim_core::experiment::{DecoderSpec, ExperimentConfig, MemoryTimeResult};
use toricsim_core::failure4d::OutcomeClass;
use toricsim_core::harrington::{AggregationStrategy, Tau};

use crate::config::FileConfig;

pub const RESULTS_FILE: &str = "results.csv";
pub const TRIALS_FILE: &str = "trials.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const TRACE_FILE: &str = "trace.jsonl";

/// One row per `(L, p)` point. Decoder parameters that do not apply are left empty.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub code: String,
    pub decoder: String,
    #[serde(rename = "L")]
    pub big_l: usize,
    pub p: f64,
    pub q: f64,
    #[serde(rename = "Q")]
    pub big_q: Option<usize>,
    #[serde(rename = "U")]
    pub u: Option<usize>,
    pub f_c: Option<f64>,
    pub f_n: Option<f64>,
    pub strategy: Option<String>,
    pub b: Option<usize>,
    pub tau: Option<String>,
    pub l: Option<usize>,
    pub m: Option<usize>,
    pub repeats_per_plane: Option<usize>,
    pub trials: u64,
    #[serde(rename = "mean_T")]
    pub mean_t: f64,
    #[serde(rename = "stderr_T")]
    pub stderr_t: f64,
    pub n_censored: u64,
    pub n_res: u64,
    pub n_log: u64,
    pub n_restored: u64,
}

impl ResultRow {
    pub fn new(cfg: &ExperimentConfig, res: &MemoryTimeResult) -> Self {
        let mut row = ResultRow {
            code: format!("{}d", cfg.dimension),
            decoder: cfg.decoder.name().to_string(),
            big_l: cfg.l,
            p: cfg.noise.p,
            q: cfg.noise.q,
            big_q: None,
            u: None,
            f_c: None,
            f_n: None,
            strategy: None,
            b: None,
            tau: None,
            l: None,
            m: None,
            repeats_per_plane: None,
            trials: cfg.trials,
            mean_t: res.mean_t,
            stderr_t: res.stderr_t,
            n_censored: res.n_censored,
            n_res: res.failures.n_res,
            n_log: res.failures.n_log,
            n_restored: res.failures.n_restored,
        };
        match cfg.decoder {
            DecoderSpec::Harrington(h) => {
                row.big_q = Some(h.q);
                row.u = Some(h.u);
                row.f_c = Some(h.f_c);
                row.f_n = Some(h.f_n);
                row.strategy = Some(
                    match h.strategy {
                        AggregationStrategy::NonDivision => "non-division",
                        AggregationStrategy::Division => "division",
                    }
                    .to_string(),
                );
                row.b = h.b;
                row.tau = Some(match h.tau {
                    Tau::Steps(n) => n.to_string(),
                    Tau::Infinite => "inf".to_string(),
                });
            }
            DecoderSpec::Hastings(h) => {
                row.l = Some(h.l);
                row.m = Some(h.m);
            }
            DecoderSpec::Sweep(s) => row.repeats_per_plane = Some(s.repeats_per_plane),
        }
        row
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialRow {
    pub point: usize,
    #[serde(rename = "L")]
    pub big_l: usize,
    pub trial: u64,
    pub memory_time: u64,
    pub censored: bool,
    pub outcome: String,
}

pub fn trial_rows(point: usize, cfg: &ExperimentConfig, res: &MemoryTimeResult) -> Vec<TrialRow> {
    res.trials
        .iter()
        .map(|t| TrialRow {
            point,
            big_l: cfg.l,
            trial: t.trial,
            memory_time: t.memory_time,
            censored: t.censored,
            outcome: match (t.censored, t.outcome) {
                (true, _) => "censored",
                (false, Some(OutcomeClass::ResidualStuck)) => "residual_stuck",
                (false, Some(OutcomeClass::LogicalFailure)) => "logical_failure",
                (false, Some(OutcomeClass::Restored)) => "restored",
                (false, None) => "logical_failure",
            }
            .to_string(),
        })
        .collect()
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot create {}", path.display()))?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("cannot open {}", path.display()))?;
    let rows = r.deserialize().collect::<std::result::Result<Vec<ResultRow>, _>>();
    rows.with_context(|| format!("malformed results file {}", path.display()))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PointNote {
    #[serde(rename = "L")]
    pub big_l: usize,
    pub p: f64,
    pub q: f64,
    /// Hastings boxes per round.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub boxes: Option<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config_path: Option<PathBuf>,
    pub config: Option<FileConfig>,
    pub seed: u64,
    pub workers: usize,
    pub started_at: DateTime<Utc>,
    pub finished_at: DateTime<Utc>,
    pub points: Vec<PointNote>,
    /// Files written by this run, relative to the output directory.
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(&path, text + "\n").with_context(|| format!("cannot write {}", path.display()))?;
        Ok(path)
    }
}

pub fn version_tag() -> String {
    format!("toricsim {}", env!("CARGO_PKG_VERSION"))
}
