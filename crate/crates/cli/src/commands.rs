use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use chrono::Utc;
use serde::Serialize;
use toricsim_core::decoders4d::partition_boxes;
use toricsim_core::experiment::{monte_carlo, run_trial_from, DecoderSpec, ExperimentConfig, MemoryTimeResult, TraceEvent};
use toricsim_core::fitting::{fit_eq1, fit_eq2, DataPoint, Eq1Fit, Eq2Fit, Eq2Options};
use toricsim_core::Torus;

use crate::config::{parse_config, Plan};
use crate::output::{
    read_results, trial_rows, version_tag, write_csv, PointNote, ResultRow, RunManifest, RESULTS_FILE, TRACE_FILE,
    TRIALS_FILE,
};

pub struct SimulateArgs<'a> {
    pub config: &'a Path,
    pub out: &'a Path,
    pub workers: usize,
    pub seed: Option<u64>,
}

fn load(config: &Path, seed: Option<u64>) -> Result<Plan> {
    let plan = parse_config(config)?;
    Ok(match seed {
        Some(s) => plan.with_seed(s),
        None => plan,
    })
}

fn point_note(cfg: &ExperimentConfig) -> PointNote {
    let boxes = match cfg.decoder {
        DecoderSpec::Hastings(h) => partition_boxes(cfg.l, h.l, [0; 4]).ok().map(|b| b.len()),
        _ => None,
    };
    PointNote {
        big_l: cfg.l,
        p: cfg.noise.p,
        q: cfg.noise.q,
        boxes,
    }
}

fn prepare_out(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).with_context(|| format!("cannot create output directory {}", out.display()))
}

/// Runs every point of the config and writes `results.csv`, `trials.csv` and the manifest.
pub fn simulate(args: SimulateArgs) -> Result<Vec<(ExperimentConfig, MemoryTimeResult)>> {
    let started_at = Utc::now();
    let plan = load(args.config, args.seed)?;
    prepare_out(args.out)?;
    let mut rows = Vec::new();
    let mut trials = Vec::new();
    let mut done = Vec::new();
    for (i, cfg) in plan.points.iter().enumerate() {
        let note = point_note(cfg);
        match note.boxes {
            Some(nb) => eprintln!("point {}: L={} p={} q={} ({nb} boxes per round)", i, cfg.l, cfg.noise.p, cfg.noise.q),
            None => eprintln!("point {}: L={} p={} q={}", i, cfg.l, cfg.noise.p, cfg.noise.q),
        }
        let res = monte_carlo(cfg, args.workers)?;
        eprintln!("  mean T = {:.4} +- {:.4} ({} censored)", res.mean_t, res.stderr_t, res.n_censored);
        rows.push(ResultRow::new(cfg, &res));
        trials.extend(trial_rows(i, cfg, &res));
        done.push((*cfg, res));
    }
    write_csv(&args.out.join(RESULTS_FILE), &rows)?;
    write_csv(&args.out.join(TRIALS_FILE), &trials)?;
    RunManifest {
        command: "simulate".into(),
        version: version_tag(),
        config_path: Some(args.config.to_path_buf()),
        config: Some(plan.file.clone()),
        seed: plan.file.seed,
        workers: args.workers,
        started_at,
        finished_at: Utc::now(),
        points: plan.points.iter().map(point_note).collect(),
        outputs: vec![RESULTS_FILE.into(), TRIALS_FILE.into()],
    }
    .write(args.out)?;
    Ok(done)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum FitModel {
    /// Pick from the decoder column: eq1 for Harrington rows, eq2 otherwise.
    Auto,
    Eq1,
    Eq2,
}

pub struct FitArgs<'a> {
    pub input: &'a Path,
    pub out: &'a Path,
    pub model: FitModel,
    pub bootstrap: usize,
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, Serialize)]
#[serde(tag = "model", rename_all = "lowercase")]
pub enum FitReport {
    Eq1(Eq1Fit),
    Eq2(Eq2Fit),
}

pub const FIT_FILE: &str = "fit.json";

pub fn fit(args: FitArgs) -> Result<FitReport> {
    let started_at = Utc::now();
    let rows = read_results(args.input)?;
    if rows.is_empty() {
        bail!("{} has no data rows", args.input.display());
    }
    let model = match args.model {
        FitModel::Auto if rows.iter().all(|r| r.decoder == "harrington") => FitModel::Eq1,
        FitModel::Auto => FitModel::Eq2,
        m => m,
    };
    let report = match model {
        FitModel::Eq1 => {
            let (u, q) = match (rows[0].u, rows[0].big_q) {
                (Some(u), Some(q)) => (u, q),
                _ => bail!("eq1 needs the U and Q columns (Harrington results)"),
            };
            if rows.iter().any(|r| r.u != Some(u) || r.big_q != Some(q)) {
                bail!("eq1 needs a single (U, Q) across all rows");
            }
            let data: Vec<DataPoint> = rows.iter().map(|r| DataPoint::new(r.big_l, r.p, r.mean_t)).collect();
            FitReport::Eq1(fit_eq1(&data, u as f64, q)?)
        }
        FitModel::Eq2 => {
            let weighted = rows.iter().all(|r| r.stderr_t > 0.0);
            let data: Vec<DataPoint> = rows
                .iter()
                .map(|r| DataPoint {
                    l: r.big_l,
                    p: r.p,
                    t: r.mean_t,
                    stderr: if weighted { r.stderr_t } else { 0.0 },
                })
                .collect();
            let opts = Eq2Options {
                bootstrap: args.bootstrap,
                seed: args.seed.unwrap_or(0),
                ..Eq2Options::default()
            };
            FitReport::Eq2(fit_eq2(&data, &opts)?)
        }
        FitModel::Auto => unreachable!(),
    };
    prepare_out(args.out)?;
    let path = args.out.join(FIT_FILE);
    std::fs::write(&path, serde_json::to_string_pretty(&report)? + "\n")
        .with_context(|| format!("cannot write {}", path.display()))?;
    RunManifest {
        command: "fit".into(),
        version: version_tag(),
        config_path: Some(args.input.to_path_buf()),
        config: None,
        seed: args.seed.unwrap_or(0),
        workers: 1,
        started_at,
        finished_at: Utc::now(),
        points: Vec::new(),
        outputs: vec![FIT_FILE.into()],
    }
    .write(args.out)?;
    Ok(report)
}

pub fn describe_fit(report: &FitReport) -> String {
    match report {
        FitReport::Eq1(f) => format!(
            "eq1: A = {:.6e}, B = {:.6e}, p_c = 1/B = {:.6e} (U = {}, Q = {}, residual {:.3e})",
            f.a, f.b, f.p_c, f.u, f.q, f.residual_norm
        ),
        FitReport::Eq2(f) => format!(
            "eq2: p_c = {:.6} +- {:.6}, nu = {:.4} +- {:.4}, T_c = {:.4}, A = {:.4}, B = {:.4} ({} bootstrap samples)",
            f.p_c, f.stderr[1], f.nu, f.stderr[2], f.t_c, f.a, f.b, f.bootstrap_samples
        ),
    }
}

pub struct TraceArgs<'a> {
    pub config: &'a Path,
    pub out: &'a Path,
    pub seed: Option<u64>,
    pub trial: u64,
    pub inject: &'a [usize],
}

/// Last line of a trace file.
#[derive(Clone, Debug, Serialize)]
struct TrialEnd<'a> {
    kind: &'static str,
    trial: u64,
    memory_time: u64,
    censored: bool,
    final_error: &'a [usize],
}

/// Runs a single trial and streams its events to `trace.jsonl`, one JSON object per line.
pub fn trace(args: TraceArgs) -> Result<PathBuf> {
    let started_at = Utc::now();
    let plan = load(args.config, args.seed)?;
    let [cfg] = plan.points.as_slice() else {
        bail!("trace needs a config with a single (L, p) point, found {}", plan.points.len());
    };
    prepare_out(args.out)?;
    let torus = Torus::new(cfg.dimension, cfg.l)?;
    let path = args.out.join(TRACE_FILE);
    let mut w = BufWriter::new(File::create(&path).with_context(|| format!("cannot create {}", path.display()))?);
    let mut io_err: Option<std::io::Error> = None;
    let mut sink = |ev: TraceEvent| {
        if io_err.is_none() {
            let line = serde_json::to_string(&ev).expect("trace events serialize");
            if let Err(e) = writeln!(w, "{line}") {
                io_err = Some(e);
            }
        }
    };
    let res = run_trial_from(cfg, &torus, args.trial, args.inject, Some(&mut sink))?;
    if let Some(e) = io_err {
        return Err(e).with_context(|| format!("cannot write {}", path.display()));
    }
    let end = TrialEnd {
        kind: "trial_end",
        trial: res.trial,
        memory_time: res.memory_time,
        censored: res.censored,
        final_error: &res.final_error,
    };
    writeln!(w, "{}", serde_json::to_string(&end)?)?;
    w.flush()?;
    RunManifest {
        command: "trace".into(),
        version: version_tag(),
        config_path: Some(args.config.to_path_buf()),
        config: Some(plan.file.clone()),
        seed: plan.file.seed,
        workers: 1,
        started_at,
        finished_at: Utc::now(),
        points: vec![point_note(cfg)],
        outputs: vec![TRACE_FILE.into()],
    }
    .write(args.out)?;
    Ok(path)
}
