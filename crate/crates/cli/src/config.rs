//! Flat TOML run configuration.
//!
//! ```toml
//! code = "4d"
//! decoder = "hastings"
//! L = [8, 9]
//! p = [0.012, 0.022]
//! q = "p"
//! l = 3
//! m = 5
//! trials = 300
//! seed = 7
//! ```
//!
//! `L` and `p` accept a single value or a list; the run covers every
//! `(L, p)` pair, `L` varying slowest.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use toricsim_core::decoders4d::{HastingsConfig, SweepConfig, SweepRule};
use toricsim_core::experiment::{DecoderSpec, ExperimentConfig};
use toricsim_core::failure4d::ConvergenceCaps;
use toricsim_core::harrington::{AggregationStrategy, HarringtonConfig, Tau};
use toricsim_core::NoiseParams;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(x) => vec![x.clone()],
            OneOrMany::Many(xs) => xs.clone(),
        }
    }
}

/// Either a number or a keyword such as `"p"` or `"inf"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum NumOrWord {
    Num(f64),
    Word(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Code {
    #[serde(rename = "2d")]
    D2,
    #[serde(rename = "4d")]
    D4,
}

impl Code {
    pub fn dimension(self) -> usize {
        match self {
            Code::D2 => 2,
            Code::D4 => 4,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub code: Code,
    #[serde(default)]
    pub decoder: Option<String>,
    #[serde(rename = "L")]
    pub big_l: OneOrMany<usize>,
    pub p: OneOrMany<f64>,
    #[serde(default)]
    pub q: Option<NumOrWord>,

    #[serde(rename = "Q", default)]
    pub big_q: Option<usize>,
    #[serde(rename = "U", default)]
    pub u: Option<usize>,
    #[serde(default)]
    pub f_c: Option<f64>,
    #[serde(default)]
    pub f_n: Option<f64>,
    #[serde(default)]
    pub strategy: Option<AggregationStrategy>,
    #[serde(default)]
    pub b: Option<usize>,
    #[serde(default)]
    pub tau: Option<NumOrWord>,

    #[serde(default)]
    pub l: Option<usize>,
    #[serde(default)]
    pub m: Option<usize>,
    #[serde(default)]
    pub repeats_per_plane: Option<usize>,

    pub trials: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub max_cycles: Option<u64>,
    #[serde(default)]
    pub check_every: Option<u64>,
    #[serde(default)]
    pub max_iterations: Option<usize>,
    #[serde(default)]
    pub stagnation_window: Option<usize>,
}

pub const DEFAULT_MAX_CYCLES: u64 = 100_000;

/// A parsed file: the raw snapshot plus one experiment per `(L, p)` point.
#[derive(Clone, Debug)]
pub struct Plan {
    pub file: FileConfig,
    pub points: Vec<ExperimentConfig>,
}

impl Plan {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.file.seed = seed;
        for pt in &mut self.points {
            pt.seed = seed;
        }
        self
    }
}

pub fn parse_config(path: &Path) -> Result<Plan> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
    parse_config_str(&text).with_context(|| format!("in config {}", path.display()))
}

pub fn parse_config_str(text: &str) -> Result<Plan> {
    let file: FileConfig = toml::from_str(text)?;
    let points = build_points(&file)?;
    Ok(Plan { file, points })
}

fn reject_keys(decoder: &str, keys: &[(&str, bool)]) -> Result<()> {
    for (key, present) in keys {
        if *present {
            bail!("invalid value for `{key}`: does not apply to the {decoder} decoder");
        }
    }
    Ok(())
}

fn decoder_spec(file: &FileConfig) -> Result<DecoderSpec> {
    let name = match (&file.decoder, file.code) {
        (Some(d), _) => d.as_str(),
        (None, Code::D2) => "harrington",
        (None, Code::D4) => bail!("invalid value for `decoder`: required for the 4d code (hastings, toom or dklp)"),
    };
    let harrington_keys = [
        ("Q", file.big_q.is_some()),
        ("U", file.u.is_some()),
        ("f_c", file.f_c.is_some()),
        ("f_n", file.f_n.is_some()),
        ("strategy", file.strategy.is_some()),
        ("b", file.b.is_some()),
        ("tau", file.tau.is_some()),
    ];
    let hastings_keys = [("l", file.l.is_some()), ("m", file.m.is_some())];
    let sweep_keys = [("repeats_per_plane", file.repeats_per_plane.is_some())];
    match name {
        "harrington" => {
            reject_keys(name, &hastings_keys)?;
            reject_keys(name, &sweep_keys)?;
            let d = HarringtonConfig::default();
            let tau = match &file.tau {
                None => d.tau,
                Some(NumOrWord::Word(w)) if w == "inf" => Tau::Infinite,
                Some(NumOrWord::Num(x)) if *x >= 1.0 && x.fract() == 0.0 && *x <= u32::MAX as f64 => {
                    Tau::Steps(*x as u32)
                }
                Some(other) => bail!("invalid value for `tau`: expected a positive integer or \"inf\", got {other:?}"),
            };
            Ok(DecoderSpec::Harrington(HarringtonConfig {
                q: file.big_q.unwrap_or(d.q),
                u: file.u.unwrap_or(d.u),
                f_c: file.f_c.unwrap_or(d.f_c),
                f_n: file.f_n.unwrap_or(d.f_n),
                strategy: file.strategy.unwrap_or(d.strategy),
                b: file.b.or(d.b),
                tau,
            }))
        }
        "hastings" => {
            reject_keys(name, &harrington_keys)?;
            reject_keys(name, &sweep_keys)?;
            let d = HastingsConfig::default();
            Ok(DecoderSpec::Hastings(HastingsConfig {
                l: file.l.unwrap_or(d.l),
                m: file.m.unwrap_or(d.m),
            }))
        }
        "toom" | "dklp" => {
            reject_keys(name, &harrington_keys)?;
            reject_keys(name, &hastings_keys)?;
            let rule = if name == "toom" { SweepRule::Toom } else { SweepRule::Dklp };
            Ok(DecoderSpec::Sweep(SweepConfig {
                rule,
                repeats_per_plane: file.repeats_per_plane.unwrap_or(1),
            }))
        }
        other => bail!("invalid value for `decoder`: unknown decoder {other:?} (harrington, hastings, toom, dklp)"),
    }
}

fn resolve_q(file: &FileConfig, p: f64) -> Result<f64> {
    match &file.q {
        None => Ok(p),
        Some(NumOrWord::Word(w)) if w == "p" => Ok(p),
        Some(NumOrWord::Num(x)) => Ok(*x),
        Some(other) => bail!("invalid value for `q`: expected a probability or \"p\", got {other:?}"),
    }
}

fn build_points(file: &FileConfig) -> Result<Vec<ExperimentConfig>> {
    let decoder = decoder_spec(file)?;
    let ls = file.big_l.to_vec();
    let ps = file.p.to_vec();
    if ls.is_empty() {
        bail!("invalid value for `L`: the list is empty");
    }
    if ps.is_empty() {
        bail!("invalid value for `p`: the list is empty");
    }
    let defaults = ConvergenceCaps::default();
    let caps = ConvergenceCaps {
        max_iterations: file.max_iterations.unwrap_or(defaults.max_iterations),
        stagnation_window: file.stagnation_window.unwrap_or(defaults.stagnation_window),
    };
    if caps.max_iterations == 0 {
        bail!("invalid value for `max_iterations`: must be at least 1");
    }
    if caps.stagnation_window == 0 {
        bail!("invalid value for `stagnation_window`: must be at least 1");
    }
    let mut points = Vec::with_capacity(ls.len() * ps.len());
    for &l in &ls {
        for &p in &ps {
            let q = resolve_q(file, p)?;
            let cfg = ExperimentConfig {
                dimension: file.code.dimension(),
                l,
                noise: NoiseParams { p, q },
                decoder,
                trials: file.trials,
                seed: file.seed,
                max_cycles: file.max_cycles.unwrap_or(DEFAULT_MAX_CYCLES),
                check_every: file.check_every.unwrap_or(1),
                caps,
            };
            cfg.validate().with_context(|| format!("at L={l}, p={p}"))?;
            points.push(cfg);
        }
    }
    Ok(points)
}
