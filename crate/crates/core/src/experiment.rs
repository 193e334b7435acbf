//! Monte Carlo memory-time experiments.
//!
//! A trial alternates noise, syndrome measurement and one decoder cycle until
//! the logical-failure test fires. Trials draw their randomness from
//! [`TrialRng`] streams keyed by the trial number, so results do not depend on
//! how trials are spread over worker threads.

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decoders4d::{Decoder4d, HastingsConfig, HastingsDecoder, SweepConfig};
use crate::error::{Error, Result};
use crate::failure4d::{converge_perfect, ConvergenceCaps, FailureStats, OutcomeClass};
use crate::harrington::{DecoderEvent, HarringtonConfig, HarringtonDecoder};
use crate::lattice::{Chain, Torus};
use crate::matching::logical_failure_2d;
use crate::noise::{flip_random, NoiseParams, Phase, TrialRng};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "decoder", rename_all = "lowercase")]
pub enum DecoderSpec {
    Harrington(HarringtonConfig),
    Hastings(HastingsConfig),
    Sweep(SweepConfig),
}

impl DecoderSpec {
    pub fn name(&self) -> &'static str {
        match self {
            DecoderSpec::Harrington(_) => "harrington",
            DecoderSpec::Hastings(_) => "hastings",
            DecoderSpec::Sweep(c) => match c.rule {
                crate::decoders4d::SweepRule::Toom => "toom",
                crate::decoders4d::SweepRule::Dklp => "dklp",
            },
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dimension: usize,
    pub l: usize,
    pub noise: NoiseParams,
    pub decoder: DecoderSpec,
    pub trials: u64,
    pub seed: u64,
    pub max_cycles: u64,
    /// Run the failure test every this many cycles.
    pub check_every: u64,
    pub caps: ConvergenceCaps,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::config("trials", "must be at least 1"));
        }
        if self.max_cycles == 0 {
            return Err(Error::config("max_cycles", "must be at least 1"));
        }
        if self.check_every == 0 {
            return Err(Error::config("check_every", "must be at least 1"));
        }
        NoiseParams::new(self.noise.p, self.noise.q)?;
        let torus = Torus::new(self.dimension, self.l)?;
        self.build_decoder(&torus).map(|_| ())
    }

    fn build_decoder(&self, torus: &Torus) -> Result<LiveDecoder> {
        match (self.dimension, self.decoder) {
            (2, DecoderSpec::Harrington(c)) => Ok(LiveDecoder::D2(HarringtonDecoder::new(torus, c, self.noise.q)?)),
            (4, DecoderSpec::Hastings(c)) => Ok(LiveDecoder::D4(Decoder4d::Hastings(HastingsDecoder::new(torus, c)?))),
            (4, DecoderSpec::Sweep(c)) => {
                c.validate()?;
                Ok(LiveDecoder::D4(Decoder4d::Sweep(c)))
            }
            (d, spec) => Err(Error::config(
                "decoder",
                format!("{} does not run on the {d}D code", spec.name()),
            )),
        }
    }
}

enum LiveDecoder {
    D2(HarringtonDecoder),
    D4(Decoder4d),
}

/// One entry of a trial trace. Replaying the noise, flip and applied
/// correction cells in order reproduces the error chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TraceEvent {
    NoiseApplied { cycle: u64, cells: Vec<usize> },
    SyndromeMeasured { cycle: u64, defects: Vec<usize> },
    Flip { cycle: u64, step: Option<u64>, cells: Vec<usize> },
    CorrectionScheduled { cycle: u64, step: u64, level: usize, apply_at: u64, cells: Vec<usize> },
    CorrectionApplied { cycle: u64, step: u64, level: usize, cells: Vec<usize> },
    FailureTest { cycle: u64, failed: bool, outcome: Option<OutcomeClass> },
}

impl TraceEvent {
    fn from_decoder(cycle: u64, ev: DecoderEvent) -> Self {
        match ev {
            DecoderEvent::Flip { step, edges } => TraceEvent::Flip { cycle, step: Some(step), cells: edges },
            DecoderEvent::CorrectionScheduled { step, level, apply_at, edges } => TraceEvent::CorrectionScheduled {
                cycle,
                step,
                level,
                apply_at,
                cells: edges,
            },
            DecoderEvent::CorrectionApplied { step, level, edges } => TraceEvent::CorrectionApplied {
                cycle,
                step,
                level,
                cells: edges,
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: u64,
    /// First failing cycle (1-based), or `max_cycles` when censored.
    pub memory_time: u64,
    pub censored: bool,
    /// Class of the failing 4D probe.
    pub outcome: Option<OutcomeClass>,
    /// Every 4D probe outcome seen during the trial.
    pub probes: FailureStats,
    /// Error chain at the end of the trial.
    #[serde(skip)]
    pub final_error: Vec<usize>,
}

/// Runs one trial. `trace` receives every event in order when given.
pub fn run_trial(
    cfg: &ExperimentConfig,
    torus: &Torus,
    trial: u64,
    trace: Option<&mut dyn FnMut(TraceEvent)>,
) -> Result<TrialResult> {
    run_trial_from(cfg, torus, trial, &[], trace)
}

/// Like [`run_trial`], but the error chain starts with the qubits in
/// `injected` flipped. The injection is traced as noise at cycle 0.
pub fn run_trial_from(
    cfg: &ExperimentConfig,
    torus: &Torus,
    trial: u64,
    injected: &[usize],
    mut trace: Option<&mut dyn FnMut(TraceEvent)>,
) -> Result<TrialResult> {
    let mut decoder = cfg.build_decoder(torus)?;
    let probe_template = match &decoder {
        LiveDecoder::D4(d) => Some(d.clone()),
        LiveDecoder::D2(_) => None,
    };
    let trng = TrialRng::new(cfg.seed, trial);
    let mut error = Chain::zeros(torus, torus.qubit_dim());
    let n_qubits = torus.cell_count(torus.qubit_dim());
    if let Some(&bad) = injected.iter().find(|&&i| i >= n_qubits) {
        return Err(Error::contract(format!("injected qubit {bad} is out of range (lattice has {n_qubits})")));
    }
    for &i in injected {
        error.flip(i);
    }
    if !injected.is_empty() {
        if let Some(tr) = trace.as_deref_mut() {
            tr(TraceEvent::NoiseApplied { cycle: 0, cells: injected.to_vec() });
        }
    }
    let mut probes = FailureStats::default();
    let mut events = Vec::new();

    for cycle in 1..=cfg.max_cycles {
        let noise = flip_random(&mut error, cfg.noise.p, &mut trng.stream(cycle, Phase::Data));
        let mut syndrome = torus.syndrome_of(&error)?;
        flip_random(&mut syndrome, cfg.noise.q, &mut trng.stream(cycle, Phase::Syndrome));
        if let Some(tr) = trace.as_deref_mut() {
            tr(TraceEvent::NoiseApplied { cycle, cells: noise });
            tr(TraceEvent::SyndromeMeasured { cycle, defects: syndrome.ones() });
        }

        match &mut decoder {
            LiveDecoder::D2(h) => {
                events.clear();
                let sink = trace.is_some().then_some(&mut events);
                h.run_cycle_traced(&mut error, &syndrome, sink)?;
                if let Some(tr) = trace.as_deref_mut() {
                    for ev in events.drain(..) {
                        tr(TraceEvent::from_decoder(cycle, ev));
                    }
                }
            }
            LiveDecoder::D4(d) => {
                let before = trace.is_some().then(|| error.clone());
                d.cycle(torus, &mut error, &mut syndrome, &mut trng.stream(cycle, Phase::Decoder))?;
                if let (Some(tr), Some(before)) = (trace.as_deref_mut(), before) {
                    let cells = before.xor(&error)?.ones();
                    if !cells.is_empty() {
                        tr(TraceEvent::Flip { cycle, step: None, cells });
                    }
                }
            }
        }

        if cycle % cfg.check_every != 0 {
            continue;
        }
        let (failed, outcome) = match &probe_template {
            None => (logical_failure_2d(torus, &error)?, None),
            Some(template) => {
                let mut probe = template.clone();
                let mut rng: ChaCha8Rng = trng.stream(cycle, Phase::Probe);
                let out = converge_perfect(torus, &mut probe, &error, cfg.caps, &mut rng)?;
                probes.record(&out);
                (out.class != OutcomeClass::Restored, Some(out.class))
            }
        };
        if let Some(tr) = trace.as_deref_mut() {
            tr(TraceEvent::FailureTest { cycle, failed, outcome });
        }
        if failed {
            return Ok(TrialResult {
                trial,
                memory_time: cycle,
                censored: false,
                outcome,
                probes,
                final_error: error.ones(),
            });
        }
    }
    Ok(TrialResult {
        trial,
        memory_time: cfg.max_cycles,
        censored: true,
        outcome: None,
        probes,
        final_error: error.ones(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemoryTimeResult {
    pub mean_t: f64,
    pub stderr_t: f64,
    pub n_censored: u64,
    /// Failing 4D probes by class, plus all restored probes.
    pub failures: FailureStats,
    pub trials: Vec<TrialResult>,
}

impl MemoryTimeResult {
    pub fn from_trials(trials: Vec<TrialResult>) -> Self {
        let n = trials.len() as f64;
        let ts: Vec<f64> = trials.iter().map(|t| t.memory_time as f64).collect();
        let mean_t = ts.iter().sum::<f64>() / n;
        let stderr_t = if trials.len() > 1 {
            let var = ts.iter().map(|t| (t - mean_t).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        } else {
            0.0
        };
        let mut failures = FailureStats::default();
        for t in &trials {
            failures.n_restored += t.probes.n_restored;
            match t.outcome {
                Some(OutcomeClass::LogicalFailure) => failures.n_log += 1,
                Some(OutcomeClass::ResidualStuck) => {
                    failures.n_res += 1;
                    failures.n_capped += t.probes.n_capped;
                }
                _ => {}
            }
        }
        MemoryTimeResult {
            mean_t,
            stderr_t,
            n_censored: trials.iter().filter(|t| t.censored).count() as u64,
            failures,
            trials,
        }
    }
}

/// Runs all trials of `cfg` on `workers` threads.
pub fn monte_carlo(cfg: &ExperimentConfig, workers: usize) -> Result<MemoryTimeResult> {
    cfg.validate()?;
    let torus = Torus::new(cfg.dimension, cfg.l)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::contract(format!("cannot start worker pool: {e}")))?;
    let trials: Vec<TrialResult> = pool.install(|| {
        (0..cfg.trials)
            .into_par_iter()
            .map(|i| run_trial(cfg, &torus, i, None))
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(MemoryTimeResult::from_trials(trials))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decoders4d::SweepRule;

    fn cfg2d(p: f64, q: f64) -> ExperimentConfig {
        ExperimentConfig {
            dimension: 2,
            l: 3,
            noise: NoiseParams::new(p, q).unwrap(),
            decoder: DecoderSpec::Harrington(HarringtonConfig::default()),
            trials: 8,
            seed: 1,
            max_cycles: 200,
            check_every: 1,
            caps: ConvergenceCaps::default(),
        }
    }

    #[test]
    fn noiseless_trials_are_censored() {
        let r = monte_carlo(&cfg2d(0.0, 0.0), 1).unwrap();
        assert_eq!(r.n_censored, 8);
        assert_eq!(r.mean_t, 200.0);
        assert_eq!(r.stderr_t, 0.0);
    }

    #[test]
    fn saturating_noise_fails_fast() {
        let r = monte_carlo(&cfg2d(1.0, 0.0), 1).unwrap();
        assert_eq!(r.n_censored, 0);
        assert!(r.mean_t <= 3.0, "{}", r.mean_t);
    }

    #[test]
    fn single_trial_has_zero_stderr() {
        let mut c = cfg2d(0.05, 0.05);
        c.trials = 1;
        let r = monte_carlo(&c, 1).unwrap();
        assert_eq!(r.mean_t, r.trials[0].memory_time as f64);
        assert_eq!(r.stderr_t, 0.0);
    }

    #[test]
    fn worker_count_does_not_matter() {
        let c = ExperimentConfig { trials: 12, ..cfg2d(0.03, 0.03) };
        let a = monte_carlo(&c, 1).unwrap();
        let b = monte_carlo(&c, 3).unwrap();
        assert_eq!(a.trials, b.trials);
        let d4 = ExperimentConfig {
            dimension: 4,
            l: 4,
            noise: NoiseParams::new(0.02, 0.02).unwrap(),
            decoder: DecoderSpec::Sweep(SweepConfig { rule: SweepRule::Dklp, repeats_per_plane: 1 }),
            trials: 6,
            max_cycles: 50,
            ..c
        };
        assert_eq!(monte_carlo(&d4, 1).unwrap().trials, monte_carlo(&d4, 2).unwrap().trials);
    }

    #[test]
    fn trace_replay_reproduces_the_error() {
        for c in [
            cfg2d(0.05, 0.02),
            ExperimentConfig {
                dimension: 4,
                l: 4,
                noise: NoiseParams::new(0.02, 0.0).unwrap(),
                decoder: DecoderSpec::Hastings(HastingsConfig { l: 2, m: 2 }),
                max_cycles: 30,
                ..cfg2d(0.0, 0.0)
            },
        ] {
            let torus = Torus::new(c.dimension, c.l).unwrap();
            let mut replay = Chain::zeros(&torus, torus.qubit_dim());
            let mut sink = |ev: TraceEvent| match ev {
                TraceEvent::NoiseApplied { cells, .. }
                | TraceEvent::Flip { cells, .. }
                | TraceEvent::CorrectionApplied { cells, .. } => {
                    for x in cells {
                        replay.flip(x);
                    }
                }
                _ => {}
            };
            let r = run_trial(&c, &torus, 0, Some(&mut sink)).unwrap();
            assert_eq!(replay.ones(), r.final_error);
            let untraced = run_trial(&c, &torus, 0, None).unwrap();
            assert_eq!(untraced, r);
        }
    }

    #[test]
    fn raising_the_cap_keeps_uncensored_times() {
        let lo = ExperimentConfig { max_cycles: 20, trials: 10, ..cfg2d(0.02, 0.02) };
        let hi = ExperimentConfig { max_cycles: 80, ..lo };
        let a = monte_carlo(&lo, 1).unwrap();
        let b = monte_carlo(&hi, 1).unwrap();
        for (x, y) in a.trials.iter().zip(&b.trials) {
            if !x.censored {
                assert_eq!(x.memory_time, y.memory_time);
            }
        }
    }

    #[test]
    fn injected_single_error_is_flipped_once() {
        let mut cfg = cfg2d(0.0, 0.0);
        cfg.max_cycles = 5;
        let torus = Torus::new(2, 3).unwrap();
        let mut events = Vec::new();
        let mut sink = |e: TraceEvent| events.push(e);
        let res = run_trial_from(&cfg, &torus, 0, &[4], Some(&mut sink)).unwrap();
        assert!(res.censored);
        assert!(res.final_error.is_empty());
        let flips: Vec<_> = events.iter().filter(|e| matches!(e, TraceEvent::Flip { .. })).collect();
        assert_eq!(flips.len(), 1);
        assert!(events.iter().all(|e| !matches!(e, TraceEvent::FailureTest { failed: true, .. })));
        assert!(run_trial_from(&cfg, &torus, 0, &[18], None).is_err());
    }

    #[test]
    fn wrong_decoder_for_dimension_is_rejected() {
        let c = ExperimentConfig {
            dimension: 4,
            l: 9,
            ..cfg2d(0.01, 0.01)
        };
        assert!(matches!(c.validate(), Err(Error::Config { ref key, .. }) if key == "decoder"));
        let bad_l = ExperimentConfig { l: 10, ..cfg2d(0.01, 0.01) };
        assert!(matches!(bad_l.validate(), Err(Error::Config { ref key, .. }) if key == "L"));
    }
}
