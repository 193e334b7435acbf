//! Phenomenological noise: independent data flips with probability `p` and
//! syndrome read-out flips with probability `q`.
//!
//! Randomness is keyed by `(seed, trial, cycle, phase)` so that a trial
//! produces the same bits no matter which worker runs it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{Chain, Torus};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    pub p: f64,
    pub q: f64,
}

impl NoiseParams {
    pub fn new(p: f64, q: f64) -> Result<Self> {
        for (key, v) in [("p", p), ("q", q)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(key, format!("{v} is not a probability")));
            }
        }
        Ok(NoiseParams { p, q })
    }
}

/// Which consumer a random stream feeds. Distinct phases never share bits.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Data = 1,
    Syndrome = 2,
    Decoder = 3,
    Probe = 4,
}

/// Per-trial source of reproducible random streams.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TrialRng {
    pub seed: u64,
    pub stream_id: u64,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl TrialRng {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        TrialRng { seed, stream_id }
    }

    /// Generator for one `(cycle, phase)` slot of this trial.
    pub fn stream(&self, cycle: u64, phase: Phase) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        let words = [
            splitmix64(self.seed),
            splitmix64(self.stream_id ^ 0xA5A5_5A5A_0F0F_F0F0),
            splitmix64(cycle),
            splitmix64(phase as u64),
        ];
        let mut h = 0u64;
        for (i, w) in words.iter().enumerate() {
            h = splitmix64(h ^ w);
            key[i * 8..i * 8 + 8].copy_from_slice(&h.to_le_bytes());
        }
        ChaCha8Rng::from_seed(key)
    }
}

/// Positions `i < n` selected independently with probability `p`.
///
/// Uses geometric gaps so the cost is proportional to the number of hits.
pub fn bernoulli_positions<R: Rng + ?Sized>(n: usize, p: f64, rng: &mut R, out: &mut Vec<usize>) {
    out.clear();
    if p <= 0.0 || n == 0 {
        return;
    }
    if p >= 1.0 {
        out.extend(0..n);
        return;
    }
    let log_q = (-p).ln_1p();
    let mut pos = 0usize;
    loop {
        let u: f64 = 1.0 - rng.random::<f64>();
        let gap = (u.ln() / log_q).floor();
        if gap >= (n - pos) as f64 {
            return;
        }
        pos += gap as usize;
        out.push(pos);
        pos += 1;
        if pos >= n {
            return;
        }
    }
}

/// Flips every bit of `chain` with probability `p`; returns the flipped cells.
pub fn flip_random<R: Rng + ?Sized>(chain: &mut Chain, p: f64, rng: &mut R) -> Vec<usize> {
    let mut hits = Vec::new();
    bernoulli_positions(chain.len(), p, rng, &mut hits);
    for &i in &hits {
        chain.flip(i);
    }
    hits
}

pub fn apply_data_noise<R: Rng + ?Sized>(error: &Chain, params: NoiseParams, rng: &mut R) -> Chain {
    let mut out = error.clone();
    flip_random(&mut out, params.p, rng);
    out
}

/// Noiseless syndrome followed by independent read-out flips with probability `q`.
pub fn measure_syndrome<R: Rng + ?Sized>(
    torus: &Torus,
    error: &Chain,
    params: NoiseParams,
    rng: &mut R,
) -> Result<Chain> {
    let mut s = torus.syndrome_of(error)?;
    flip_random(&mut s, params.q, rng);
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn torus() -> Torus {
        Torus::new(2, 8).unwrap()
    }

    #[test]
    fn extreme_rates_are_exact() {
        let t = torus();
        let e = Chain::from_indices(&t, 1, [0, 5, 9]);
        let mut rng = TrialRng::new(1, 0).stream(0, Phase::Data);
        let zero = NoiseParams::new(0.0, 0.0).unwrap();
        assert_eq!(apply_data_noise(&e, zero, &mut rng), e);
        let one = NoiseParams::new(1.0, 1.0).unwrap();
        let mut c = e.clone();
        c.complement();
        assert_eq!(apply_data_noise(&e, one, &mut rng), c);

        let s = t.syndrome_of(&e).unwrap();
        assert_eq!(measure_syndrome(&t, &e, zero, &mut rng).unwrap(), s);
        let mut sc = s.clone();
        sc.complement();
        assert_eq!(measure_syndrome(&t, &e, one, &mut rng).unwrap(), sc);
    }

    #[test]
    fn flip_fraction_concentrates() {
        let n = 100_000;
        let p = 0.1;
        let mut rng = TrialRng::new(42, 3).stream(7, Phase::Data);
        let mut out = Vec::new();
        bernoulli_positions(n, p, &mut rng, &mut out);
        let frac = out.len() as f64 / n as f64;
        let tol = 3.0 * (p * (1.0 - p) / n as f64).sqrt();
        assert!((frac - p).abs() < tol, "fraction {frac}");
        assert!(out.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn small_rate_is_unbiased() {
        let p = 0.001;
        let mut total = 0usize;
        let reps = 2000;
        for r in 0..reps {
            let mut rng = TrialRng::new(5, r).stream(0, Phase::Data);
            let mut out = Vec::new();
            bernoulli_positions(1000, p, &mut rng, &mut out);
            total += out.len();
        }
        let mean = total as f64 / reps as f64;
        // expected 1.0, sd of the mean about 0.022
        assert!((mean - 1.0).abs() < 0.1, "mean {mean}");
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let mut r1 = TrialRng::new(9, 2).stream(3, Phase::Data);
        let mut r2 = TrialRng::new(9, 2).stream(3, Phase::Data);
        let mut r3 = TrialRng::new(9, 3).stream(3, Phase::Data);
        let mut r4 = TrialRng::new(9, 2).stream(3, Phase::Syndrome);
        let x1: u64 = r1.random();
        assert_eq!(x1, r2.random::<u64>());
        assert_ne!(x1, r3.random::<u64>());
        assert_ne!(x1, r4.random::<u64>());
    }

    #[test]
    fn noisy_4d_syndrome_has_open_strings() {
        let t = Torus::new(4, 3).unwrap();
        let e = Chain::zeros(&t, 2);
        let params = NoiseParams::new(0.0, 0.05).unwrap();
        let mut rng = TrialRng::new(11, 0).stream(0, Phase::Syndrome);
        let s = measure_syndrome(&t, &e, params, &mut rng).unwrap();
        assert!(!s.is_zero());
        assert!(!t.boundary(&s).unwrap().is_zero());
    }

    #[test]
    fn rejects_bad_probabilities() {
        assert!(NoiseParams::new(1.5, 0.0).is_err());
        assert!(NoiseParams::new(0.1, -0.1).is_err());
    }
}
