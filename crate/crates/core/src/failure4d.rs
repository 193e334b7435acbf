//! Logical-failure test for the 4D code: decode with perfect syndromes until
//! the syndrome vanishes, then read off the homology class.

use std::collections::HashSet;
use std::hash::{DefaultHasher, Hash, Hasher};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::decoders4d::Decoder4d;
use crate::error::{Error, Result};
use crate::lattice::{Chain, Torus};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutcomeClass {
    Restored,
    LogicalFailure,
    ResidualStuck,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvergenceOutcome {
    pub class: OutcomeClass,
    pub iterations_used: usize,
    /// Stopped by the iteration cap rather than by a stuck-state criterion.
    pub hit_cap: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvergenceCaps {
    pub max_iterations: usize,
    /// Iterations without a new minimum syndrome weight before a stochastic run counts as stuck.
    pub stagnation_window: usize,
}

impl Default for ConvergenceCaps {
    fn default() -> Self {
        ConvergenceCaps {
            max_iterations: 10_000,
            stagnation_window: 50,
        }
    }
}

fn state_hash(c: &Chain) -> u64 {
    let mut h = DefaultHasher::new();
    c.words().hash(&mut h);
    h.finish()
}

/// Runs `decoder` under noiseless measurement on a copy of `error`.
pub fn converge_perfect<R: Rng + ?Sized>(
    torus: &Torus,
    decoder: &mut Decoder4d,
    error: &Chain,
    caps: ConvergenceCaps,
    rng: &mut R,
) -> Result<ConvergenceOutcome> {
    if torus.dimension() != 4 || error.cell_dim() != 2 {
        return Err(Error::contract("converge_perfect expects a 4D face chain"));
    }
    let mut e = error.clone();
    let deterministic = decoder.is_deterministic();
    let mut seen = HashSet::new();
    let mut best = usize::MAX;
    let mut since_best = 0;
    let mut it = 0;
    loop {
        let mut s = torus.syndrome_of(&e)?;
        if s.is_zero() {
            let class = if torus.homology_class(&e)?.is_trivial() {
                OutcomeClass::Restored
            } else {
                OutcomeClass::LogicalFailure
            };
            return Ok(ConvergenceOutcome { class, iterations_used: it, hit_cap: false });
        }
        let stuck = |hit_cap| ConvergenceOutcome {
            class: OutcomeClass::ResidualStuck,
            iterations_used: it,
            hit_cap,
        };
        if it >= caps.max_iterations {
            return Ok(stuck(true));
        }
        if deterministic {
            if !seen.insert(state_hash(&e)) {
                return Ok(stuck(false));
            }
        } else {
            let w = s.count_ones();
            if w < best {
                best = w;
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= caps.stagnation_window {
                    return Ok(stuck(false));
                }
            }
        }
        decoder.cycle(torus, &mut e, &mut s, rng)?;
        it += 1;
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailureStats {
    pub n_res: u64,
    pub n_log: u64,
    pub n_restored: u64,
    /// Stuck outcomes that came from the iteration cap.
    pub n_capped: u64,
}

impl FailureStats {
    pub fn record(&mut self, outcome: &ConvergenceOutcome) {
        match outcome.class {
            OutcomeClass::Restored => self.n_restored += 1,
            OutcomeClass::LogicalFailure => self.n_log += 1,
            OutcomeClass::ResidualStuck => {
                self.n_res += 1;
                self.n_capped += u64::from(outcome.hit_cap);
            }
        }
    }

    pub fn merge(&mut self, other: &FailureStats) {
        self.n_res += other.n_res;
        self.n_log += other.n_log;
        self.n_restored += other.n_restored;
        self.n_capped += other.n_capped;
    }

    /// `N_res / N_log`, defined once a logical failure has been seen.
    pub fn ratio(&self) -> Option<f64> {
        (self.n_log > 0).then(|| self.n_res as f64 / self.n_log as f64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decoders4d::{HastingsConfig, HastingsDecoder, SweepConfig, SweepRule};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn plane(t: &Torus, width: usize) -> Chain {
        let o = t.orientation_of_mask(2, 0b11).unwrap();
        let l = t.l();
        Chain::from_indices(t, 2, (0..width).flat_map(|x| (0..l).map(move |y| t.cell_at(2, t.vertex_index(&[x, y, 0, 0]), o))))
    }

    fn dklp() -> Decoder4d {
        Decoder4d::Sweep(SweepConfig { rule: SweepRule::Dklp, repeats_per_plane: 1 })
    }

    #[test]
    fn zero_error_is_restored_at_once() {
        let t = Torus::new(4, 3).unwrap();
        let out = converge_perfect(&t, &mut dklp(), &Chain::zeros(&t, 2), ConvergenceCaps::default(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(out, ConvergenceOutcome { class: OutcomeClass::Restored, iterations_used: 0, hit_cap: false });
    }

    #[test]
    fn full_plane_is_a_logical_failure() {
        let t = Torus::new(4, 4).unwrap();
        let e = plane(&t, 4);
        let out = converge_perfect(&t, &mut dklp(), &e, ConvergenceCaps::default(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(out.class, OutcomeClass::LogicalFailure);
        assert_eq!(out.iterations_used, 0);
    }

    #[test]
    fn strip_gets_stuck() {
        let t = Torus::new(4, 5).unwrap();
        let e = plane(&t, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let out = converge_perfect(&t, &mut dklp(), &e, ConvergenceCaps::default(), &mut rng).unwrap();
        assert_eq!(out.class, OutcomeClass::ResidualStuck);
        assert!(!out.hit_cap);
        assert_eq!(out.iterations_used, 50);

        let mut toom = Decoder4d::Sweep(SweepConfig { rule: SweepRule::Toom, repeats_per_plane: 1 });
        let out = converge_perfect(&t, &mut toom, &e, ConvergenceCaps::default(), &mut rng).unwrap();
        assert_eq!(out.class, OutcomeClass::ResidualStuck);
        assert_eq!(out.iterations_used, 1);

        let mut h = Decoder4d::Hastings(HastingsDecoder::new(&t, HastingsConfig { l: 2, m: 5 }).unwrap());
        let out = converge_perfect(&t, &mut h, &plane(&t, 2), ConvergenceCaps::default(), &mut rng).unwrap();
        assert_eq!(out.class, OutcomeClass::ResidualStuck);
    }

    #[test]
    fn single_face_is_restored() {
        let t = Torus::new(4, 4).unwrap();
        let e = Chain::from_indices(&t, 2, [17]);
        for mut dec in [dklp(), Decoder4d::Sweep(SweepConfig { rule: SweepRule::Toom, repeats_per_plane: 1 })] {
            let out = converge_perfect(&t, &mut dec, &e, ConvergenceCaps::default(), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
            assert_eq!(out.class, OutcomeClass::Restored);
            assert_eq!(out.iterations_used, 1);
        }
    }

    #[test]
    fn stats_count_classes() {
        let mut st = FailureStats::default();
        assert_eq!(st.ratio(), None);
        let stuck = ConvergenceOutcome { class: OutcomeClass::ResidualStuck, iterations_used: 9, hit_cap: false };
        for _ in 0..3 {
            st.record(&stuck);
        }
        st.record(&ConvergenceOutcome { class: OutcomeClass::LogicalFailure, iterations_used: 1, hit_cap: false });
        st.record(&ConvergenceOutcome { class: OutcomeClass::Restored, iterations_used: 1, hit_cap: false });
        assert_eq!((st.n_res, st.n_log, st.n_restored), (3, 1, 1));
        assert_eq!(st.ratio(), Some(3.0));
    }
}
