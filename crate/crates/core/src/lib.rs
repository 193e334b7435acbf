//! Decoder laboratory for the 2D and 4D toric codes.
//!
//! The crate covers lattice geometry and homology, phenomenological noise,
//! exact matching, Harrington's hierarchical cellular automaton (2D), the
//! Hastings box decoder together with the Toom and DKLP sweep rules (4D),
//! the perfect-syndrome failure probe, the Monte Carlo harness and the two
//! threshold fits.

pub mod decoders4d;
pub mod error;
pub mod experiment;
pub mod failure4d;
pub mod fitting;
pub mod harrington;
pub mod lattice;
pub mod matching;
pub mod noise;

pub use error::{Error, Result};
pub use lattice::{CellIndex, Chain, HomologyClass, Torus, TorusDims};
pub use noise::{NoiseParams, TrialRng};
