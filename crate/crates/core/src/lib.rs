//! Soft-decision renormalization-group decoding for the toric code.
//!
//! The crate is organised bottom-up: [`pauli`] and [`gf2`] provide exact
//! binary-symplectic arithmetic, [`group_prob`] holds probability tables over
//! Pauli subgroups, [`lattice2d`] and [`spacetime`] describe the 2D code and
//! the 3D space-time history of a bit-flip memory, [`rg`] contains the decoder
//! and [`harness`] the Monte Carlo driver.

pub mod config;
pub mod error;
pub mod exec;
pub mod geometry;
pub mod gf2;
pub mod group_prob;
pub mod harness;
pub mod lattice2d;
pub mod pauli;
pub mod rg;
pub mod spacetime;

pub use error::{Error, Result};
pub use exec::Execution;
pub use group_prob::{GroupDistribution, QubitMessage};
pub use lattice2d::{Lattice2D, LogicalClass, NoiseChannel, SyndromeConfig};
pub use pauli::{Alphabet, CellBasis, ExponentVector, Letter, PauliWord, Tag};
pub use rg::{Decoder, DecoderConfig, Schedule};
pub use spacetime::{CubicSyndrome, ErrorHistory, Lattice3D};
