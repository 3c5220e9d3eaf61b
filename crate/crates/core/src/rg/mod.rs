//! The RG decoder: unit cells, level wiring, per-cell sums with belief
//! propagation, schedules and the top-level decision.

pub mod cell;
pub mod decoder;
pub mod engine;
pub mod plan;
pub mod schedule;

pub use cell::{CellLibrary, UnitCellSpec};
pub use decoder::{Decoded2D, Decoded3D, Decoder, DecoderConfig, TopLevel, DEFAULT_BP_ROUNDS};
pub use engine::{bp_round, rg_iteration, CellState, LevelState, LevelStats};
pub use plan::LevelPlan;
pub use schedule::{Schedule, Step, StepToken};
