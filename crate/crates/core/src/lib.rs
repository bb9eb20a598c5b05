//! Randomized benchmarking laboratory: channels, gate sampling and
//! compilation, noisy sequence simulation, decay fitting, and a numerical
//! check of the decay-model bound on finite groups.

pub mod analysis;
pub mod compile;
pub mod error;
pub mod groups;
pub mod noise;
pub mod qcore;
pub mod rbengine;
pub mod theory;

pub use error::{Error, Result};
pub use qcore::{CMatrix, CVector, DensityMatrix, KrausChannel, Superoperator, UnitaryOp};
