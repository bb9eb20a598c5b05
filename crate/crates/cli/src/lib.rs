//! Experiment orchestration for the `rblab` binary: spec loading, runs,
//! sweeps, thin tool wrappers, and file output.

use std::fmt;

pub mod output;
pub mod run;
pub mod spec;
pub mod tools;

pub use run::{run, sweep_xy, RunOutput, SweepOutput};
pub use spec::{ExperimentSpec, Overrides};
pub use tools::{compile, fidelity, fit_csv, verify_theorem};

pub const EXIT_OK: u8 = 0;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;
pub const EXIT_PREMISE: u8 = 4;

/// An error together with the process exit code it maps to.
#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn config(msg: impl Into<String>) -> Self {
        Failure {
            code: EXIT_CONFIG,
            message: msg.into(),
        }
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Failure {
            code: EXIT_NUMERICAL,
            message: msg.into(),
        }
    }

    pub fn context(self, what: impl fmt::Display) -> Self {
        Failure {
            message: format!("{what}: {}", self.message),
            ..self
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Failure {}

impl From<rblab_core::Error> for Failure {
    fn from(e: rblab_core::Error) -> Self {
        let code = if e.is_premise() {
            EXIT_PREMISE
        } else if e.is_numerical() {
            EXIT_NUMERICAL
        } else {
            EXIT_CONFIG
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::config(format!("i/o: {e}"))
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::config(format!("csv: {e}"))
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::config(format!("json: {e}"))
    }
}
