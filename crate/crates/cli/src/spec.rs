//! Experiment spec files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use rblab_core::rbengine::{json_hash, RbConfig};

use crate::Failure;

pub const SPEC_VERSION: u32 = 1;

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct AnalysisOptions {
    /// Samples for the composite-channel infidelity oracle; 0 skips it.
    #[serde(default)]
    pub oracle_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepOptions {
    /// XY angles, each in `[0, π]`.
    pub thetas: Vec<f64>,
}

/// A versioned experiment description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub version: u32,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub experiment: RbConfig,
    #[serde(default)]
    pub analysis: AnalysisOptions,
    #[serde(default = "one")]
    pub repetitions: usize,
    /// Output directory, relative to the working directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepOptions>,
}

/// Command-line overrides applied on top of a spec.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub shots: Option<u64>,
    pub repetitions: Option<usize>,
    pub out: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn from_json(text: &str) -> Result<Self, Failure> {
        let spec: ExperimentSpec =
            serde_json::from_str(text).map_err(|e| Failure::config(format!("spec: {e}")))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::config(format!("reading {}: {e}", path.display())))?;
        Self::from_json(&text).map_err(|f| f.context(format!("{}", path.display())))
    }

    pub fn validate(&self) -> Result<(), Failure> {
        if self.version != SPEC_VERSION {
            return Err(Failure::config(format!(
                "unsupported spec version {} (expected {SPEC_VERSION})",
                self.version
            )));
        }
        if self.repetitions == 0 {
            return Err(Failure::config("repetitions must be at least 1"));
        }
        if let Some(sweep) = &self.sweep {
            if sweep.thetas.is_empty() {
                return Err(Failure::config("sweep needs at least one theta"));
            }
            if let Some(t) = sweep
                .thetas
                .iter()
                .find(|t| !(0.0..=std::f64::consts::PI).contains(*t))
            {
                return Err(Failure::config(format!("theta {t} outside [0, pi]")));
            }
            if self.experiment.n_qubits != 2 {
                return Err(Failure::config("XY sweep needs two qubits"));
            }
        }
        self.experiment.validate().map_err(Failure::from)
    }

    pub fn apply(mut self, o: &Overrides) -> Result<Self, Failure> {
        if let Some(seed) = o.seed {
            self.experiment.seed = seed;
        }
        if let Some(shots) = o.shots {
            self.experiment.shots = shots;
        }
        if let Some(r) = o.repetitions {
            self.repetitions = r;
        }
        if let Some(out) = &o.out {
            self.output = Some(out.clone());
        }
        self.validate()?;
        Ok(self)
    }

    pub fn seed(&self) -> u64 {
        self.experiment.seed
    }

    /// Hash of the resolved spec without the output location.
    pub fn hash(&self) -> String {
        json_hash(&ExperimentSpec {
            output: None,
            ..self.clone()
        })
    }

    pub fn output_dir(&self) -> PathBuf {
        self.output
            .clone()
            .unwrap_or_else(|| PathBuf::from("out").join(&self.name))
    }

    /// Config of repetition `r`; repetitions use consecutive seeds.
    pub fn repetition(&self, r: usize) -> RbConfig {
        RbConfig {
            seed: self.experiment.seed.wrapping_add(r as u64),
            ..self.experiment.clone()
        }
    }
}
