//! `run` and `sweep-xy`.

use std::fs;
use std::path::Path;

use serde::Serialize;

use rblab_core::analysis::{
    error_per_gate, error_per_gate_std, fit_dataset, interleaved_report, DecayFit, InterleavedReport,
};
use rblab_core::noise::average_gate_fidelity;
use rblab_core::rbengine::{
    infidelity_oracle, native_gate_noise, run_experiment_with_threads, FixedGate, RbConfig, RbDataset,
};

use crate::output::{circuits_table, curve_table, num, summary_table, write_json, Stamp, Table};
use crate::spec::ExperimentSpec;
use crate::Failure;

#[derive(Debug, Clone, Serialize)]
pub struct RepetitionDatasets {
    pub repetition: usize,
    pub seed: u64,
    pub reference: RbDataset,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interleaved: Option<RbDataset>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RepetitionFits {
    pub repetition: usize,
    pub seed: u64,
    pub reference: DecayFit,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interleaved: Option<DecayFit>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RepetitionResult {
    pub repetition: usize,
    pub seed: u64,
    pub alpha: f64,
    pub alpha_std: f64,
    pub r: f64,
    pub r_std: f64,
    pub degenerate: bool,
    pub converged: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interleaved: Option<InterleavedReport>,
    /// Why no interleaved fidelity could be formed.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interleaved_error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

impl MeanStd {
    /// Sample mean and standard deviation (0 for a single value).
    pub fn of(xs: &[f64]) -> Option<Self> {
        if xs.is_empty() {
            return None;
        }
        let n = xs.len();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let std = if n > 1 {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        Some(MeanStd { mean, std, n })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub samples: usize,
    pub infidelity: f64,
    pub std_err: f64,
    /// Fitted `r` of the first repetition over the oracle.
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub name: String,
    #[serde(flatten)]
    pub stamp: Stamp,
    pub dim: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub interleaved_gate: Option<FixedGate>,
    pub repetitions: Vec<RepetitionResult>,
    pub r: MeanStd,
    #[serde(rename = "F", skip_serializing_if = "Option::is_none")]
    pub fidelity: Option<MeanStd>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub oracle: Option<OracleReport>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub stamp: Stamp,
    pub datasets: Vec<RepetitionDatasets>,
    pub fits: Vec<RepetitionFits>,
    pub report: RunReport,
}

fn points(ds: &RbDataset) -> Vec<(f64, f64)> {
    ds.lengths.iter().map(|l| (l.m as f64, l.mean)).collect()
}

fn run_one(config: &RbConfig, threads: usize, r: usize) -> Result<(RepetitionDatasets, RepetitionFits, RepetitionResult), Failure> {
    let dim = config.dim();
    let reference = run_experiment_with_threads(&config.reference(), threads)?;
    let fit_ref = fit_dataset(&reference)?;
    let (interleaved, fit_int, report, report_err) = match config.interleaved {
        None => (None, None, None, None),
        Some(_) => {
            let ds = run_experiment_with_threads(config, threads)?;
            let fit = fit_dataset(&ds)?;
            let (rep, err) = match interleaved_report(&fit_ref, &fit, dim) {
                Ok(rep) => (Some(rep), None),
                Err(e) => (None, Some(e.to_string())),
            };
            (Some(ds), Some(fit), rep, err)
        }
    };
    let result = RepetitionResult {
        repetition: r,
        seed: config.seed,
        alpha: fit_ref.alpha,
        alpha_std: fit_ref.alpha_std(),
        r: error_per_gate(&fit_ref, dim),
        r_std: error_per_gate_std(&fit_ref, dim),
        degenerate: fit_ref.degenerate,
        converged: fit_ref.converged,
        interleaved: report,
        interleaved_error: report_err,
    };
    Ok((
        RepetitionDatasets {
            repetition: r,
            seed: config.seed,
            reference,
            interleaved,
        },
        RepetitionFits {
            repetition: r,
            seed: config.seed,
            reference: fit_ref,
            interleaved: fit_int,
        },
        result,
    ))
}

/// Run every repetition of a spec. `threads = 0` uses the global pool.
pub fn run(spec: &ExperimentSpec, threads: usize) -> Result<RunOutput, Failure> {
    let stamp = Stamp {
        config_hash: spec.hash(),
        seed: Some(spec.seed()),
    };
    let mut datasets = Vec::new();
    let mut fits = Vec::new();
    let mut results = Vec::new();
    for r in 0..spec.repetitions {
        let (d, f, res) =
            run_one(&spec.repetition(r), threads, r).map_err(|e| e.context(format!("repetition {r}")))?;
        datasets.push(d);
        fits.push(f);
        results.push(res);
    }
    let rs: Vec<f64> = results.iter().map(|x| x.r).collect();
    let fs: Vec<f64> = results
        .iter()
        .filter_map(|x| x.interleaved.map(|i| i.fidelity))
        .collect();
    let oracle = if spec.analysis.oracle_samples > 0 {
        let (infidelity, std_err) = infidelity_oracle(&spec.repetition(0), spec.analysis.oracle_samples)?;
        Some(OracleReport {
            samples: spec.analysis.oracle_samples,
            infidelity,
            std_err,
            ratio: rs[0] / infidelity,
        })
    } else {
        None
    };
    let report = RunReport {
        name: spec.name.clone(),
        stamp: stamp.clone(),
        dim: spec.experiment.dim(),
        interleaved_gate: spec.experiment.interleaved,
        repetitions: results,
        r: MeanStd::of(&rs).expect("at least one repetition"),
        fidelity: MeanStd::of(&fs),
        oracle,
    };
    Ok(RunOutput {
        stamp,
        datasets,
        fits,
        report,
    })
}

#[derive(Serialize)]
struct Stamped<'a, T: Serialize> {
    #[serde(flatten)]
    stamp: &'a Stamp,
    repetitions: &'a T,
}

impl RunOutput {
    pub fn write(&self, dir: &Path) -> Result<(), Failure> {
        fs::create_dir_all(dir)?;
        write_json(
            &dir.join("dataset.json"),
            &Stamped {
                stamp: &self.stamp,
                repetitions: &self.datasets,
            },
        )?;
        write_json(
            &dir.join("fit.json"),
            &Stamped {
                stamp: &self.stamp,
                repetitions: &self.fits,
            },
        )?;
        write_json(&dir.join("report.json"), &self.report)?;
        for (d, f) in self.datasets.iter().zip(&self.fits) {
            let sub = if d.repetition == 0 {
                dir.to_path_buf()
            } else {
                dir.join(format!("rep_{:03}", d.repetition))
            };
            fs::create_dir_all(&sub)?;
            summary_table(&d.reference).write(&sub.join("summary.csv"), &self.stamp)?;
            circuits_table(&d.reference).write(&sub.join("circuits.csv"), &self.stamp)?;
            curve_table(&points(&d.reference), &f.reference).write(&sub.join("fit_curve.csv"), &self.stamp)?;
            if let (Some(ds), Some(fit)) = (&d.interleaved, &f.interleaved) {
                summary_table(ds).write(&sub.join("summary_interleaved.csv"), &self.stamp)?;
                circuits_table(ds).write(&sub.join("circuits_interleaved.csv"), &self.stamp)?;
                curve_table(&points(ds), fit).write(&sub.join("fit_curve_interleaved.csv"), &self.stamp)?;
            }
        }
        if self.report.repetitions.len() > 1 {
            let mut t = Table::new(&["repetition", "seed", "alpha", "alpha_std", "r", "r_std", "F", "F_uncertainty"]);
            for x in &self.report.repetitions {
                let (f, u) = match x.interleaved {
                    Some(i) => (num(i.fidelity), num(i.uncertainty)),
                    None => (String::new(), String::new()),
                };
                t.push(vec![
                    x.repetition.to_string(),
                    x.seed.to_string(),
                    num(x.alpha),
                    num(x.alpha_std),
                    num(x.r),
                    num(x.r_std),
                    f,
                    u,
                ]);
            }
            t.write(&dir.join("repetitions.csv"), &self.stamp)?;
            let mut s = Table::new(&["quantity", "mean", "std", "n"]);
            let rows = [("r", Some(self.report.r)), ("F", self.report.fidelity)];
            for (name, v) in rows {
                if let Some(v) = v {
                    s.push(vec![name.to_string(), num(v.mean), num(v.std), v.n.to_string()]);
                }
            }
            s.write(&dir.join("repetitions_summary.csv"), &self.stamp)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct SweepPoint {
    pub theta: f64,
    #[serde(rename = "F_measured")]
    pub measured: f64,
    #[serde(rename = "F_uncertainty")]
    pub uncertainty: f64,
    #[serde(rename = "F_theory")]
    pub theory: f64,
    pub alpha_int: f64,
    pub unphysical: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepOutput {
    pub name: String,
    #[serde(flatten)]
    pub stamp: Stamp,
    pub reference_fit: DecayFit,
    pub points: Vec<SweepPoint>,
    #[serde(skip)]
    pub reference: RbDataset,
    #[serde(skip)]
    pub interleaved: Vec<RbDataset>,
}

/// Interleaved FRB fidelity of XY(θ) at each angle, against the fidelity of
/// the gate's own noise channel. One reference run serves every angle.
pub fn sweep_xy(spec: &ExperimentSpec, thetas: Option<&[f64]>, threads: usize) -> Result<SweepOutput, Failure> {
    let thetas: Vec<f64> = match (thetas, &spec.sweep) {
        (Some(t), _) => t.to_vec(),
        (None, Some(s)) => s.thetas.clone(),
        (None, None) => return Err(Failure::config("no thetas given and the spec has no sweep section")),
    };
    if let Some(t) = thetas.iter().find(|t| !(0.0..=std::f64::consts::PI).contains(*t)) {
        return Err(Failure::config(format!("theta {t} outside [0, pi]")));
    }
    let mut spec = spec.clone();
    spec.sweep = Some(crate::spec::SweepOptions { thetas: thetas.clone() });
    let stamp = Stamp {
        config_hash: spec.hash(),
        seed: Some(spec.seed()),
    };
    let base = spec.repetition(0).reference();
    let reference = run_experiment_with_threads(&base, threads)?;
    let reference_fit = fit_dataset(&reference)?;
    let mut points = Vec::new();
    let mut interleaved = Vec::new();
    for &theta in &thetas {
        let gate = FixedGate::Xy { theta };
        let config = RbConfig {
            interleaved: Some(gate),
            ..base.clone()
        };
        let ds = run_experiment_with_threads(&config, threads)?;
        let fit = fit_dataset(&ds)?;
        let rep = interleaved_report(&reference_fit, &fit, config.dim())
            .map_err(|e| Failure::from(e).context(format!("theta {theta}")))?;
        let theory = average_gate_fidelity(&native_gate_noise(&config.noise, gate, config.n_qubits)?)?;
        points.push(SweepPoint {
            theta,
            measured: rep.fidelity,
            uncertainty: rep.uncertainty,
            theory,
            alpha_int: rep.alpha_int,
            unphysical: rep.unphysical,
        });
        interleaved.push(ds);
    }
    Ok(SweepOutput {
        name: spec.name.clone(),
        stamp,
        reference_fit,
        points,
        reference,
        interleaved,
    })
}

impl SweepOutput {
    pub fn table(&self) -> Table {
        let mut t = Table::new(&["theta", "F_measured", "F_uncertainty", "F_theory"]);
        for p in &self.points {
            t.push(vec![num(p.theta), num(p.measured), num(p.uncertainty), num(p.theory)]);
        }
        t
    }

    pub fn write(&self, dir: &Path) -> Result<(), Failure> {
        fs::create_dir_all(dir)?;
        self.table().write(&dir.join("sweep.csv"), &self.stamp)?;
        write_json(&dir.join("sweep.json"), self)?;
        #[derive(Serialize)]
        struct Datasets<'a> {
            #[serde(flatten)]
            stamp: &'a Stamp,
            reference: &'a RbDataset,
            interleaved: &'a [RbDataset],
        }
        write_json(
            &dir.join("dataset.json"),
            &Datasets {
                stamp: &self.stamp,
                reference: &self.reference,
                interleaved: &self.interleaved,
            },
        )?;
        summary_table(&self.reference).write(&dir.join("summary.csv"), &self.stamp)?;
        Ok(())
    }
}
