use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;

use rblab_cli::output::write_json;
use rblab_cli::tools::{ChannelSpec, TheoremNoise, TheoremSpec, UnitarySpec};
use rblab_cli::{ExperimentSpec, Failure, Overrides};
use rblab_core::compile::Basis;
use rblab_core::noise::ChannelRecipe;
use rblab_core::theory::BuiltinGroup;

#[derive(Parser)]
#[command(name = "rblab", version, about = "Randomized benchmarking simulations and analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment spec (JSON).
    #[arg(long)]
    spec: PathBuf,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Output directory override.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Shots per circuit override (0 = exact probabilities).
    #[arg(long)]
    shots: Option<u64>,
    /// Repetition count override.
    #[arg(long)]
    repetitions: Option<usize>,
}

impl RunArgs {
    fn load(&self) -> Result<ExperimentSpec, Failure> {
        ExperimentSpec::load(&self.spec)?.apply(&Overrides {
            seed: self.seed,
            shots: self.shots,
            repetitions: self.repetitions,
            out: self.out.clone(),
        })
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment spec, fit, and write datasets and reports.
    Run(RunArgs),
    /// Interleaved FRB fidelity of XY(θ) over a grid of angles.
    SweepXy {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated angles, overriding the spec's sweep section.
        #[arg(long, value_delimiter = ',')]
        thetas: Option<Vec<f64>>,
    },
    /// Average gate fidelity of a channel.
    Fidelity {
        /// Channel spec (JSON) with `n_qubits`, `channel` and optional `theta`.
        #[arg(long, conflicts_with = "channel")]
        spec: Option<PathBuf>,
        /// Inline recipe or list of recipes, e.g. '{"type":"depolarizing","p":0.01}'.
        #[arg(long)]
        channel: Option<String>,
        #[arg(long, default_value_t = 2)]
        qubits: usize,
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fit A·α^m + B to a survival CSV.
    Fit {
        #[arg(long)]
        csv: PathBuf,
        /// Hilbert-space dimension used to convert α to an error rate.
        #[arg(long, default_value_t = 4)]
        dim: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compile a one- or two-qubit unitary.
    Compile {
        /// Unitary spec (JSON) with `gate` or `matrix`, and `basis`.
        #[arg(long)]
        spec: PathBuf,
        /// Basis override.
        #[arg(long, value_parser = parse_basis)]
        basis: Option<Basis>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the decay-model bound on a finite group with gate-dependent noise.
    VerifyTheorem {
        /// Theorem spec (JSON); flags below override its fields.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        group: Option<BuiltinGroup>,
        /// Unitary-kick noise calibrated to this certified δ.
        #[arg(long, conflicts_with_all = ["strength", "depolarizing"])]
        delta: Option<f64>,
        /// Unitary-kick noise of fixed strength.
        #[arg(long, conflicts_with = "depolarizing")]
        strength: Option<f64>,
        /// Depolarizing noise after every element.
        #[arg(long)]
        depolarizing: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        m_max: Option<usize>,
        #[arg(long)]
        g_end: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_basis(s: &str) -> Result<Basis, String> {
    serde_json::from_value(serde_json::Value::String(s.to_ascii_lowercase())).map_err(|e| e.to_string())
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::config(format!("reading {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::config(format!("{}: {e}", path.display())))
}

/// Writes `name` into `out`, or prints the document when no directory is given.
fn emit<T: Serialize>(value: &T, out: Option<&Path>, name: &str) -> Result<(), Failure> {
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            let path = dir.join(name);
            write_json(&path, value)?;
            println!("wrote {}", path.display());
        }
        None => println!("{}", serde_json::to_string_pretty(value)?),
    }
    Ok(())
}

fn execute(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run(args) => {
            let spec = args.load()?;
            let out = rblab_cli::run(&spec, args.threads)?;
            let dir = spec.output_dir();
            out.write(&dir)?;
            let rep = &out.report;
            print!("{}: r = {:.6} ± {:.6}", spec.name, rep.r.mean, rep.r.std);
            if let Some(f) = rep.fidelity {
                print!(", F = {:.6} ± {:.6}", f.mean, f.std);
            }
            if let Some(o) = &rep.oracle {
                print!(", oracle r = {:.6} (ratio {:.4})", o.infidelity, o.ratio);
            }
            println!(" -> {}", dir.display());
            Ok(())
        }
        Command::SweepXy { run, thetas } => {
            let spec = run.load()?;
            let out = rblab_cli::sweep_xy(&spec, thetas.as_deref(), run.threads)?;
            let dir = spec.output_dir();
            out.write(&dir)?;
            for p in &out.points {
                println!(
                    "theta = {:.4}: F = {:.6} ± {:.6} (theory {:.6})",
                    p.theta, p.measured, p.uncertainty, p.theory
                );
            }
            println!("-> {}", dir.display());
            Ok(())
        }
        Command::Fidelity {
            spec,
            channel,
            qubits,
            theta,
            out,
        } => {
            let spec: ChannelSpec = match (spec, channel) {
                (Some(path), None) => read_json(&path)?,
                (None, Some(text)) => {
                    let value: serde_json::Value =
                        serde_json::from_str(&text).map_err(|e| Failure::config(format!("--channel: {e}")))?;
                    let channel: Vec<ChannelRecipe> = if value.is_array() {
                        serde_json::from_value(value)
                    } else {
                        serde_json::from_value(value).map(|r| vec![r])
                    }
                    .map_err(|e| Failure::config(format!("--channel: {e}")))?;
                    ChannelSpec {
                        n_qubits: qubits,
                        channel,
                        theta,
                    }
                }
                _ => return Err(Failure::config("give --spec or --channel")),
            };
            emit(&rblab_cli::fidelity(&spec)?, out.as_deref(), "fidelity.json")
        }
        Command::Fit { csv, dim, out } => {
            let report = rblab_cli::fit_csv(&csv, dim)?;
            if let Some(dir) = &out {
                std::fs::create_dir_all(dir)?;
                report.curve().write(&dir.join("fit_curve.csv"), &report.stamp)?;
            }
            emit(&report, out.as_deref(), "fit.json")
        }
        Command::Compile { spec, basis, out } => {
            let mut spec: UnitarySpec = read_json(&spec)?;
            if let Some(b) = basis {
                spec.basis = b;
            }
            emit(&rblab_cli::compile(&spec)?, out.as_deref(), "circuit.json")
        }
        Command::VerifyTheorem {
            spec,
            group,
            delta,
            strength,
            depolarizing,
            seed,
            m_max,
            g_end,
            out,
        } => {
            let noise = match (delta, strength, depolarizing) {
                (Some(delta), _, _) => Some(TheoremNoise::Kick { delta }),
                (_, Some(strength), _) => Some(TheoremNoise::KickStrength { strength }),
                (_, _, Some(p)) => Some(TheoremNoise::Depolarizing { p }),
                _ => None,
            };
            let mut spec = match spec {
                Some(path) => read_json(&path)?,
                None => TheoremSpec {
                    group: group.unwrap_or(BuiltinGroup::Clifford1),
                    noise: noise.unwrap_or(TheoremNoise::Kick { delta: 0.01 }),
                    seed: 0,
                    m_max: 10,
                    g_end: 0,
                },
            };
            if let Some(g) = group {
                spec.group = g;
            }
            if let Some(n) = noise {
                spec.noise = n;
            }
            if let Some(s) = seed {
                spec.seed = s;
            }
            if let Some(m) = m_max {
                spec.m_max = m;
            }
            if let Some(g) = g_end {
                spec.g_end = g;
            }
            let result = rblab_cli::verify_theorem(&spec)?;
            emit(&result, out.as_deref(), "theorem.json")?;
            let r = &result.report;
            eprintln!(
                "{} (order {}), certified delta <= {:.4e}: {}",
                r.group,
                r.order,
                r.delta.upper,
                if r.pass { "bound holds" } else { "BOUND VIOLATED" }
            );
            if r.pass {
                Ok(())
            } else {
                Err(Failure::numerical("decay-model bound violated"))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code)
        }
    }
}
