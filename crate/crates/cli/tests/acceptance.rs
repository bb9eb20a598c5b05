//! Acceptance checks, one PASS/FAIL line per criterion.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use rblab_cli::tools::{ChannelSpec, TheoremNoise, TheoremSpec};
use rblab_cli::{fidelity, fit_csv, run, sweep_xy, verify_theorem, ExperimentSpec};
use rblab_core::analysis::fit_dataset;
use rblab_core::compile::{compile_unitary, recompose, Basis, GateKind};
use rblab_core::groups::{haar_sample, GroupKind};
use rblab_core::noise::{average_gate_fidelity, ChannelRecipe, NoiseModel};
use rblab_core::qcore::{c64, spectral_norm, CMatrix};
use rblab_core::rbengine::{native_gate_noise, FixedGate, LengthData, NoiseGranularity, RbDataset};
use rblab_core::theory::{block_diagonalize, BuiltinGroup};

type Outcome = Result<String, String>;

fn specs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("specs")
}

fn bundled(name: &str) -> ExperimentSpec {
    ExperimentSpec::load(&specs_dir().join(name)).expect("bundled spec loads")
}

fn within_time(elapsed: Duration, limit: f64) -> Result<(), String> {
    if elapsed.as_secs_f64() < limit {
        Ok(())
    } else {
        Err(format!("took {:.1}s, limit {limit}s", elapsed.as_secs_f64()))
    }
}

fn fidelity_formulas() -> Outcome {
    let t = Instant::now();
    let depol = fidelity(&ChannelSpec {
        n_qubits: 2,
        channel: vec![ChannelRecipe::Depolarizing { p: 0.01 }],
        theta: None,
    })
    .map_err(|e| e.to_string())?
    .fidelity;
    let ad = fidelity(&ChannelSpec {
        n_qubits: 2,
        channel: vec![ChannelRecipe::AmplitudeDamping { gamma: 0.01 }],
        theta: None,
    })
    .map_err(|e| e.to_string())?
    .fidelity;
    within_time(t.elapsed(), 1.0)?;
    // depolarizing: 1 - p (d-1)/d; AD⊗AD: (d F_pro + 1)/(d + 1), F_pro = ((1 + √(1-γ))/2)^4
    let depol_closed = 1.0 - 0.01 * 3.0 / 4.0;
    let f_pro = ((1.0 + (1.0f64 - 0.01).sqrt()) / 2.0).powi(4);
    let ad_closed = (4.0 * f_pro + 1.0) / 5.0;
    let ok = (depol - depol_closed).abs() < 1e-12
        && (ad - ad_closed).abs() < 1e-12
        && (depol - 0.9925).abs() < 5e-5
        && (ad - 0.9920).abs() < 5e-5;
    let msg = format!("depolarizing {depol:.12}, amplitude damping {ad:.12}");
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn interleaved_reproduction() -> Outcome {
    let cases = [
        ("depol_interleaved_cnot.json", 0.9925, 0.9925),
        ("frb_depol_interleaved_cnot.json", 0.9925, 0.9925),
        ("ad_interleaved_cnot.json", 0.9921, 0.9922),
        ("frb_ad_interleaved_cnot.json", 0.9921, 0.9922),
    ];
    let mut parts = Vec::new();
    let mut ok = true;
    for (file, lo, hi) in cases {
        let mut spec = bundled(file);
        spec.experiment.circuits_per_length = 10;
        spec.experiment.shots = 0;
        spec.repetitions = 1;
        let out = run(&spec, 0).map_err(|e| format!("{file}: {e}"))?;
        let f = out.report.fidelity.ok_or(format!("{file}: no interleaved fidelity"))?.mean;
        ok &= f >= lo - 0.002 && f <= hi + 0.002;
        parts.push(format!("{} F={f:.5}", spec.name));
    }
    let msg = parts.join(", ");
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn plain_rb_consistency() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for noise in ["depol", "ad"] {
        let mut rs = Vec::new();
        for group in ["clifford", "frb"] {
            let mut spec = bundled(&format!("{group}_{noise}.json"));
            spec.repetitions = 1;
            let out = run(&spec, 0).map_err(|e| e.to_string())?;
            let oracle = out.report.oracle.as_ref().ok_or("spec has no oracle")?;
            ok &= (oracle.ratio - 1.0).abs() <= 0.10;
            parts.push(format!(
                "{} r={:.5} oracle={:.5} ratio={:.3}",
                spec.name, out.report.r.mean, oracle.infidelity, oracle.ratio
            ));
            rs.push(out.report.r.mean);
        }
        ok &= rs[1] > 2.0 * rs[0];
        parts.push(format!("{noise}: r_FRB/r_Clifford={:.2}", rs[1] / rs[0]));
    }
    let msg = parts.join("; ");
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn analytic_decay() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for group in [GroupKind::Clifford, GroupKind::Haar] {
        for p in [0.005, 0.02] {
            let mut config = bundled("clifford_depol.json").experiment;
            config.group = group;
            config.noise = NoiseModel::noiseless();
            config.granularity = NoiseGranularity::GroupElement;
            config.element_noise = vec![ChannelRecipe::Depolarizing { p }];
            config.shots = 0;
            config.circuits_per_length = 10;
            let ds = rblab_core::rbengine::run_experiment(&config).map_err(|e| e.to_string())?;
            let fit = fit_dataset(&ds).map_err(|e| e.to_string())?;
            let err = (fit.alpha - (1.0 - p)).abs();
            ok &= err < 1e-3;
            parts.push(format!("{group:?} p={p}: |Δα|={err:.1e}"));
        }
    }
    let msg = parts.join(", ");
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn compiler_round_trip() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for i in 0..1000 {
        let u = haar_sample(4, &mut rng);
        for (basis, kind, count) in [(Basis::Cnot, GateKind::Cnot, 3), (Basis::Iswap, GateKind::Iswap, 6)] {
            let c = compile_unitary(&u, basis).map_err(|e| format!("sample {i}: {e}"))?;
            if c.count(kind) != count {
                return Err(format!("sample {i}: {} {kind:?} gates in {basis:?} basis", c.count(kind)));
            }
            let d = recompose(&c).map_err(|e| e.to_string())?.phase_distance(&u);
            worst = worst.max(d);
        }
    }
    within_time(t.elapsed(), 30.0)?;
    let msg = format!("max phase distance {worst:.1e} over 1000 samples x 2 bases");
    if worst < 1e-9 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn mean_and_sigma(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

fn haar_moments() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let n = 100_000;
    let mut u00 = Vec::with_capacity(n);
    let mut tr = Vec::with_capacity(n);
    for _ in 0..n {
        let u = haar_sample(4, &mut rng);
        u00.push(u.matrix()[(0, 0)].norm_sqr());
        tr.push(u.matrix().trace().norm_sqr());
    }
    let (m1, s1) = mean_and_sigma(&u00);
    let (m2, s2) = mean_and_sigma(&tr);
    let z1 = (m1 - 0.25) / s1;
    let z2 = (m2 - 1.0) / s2;
    let msg = format!("E|U00|^2={m1:.5} ({z1:+.2}σ), E|TrU|^2={m2:.4} ({z2:+.2}σ)");
    if z1.abs() <= 3.0 && z2.abs() <= 3.0 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn fit_recovery() -> Outcome {
    let report = fit_csv(&specs_dir().join("synthetic_decay.csv"), 4).map_err(|e| e.to_string())?;
    let exact_err = (report.fit.alpha - 0.98).abs();
    let (a, b, alpha) = (0.7, 0.25, 0.97f64);
    let lengths = [1usize, 2, 4, 8, 12, 16, 24, 32, 48, 64, 96];
    let (circuits, shots) = (30usize, 5000u64);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let trials = 200;
    let mut covered = 0;
    for _ in 0..trials {
        let lengths = lengths
            .iter()
            .map(|&m| {
                let p = a * alpha.powi(m as i32) + b;
                let bin = Binomial::new(shots, p).unwrap();
                let survival = (0..circuits)
                    .map(|_| bin.sample(&mut rng) as f64 / shots as f64)
                    .collect();
                LengthData::new(m, survival)
            })
            .collect();
        let ds = RbDataset {
            config_hash: String::new(),
            seed: rng.random(),
            dim: 4,
            shots,
            interleaved: None,
            lengths,
        };
        let fit = fit_dataset(&ds).map_err(|e| e.to_string())?;
        if (fit.alpha - alpha).abs() <= 3.0 * fit.alpha_std() {
            covered += 1;
        }
    }
    let coverage = covered as f64 / trials as f64;
    let msg = format!("synthetic |Δα|={exact_err:.1e}, ±3σ coverage {:.1}%", 100.0 * coverage);
    if exact_err < 1e-9 && coverage >= 0.90 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn random_complex(r: usize, c: usize, rng: &mut impl Rng) -> CMatrix {
    CMatrix::from_fn(r, c, |_, _| c64(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
}

fn lemma_suite() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (mut off, mut recon) = (0.0f64, 0.0f64);
    for i in 0..100 {
        let n = rng.random_range(2..=20);
        let rank = rng.random_range(1..n);
        let q = random_complex(n, n, &mut rng).qr().q();
        let v = q.columns(0, rank).into_owned();
        let x1 = &v * v.adjoint();
        let e = random_complex(n, n, &mut rng);
        let e = &e * c64(rng.random_range(0.0..0.08) / spectral_norm(&e), 0.0);
        let split = block_diagonalize(&x1, &e).map_err(|err| format!("instance {i}: {err}"))?;
        let f = &x1 + &e;
        off = off.max(split.off_diagonal_residual(&f));
        recon = recon.max(split.reconstruction_error(&f));
        if !split.report.bounds_hold() {
            return Err(format!("instance {i}: bounds fail {:?}", split.report));
        }
    }
    within_time(t.elapsed(), 10.0)?;
    let msg = format!("off-diagonal {off:.1e}, reconstruction {recon:.1e}, both norm bounds hold");
    if off < 1e-10 && recon < 1e-12 {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn theorem_check() -> Outcome {
    let t = Instant::now();
    let mut parts = Vec::new();
    let mut ok = true;
    for delta in [0.01, 0.02, 0.05] {
        let out = verify_theorem(&TheoremSpec {
            group: BuiltinGroup::Clifford1,
            noise: TheoremNoise::Kick { delta },
            seed: 2024,
            m_max: 10,
            g_end: 0,
        })
        .map_err(|e| e.to_string())?;
        let r = &out.report;
        ok &= r.pass && r.points.len() == 10 && r.points.iter().all(|p| p.residual <= p.bound);
        let worst = r
            .points
            .iter()
            .map(|p| p.residual / p.bound)
            .fold(0.0f64, f64::max);
        parts.push(format!("δ={delta} (certified {:.4}): max residual/bound {worst:.1e}", r.delta.upper));
    }
    within_time(t.elapsed(), 60.0)?;
    let msg = parts.join(", ");
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn xy_sweep() -> Outcome {
    let spec = bundled("xy_sweep.json");
    let noise = &spec.experiment.noise;
    let gate_err = |g| -> Result<f64, String> {
        let ch = native_gate_noise(noise, g, 2).map_err(|e| e.to_string())?;
        Ok(1.0 - average_gate_fidelity(&ch).map_err(|e| e.to_string())?)
    };
    let iswap_err = gate_err(FixedGate::Iswap)?;
    let mut ok = (1e-3..=1e-2).contains(&iswap_err);
    let out = sweep_xy(&spec, None, 0).map_err(|e| e.to_string())?;
    let worst = out
        .points
        .iter()
        .map(|p| (p.measured - p.theory).abs())
        .fold(0.0f64, f64::max);
    ok &= out.points.len() == 5 && worst < 5e-3;
    // coherent part alone, both coupling parameters doubled together
    let mut ratios = Vec::new();
    for p in &out.points {
        let infidelity = |d: f64| -> Result<f64, String> {
            let ch = fidelity(&ChannelSpec {
                n_qubits: 2,
                channel: vec![ChannelRecipe::CoherentXy { d_theta: d, d_z: d }],
                theta: Some(p.theta),
            })
            .map_err(|e| e.to_string())?;
            Ok(ch.infidelity)
        };
        ratios.push(infidelity(0.02)? / infidelity(0.01)?);
    }
    ok &= ratios.iter().all(|r| (r / 4.0 - 1.0).abs() <= 0.05);
    let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().cloned().fold(0.0, f64::max);
    let msg = format!(
        "iSWAP error {iswap_err:.2e}, max |F_measured - F_theory| {worst:.1e}, coherent ratio {lo:.3}..{hi:.3}"
    );
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn files_under(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.is_dir() {
            out.extend(files_under(&path));
        } else {
            out.push(path);
        }
    }
    out.sort();
    out
}

fn rblab(args: &[&str]) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_rblab"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if status.status.success() {
        Ok(())
    } else {
        Err(format!("rblab {args:?}: {}", String::from_utf8_lossy(&status.stderr)))
    }
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let specs = specs_dir();
    let mut compared = 0;
    let mut entries: Vec<PathBuf> = fs::read_dir(&specs)
        .map_err(|e| e.to_string())?
        .map(|e| e.unwrap().path())
        .collect();
    entries.sort();
    for path in entries {
        let stem = path.file_stem().unwrap().to_string_lossy().to_string();
        let file = path.to_string_lossy().to_string();
        let mut dirs = Vec::new();
        for threads in ["1", "4"] {
            let out = tmp.path().join(format!("{stem}-{threads}"));
            let o = out.to_string_lossy().to_string();
            let text = fs::read_to_string(&path).unwrap_or_default();
            if path.extension().is_some_and(|e| e == "csv") {
                rblab(&["fit", "--csv", &file, "--out", &o])?;
            } else if text.contains("\"sweep\"") {
                rblab(&["sweep-xy", "--spec", &file, "--threads", threads, "--out", &o])?;
            } else if text.contains("\"experiment\"") {
                // the full 30 repetitions of one spec, three for the rest
                let reps = if stem == "depol_interleaved_cnot" { "30" } else { "3" };
                rblab(&["run", "--spec", &file, "--threads", threads, "--repetitions", reps, "--out", &o])?;
            } else if text.contains("\"group\"") {
                rblab(&["verify-theorem", "--spec", &file, "--out", &o])?;
            } else if text.contains("\"channel\"") {
                rblab(&["fidelity", "--spec", &file, "--out", &o])?;
            } else {
                rblab(&["compile", "--spec", &file, "--out", &o])?;
            }
            dirs.push(out);
        }
        let (a, b) = (files_under(&dirs[0]), files_under(&dirs[1]));
        if a.len() != b.len() || a.is_empty() {
            return Err(format!("{stem}: different file sets"));
        }
        for (x, y) in a.iter().zip(&b) {
            let (bx, by) = (fs::read(x).unwrap(), fs::read(y).unwrap());
            if bx != by {
                return Err(format!("{stem}: {} differs", x.file_name().unwrap().to_string_lossy()));
            }
            let text = String::from_utf8_lossy(&bx);
            if !text.contains("config_hash") {
                return Err(format!("{}: no config hash", x.display()));
            }
            compared += 1;
        }
    }
    Ok(format!("{compared} output files identical at 1 and 4 threads"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("fidelity formulas", fidelity_formulas),
        ("interleaved reproduction", interleaved_reproduction),
        ("plain RB consistency", plain_rb_consistency),
        ("analytic decay", analytic_decay),
        ("compiler round trip", compiler_round_trip),
        ("Haar moments", haar_moments),
        ("fit recovery", fit_recovery),
        ("lemma suite", lemma_suite),
        ("decay bound on the 1-qubit Clifford group", theorem_check),
        ("XY sweep", xy_sweep),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = check();
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(msg) => println!("PASS {:>2} {name}: {msg} [{secs:.1}s]", i + 1),
            Err(msg) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {msg} [{secs:.1}s]", i + 1);
            }
        }
    }
    println!("{} of {} criteria pass", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
