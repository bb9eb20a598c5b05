//! `fidelity`, `fit`, `compile` and `verify-theorem`.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use rblab_core::analysis::{error_per_gate, error_per_gate_std, fit_decay, DecayFit, FitPoint};
use rblab_core::compile::{compile_unitary, recompose, Basis, Circuit, GateKind};
use rblab_core::noise::{
    average_gate_fidelity, channel_from_recipes, decay_parameter, depolarizing, ChannelRecipe,
};
use rblab_core::qcore::{c64, compose, kraus_to_superop, CMatrix};
use rblab_core::rbengine::{json_hash, FixedGate, LengthData};
use rblab_core::theory::{
    kick_noise, kick_noise_for_delta, BuiltinGroup, FiniteGroupRep, Spam, TheoremReport,
};
use rblab_core::{Superoperator, UnitaryOp};

use crate::output::{curve_table, Stamp, Table};
use crate::Failure;

fn default_qubits() -> usize {
    2
}

/// A channel built from noise recipes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    #[serde(default = "default_qubits")]
    pub n_qubits: usize,
    pub channel: Vec<ChannelRecipe>,
    /// Angle for theta-dependent recipes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FidelityReport {
    #[serde(flatten)]
    pub stamp: Stamp,
    pub n_qubits: usize,
    pub fidelity: f64,
    pub infidelity: f64,
    pub decay_parameter: f64,
}

pub fn fidelity(spec: &ChannelSpec) -> Result<FidelityReport, Failure> {
    if !(1..=4).contains(&spec.n_qubits) {
        return Err(Failure::config("n_qubits must be between 1 and 4"));
    }
    let ch = channel_from_recipes(&spec.channel, spec.n_qubits, spec.theta)?;
    let f = average_gate_fidelity(&ch)?;
    Ok(FidelityReport {
        stamp: Stamp {
            config_hash: json_hash(spec),
            seed: None,
        },
        n_qubits: spec.n_qubits,
        fidelity: f,
        infidelity: 1.0 - f,
        decay_parameter: decay_parameter(&ch),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct FitReport {
    #[serde(flatten)]
    pub stamp: Stamp,
    pub dim: usize,
    pub fit: DecayFit,
    pub alpha_std: f64,
    pub r: f64,
    pub r_std: f64,
    pub points: Vec<FitPoint>,
}

impl FitReport {
    pub fn curve(&self) -> Table {
        let pts: Vec<(f64, f64)> = self.points.iter().map(|p| (p.m, p.p)).collect();
        curve_table(&pts, &self.fit)
    }
}

/// Reads `# config_hash=… seed=…` if the file starts with one.
fn parse_stamp(text: &str) -> Option<Stamp> {
    let line = text.lines().next()?.strip_prefix('#')?;
    let mut hash = None;
    let mut seed = None;
    for kv in line.split_whitespace() {
        match kv.split_once('=') {
            Some(("config_hash", v)) => hash = Some(v.to_string()),
            Some(("seed", v)) => seed = v.parse().ok(),
            _ => {}
        }
    }
    Some(Stamp {
        config_hash: hash?,
        seed,
    })
}

fn column(headers: &csv::StringRecord, names: &[&str]) -> Option<usize> {
    headers.iter().position(|h| names.contains(&h.trim()))
}

fn field(rec: &csv::StringRecord, i: usize, line: usize) -> Result<f64, Failure> {
    let s = rec.get(i).unwrap_or("").trim();
    s.parse()
        .map_err(|_| Failure::config(format!("line {line}: cannot parse `{s}` as a number")))
}

/// Fit points from CSV text. Accepts a summary table
/// (`m,mean_survival[,std_err,…]`) or per-circuit rows (`m,…,survival`);
/// `#` lines are skipped. Standard errors, when all positive, become
/// inverse-variance weights.
pub fn points_from_csv(text: &str) -> Result<Vec<FitPoint>, Failure> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = rdr.headers()?.clone();
    let m_col = column(&headers, &["m"]).ok_or_else(|| Failure::config("csv has no `m` column"))?;
    let mut rows: Vec<(f64, f64, Option<f64>)> = Vec::new();
    if let Some(p_col) = column(&headers, &["mean_survival", "p", "mean"]) {
        let se_col = column(&headers, &["std_err"]);
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let se = se_col.map(|c| field(&rec, c, i + 2)).transpose()?;
            rows.push((field(&rec, m_col, i + 2)?, field(&rec, p_col, i + 2)?, se));
        }
    } else if let Some(p_col) = column(&headers, &["survival"]) {
        let mut by_m: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let m = field(&rec, m_col, i + 2)?;
            if m < 1.0 || m.fract() != 0.0 {
                return Err(Failure::config(format!("line {}: m must be a positive integer", i + 2)));
            }
            by_m.entry(m as u64).or_default().push(field(&rec, p_col, i + 2)?);
        }
        for (m, ps) in by_m {
            let l = LengthData::new(m as usize, ps);
            let se = (l.n_circuits() > 1).then_some(l.std_err);
            rows.push((m as f64, l.mean, se));
        }
    } else {
        return Err(Failure::config("csv needs a `mean_survival` or `survival` column"));
    }
    if rows.len() < 3 {
        return Err(Failure::config("at least three sequence lengths are needed"));
    }
    let weighted = rows.iter().all(|r| matches!(r.2, Some(se) if se > 0.0));
    Ok(rows
        .into_iter()
        .map(|(m, p, se)| FitPoint {
            m,
            p,
            weight: if weighted { 1.0 / se.unwrap().powi(2) } else { 1.0 },
        })
        .collect())
}

pub fn fit_csv(path: &Path, dim: usize) -> Result<FitReport, Failure> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::config(format!("reading {}: {e}", path.display())))?;
    let points = points_from_csv(&text).map_err(|f| f.context(path.display()))?;
    let stamp = parse_stamp(&text).unwrap_or_else(|| Stamp {
        config_hash: json_hash(&points),
        seed: None,
    });
    let fit = fit_decay(&points)?;
    Ok(FitReport {
        stamp,
        dim,
        alpha_std: fit.alpha_std(),
        r: error_per_gate(&fit, dim),
        r_std: error_per_gate_std(&fit, dim),
        fit,
        points,
    })
}

/// A unitary given as a named gate or as rows of `[re, im]` pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitarySpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gate: Option<FixedGate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<[f64; 2]>>>,
    #[serde(default)]
    pub basis: Basis,
}

impl UnitarySpec {
    pub fn unitary(&self) -> Result<UnitaryOp, Failure> {
        match (&self.gate, &self.matrix) {
            (Some(g), None) => Ok(g.unitary(2).or_else(|_| g.unitary(1))?),
            (None, Some(rows)) => {
                let n = rows.len();
                if rows.iter().any(|r| r.len() != n) {
                    return Err(Failure::config("matrix must be square"));
                }
                let m = CMatrix::from_fn(n, n, |i, j| c64(rows[i][j][0], rows[i][j][1]));
                Ok(UnitaryOp::new(m)?)
            }
            _ => Err(Failure::config("give exactly one of `gate` and `matrix`")),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CompileReport {
    #[serde(flatten)]
    pub stamp: Stamp,
    pub basis: Basis,
    pub counts: BTreeMap<String, usize>,
    /// Distance to the input up to global phase after recomposition.
    pub phase_distance: f64,
    pub circuit: Circuit,
}

pub fn compile(spec: &UnitarySpec) -> Result<CompileReport, Failure> {
    let u = spec.unitary()?;
    let circuit = compile_unitary(&u, spec.basis)?;
    let phase_distance = recompose(&circuit)?.phase_distance(&u);
    let kinds = [
        ("u1", GateKind::U1),
        ("u2", GateKind::U2),
        ("u3", GateKind::U3),
        ("cnot", GateKind::Cnot),
        ("iswap", GateKind::Iswap),
    ];
    let counts = kinds
        .into_iter()
        .map(|(name, k)| (name.to_string(), circuit.count(k)))
        .collect();
    Ok(CompileReport {
        stamp: Stamp {
            config_hash: json_hash(spec),
            seed: None,
        },
        basis: spec.basis,
        counts,
        phase_distance,
        circuit,
    })
}

/// Gate-dependent noise for the theorem check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum TheoremNoise {
    /// Unitary kicks calibrated to a certified δ.
    Kick { delta: f64 },
    /// Unitary kicks of a fixed strength.
    KickStrength { strength: f64 },
    /// Gate-independent depolarizing noise after each element.
    Depolarizing { p: f64 },
}

fn default_m_max() -> usize {
    10
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheoremSpec {
    pub group: BuiltinGroup,
    pub noise: TheoremNoise,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_m_max")]
    pub m_max: usize,
    /// Index of the ending element in the group's element list.
    #[serde(default)]
    pub g_end: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct TheoremOutput {
    #[serde(flatten)]
    pub stamp: Stamp,
    pub noise: TheoremNoise,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kick_strength: Option<f64>,
    pub report: TheoremReport,
}

fn theorem_noise(rep: &FiniteGroupRep, spec: &TheoremSpec) -> Result<(Vec<Superoperator>, Option<f64>), Failure> {
    match spec.noise {
        TheoremNoise::Kick { delta } => {
            if !(delta > 0.0) {
                return Err(Failure::config("delta must be positive"));
            }
            let cal = kick_noise_for_delta(rep, delta, spec.seed)?;
            Ok((cal.phi, Some(cal.strength)))
        }
        TheoremNoise::KickStrength { strength } => {
            if !(strength >= 0.0) {
                return Err(Failure::config("strength must be non-negative"));
            }
            Ok((kick_noise(rep, strength, spec.seed), Some(strength)))
        }
        TheoremNoise::Depolarizing { p } => {
            let n = rep.dim().trailing_zeros() as usize;
            let noise = kraus_to_superop(&depolarizing(n, p)?);
            let phi = rep
                .ideal_superops()
                .iter()
                .map(|s| compose(&noise, s))
                .collect::<rblab_core::Result<Vec<_>>>()?;
            Ok((phi, None))
        }
    }
}

/// Build the noise, certify δ, and compare exact survival with the decay
/// model. A failed bound is reported in the output, not as an error.
pub fn verify_theorem(spec: &TheoremSpec) -> Result<TheoremOutput, Failure> {
    if spec.m_max == 0 {
        return Err(Failure::config("m_max must be at least 1"));
    }
    let rep = FiniteGroupRep::builtin(spec.group)?;
    if spec.g_end >= rep.order() {
        return Err(Failure::config(format!(
            "g_end {} out of range for a group of order {}",
            spec.g_end,
            rep.order()
        )));
    }
    let (phi, kick_strength) = theorem_noise(&rep, spec)?;
    let report = rblab_core::theory::verify_theorem(&rep, &phi, &Spam::ground(&rep), spec.g_end, spec.m_max)?;
    Ok(TheoremOutput {
        stamp: Stamp {
            config_hash: json_hash(spec),
            seed: Some(spec.seed),
        },
        noise: spec.noise,
        kick_strength,
        report,
    })
}
