//! Noisy density-matrix simulation of RB sequences.
//!
//! A sequence of `m` random group elements (optionally each followed by a
//! fixed interleaved gate) is closed by the inversion element, compiled to
//! elementary gates, and simulated with each gate's noise applied right after
//! it. Every circuit owns an RNG stream derived from `(seed, m, index)`, so
//! the `(m, circuit)` grid can be evaluated in any order or thread count.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::compile::{clifford_compile, compile_unitary, zyz_decompose, Basis, ElementaryGate, GateKind};
use crate::error::{Error, Result};
use crate::groups::{self, CliffordWord, GateGroup, GroupElement, GroupKind};
use crate::noise::{average_gate_fidelity_superop, channel_from_recipes, ChannelRecipe, NoiseModel};
use crate::qcore::{embed, unitary_to_superop, CMatrix, CVector, KrausChannel, Superoperator, UnitaryOp};

/// A fixed gate usable as the interleaved gate or as `g_end`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "gate", rename_all = "snake_case", deny_unknown_fields)]
pub enum FixedGate {
    Identity,
    X,
    Hadamard,
    S,
    Cnot,
    Cz,
    Swap,
    Iswap,
    Xy { theta: f64 },
}

impl FixedGate {
    pub fn unitary(&self, n_qubits: usize) -> Result<UnitaryOp> {
        let single = |u: UnitaryOp| {
            if n_qubits == 1 {
                Ok(u)
            } else {
                Err(Error::Config(format!("{self:?} is a single-qubit gate")))
            }
        };
        let double = |u: UnitaryOp| {
            if n_qubits == 2 {
                Ok(u)
            } else {
                Err(Error::Config(format!("{self:?} is a two-qubit gate")))
            }
        };
        match *self {
            FixedGate::Identity => Ok(UnitaryOp::identity(1 << n_qubits)),
            FixedGate::X => single(UnitaryOp::new_unchecked(crate::qcore::pauli::x())),
            FixedGate::Hadamard => single(groups::hadamard()),
            FixedGate::S => single(groups::s_gate()),
            FixedGate::Cnot => double(groups::cnot()),
            FixedGate::Cz => double(groups::cz()),
            FixedGate::Swap => double(groups::swap()),
            FixedGate::Iswap => double(groups::iswap()),
            FixedGate::Xy { theta } => double(groups::xy(theta)),
        }
    }

    /// Noise-model entry used when the gate is applied natively.
    pub fn noise_kind(&self) -> GateKind {
        match self {
            FixedGate::Cnot => GateKind::Cnot,
            FixedGate::Iswap => GateKind::Iswap,
            FixedGate::Xy { .. } => GateKind::Xy,
            _ => GateKind::Native,
        }
    }

    pub fn theta(&self) -> Option<f64> {
        match *self {
            FixedGate::Xy { theta } => Some(theta),
            FixedGate::Iswap => Some(std::f64::consts::PI),
            _ => None,
        }
    }
}

/// Where noise is attached.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NoiseGranularity {
    /// After every compiled elementary gate, per the noise model.
    #[default]
    ElementaryGate,
    /// After every group element as a whole, using `element_noise`.
    GroupElement,
}

/// How shots are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ShotSampling {
    /// Binomial draw on the survival outcome only.
    #[default]
    Survival,
    /// Multinomial draw over all computational-basis outcomes.
    FullPovm,
}

/// State-preparation and measurement noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct Spam {
    #[serde(default)]
    pub preparation: Vec<ChannelRecipe>,
    /// Applied to the state right before the computational-basis measurement.
    #[serde(default)]
    pub measurement: Vec<ChannelRecipe>,
}

fn default_qubits() -> usize {
    2
}
fn default_circuits() -> usize {
    30
}
fn default_shots() -> u64 {
    5000
}

/// Full description of one RB experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RbConfig {
    pub group: GroupKind,
    #[serde(default = "default_qubits")]
    pub n_qubits: usize,
    /// Sequence lengths; chosen from a pilot error estimate when absent.
    #[serde(default)]
    pub lengths: Option<Vec<usize>>,
    #[serde(default = "default_circuits")]
    pub circuits_per_length: usize,
    /// Shots per circuit; 0 means exact probabilities.
    #[serde(default = "default_shots")]
    pub shots: u64,
    #[serde(default)]
    pub sampling: ShotSampling,
    #[serde(default)]
    pub basis: Basis,
    #[serde(default)]
    pub noise: NoiseModel,
    #[serde(default)]
    pub granularity: NoiseGranularity,
    /// Channel after each group element in group-element granularity.
    #[serde(default)]
    pub element_noise: Vec<ChannelRecipe>,
    /// Computational-basis index of the initial state; the survival outcome
    /// is the same basis state.
    #[serde(default)]
    pub initial_state: usize,
    #[serde(default)]
    pub spam: Spam,
    #[serde(default)]
    pub interleaved: Option<FixedGate>,
    #[serde(default)]
    pub g_end: Option<FixedGate>,
    #[serde(default)]
    pub seed: u64,
}

impl RbConfig {
    pub fn new(group: GroupKind, n_qubits: usize) -> Self {
        RbConfig {
            group,
            n_qubits,
            lengths: None,
            circuits_per_length: default_circuits(),
            shots: default_shots(),
            sampling: ShotSampling::default(),
            basis: Basis::default(),
            noise: NoiseModel::default(),
            granularity: NoiseGranularity::default(),
            element_noise: Vec::new(),
            initial_state: 0,
            spam: Spam::default(),
            interleaved: None,
            g_end: None,
            seed: 0,
        }
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn validate(&self) -> Result<()> {
        GateGroup::new(self.group, self.n_qubits)?;
        if let Some(lengths) = &self.lengths {
            if lengths.is_empty() {
                return Err(Error::Config("lengths must not be empty".into()));
            }
            if lengths[0] == 0 {
                return Err(Error::Config("lengths must be positive".into()));
            }
            if lengths.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Config("lengths must be strictly increasing".into()));
            }
        }
        if self.circuits_per_length == 0 {
            return Err(Error::Config("circuits_per_length must be at least 1".into()));
        }
        if self.initial_state >= self.dim() {
            return Err(Error::Config(format!(
                "initial_state {} out of range for {} qubits",
                self.initial_state, self.n_qubits
            )));
        }
        if self.granularity == NoiseGranularity::ElementaryGate && self.n_qubits > 2 {
            return Err(Error::Unsupported(
                "elementary-gate noise needs compilation, available for 1 or 2 qubits".into(),
            ));
        }
        self.noise.validate()?;
        for g in self.interleaved.iter().chain(self.g_end.iter()) {
            g.unitary(self.n_qubits)?;
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        json_hash(self)
    }

    /// The same experiment without the interleaved gate.
    pub fn reference(&self) -> RbConfig {
        RbConfig {
            interleaved: None,
            ..self.clone()
        }
    }
}

/// A sampled RB sequence.
#[derive(Debug, Clone)]
pub struct Sequence {
    pub gates: Vec<GroupElement>,
    pub inversion: GroupElement,
}

/// One ideal unitary and the noise that follows it, both on the full register.
#[derive(Debug, Clone)]
struct Step {
    unitary: CMatrix,
    noise: Option<CMatrix>,
}

#[derive(Debug, Clone)]
struct NativeGate {
    unitary: UnitaryOp,
    kind: GateKind,
    theta: Option<f64>,
}

/// Coherent part (gate qubits) and Liouville matrix of the channel part
/// (full register).
#[derive(Debug, Clone, Default)]
struct ResolvedNoise {
    coherent: Option<CMatrix>,
    liouville: Option<CMatrix>,
}

/// Validated, precomputed form of an [`RbConfig`].
#[derive(Debug, Clone)]
pub struct Engine {
    config: RbConfig,
    group: GateGroup,
    n: usize,
    d: usize,
    rho0: CMatrix,
    survival: usize,
    prep: Option<CMatrix>,
    meas: Option<CMatrix>,
    interleaved: Option<NativeGate>,
    g_end: UnitaryOp,
    element_noise: Option<CMatrix>,
    gate_noise: HashMap<(GateKind, Vec<usize>), ResolvedNoise>,
    interleaved_noise: ResolvedNoise,
}

fn channel_liouville(recipes: &[ChannelRecipe], n: usize) -> Result<Option<CMatrix>> {
    if recipes.is_empty() {
        return Ok(None);
    }
    Ok(Some(channel_from_recipes(recipes, n, None)?.superoperator().liouville().clone()))
}

impl Engine {
    pub fn new(config: &RbConfig) -> Result<Self> {
        config.validate()?;
        let n = config.n_qubits;
        let d = config.dim();
        let group = GateGroup::new(config.group, n)?;
        let mut rho0 = CMatrix::zeros(d, d);
        rho0[(config.initial_state, config.initial_state)] = crate::qcore::c64(1.0, 0.0);
        let interleaved = config
            .interleaved
            .map(|g| -> Result<NativeGate> {
                Ok(NativeGate {
                    unitary: g.unitary(n)?,
                    kind: g.noise_kind(),
                    theta: g.theta(),
                })
            })
            .transpose()?;
        let g_end = match config.g_end {
            Some(g) => g.unitary(n)?,
            None => UnitaryOp::identity(d),
        };
        let mut engine = Engine {
            config: config.clone(),
            group,
            n,
            d,
            rho0,
            survival: config.initial_state,
            prep: channel_liouville(&config.spam.preparation, n)?,
            meas: channel_liouville(&config.spam.measurement, n)?,
            interleaved,
            g_end,
            element_noise: channel_liouville(&config.element_noise, n)?,
            gate_noise: HashMap::new(),
            interleaved_noise: ResolvedNoise::default(),
        };
        if config.granularity == NoiseGranularity::ElementaryGate {
            let mut placements: Vec<(GateKind, Vec<usize>)> = Vec::new();
            for q in 0..n {
                for k in [GateKind::U1, GateKind::U2, GateKind::U3] {
                    placements.push((k, vec![q]));
                }
            }
            if n == 2 {
                placements.push((GateKind::Cnot, vec![0, 1]));
                placements.push((GateKind::Cnot, vec![1, 0]));
                placements.push((GateKind::Iswap, vec![0, 1]));
            }
            for (kind, qubits) in placements {
                let theta = (kind == GateKind::Iswap).then_some(std::f64::consts::PI);
                let resolved = engine.resolve(kind, &qubits, theta)?;
                engine.gate_noise.insert((kind, qubits), resolved);
            }
        }
        if let Some(v) = &engine.interleaved {
            let qubits: Vec<usize> = (0..n).collect();
            engine.interleaved_noise = engine.resolve(v.kind, &qubits, v.theta)?;
        }
        Ok(engine)
    }

    fn resolve(&self, kind: GateKind, qubits: &[usize], theta: Option<f64>) -> Result<ResolvedNoise> {
        let noise = self.config.noise.noise_for(kind, qubits.len(), theta)?;
        let liouville = match noise.channel {
            Some(ch) => Some(ch.embed(qubits, self.n)?.superoperator().liouville().clone()),
            None => None,
        };
        Ok(ResolvedNoise {
            coherent: noise.coherent.map(|u| u.into_matrix()),
            liouville,
        })
    }

    pub fn config(&self) -> &RbConfig {
        &self.config
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Per-circuit RNG stream.
    pub fn circuit_rng(&self, m: usize, index: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(((m as u64) << 32) | index as u64);
        rng
    }

    /// Sample `m` group elements and the matching inversion element.
    pub fn generate_sequence<R: Rng + ?Sized>(&self, m: usize, rng: &mut R) -> Result<Sequence> {
        let gates: Vec<GroupElement> = (0..m).map(|_| self.group.sample(rng)).collect();
        let inversion = invert_product(&self.ideal_unitaries(&gates), &self.g_end)?;
        let inversion = match self.group.element(inversion.clone()) {
            Ok(e) => e,
            // Non-Clifford interleaved gates leave the inversion outside the group.
            Err(_) => GroupElement {
                unitary: inversion,
                clifford_index: None,
            },
        };
        Ok(Sequence { gates, inversion })
    }

    fn ideal_unitaries(&self, gates: &[GroupElement]) -> Vec<UnitaryOp> {
        let mut out = Vec::with_capacity(2 * gates.len());
        for g in gates {
            out.push(g.unitary.clone());
            if let Some(v) = &self.interleaved {
                out.push(v.unitary.clone());
            }
        }
        out
    }

    /// Ideal unitary of the whole sequence, inversion included.
    pub fn ideal_product(&self, seq: &Sequence) -> Result<UnitaryOp> {
        let mut u = UnitaryOp::identity(self.d);
        for g in self.ideal_unitaries(&seq.gates) {
            u = g.then_after(&u)?;
        }
        seq.inversion.unitary.then_after(&u)
    }

    fn compile_element(&self, e: &GroupElement) -> Result<Vec<ElementaryGate>> {
        let basis = self.config.basis;
        Ok(match (self.group.kind, self.n, e.clifford_index) {
            (GroupKind::Clifford, 2, Some(i)) => clifford_compile(&CliffordWord::from_index(i)?, basis)?.gates,
            (_, 1, _) => vec![zyz_decompose(&e.unitary, 0)?],
            _ => compile_unitary(&e.unitary, basis)?.gates,
        })
    }

    fn element_steps(&self, e: &GroupElement, steps: &mut Vec<Step>) -> Result<()> {
        match self.config.granularity {
            NoiseGranularity::GroupElement => steps.push(Step {
                unitary: e.unitary.matrix().clone(),
                noise: self.element_noise.clone(),
            }),
            NoiseGranularity::ElementaryGate => {
                for g in self.compile_element(e)? {
                    let qubits = g.qubits();
                    let noise = self
                        .gate_noise
                        .get(&(g.kind(), qubits.clone()))
                        .ok_or_else(|| Error::Config(format!("no noise entry for {:?} on {qubits:?}", g.kind())))?;
                    steps.push(self.noisy_step(g.matrix(), &qubits, noise)?);
                }
            }
        }
        Ok(())
    }

    fn noisy_step(&self, gate: CMatrix, qubits: &[usize], noise: &ResolvedNoise) -> Result<Step> {
        let local = match &noise.coherent {
            Some(c) => c * gate,
            None => gate,
        };
        Ok(Step {
            unitary: embed(&local, qubits, self.n)?,
            noise: noise.liouville.clone(),
        })
    }

    fn program(&self, seq: &Sequence) -> Result<Vec<Step>> {
        let mut steps = Vec::new();
        for g in &seq.gates {
            self.element_steps(g, &mut steps)?;
            if let Some(v) = &self.interleaved {
                let qubits: Vec<usize> = (0..self.n).collect();
                steps.push(self.noisy_step(v.unitary.matrix().clone(), &qubits, &self.interleaved_noise)?);
            }
        }
        self.element_steps(&seq.inversion, &mut steps)?;
        Ok(steps)
    }

    fn prepared_state(&self) -> CMatrix {
        match &self.prep {
            Some(s) => apply_liouville(s, &self.rho0),
            None => self.rho0.clone(),
        }
    }

    /// Final state before measurement noise.
    fn evolve(&self, seq: &Sequence) -> Result<CMatrix> {
        let mut rho = self.prepared_state();
        for step in self.program(seq)? {
            rho = &step.unitary * rho * step.unitary.adjoint();
            if let Some(s) = &step.noise {
                rho = apply_liouville(s, &rho);
            }
        }
        Ok(rho)
    }

    /// Outcome probabilities over the computational basis.
    pub fn simulate_sequence(&self, seq: &Sequence) -> Result<Vec<f64>> {
        let mut rho = self.evolve(seq)?;
        if let Some(s) = &self.meas {
            rho = apply_liouville(s, &rho);
        }
        (0..self.d)
            .map(|i| {
                let p = rho[(i, i)].re;
                if !(-1e-9..=1.0 + 1e-9).contains(&p) {
                    return Err(Error::Numerical(format!(
                        "outcome probability {p} outside [0, 1]; a channel is not CPTP"
                    )));
                }
                Ok(p.clamp(0.0, 1.0))
            })
            .collect()
    }

    pub fn survival_probability(&self, seq: &Sequence) -> Result<f64> {
        Ok(self.simulate_sequence(seq)?[self.survival])
    }

    /// Liouville matrix of the whole noisy sequence, SPAM excluded.
    pub fn sequence_superoperator(&self, seq: &Sequence) -> Result<Superoperator> {
        let mut total = Superoperator::identity(self.d).liouville().clone();
        for step in self.program(seq)? {
            let u = unitary_to_superop(&UnitaryOp::new_unchecked(step.unitary));
            total = u.liouville() * total;
            if let Some(s) = &step.noise {
                total = s * total;
            }
        }
        Superoperator::from_liouville(total)
    }

    /// `⟨⟨ε_M†(Π)| S |ε_SP(ρ0)⟩⟩` by one Liouville product chain.
    pub fn survival_by_liouville(&self, seq: &Sequence) -> Result<f64> {
        let mut s = self.sequence_superoperator(seq)?.liouville().clone();
        if let Some(m) = &self.meas {
            s = m * s;
        }
        let rho = vec_of(&self.prepared_state());
        let mut pi = CMatrix::zeros(self.d, self.d);
        pi[(self.survival, self.survival)] = crate::qcore::c64(1.0, 0.0);
        let out = s * rho;
        Ok(vec_of(&pi).dotc(&out).re)
    }

    /// Survival estimate for circuit `index` at length `m`.
    pub fn run_circuit(&self, m: usize, index: usize) -> Result<CircuitResult> {
        let mut rng = self.circuit_rng(m, index);
        let seq = self.generate_sequence(m, &mut rng)?;
        let probs = self.simulate_sequence(&seq)?;
        let exact = probs[self.survival];
        let shots = self.config.shots;
        let estimate = if shots == 0 {
            exact
        } else {
            match self.config.sampling {
                ShotSampling::Survival => binomial(shots, exact, &mut rng)? as f64 / shots as f64,
                ShotSampling::FullPovm => {
                    multinomial(shots, &probs, &mut rng)?[self.survival] as f64 / shots as f64
                }
            }
        };
        Ok(CircuitResult { exact, estimate })
    }

    pub fn lengths(&self) -> Result<Vec<usize>> {
        match &self.config.lengths {
            Some(l) => Ok(l.clone()),
            None => {
                let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
                rng.set_stream(u64::MAX);
                let (r, _) = composite_infidelity(self, 64, &mut rng)?;
                Ok(default_lengths(r))
            }
        }
    }

    pub fn run(&self) -> Result<RbDataset> {
        let lengths = self.lengths()?;
        let k = self.config.circuits_per_length;
        let grid: Vec<(usize, usize)> = lengths
            .iter()
            .flat_map(|&m| (0..k).map(move |i| (m, i)))
            .collect();
        let results: Vec<Result<CircuitResult>> = grid
            .par_iter()
            .map(|&(m, i)| {
                self.run_circuit(m, i).map_err(|e| Error::Simulation {
                    m,
                    circuit: i,
                    source: Box::new(e),
                })
            })
            .collect();
        let mut per_length = Vec::with_capacity(lengths.len());
        let mut it = results.into_iter();
        for &m in &lengths {
            let mut survival = Vec::with_capacity(k);
            for _ in 0..k {
                survival.push(it.next().expect("grid size")?.estimate);
            }
            per_length.push(LengthData::new(m, survival));
        }
        Ok(RbDataset {
            config_hash: self.config.hash(),
            seed: self.config.seed,
            dim: self.d,
            shots: self.config.shots,
            interleaved: self.config.interleaved,
            lengths: per_length,
        })
    }
}

fn vec_of(m: &CMatrix) -> CVector {
    CVector::from_column_slice(m.as_slice())
}

fn apply_liouville(s: &CMatrix, rho: &CMatrix) -> CMatrix {
    let d = rho.nrows();
    let v = s * vec_of(rho);
    CMatrix::from_column_slice(d, d, v.as_slice())
}

fn invert_product(gates: &[UnitaryOp], g_end: &UnitaryOp) -> Result<UnitaryOp> {
    groups::invert_product(gates, g_end)
}

fn binomial<R: Rng + ?Sized>(n: u64, p: f64, rng: &mut R) -> Result<u64> {
    let dist = Binomial::new(n, p.clamp(0.0, 1.0))
        .map_err(|e| Error::Numerical(format!("binomial({n}, {p}): {e}")))?;
    Ok(dist.sample(rng))
}

fn multinomial<R: Rng + ?Sized>(n: u64, probs: &[f64], rng: &mut R) -> Result<Vec<u64>> {
    let mut left = n;
    let mut mass = 1.0;
    let mut out = Vec::with_capacity(probs.len());
    for (i, &p) in probs.iter().enumerate() {
        let c = if i + 1 == probs.len() || mass <= 0.0 {
            left
        } else {
            binomial(left, (p / mass).min(1.0), rng)?
        };
        out.push(c);
        left -= c;
        mass -= p;
    }
    Ok(out)
}

/// Exact and estimated survival of one circuit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircuitResult {
    pub exact: f64,
    pub estimate: f64,
}

/// Survival estimates at one sequence length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LengthData {
    pub m: usize,
    pub survival: Vec<f64>,
    pub mean: f64,
    pub std_err: f64,
}

impl LengthData {
    pub fn new(m: usize, survival: Vec<f64>) -> Self {
        let k = survival.len() as f64;
        let mean = survival.iter().sum::<f64>() / k;
        let std_err = if survival.len() > 1 {
            let var = survival.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (k - 1.0);
            (var / k).sqrt()
        } else {
            0.0
        };
        LengthData {
            m,
            survival,
            mean,
            std_err,
        }
    }

    pub fn n_circuits(&self) -> usize {
        self.survival.len()
    }
}

/// Averaged survival data of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbDataset {
    pub config_hash: String,
    pub seed: u64,
    pub dim: usize,
    pub shots: u64,
    pub interleaved: Option<FixedGate>,
    pub lengths: Vec<LengthData>,
}

/// Hex SHA-256 of the compact JSON form of any serializable value.
pub fn json_hash<T: Serialize + ?Sized>(value: &T) -> String {
    let json = serde_json::to_string(value).expect("value serializes");
    hex::encode(Sha256::digest(json.as_bytes()))
}

/// Run on the global rayon pool.
pub fn run_experiment(config: &RbConfig) -> Result<RbDataset> {
    Engine::new(config)?.run()
}

/// Run on a dedicated pool with `threads` workers.
pub fn run_experiment_with_threads(config: &RbConfig, threads: usize) -> Result<RbDataset> {
    let engine = Engine::new(config)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| engine.run())
}

/// 11 geometrically spaced lengths from 1 to about `10 / r`.
pub fn default_lengths(r: f64) -> Vec<usize> {
    let max = if r > 0.0 { (10.0 / r).clamp(20.0, 1000.0) } else { 1000.0 };
    let mut out: Vec<usize> = Vec::with_capacity(11);
    for i in 0..11 {
        let x = max.powf(i as f64 / 10.0).round() as usize;
        let x = match out.last() {
            Some(&prev) if x <= prev => prev + 1,
            _ => x.max(1),
        };
        out.push(x);
    }
    out
}

/// Mean and standard error of `1 − F` for the noisy compiled channel of a
/// single group element, relative to its ideal action.
pub fn composite_infidelity<R: Rng + ?Sized>(engine: &Engine, samples: usize, rng: &mut R) -> Result<(f64, f64)> {
    let d = engine.d;
    let mut values = Vec::with_capacity(samples);
    for _ in 0..samples {
        let e = engine.group.sample(rng);
        let mut steps = Vec::new();
        engine.element_steps(&e, &mut steps)?;
        let mut total = Superoperator::identity(d).liouville().clone();
        for step in steps {
            total = unitary_to_superop(&UnitaryOp::new_unchecked(step.unitary)).liouville() * total;
            if let Some(s) = &step.noise {
                total = s * total;
            }
        }
        let ideal_inv = unitary_to_superop(&e.unitary.dagger());
        let lambda = Superoperator::from_liouville(total * ideal_inv.liouville())?;
        values.push(1.0 - average_gate_fidelity_superop(&lambda));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    Ok((mean, (var / n).sqrt()))
}

/// Infidelity oracle for plain RB: mean composite-channel infidelity over
/// `samples` group elements drawn from a fixed stream.
pub fn infidelity_oracle(config: &RbConfig, samples: usize) -> Result<(f64, f64)> {
    let engine = Engine::new(&config.reference())?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x6f7261636c65);
    composite_infidelity(&engine, samples, &mut rng)
}

/// Kraus form of the noise attached to a natively applied fixed gate,
/// including any coherent part, relative to the ideal gate.
pub fn native_gate_noise(noise: &NoiseModel, gate: FixedGate, n_qubits: usize) -> Result<KrausChannel> {
    let d = 1 << n_qubits;
    let resolved = noise.noise_for(gate.noise_kind(), n_qubits, gate.theta())?;
    let base = resolved.channel.unwrap_or_else(|| KrausChannel::identity(d));
    match resolved.coherent {
        Some(u) => KrausChannel::from_unitary(&u).followed_by(&base),
        None => Ok(base),
    }
}
