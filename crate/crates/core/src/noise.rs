//! Noise channels, gate-level noise recipes and fidelity formulas.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::compile::GateKind;
use crate::error::{Error, Result};
use crate::qcore::{
    c64, expm_hermitian, identity, pauli, CMatrix, KrausChannel, Superoperator,
    UnitaryOp,
};

fn check_probability(name: &'static str, value: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&value) || value.is_nan() {
        return Err(Error::InvalidParameter {
            name,
            value,
            reason: "must lie in [0, 1]",
        });
    }
    Ok(())
}

/// `ρ ↦ (1-p)ρ + p I/2ⁿ` on `n` qubits.
pub fn depolarizing(n_qubits: usize, p: f64) -> Result<KrausChannel> {
    check_probability("p", p)?;
    if n_qubits == 0 || n_qubits > 4 {
        return Err(Error::Unsupported(format!(
            "depolarizing channel on {n_qubits} qubits"
        )));
    }
    let n_paulis = 4usize.pow(n_qubits as u32) as f64;
    let kraus = pauli::strings(n_qubits)
        .into_iter()
        .enumerate()
        .map(|(i, sigma)| {
            let weight = if i == 0 {
                1.0 - p + p / n_paulis
            } else {
                p / n_paulis
            };
            sigma * c64(weight.sqrt(), 0.0)
        })
        .collect();
    KrausChannel::new_unchecked(kraus)
}

/// Single-qubit amplitude damping with decay probability `gamma`.
pub fn amplitude_damping(gamma: f64) -> Result<KrausChannel> {
    check_probability("gamma", gamma)?;
    let a0 = CMatrix::from_row_slice(
        2,
        2,
        &[c64(1., 0.), c64(0., 0.), c64(0., 0.), c64((1.0 - gamma).sqrt(), 0.)],
    );
    let a1 = CMatrix::from_row_slice(
        2,
        2,
        &[c64(0., 0.), c64(gamma.sqrt(), 0.), c64(0., 0.), c64(0., 0.)],
    );
    KrausChannel::new_unchecked(vec![a0, a1])
}

/// Independent copies of a single-qubit channel on each of `n` qubits.
pub fn tensor_power(single: &KrausChannel, n: usize) -> KrausChannel {
    (1..n).fold(single.clone(), |acc, _| acc.tensor(single))
}

/// A time in nanoseconds. Deserializes from a bare number (nanoseconds) or a
/// string with one of the suffixes `s`, `ms`, `us`/`µs`, `ns`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Duration(f64);

impl Duration {
    pub fn from_ns(ns: f64) -> Self {
        Duration(ns)
    }

    pub fn ns(self) -> f64 {
        self.0
    }
}

impl FromStr for Duration {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (num, scale) = [("ms", 1e6), ("us", 1e3), ("µs", 1e3), ("ns", 1.0), ("s", 1e9)]
            .iter()
            .find_map(|(suffix, scale)| s.strip_suffix(suffix).map(|n| (n, *scale)))
            .unwrap_or((s, 1.0));
        let value: f64 = num
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("cannot parse duration `{s}`")))?;
        Ok(Duration(value * scale))
    }
}

impl fmt::Display for Duration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}ns", self.0)
    }
}

impl Serialize for Duration {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.serialize_f64(self.0)
    }
}

impl<'de> Deserialize<'de> for Duration {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Number(ns) => Ok(Duration(ns)),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Reset probability and dephasing probability of the thermal channel.
pub fn thermal_probabilities(t1: Duration, t2: Duration, tg: Duration) -> Result<(f64, f64)> {
    let (t1, t2, tg) = (t1.ns(), t2.ns(), tg.ns());
    if t1 <= 0.0 || t2 <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "T1/T2",
            value: t1.min(t2),
            reason: "relaxation times must be positive",
        });
    }
    if tg < 0.0 {
        return Err(Error::InvalidParameter {
            name: "Tg",
            value: tg,
            reason: "gate time must be non-negative",
        });
    }
    if t2 > t1 {
        return Err(Error::InvalidParameter {
            name: "T2",
            value: t2,
            reason: "T2 > T1 would make the dephasing probability negative",
        });
    }
    let p_r = 1.0 - (-tg / t1).exp();
    let p_z = (1.0 - p_r) * (1.0 - (-tg / t2 + tg / t1).exp());
    Ok((p_r, p_z))
}

/// `(1 - p_r - p_z)ρ + p_z ZρZ + p_r Tr[ρ]|0><0|` on one qubit.
pub fn thermal_relaxation(t1: Duration, t2: Duration, tg: Duration) -> Result<KrausChannel> {
    let (p_r, p_z) = thermal_probabilities(t1, t2, tg)?;
    let keep = (1.0 - p_r - p_z).max(0.0);
    let mut kraus = vec![identity(2) * c64(keep.sqrt(), 0.0)];
    if p_z > 0.0 {
        kraus.push(pauli::z() * c64(p_z.sqrt(), 0.0));
    }
    if p_r > 0.0 {
        let s = c64(p_r.sqrt(), 0.0);
        let zero = c64(0.0, 0.0);
        kraus.push(CMatrix::from_row_slice(2, 2, &[s, zero, zero, zero]));
        kraus.push(CMatrix::from_row_slice(2, 2, &[zero, s, zero, zero]));
    }
    KrausChannel::new_unchecked(kraus)
}

/// `-(XX + YY)/4`.
pub fn h_xy() -> CMatrix {
    (pauli::x().kronecker(&pauli::x()) + pauli::y().kronecker(&pauli::y())) * c64(-0.25, 0.0)
}

/// `-ZZ/4`.
pub fn h_zz() -> CMatrix {
    pauli::z().kronecker(&pauli::z()) * c64(-0.25, 0.0)
}

/// Extra unitary `exp(-i δθ H_XY - i (θ+δθ) δz H_ZZ)` that turns the ideal
/// `XY(θ)` into the over-rotated gate with a parasitic ZZ coupling.
pub fn coherent_xy_error(theta: f64, d_theta: f64, d_z: f64) -> UnitaryOp {
    let generator = h_xy() * c64(d_theta, 0.0) + h_zz() * c64((theta + d_theta) * d_z, 0.0);
    UnitaryOp::new_unchecked(expm_hermitian(&generator, 1.0))
}

/// `(Σ_k |Tr A_k|² + D) / (D² + D)`.
pub fn average_gate_fidelity(channel: &KrausChannel) -> Result<f64> {
    channel.check_cptp(1e-10)?;
    let d = channel.dim() as f64;
    Ok((channel.trace_overlap() + d) / (d * d + d))
}

/// Same formula through the Liouville trace; the map must be trace preserving.
pub fn average_gate_fidelity_superop(s: &Superoperator) -> f64 {
    let d = s.dim() as f64;
    (s.trace().re + d) / (d * d + d)
}

/// Depolarizing parameter `(Σ_k |Tr A_k|² - 1)/(D² - 1)`.
pub fn decay_parameter(channel: &KrausChannel) -> f64 {
    let d = channel.dim() as f64;
    (channel.trace_overlap() - 1.0) / (d * d - 1.0)
}

/// `F = α + (1 - α)/D`.
pub fn fidelity_from_alpha(alpha: f64, dim: usize) -> Result<f64> {
    if alpha <= 0.0 || alpha > 1.0 + 1e-9 || alpha.is_nan() {
        return Err(Error::InvalidParameter {
            name: "alpha",
            value: alpha,
            reason: "decay parameter must lie in (0, 1]",
        });
    }
    let d = dim as f64;
    Ok(alpha + (1.0 - alpha) / d)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterleavedFidelity {
    pub fidelity: f64,
    /// Set when the interleaved decay is slower than the reference decay.
    pub unphysical: bool,
}

/// `F = 1 - ((D-1)/D)(1 - α_int/α_ref)`.
pub fn interleaved_fidelity(alpha: f64, alpha_int: f64, dim: usize) -> Result<InterleavedFidelity> {
    if alpha <= 0.0 || alpha.is_nan() {
        return Err(Error::InvalidParameter {
            name: "alpha",
            value: alpha,
            reason: "reference decay parameter must be positive",
        });
    }
    let d = dim as f64;
    let unphysical = alpha_int > alpha;
    if unphysical {
        log::warn!("interleaved decay {alpha_int} exceeds reference decay {alpha}");
    }
    Ok(InterleavedFidelity {
        fidelity: 1.0 - (d - 1.0) / d * (1.0 - alpha_int / alpha),
        unphysical,
    })
}

/// One ingredient of a gate's noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ChannelRecipe {
    Identity,
    /// Depolarizing on all qubits the gate acts on.
    Depolarizing { p: f64 },
    /// Independent amplitude damping on each qubit the gate acts on.
    AmplitudeDamping { gamma: f64 },
    /// Independent thermal relaxation on each qubit the gate acts on.
    ThermalRelaxation {
        t1: Duration,
        t2: Duration,
        gate_time: Duration,
        /// Gate time is `θ/π · gate_time` for parameterized XY gates.
        #[serde(default)]
        scale_with_theta: bool,
    },
    /// Over-rotation and ZZ coupling of an XY(θ) gate, fused with the gate.
    CoherentXy { d_theta: f64, d_z: f64 },
}

/// Noise attached to one gate application: an optional unitary fused with the
/// ideal gate, then an optional channel, both on the gate's own qubits.
#[derive(Debug, Clone, PartialEq)]
pub struct GateNoise {
    pub coherent: Option<UnitaryOp>,
    pub channel: Option<KrausChannel>,
}

impl GateNoise {
    pub fn none() -> Self {
        GateNoise {
            coherent: None,
            channel: None,
        }
    }

    pub fn is_noiseless(&self) -> bool {
        self.coherent.is_none() && self.channel.is_none()
    }
}

/// Gate context needed to resolve parameter-dependent recipes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateContext {
    pub arity: usize,
    /// Rotation angle for XY-family gates.
    pub theta: Option<f64>,
    pub time_scale: f64,
}

pub fn resolve_recipes(recipes: &[ChannelRecipe], ctx: GateContext) -> Result<GateNoise> {
    let mut noise = GateNoise::none();
    let n = ctx.arity;
    for recipe in recipes {
        let channel = match *recipe {
            ChannelRecipe::Identity => None,
            ChannelRecipe::Depolarizing { p } => Some(depolarizing(n, p)?),
            ChannelRecipe::AmplitudeDamping { gamma } => {
                Some(tensor_power(&amplitude_damping(gamma)?, n))
            }
            ChannelRecipe::ThermalRelaxation {
                t1,
                t2,
                gate_time,
                scale_with_theta,
            } => {
                let mut tg = gate_time.ns() * ctx.time_scale;
                if scale_with_theta {
                    let theta = ctx.theta.ok_or_else(|| {
                        Error::Config("theta-scaled thermal noise on a gate without angle".into())
                    })?;
                    tg *= theta.abs() / std::f64::consts::PI;
                }
                let single = thermal_relaxation(t1, t2, Duration::from_ns(tg))?;
                Some(tensor_power(&single, n))
            }
            ChannelRecipe::CoherentXy { d_theta, d_z } => {
                if n != 2 {
                    return Err(Error::Config("coherent XY error needs a two-qubit gate".into()));
                }
                let theta = ctx.theta.ok_or_else(|| {
                    Error::Config("coherent XY error on a gate without angle".into())
                })?;
                let u = coherent_xy_error(theta, d_theta, d_z);
                noise.coherent = Some(match noise.coherent.take() {
                    Some(prev) => u.then_after(&prev)?,
                    None => u,
                });
                None
            }
        };
        if let Some(ch) = channel {
            noise.channel = Some(match noise.channel.take() {
                Some(prev) => prev.followed_by(&ch)?,
                None => ch,
            });
        }
    }
    if let Some(ch) = &noise.channel {
        ch.check_cptp(1e-10)?;
    }
    Ok(noise)
}

fn default_time_scale() -> f64 {
    1.0
}

/// Per-gate-kind noise recipes. Kinds without an entry are noiseless, so U1
/// defaults to the identity channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    #[serde(default)]
    pub gates: BTreeMap<GateKind, Vec<ChannelRecipe>>,
    /// Multiplies every gate time. Lets nanosecond gate times be paired with
    /// relaxation times quoted at a different scale.
    #[serde(default = "default_time_scale")]
    pub time_scale: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel {
            gates: BTreeMap::new(),
            time_scale: 1.0,
        }
    }
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        Self::default()
    }

    pub fn with(mut self, kind: GateKind, recipes: Vec<ChannelRecipe>) -> Self {
        self.gates.insert(kind, recipes);
        self
    }

    /// The depolarizing model used for the CNOT-basis comparisons.
    pub fn reference_depolarizing() -> Self {
        Self::default()
            .with(GateKind::Cnot, vec![ChannelRecipe::Depolarizing { p: 0.01 }])
            .with(GateKind::U2, vec![ChannelRecipe::Depolarizing { p: 0.002 }])
            .with(GateKind::U3, vec![ChannelRecipe::Depolarizing { p: 0.004 }])
    }

    /// The amplitude-damping model used for the CNOT-basis comparisons.
    pub fn reference_amplitude_damping() -> Self {
        Self::default()
            .with(GateKind::Cnot, vec![ChannelRecipe::AmplitudeDamping { gamma: 0.01 }])
            .with(GateKind::U2, vec![ChannelRecipe::AmplitudeDamping { gamma: 0.003 }])
            .with(GateKind::U3, vec![ChannelRecipe::AmplitudeDamping { gamma: 0.006 }])
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.time_scale > 0.0) {
            return Err(Error::Config("time_scale must be positive".into()));
        }
        for (kind, recipes) in &self.gates {
            let arity = kind.arity().unwrap_or(2);
            let theta = Some(std::f64::consts::PI);
            resolve_recipes(
                recipes,
                GateContext {
                    arity,
                    theta,
                    time_scale: self.time_scale,
                },
            )
            .map_err(|e| Error::Config(format!("noise for {kind:?}: {e}")))?;
        }
        Ok(())
    }

    pub fn noise_for(&self, kind: GateKind, arity: usize, theta: Option<f64>) -> Result<GateNoise> {
        match self.gates.get(&kind) {
            None => Ok(GateNoise::none()),
            Some(recipes) => resolve_recipes(
                recipes,
                GateContext {
                    arity,
                    theta,
                    time_scale: self.time_scale,
                },
            ),
        }
    }
}

/// Channel for a standalone noise description (SPAM, per-element noise, CLI
/// fidelity queries) on an `n`-qubit system.
pub fn channel_from_recipes(recipes: &[ChannelRecipe], n_qubits: usize, theta: Option<f64>) -> Result<KrausChannel> {
    let noise = resolve_recipes(
        recipes,
        GateContext {
            arity: n_qubits,
            theta,
            time_scale: 1.0,
        },
    )?;
    let d = 1 << n_qubits;
    let base = noise.channel.unwrap_or_else(|| KrausChannel::identity(d));
    match noise.coherent {
        Some(u) => KrausChannel::from_unitary(&u).followed_by(&base),
        None => Ok(base),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::{max_abs, DensityMatrix};

    fn closed_form_depol_fidelity(n: u32, p: f64) -> f64 {
        let d = 2f64.powi(n as i32);
        ((1.0 - p) * d * d + p + d) / (d * (d + 1.0))
    }

    fn closed_form_ad_fidelity(gamma: f64) -> f64 {
        ((1.0 + (1.0 - gamma).sqrt()).powi(4) + 4.0) / 20.0
    }

    #[test]
    fn depolarizing_zero_is_identity() {
        let ch = depolarizing(2, 0.0).unwrap();
        assert!(max_abs(&(ch.superoperator().liouville() - identity(16))) < 1e-15);
    }

    #[test]
    fn depolarizing_action_matches_definition() {
        let p = 0.3;
        let ch = depolarizing(1, p).unwrap();
        let rho = DensityMatrix::basis_state(2, 0).unwrap();
        let out = ch.apply(rho.matrix());
        let expect = rho.matrix() * c64(1.0 - p, 0.0) + identity(2) * c64(p / 2.0, 0.0);
        assert!(max_abs(&(out - expect)) < 1e-15);
    }

    #[test]
    fn depolarizing_rejects_bad_p() {
        assert!(depolarizing(1, -0.1).is_err());
        assert!(depolarizing(1, 1.1).is_err());
    }

    #[test]
    fn two_qubit_depolarizing_fidelity() {
        let ch = depolarizing(2, 0.01).unwrap();
        let f = average_gate_fidelity(&ch).unwrap();
        assert!((f - closed_form_depol_fidelity(2, 0.01)).abs() < 1e-12);
        assert!((f - 0.9925).abs() < 1e-12);
    }

    #[test]
    fn two_qubit_depolarizing_alpha() {
        // Σ|Tr A_k|² = 16(1 - 15p/16) for n = 2
        let p = 0.01;
        let ch = depolarizing(2, p).unwrap();
        assert!((ch.trace_overlap() - 16.0 * (1.0 - 15.0 * p / 16.0)).abs() < 1e-12);
        assert!((decay_parameter(&ch) - 0.99).abs() < 1e-12);
    }

    #[test]
    fn amplitude_damping_limits() {
        let id = amplitude_damping(0.0).unwrap();
        assert!(max_abs(&(id.superoperator().liouville() - identity(4))) < 1e-15);
        let full = amplitude_damping(1.0).unwrap();
        let out = full.apply(DensityMatrix::basis_state(2, 1).unwrap().matrix());
        assert!(max_abs(&(out - DensityMatrix::basis_state(2, 0).unwrap().matrix())) < 1e-15);
        assert!(amplitude_damping(1.5).is_err());
    }

    #[test]
    fn two_qubit_amplitude_damping_fidelity() {
        let ch = tensor_power(&amplitude_damping(0.01).unwrap(), 2);
        let f = average_gate_fidelity(&ch).unwrap();
        assert!((f - closed_form_ad_fidelity(0.01)).abs() < 1e-12);
        assert!((f - 0.9920).abs() < 5e-5);
    }

    #[test]
    fn identity_fidelity_is_one() {
        for d in [2, 4, 8] {
            assert_eq!(average_gate_fidelity(&KrausChannel::identity(d)).unwrap(), 1.0);
        }
    }

    #[test]
    fn fidelity_rejects_non_cptp() {
        let ch = KrausChannel::new_unchecked(vec![identity(2) * c64(0.5, 0.0)]).unwrap();
        assert!(average_gate_fidelity(&ch).is_err());
    }

    #[test]
    fn fidelity_formulas_agree_for_depolarizing() {
        for n in [1, 2] {
            for p in [0.0, 0.003, 0.01, 0.2] {
                let via_kraus = average_gate_fidelity(&depolarizing(n, p).unwrap()).unwrap();
                let via_alpha = fidelity_from_alpha(1.0 - p, 1 << n).unwrap();
                assert!((via_kraus - via_alpha).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn fidelity_from_alpha_values() {
        assert_eq!(fidelity_from_alpha(1.0, 4).unwrap(), 1.0);
        assert!((fidelity_from_alpha(0.99, 4).unwrap() - 0.9925).abs() < 1e-15);
        assert!(fidelity_from_alpha(0.0, 4).is_err());
    }

    #[test]
    fn interleaved_fidelity_values() {
        let r = interleaved_fidelity(0.95, 0.95, 4).unwrap();
        assert_eq!(r.fidelity, 1.0);
        assert!(!r.unphysical);
        assert!(interleaved_fidelity(0.9, 0.95, 4).unwrap().unphysical);
        assert!(interleaved_fidelity(0.0, 0.5, 4).is_err());
        let f = interleaved_fidelity(0.96, 0.96 * 0.99, 4).unwrap().fidelity;
        assert!((f - 0.9925).abs() < 1e-12);
    }

    #[test]
    fn thermal_zero_gate_time_is_identity() {
        let t1 = Duration::from_ns(1e5);
        let ch = thermal_relaxation(t1, Duration::from_ns(2e4), Duration::from_ns(0.0)).unwrap();
        assert!(max_abs(&(ch.superoperator().liouville() - identity(4))) < 1e-15);
    }

    #[test]
    fn thermal_probabilities_from_formula() {
        let t1: Duration = "100ms".parse().unwrap();
        let t2: Duration = "20ms".parse().unwrap();
        let tg: Duration = "20ns".parse().unwrap();
        let (p_r, p_z) = thermal_probabilities(t1, t2, tg).unwrap();
        let expect_r = 1.0 - (-2e-7f64).exp();
        let expect_z = (1.0 - expect_r) * (1.0 - (-20.0 / 2e7 + 20.0 / 1e8f64).exp());
        assert!((p_r - expect_r).abs() < 1e-18);
        assert!((p_z - expect_z).abs() < 1e-18);
    }

    #[test]
    fn thermal_equal_times_has_no_dephasing() {
        let t = Duration::from_ns(5e4);
        let (_, p_z) = thermal_probabilities(t, t, Duration::from_ns(60.0)).unwrap();
        assert_eq!(p_z, 0.0);
    }

    #[test]
    fn thermal_rejects_t2_above_t1() {
        let r = thermal_relaxation(Duration::from_ns(10.0), Duration::from_ns(20.0), Duration::from_ns(1.0));
        assert!(r.is_err());
    }

    #[test]
    fn thermal_channel_matches_mixture() {
        let (t1, t2, tg) = (Duration::from_ns(1e3), Duration::from_ns(4e2), Duration::from_ns(50.0));
        let (p_r, p_z) = thermal_probabilities(t1, t2, tg).unwrap();
        let ch = thermal_relaxation(t1, t2, tg).unwrap();
        ch.check_cptp(1e-12).unwrap();
        let rho = CMatrix::from_row_slice(2, 2, &[c64(0.3, 0.), c64(0.2, 0.1), c64(0.2, -0.1), c64(0.7, 0.)]);
        let z = pauli::z();
        let mut ground = CMatrix::zeros(2, 2);
        ground[(0, 0)] = c64(1.0, 0.0);
        let expect = &rho * c64(1.0 - p_r - p_z, 0.0)
            + &z * &rho * &z * c64(p_z, 0.0)
            + ground * (rho.trace() * p_r);
        assert!(max_abs(&(ch.apply(&rho) - expect)) < 1e-15);
    }

    #[test]
    fn duration_parsing() {
        assert_eq!("100ms".parse::<Duration>().unwrap().ns(), 1e8);
        assert_eq!("2us".parse::<Duration>().unwrap().ns(), 2e3);
        assert_eq!("2µs".parse::<Duration>().unwrap().ns(), 2e3);
        assert_eq!("60".parse::<Duration>().unwrap().ns(), 60.0);
        assert!("fast".parse::<Duration>().is_err());
        let d: Duration = serde_json::from_str("\"20ns\"").unwrap();
        assert_eq!(d.ns(), 20.0);
        let d: Duration = serde_json::from_str("7.5").unwrap();
        assert_eq!(d.ns(), 7.5);
    }

    #[test]
    fn coherent_error_trivial_case() {
        let u = coherent_xy_error(1.3, 0.0, 0.0);
        assert!(max_abs(&(u.matrix() - identity(4))) < 1e-15);
    }

    #[test]
    fn coherent_error_matches_padé_exponential() {
        // H_XY and H_ZZ commute, so the error unitary is the exponential of the
        // summed generator; compare against an independent exponential.
        let (theta, dt, dz) = (0.9, 0.01, 0.01);
        let gen = (h_xy() * c64(dt, 0.0) + h_zz() * c64((theta + dt) * dz, 0.0)) * c64(0.0, -1.0);
        let oracle = gen.exp();
        let u = coherent_xy_error(theta, dt, dz);
        assert!(max_abs(&(u.matrix() - oracle)) < 1e-13);
    }

    #[test]
    fn noisy_xy_recomposes_to_full_generator() {
        let (theta, dt, dz) = (std::f64::consts::PI, 0.01, 0.01);
        let ideal = crate::groups::xy(theta);
        let noisy = coherent_xy_error(theta, dt, dz).then_after(&ideal).unwrap();
        let full = ((h_xy() + h_zz() * c64(dz, 0.0)) * c64(0.0, -(theta + dt))).exp();
        assert!(max_abs(&(noisy.matrix() - full)) < 1e-12);
    }

    #[test]
    fn coherent_error_infidelity_is_second_order() {
        let infid = |dt: f64| {
            let ch = KrausChannel::from_unitary(&coherent_xy_error(0.7, dt, 0.0));
            1.0 - average_gate_fidelity(&ch).unwrap()
        };
        let ratio = infid(0.02) / infid(0.01);
        assert!((ratio - 4.0).abs() < 0.2, "ratio {ratio}");
    }

    #[test]
    fn recipes_resolve_per_arity() {
        let model = NoiseModel::reference_depolarizing();
        assert!(model.noise_for(GateKind::U1, 1, None).unwrap().is_noiseless());
        let cx = model.noise_for(GateKind::Cnot, 2, None).unwrap();
        assert_eq!(cx.channel.unwrap().dim(), 4);
        let u2 = model.noise_for(GateKind::U2, 1, None).unwrap();
        let f = average_gate_fidelity(&u2.channel.unwrap()).unwrap();
        assert!((f - (1.0 - 0.002 / 2.0)).abs() < 1e-12);
    }

    #[test]
    fn theta_scaled_thermal_noise() {
        let recipe = vec![ChannelRecipe::ThermalRelaxation {
            t1: Duration::from_ns(1e5),
            t2: Duration::from_ns(2e4),
            gate_time: Duration::from_ns(60.0),
            scale_with_theta: true,
        }];
        let ctx = |theta| GateContext {
            arity: 2,
            theta: Some(theta),
            time_scale: 1.0,
        };
        let half = resolve_recipes(&recipe, ctx(std::f64::consts::FRAC_PI_2)).unwrap();
        let direct = tensor_power(
            &thermal_relaxation(Duration::from_ns(1e5), Duration::from_ns(2e4), Duration::from_ns(30.0)).unwrap(),
            2,
        );
        assert!(
            max_abs(&(half.channel.unwrap().superoperator().liouville() - direct.superoperator().liouville()))
                < 1e-15
        );
        let zero = resolve_recipes(&recipe, ctx(0.0)).unwrap();
        let f = average_gate_fidelity(&zero.channel.unwrap()).unwrap();
        assert!((f - 1.0).abs() < 1e-15);
    }

    #[test]
    fn noise_model_serde() {
        let json = r#"{"gates": {"cnot": [{"type": "depolarizing", "p": 0.01}],
                        "iswap": [{"type": "thermal_relaxation", "t1": "100us", "t2": "20us", "gate_time": "60ns"}]}}"#;
        let model: NoiseModel = serde_json::from_str(json).unwrap();
        model.validate().unwrap();
        assert_eq!(model.time_scale, 1.0);
        let back: NoiseModel = serde_json::from_str(&serde_json::to_string(&model).unwrap()).unwrap();
        assert_eq!(back, model);
        let bad = r#"{"gates": {"cnot": [{"type": "depolarizing", "p": 2.0}]}}"#;
        let model: NoiseModel = serde_json::from_str(bad).unwrap();
        assert!(model.validate().is_err());
    }
}
