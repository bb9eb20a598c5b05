//! Compilation of sampled gates into U1/U2/U3 + CNOT or iSWAP circuits.
//!
//! Generic two-qubit unitaries go through a magic-basis Cartan decomposition
//! `U = (A1⊗B1)·exp(i(aXX + bYY + cZZ))·(A2⊗B2)` and a fixed 3-CNOT template
//! for the nonlocal part. Cliffords are compiled from their canonical word
//! instead, which needs 0-3 CNOTs depending on the entangling class.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::DMatrix;
use num_complex::Complex64;
use once_cell::sync::Lazy;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::groups::{
    cnot, hadamard, iswap, single_qubit_cliffords, CliffordWord, EntanglingClass,
};
use crate::qcore::{c64, embed, identity, max_abs, CMatrix, UnitaryOp};

/// Gate kinds that noise can be attached to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateKind {
    U1,
    U2,
    U3,
    Cnot,
    Iswap,
    /// Parameterized XY(θ) gate, applied natively.
    Xy,
    /// Any other gate applied natively with its own noise entry.
    Native,
}

impl GateKind {
    /// Number of qubits, or `None` when it depends on the gate.
    pub fn arity(self) -> Option<usize> {
        match self {
            GateKind::U1 | GateKind::U2 | GateKind::U3 => Some(1),
            GateKind::Cnot | GateKind::Iswap | GateKind::Xy => Some(2),
            GateKind::Native => None,
        }
    }
}

/// Two-qubit basis gate for compilation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Basis {
    #[default]
    Cnot,
    Iswap,
}

pub fn u1(lambda: f64) -> CMatrix {
    u3(0.0, 0.0, lambda)
}

pub fn u2(phi: f64, lambda: f64) -> CMatrix {
    u3(FRAC_PI_2, phi, lambda)
}

pub fn u3(theta: f64, phi: f64, lambda: f64) -> CMatrix {
    let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    CMatrix::from_row_slice(
        2,
        2,
        &[
            c64(c, 0.0),
            -Complex64::from_polar(s, lambda),
            Complex64::from_polar(s, phi),
            Complex64::from_polar(c, phi + lambda),
        ],
    )
}

/// One gate of a compiled circuit.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "gate", rename_all = "snake_case")]
pub enum ElementaryGate {
    U1 {
        qubit: usize,
        lambda: f64,
    },
    U2 {
        qubit: usize,
        phi: f64,
        lambda: f64,
    },
    U3 {
        qubit: usize,
        theta: f64,
        phi: f64,
        lambda: f64,
    },
    Cnot {
        control: usize,
        target: usize,
    },
    Iswap {
        q0: usize,
        q1: usize,
    },
    /// Applied as-is, with noise looked up under `kind`.
    Native {
        qubits: Vec<usize>,
        #[serde(skip)]
        unitary: UnitaryOp,
        kind: GateKind,
        #[serde(skip_serializing_if = "Option::is_none")]
        theta: Option<f64>,
    },
}

impl ElementaryGate {
    pub fn kind(&self) -> GateKind {
        match self {
            ElementaryGate::U1 { .. } => GateKind::U1,
            ElementaryGate::U2 { .. } => GateKind::U2,
            ElementaryGate::U3 { .. } => GateKind::U3,
            ElementaryGate::Cnot { .. } => GateKind::Cnot,
            ElementaryGate::Iswap { .. } => GateKind::Iswap,
            ElementaryGate::Native { kind, .. } => *kind,
        }
    }

    pub fn qubits(&self) -> Vec<usize> {
        match self {
            ElementaryGate::U1 { qubit, .. }
            | ElementaryGate::U2 { qubit, .. }
            | ElementaryGate::U3 { qubit, .. } => vec![*qubit],
            ElementaryGate::Cnot { control, target } => vec![*control, *target],
            ElementaryGate::Iswap { q0, q1 } => vec![*q0, *q1],
            ElementaryGate::Native { qubits, .. } => qubits.clone(),
        }
    }

    /// Rotation angle; iSWAP counts as XY(π).
    pub fn theta(&self) -> Option<f64> {
        match self {
            ElementaryGate::Iswap { .. } => Some(std::f64::consts::PI),
            ElementaryGate::Native { theta, .. } => *theta,
            _ => None,
        }
    }

    /// Matrix on the gate's own qubits, in the order of [`Self::qubits`].
    pub fn matrix(&self) -> CMatrix {
        match *self {
            ElementaryGate::U1 { lambda, .. } => u1(lambda),
            ElementaryGate::U2 { phi, lambda, .. } => u2(phi, lambda),
            ElementaryGate::U3 {
                theta, phi, lambda, ..
            } => u3(theta, phi, lambda),
            ElementaryGate::Cnot { .. } => cnot().into_matrix(),
            ElementaryGate::Iswap { .. } => iswap().into_matrix(),
            ElementaryGate::Native { ref unitary, .. } => unitary.matrix().clone(),
        }
    }

    /// Matrix embedded in an `n`-qubit register.
    pub fn full_matrix(&self, n: usize) -> Result<CMatrix> {
        embed(&self.matrix(), &self.qubits(), n)
    }
}

/// An ordered gate list; the first gate acts first.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Circuit {
    pub num_qubits: usize,
    pub gates: Vec<ElementaryGate>,
}

impl Circuit {
    pub fn new(num_qubits: usize) -> Self {
        Circuit {
            num_qubits,
            gates: Vec::new(),
        }
    }

    pub fn count(&self, kind: GateKind) -> usize {
        self.gates.iter().filter(|g| g.kind() == kind).count()
    }

    pub fn append(&mut self, other: Circuit) {
        self.gates.extend(other.gates);
    }
}

/// Product of the circuit's gates.
pub fn recompose(c: &Circuit) -> Result<UnitaryOp> {
    let mut u = identity(1 << c.num_qubits);
    for g in &c.gates {
        u = g.full_matrix(c.num_qubits)? * u;
    }
    Ok(UnitaryOp::new_unchecked(u))
}

/// Tolerance on θ for the U1/U2 special cases.
pub const CLASSIFY_TOL: f64 = 1e-9;

/// Euler angles `(θ, φ, λ)` with `U ≅ U3(θ, φ, λ)`.
pub fn zyz_angles(u: &CMatrix) -> (f64, f64, f64) {
    let (a, b, c, d) = (u[(0, 0)], u[(0, 1)], u[(1, 0)], u[(1, 1)]);
    let theta = 2.0 * c.norm().atan2(a.norm());
    if c.norm() < 1e-14 {
        // Diagonal.
        (theta, 0.0, d.arg() - a.arg())
    } else if a.norm() < 1e-14 {
        // Anti-diagonal.
        let gamma = (-b).arg();
        (theta, c.arg() - gamma, 0.0)
    } else {
        let gamma = a.arg();
        (theta, c.arg() - gamma, (-b).arg() - gamma)
    }
}

/// Single-qubit gate as the cheapest of U1/U2/U3 that matches it.
pub fn zyz_decompose(u: &UnitaryOp, qubit: usize) -> Result<ElementaryGate> {
    if u.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            found: u.dim(),
        });
    }
    let (theta, phi, lambda) = zyz_angles(u.matrix());
    Ok(if theta.abs() < CLASSIFY_TOL {
        ElementaryGate::U1 {
            qubit,
            lambda: wrap(phi + lambda),
        }
    } else if (theta - FRAC_PI_2).abs() < CLASSIFY_TOL {
        ElementaryGate::U2 {
            qubit,
            phi: wrap(phi),
            lambda: wrap(lambda),
        }
    } else {
        ElementaryGate::U3 {
            qubit,
            theta,
            phi: wrap(phi),
            lambda: wrap(lambda),
        }
    })
}

fn wrap(x: f64) -> f64 {
    let y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y - 2.0 * PI
    } else {
        y
    }
}

fn rz(t: f64) -> CMatrix {
    CMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![
        Complex64::from_polar(1.0, -t / 2.0),
        Complex64::from_polar(1.0, t / 2.0),
    ]))
}

fn ry(t: f64) -> CMatrix {
    let (c, s) = ((t / 2.0).cos(), (t / 2.0).sin());
    CMatrix::from_row_slice(2, 2, &[c64(c, 0.0), c64(-s, 0.0), c64(s, 0.0), c64(c, 0.0)])
}

/// Split a 4×4 product operator into `A ⊗ B`, with `A`, `B` unitary. Returns
/// the factors and the max-entry residual of the split.
pub fn local_factors(u: &CMatrix) -> (CMatrix, CMatrix, f64) {
    // u[2i+j, 2k+l] = A[i,k] B[j,l]
    let mut best = (0, 0);
    let mut best_val = -1.0;
    for j in 0..2 {
        for l in 0..2 {
            let v: f64 = (0..2)
                .flat_map(|i| (0..2).map(move |k| (i, k)))
                .map(|(i, k)| u[(2 * i + j, 2 * k + l)].norm_sqr())
                .sum();
            if v > best_val {
                best_val = v;
                best = (j, l);
            }
        }
    }
    let (j0, l0) = best;
    let mut a = CMatrix::from_fn(2, 2, |i, k| u[(2 * i + j0, 2 * k + l0)]);
    let det = a[(0, 0)] * a[(1, 1)] - a[(0, 1)] * a[(1, 0)];
    if det.norm() < 1e-12 {
        return (identity(2), identity(2), f64::INFINITY);
    }
    a /= det.sqrt();
    let (i0, k0) = {
        let mut best = (0, 0);
        for i in 0..2 {
            for k in 0..2 {
                if a[(i, k)].norm() > a[best].norm() {
                    best = (i, k);
                }
            }
        }
        best
    };
    let b = CMatrix::from_fn(2, 2, |j, l| u[(2 * i0 + j, 2 * k0 + l)] / a[(i0, k0)]);
    let residual = max_abs(&(a.kronecker(&b) - u));
    (a, b, if residual.is_nan() { f64::INFINITY } else { residual })
}

fn magic_basis() -> CMatrix {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let z = c64(0.0, 0.0);
    let r = c64(h, 0.0);
    let i = c64(0.0, h);
    CMatrix::from_row_slice(
        4,
        4,
        &[
            r, z, z, i, //
            z, i, r, z, //
            z, i, -r, z, //
            r, z, z, -i,
        ],
    )
}

struct MagicData {
    q: CMatrix,
    /// Rows: XX, YY, ZZ eigenvalues and 1 for each magic-basis vector.
    sys: DMatrix<f64>,
    /// Inverse of the 4×4 system mapping (a, b, c, phase) to eigenphases.
    solve: DMatrix<f64>,
}

static MAGIC: Lazy<MagicData> = Lazy::new(|| {
    use crate::qcore::pauli;
    let q = magic_basis();
    let diag = |p: CMatrix| {
        let m = q.adjoint() * p.kronecker(&p) * &q;
        (0..4).map(|k| m[(k, k)].re).collect::<Vec<_>>()
    };
    let (xx, yy, zz) = (diag(pauli::x()), diag(pauli::y()), diag(pauli::z()));
    let sys = DMatrix::from_fn(4, 4, |k, j| match j {
        0 => xx[k],
        1 => yy[k],
        2 => zz[k],
        _ => 1.0,
    });
    let solve = sys.clone().try_inverse().expect("magic-basis system is invertible");
    MagicData { q, sys, solve }
});

/// Cartan decomposition `U = e^{iφ} (A1⊗B1) exp(i(aXX + bYY + cZZ)) (A2⊗B2)`.
#[derive(Debug, Clone)]
pub struct KakDecomposition {
    pub a1: CMatrix,
    pub b1: CMatrix,
    pub a2: CMatrix,
    pub b2: CMatrix,
    pub coefficients: [f64; 3],
    pub phase: f64,
}

impl KakDecomposition {
    pub fn unitary(&self) -> UnitaryOp {
        let [a, b, c] = self.coefficients;
        let n = nonlocal(a, b, c);
        let k1 = self.a1.kronecker(&self.b1);
        let k2 = self.a2.kronecker(&self.b2);
        UnitaryOp::new_unchecked(k1 * n * k2 * Complex64::from_polar(1.0, self.phase))
    }
}

/// `exp(i(aXX + bYY + cZZ))`.
pub fn nonlocal(a: f64, b: f64, c: f64) -> CMatrix {
    let m = &MAGIC;
    let phases = &m.sys;
    let d = CMatrix::from_diagonal(&nalgebra::DVector::from_fn(4, |k, _| {
        Complex64::from_polar(
            1.0,
            phases[(k, 0)] * a + phases[(k, 1)] * b + phases[(k, 2)] * c,
        )
    }));
    &m.q * d * m.q.adjoint()
}

const KAK_ATTEMPTS: usize = 16;

pub fn kak_decompose(u: &UnitaryOp) -> Result<KakDecomposition> {
    if u.dim() != 4 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            found: u.dim(),
        });
    }
    let m = &MAGIC;
    let det = u.matrix().determinant();
    let global = det.arg() / 4.0;
    let us = u.matrix() * Complex64::from_polar(1.0, -global);
    let up = m.q.adjoint() * &us * &m.q;
    let m2 = up.transpose() * &up;
    let re = m2.map(|z| z.re);
    let im = m2.map(|z| z.im);

    // The real and imaginary parts of M2 are commuting real symmetric
    // matrices; a generic combination shares their eigenvectors.
    let mut rng = ChaCha8Rng::seed_from_u64(0x6b616b);
    let mut worst = f64::INFINITY;
    for attempt in 0..KAK_ATTEMPTS {
        let r: f64 = if attempt == 0 { 0.6180339887 } else { rng.random_range(-2.0..2.0) };
        let eig = (&re + &im * r).symmetric_eigen();
        let mut p = eig.eigenvectors;
        if p.determinant() < 0.0 {
            p.column_mut(0).neg_mut();
        }
        let pc = p.map(|x| c64(x, 0.0));
        let d2 = pc.transpose() * &m2 * &pc;
        let off = (0..4)
            .flat_map(|i| (0..4).map(move |j| (i, j)))
            .filter(|(i, j)| i != j)
            .map(|(i, j)| d2[(i, j)].norm())
            .fold(0.0, f64::max);
        if off > 1e-9 {
            worst = worst.min(off);
            log::debug!("KAK diagonalization attempt {attempt} residual {off:e}");
            continue;
        }
        let mut angles: Vec<f64> = (0..4).map(|k| d2[(k, k)].arg() / 2.0).collect();
        let dinv = |angles: &[f64]| {
            CMatrix::from_diagonal(&nalgebra::DVector::from_fn(4, |k, _| {
                Complex64::from_polar(1.0, -angles[k])
            }))
        };
        let mut k1p = &up * &pc * dinv(&angles);
        if k1p.determinant().re < 0.0 {
            angles[0] += PI;
            k1p = &up * &pc * dinv(&angles);
        }
        let imag = k1p.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
        if imag > 1e-7 {
            worst = worst.min(imag);
            continue;
        }
        let theta = nalgebra::DVector::from_vec(angles);
        let sol = &m.solve * theta;
        let k1 = &m.q * &k1p * m.q.adjoint();
        let k2 = &m.q * pc.transpose() * m.q.adjoint();
        let (a1, b1, r1) = local_factors(&k1);
        let (a2, b2, r2) = local_factors(&k2);
        if r1 > 1e-8 || r2 > 1e-8 {
            worst = worst.min(r1.max(r2));
            continue;
        }
        let kak = KakDecomposition {
            a1,
            b1,
            a2,
            b2,
            coefficients: [sol[0], sol[1], sol[2]],
            phase: global + sol[3],
        };
        // Local factors are fixed only up to a sign each; fold it into the phase.
        let rebuilt = kak.unitary();
        let ratio = (rebuilt.matrix().adjoint() * u.matrix()).trace() / 4.0;
        let kak = KakDecomposition {
            phase: kak.phase + ratio.arg(),
            ..kak
        };
        return Ok(kak);
    }
    Err(Error::Numerical(format!(
        "Cartan decomposition failed after {KAK_ATTEMPTS} attempts (best residual {worst:e}, |det| = {:.3e})",
        det.norm()
    )))
}

/// One step of a circuit before single-qubit lowering.
enum Step {
    One(usize, CMatrix),
    Cnot(usize, usize),
    Iswap,
}

fn lower(steps: Vec<Step>, basis: Basis) -> Result<Circuit> {
    let mut expanded = Vec::new();
    for s in steps {
        match (s, basis) {
            (Step::Cnot(c, t), Basis::Iswap) => expanded.extend(cnot_via_iswap(c, t)),
            (s, _) => expanded.push(s),
        }
    }
    // Merge runs of single-qubit gates on the same qubit.
    let mut pending: [Option<CMatrix>; 2] = [None, None];
    let mut circuit = Circuit::new(2);
    let flush = |pending: &mut [Option<CMatrix>; 2], q: usize, c: &mut Circuit| -> Result<()> {
        if let Some(m) = pending[q].take() {
            c.gates.push(zyz_decompose(&UnitaryOp::new_unchecked(m), q)?);
        }
        Ok(())
    };
    for s in expanded {
        match s {
            Step::One(q, m) => {
                pending[q] = Some(match pending[q].take() {
                    Some(prev) => m * prev,
                    None => m,
                });
            }
            Step::Cnot(c, t) => {
                flush(&mut pending, 0, &mut circuit)?;
                flush(&mut pending, 1, &mut circuit)?;
                circuit.gates.push(ElementaryGate::Cnot {
                    control: c,
                    target: t,
                });
            }
            Step::Iswap => {
                flush(&mut pending, 0, &mut circuit)?;
                flush(&mut pending, 1, &mut circuit)?;
                circuit.gates.push(ElementaryGate::Iswap { q0: 0, q1: 1 });
            }
        }
    }
    flush(&mut pending, 0, &mut circuit)?;
    flush(&mut pending, 1, &mut circuit)?;
    Ok(circuit)
}

/// Local correction in `CNOT₀₁ = (L0⊗L1)·iSWAP·(I⊗H)·iSWAP·(H⊗H)`.
static ISWAP_CORRECTION: Lazy<(CMatrix, CMatrix)> = Lazy::new(|| {
    let h = hadamard().into_matrix();
    let i2 = identity(2);
    let is = iswap().into_matrix();
    let core = &is * i2.kronecker(&h) * &is * h.kronecker(&h);
    let rest = cnot().into_matrix() * core.adjoint();
    let (a, b, residual) = local_factors(&rest);
    assert!(residual < 1e-12, "CNOT/iSWAP identity is not local: {residual}");
    (a, b)
});

fn cnot_via_iswap(control: usize, target: usize) -> Vec<Step> {
    let h = hadamard().into_matrix();
    let (l_c, l_t) = ISWAP_CORRECTION.clone();
    vec![
        Step::One(0, h.clone()),
        Step::One(1, h.clone()),
        Step::Iswap,
        Step::One(target, h),
        Step::Iswap,
        Step::One(control, l_c),
        Step::One(target, l_t),
    ]
}

/// Compile a two-qubit unitary with the fixed 3-CNOT template. Product
/// unitaries compile to single-qubit gates only.
pub fn kak_compile(u: &UnitaryOp, basis: Basis) -> Result<Circuit> {
    if u.dim() != 4 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            found: u.dim(),
        });
    }
    let (a, b, residual) = local_factors(u.matrix());
    if residual < 1e-10 {
        return lower(vec![Step::One(0, a), Step::One(1, b)], basis);
    }
    let k = kak_decompose(u)?;
    let [ca, cb, cc] = k.coefficients;
    let t1 = FRAC_PI_2 - 2.0 * cc;
    let t2 = 2.0 * ca - FRAC_PI_2;
    let t3 = FRAC_PI_2 - 2.0 * cb;
    let steps = vec![
        Step::One(0, k.a2.clone()),
        Step::One(1, rz(-FRAC_PI_2) * &k.b2),
        Step::Cnot(1, 0),
        Step::One(0, rz(t1)),
        Step::One(1, ry(t2)),
        Step::Cnot(0, 1),
        Step::One(1, ry(t3)),
        Step::Cnot(1, 0),
        Step::One(0, &k.a1 * rz(FRAC_PI_2)),
        Step::One(1, k.b1.clone()),
    ];
    lower(steps, basis)
}

/// Single-qubit Clifford `index` as one elementary gate.
pub fn single_clifford_gate(index: usize, qubit: usize) -> Result<ElementaryGate> {
    let u = single_qubit_cliffords()
        .get(index)
        .ok_or_else(|| Error::Config(format!("single-qubit Clifford index {index} out of range")))?;
    zyz_decompose(u, qubit)
}

/// Compile a two-qubit Clifford from its canonical word.
pub fn clifford_compile(word: &CliffordWord, basis: Basis) -> Result<Circuit> {
    let mut steps = Vec::new();
    if let Some((s, t)) = word.first_layer() {
        steps.push(Step::One(0, s.matrix().clone()));
        steps.push(Step::One(1, t.matrix().clone()));
    }
    match word.class {
        EntanglingClass::Local => {}
        EntanglingClass::CnotLike => steps.push(Step::Cnot(0, 1)),
        EntanglingClass::IswapLike => {
            steps.push(Step::Cnot(0, 1));
            steps.push(Step::Cnot(1, 0));
        }
        EntanglingClass::SwapLike => {
            steps.push(Step::Cnot(0, 1));
            steps.push(Step::Cnot(1, 0));
            steps.push(Step::Cnot(0, 1));
        }
    }
    let (a, b) = word.last_layer();
    steps.push(Step::One(0, a.matrix().clone()));
    steps.push(Step::One(1, b.matrix().clone()));
    lower(steps, basis)
}

/// Compile any one- or two-qubit unitary: a single U gate for one qubit, the
/// Cartan template for two.
pub fn compile_unitary(u: &UnitaryOp, basis: Basis) -> Result<Circuit> {
    match u.dim() {
        2 => Ok(Circuit {
            num_qubits: 1,
            gates: vec![zyz_decompose(u, 0)?],
        }),
        4 => kak_compile(u, basis),
        d => Err(Error::Unsupported(format!("compiling a {d}-dimensional unitary"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::groups::{cnot_reversed, haar_sample, swap, two_qubit_cliffords, TWO_QUBIT_CLIFFORD_COUNT};
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn u_gate_definitions() {
        let h = hadamard();
        assert!(UnitaryOp::new_unchecked(u2(0.0, PI)).phase_equal(&h, 1e-12));
        assert!(max_abs(&(u1(0.3) - u3(0.0, 0.0, 0.3))) < 1e-15);
        let s = crate::groups::s_gate();
        assert!(UnitaryOp::new_unchecked(u1(FRAC_PI_2)).phase_equal(&s, 1e-12));
    }

    #[test]
    fn identity_is_u1_zero() {
        let g = zyz_decompose(&UnitaryOp::identity(2), 0).unwrap();
        assert_eq!(g, ElementaryGate::U1 { qubit: 0, lambda: 0.0 });
    }

    #[test]
    fn hadamard_is_u2_0_pi() {
        match zyz_decompose(&hadamard(), 0).unwrap() {
            ElementaryGate::U2 { phi, lambda, .. } => {
                assert!(phi.abs() < 1e-12);
                assert!((lambda.abs() - PI).abs() < 1e-12);
            }
            g => panic!("expected U2, got {g:?}"),
        }
    }

    #[test]
    fn zyz_edge_cases() {
        let x = UnitaryOp::new_unchecked(crate::qcore::pauli::x());
        let y = UnitaryOp::new_unchecked(crate::qcore::pauli::y());
        let z = UnitaryOp::new_unchecked(crate::qcore::pauli::z());
        for u in [x, y, z] {
            let g = zyz_decompose(&u, 0).unwrap();
            assert!(UnitaryOp::new_unchecked(g.matrix()).phase_equal(&u, 1e-12));
        }
    }

    #[test]
    fn single_qubit_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let u = haar_sample(2, &mut rng);
            let g = zyz_decompose(&u, 0).unwrap();
            assert!(UnitaryOp::new_unchecked(g.matrix()).phase_equal(&u, 1e-10));
        }
    }

    #[test]
    fn template_matches_nonlocal_part() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let (a, b, c): (f64, f64, f64) = (rng.random(), rng.random(), rng.random());
            let n = UnitaryOp::new_unchecked(nonlocal(a, b, c));
            let c10 = cnot_reversed().into_matrix();
            let c01 = cnot().into_matrix();
            let i2 = identity(2);
            let t = rz(FRAC_PI_2).kronecker(&i2)
                * &c10
                * i2.kronecker(&ry(FRAC_PI_2 - 2.0 * b))
                * &c01
                * rz(FRAC_PI_2 - 2.0 * c).kronecker(&ry(2.0 * a - FRAC_PI_2))
                * &c10
                * i2.kronecker(&rz(-FRAC_PI_2));
            assert!(UnitaryOp::new_unchecked(t).phase_equal(&n, 1e-12));
        }
    }

    #[test]
    fn nonlocal_matches_exponential() {
        use crate::qcore::pauli;
        let (a, b, c) = (0.3, -0.7, 1.1);
        let g = (pauli::x().kronecker(&pauli::x()) * c64(a, 0.0)
            + pauli::y().kronecker(&pauli::y()) * c64(b, 0.0)
            + pauli::z().kronecker(&pauli::z()) * c64(c, 0.0))
            * c64(0.0, 1.0);
        assert!(max_abs(&(g.exp() - nonlocal(a, b, c))) < 1e-12);
    }

    #[test]
    fn iswap_expansion_identity() {
        for (c, t, reference) in [(0, 1, cnot()), (1, 0, cnot_reversed())] {
            let circuit = lower(vec![Step::Cnot(c, t)], Basis::Iswap).unwrap();
            assert_eq!(circuit.count(GateKind::Iswap), 2);
            assert!(recompose(&circuit).unwrap().phase_equal(&reference, 1e-12));
        }
    }

    #[test]
    fn identity_compiles_to_single_qubit_gates() {
        for basis in [Basis::Cnot, Basis::Iswap] {
            let c = kak_compile(&UnitaryOp::identity(4), basis).unwrap();
            assert_eq!(c.gates.len(), 2);
            assert!(c.gates.iter().all(|g| matches!(g, ElementaryGate::U1 { .. })));
        }
    }

    #[test]
    fn cnot_compiles_through_template() {
        let c = kak_compile(&cnot(), Basis::Cnot).unwrap();
        assert_eq!(c.count(GateKind::Cnot), 3);
        assert!(recompose(&c).unwrap().phase_equal(&cnot(), 1e-9));
        let c = kak_compile(&swap(), Basis::Cnot).unwrap();
        assert!(recompose(&c).unwrap().phase_equal(&swap(), 1e-9));
    }

    #[test]
    fn haar_round_trip_both_bases() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..1000 {
            let u = haar_sample(4, &mut rng);
            let c = kak_compile(&u, Basis::Cnot).unwrap();
            assert_eq!(c.count(GateKind::Cnot), 3);
            assert!(c.gates.len() <= 11);
            assert!(recompose(&c).unwrap().phase_distance(&u) < 1e-9);
            let c = kak_compile(&u, Basis::Iswap).unwrap();
            assert_eq!(c.count(GateKind::Iswap), 6);
            assert_eq!(c.count(GateKind::Cnot), 0);
            assert!(recompose(&c).unwrap().phase_distance(&u) < 1e-9);
        }
    }

    #[test]
    fn kak_reconstructs_with_phase() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let u = haar_sample(4, &mut rng);
        let k = kak_decompose(&u).unwrap();
        assert!(max_abs(&(k.unitary().into_matrix() - u.matrix())) < 1e-10);
    }

    #[test]
    fn clifford_words_compile_exactly() {
        let mut total = 0;
        for i in (0..TWO_QUBIT_CLIFFORD_COUNT).step_by(7) {
            let w = CliffordWord::from_index(i).unwrap();
            let expected = match w.class {
                EntanglingClass::Local => 0,
                EntanglingClass::CnotLike => 1,
                EntanglingClass::IswapLike => 2,
                EntanglingClass::SwapLike => 3,
            };
            let c = clifford_compile(&w, Basis::Cnot).unwrap();
            assert_eq!(c.count(GateKind::Cnot), expected);
            let u = &two_qubit_cliffords()[i];
            assert!(recompose(&c).unwrap().phase_equal(u, 1e-10));
            let c = clifford_compile(&w, Basis::Iswap).unwrap();
            assert_eq!(c.count(GateKind::Iswap), 2 * expected);
            assert!(recompose(&c).unwrap().phase_equal(u, 1e-10));
            total += expected;
        }
        assert!(total > 0);
    }

    #[test]
    fn clifford_average_cnot_count_is_one_and_a_half() {
        let total: usize = (0..TWO_QUBIT_CLIFFORD_COUNT)
            .map(|i| match CliffordWord::from_index(i).unwrap().class {
                EntanglingClass::Local => 0,
                EntanglingClass::CnotLike => 1,
                EntanglingClass::IswapLike => 2,
                EntanglingClass::SwapLike => 3,
            })
            .sum();
        assert_eq!(2 * total, 3 * TWO_QUBIT_CLIFFORD_COUNT);
    }

    #[test]
    fn recompose_basics() {
        assert_eq!(recompose(&Circuit::new(2)).unwrap(), UnitaryOp::identity(4));
        let c = Circuit {
            num_qubits: 2,
            gates: vec![ElementaryGate::Cnot { control: 0, target: 1 }],
        };
        assert!(recompose(&c).unwrap().phase_equal(&cnot(), 0.0));
        let bad = Circuit {
            num_qubits: 2,
            gates: vec![ElementaryGate::U1 { qubit: 2, lambda: 0.0 }],
        };
        assert!(recompose(&bad).is_err());
    }

    #[test]
    fn gate_kind_serde_names() {
        let s = serde_json::to_string(&[GateKind::U1, GateKind::Cnot, GateKind::Iswap, GateKind::Xy]).unwrap();
        assert_eq!(s, r#"["u1","cnot","iswap","xy"]"#);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn emitted_single_qubit_gates_match_their_forms(seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let u = haar_sample(4, &mut rng);
            let c = kak_compile(&u, Basis::Cnot).unwrap();
            for g in &c.gates {
                match *g {
                    ElementaryGate::U1 { lambda, .. } => {
                        prop_assert!(max_abs(&(g.matrix() - u3(0.0, 0.0, lambda))) < 1e-10)
                    }
                    ElementaryGate::U2 { phi, lambda, .. } => {
                        prop_assert!(max_abs(&(g.matrix() - u3(FRAC_PI_2, phi, lambda))) < 1e-10)
                    }
                    ElementaryGate::U3 { theta, .. } => prop_assert!(theta > CLASSIFY_TOL),
                    _ => {}
                }
            }
            prop_assert!(recompose(&c).unwrap().phase_distance(&u) < 1e-9);
        }
    }
}
