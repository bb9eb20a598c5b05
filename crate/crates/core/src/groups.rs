//! Random gate sampling and group arithmetic.
//!
//! Haar samples come from QR of a complex Ginibre matrix with the phases of
//! `R`'s diagonal pushed back into `Q`. Clifford samples are drawn by a
//! uniform index into an explicit enumeration: 24 single-qubit elements for one
//! qubit, and for two qubits the canonical product form
//!
//! ```text
//!   (C1 ⊗ C1)                              576
//!   (C1 ⊗ C1) · CNOT · (S1 ⊗ S1)           5184
//!   (C1 ⊗ C1) · CNOT₁₀ CNOT₀₁ · (S1 ⊗ S1)  5184
//!   (C1 ⊗ C1) · SWAP                       576
//! ```
//!
//! where `S1` is the order-3 subgroup generated by `S·H`. All elements are
//! identified modulo global phase.

use std::collections::HashMap;

use nalgebra::DVector;
use num_complex::Complex64;
use once_cell::sync::Lazy;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qcore::{c64, CMatrix, UnitaryOp};

fn real_matrix(n: usize, entries: &[f64]) -> CMatrix {
    CMatrix::from_row_slice(n, n, &entries.iter().map(|&x| c64(x, 0.0)).collect::<Vec<_>>())
}

pub fn hadamard() -> UnitaryOp {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    UnitaryOp::new_unchecked(real_matrix(2, &[h, h, h, -h]))
}

pub fn s_gate() -> UnitaryOp {
    UnitaryOp::new_unchecked(CMatrix::from_diagonal(&DVector::from_vec(vec![
        c64(1.0, 0.0),
        c64(0.0, 1.0),
    ])))
}

/// CNOT with qubit 0 as control.
pub fn cnot() -> UnitaryOp {
    UnitaryOp::new_unchecked(real_matrix(
        4,
        &[1., 0., 0., 0., 0., 1., 0., 0., 0., 0., 0., 1., 0., 0., 1., 0.],
    ))
}

/// CNOT with qubit 1 as control.
pub fn cnot_reversed() -> UnitaryOp {
    UnitaryOp::new_unchecked(real_matrix(
        4,
        &[1., 0., 0., 0., 0., 0., 0., 1., 0., 0., 1., 0., 0., 1., 0., 0.],
    ))
}

pub fn swap() -> UnitaryOp {
    UnitaryOp::new_unchecked(real_matrix(
        4,
        &[1., 0., 0., 0., 0., 0., 1., 0., 0., 1., 0., 0., 0., 0., 0., 1.],
    ))
}

pub fn cz() -> UnitaryOp {
    UnitaryOp::new_unchecked(real_matrix(
        4,
        &[1., 0., 0., 0., 0., 1., 0., 0., 0., 0., 1., 0., 0., 0., 0., -1.],
    ))
}

/// `XY(θ) = exp(-iθ H_XY)` with `H_XY = -(XX + YY)/4`.
pub fn xy(theta: f64) -> UnitaryOp {
    let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    let z = c64(0.0, 0.0);
    let one = c64(1.0, 0.0);
    UnitaryOp::new_unchecked(CMatrix::from_row_slice(
        4,
        4,
        &[
            one, z, z, z, //
            z, c64(c, 0.0), c64(0.0, s), z, //
            z, c64(0.0, s), c64(c, 0.0), z, //
            z, z, z, one,
        ],
    ))
}

pub fn iswap() -> UnitaryOp {
    xy(std::f64::consts::PI)
}

/// Haar-random element of U(d).
pub fn haar_sample<R: Rng + ?Sized>(d: usize, rng: &mut R) -> UnitaryOp {
    let scale = std::f64::consts::FRAC_1_SQRT_2;
    let ginibre = CMatrix::from_fn(d, d, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        c64(re * scale, im * scale)
    });
    let qr = ginibre.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..d {
        let rjj = r[(j, j)];
        let phase = if rjj.norm() > 0.0 {
            rjj / rjj.norm()
        } else {
            c64(1.0, 0.0)
        };
        let mut col = q.column_mut(j);
        col *= phase;
    }
    UnitaryOp::new_unchecked(q)
}

/// Hashable representative of a unitary modulo global phase.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PhaseKey(Vec<(i64, i64)>);

impl PhaseKey {
    pub fn of(u: &UnitaryOp) -> Self {
        let m = u.matrix();
        let pivot = m
            .iter()
            .find(|z| z.norm() > 1e-3)
            .copied()
            .unwrap_or(c64(1.0, 0.0));
        let phase = pivot.conj() / pivot.norm();
        PhaseKey(
            m.iter()
                .map(|z| {
                    let w = z * phase;
                    ((w.re * 1e6).round() as i64, (w.im * 1e6).round() as i64)
                })
                .collect(),
        )
    }
}

/// Closure of a generating set under multiplication, modulo phase, in
/// breadth-first order starting from the identity.
pub fn closure(generators: &[UnitaryOp], limit: usize) -> Result<Vec<UnitaryOp>> {
    let d = generators
        .first()
        .map(|g| g.dim())
        .ok_or_else(|| Error::Config("empty generating set".into()))?;
    let id = UnitaryOp::identity(d);
    let mut seen = HashMap::new();
    seen.insert(PhaseKey::of(&id), 0usize);
    let mut elements = vec![id];
    let mut frontier = 0;
    while frontier < elements.len() {
        let current = elements[frontier].clone();
        frontier += 1;
        for g in generators {
            let next = g.then_after(&current)?;
            let key = PhaseKey::of(&next);
            if let std::collections::hash_map::Entry::Vacant(slot) = seen.entry(key) {
                slot.insert(elements.len());
                elements.push(next);
                if elements.len() > limit {
                    return Err(Error::Numerical(format!(
                        "group closure exceeded {limit} elements"
                    )));
                }
            }
        }
    }
    Ok(elements)
}

struct SingleQubitCliffords {
    elements: Vec<UnitaryOp>,
    index: HashMap<PhaseKey, usize>,
    /// Indices of the order-3 subgroup {I, SH, (SH)²}.
    s1: [usize; 3],
}

static C1: Lazy<SingleQubitCliffords> = Lazy::new(|| {
    let elements = closure(&[hadamard(), s_gate()], 24).expect("single-qubit Clifford closure");
    assert_eq!(elements.len(), 24);
    let index: HashMap<_, _> = elements
        .iter()
        .enumerate()
        .map(|(i, u)| (PhaseKey::of(u), i))
        .collect();
    let r = s_gate().then_after(&hadamard()).expect("2x2");
    let r2 = r.then_after(&r).expect("2x2");
    let s1 = [
        index[&PhaseKey::of(&UnitaryOp::identity(2))],
        index[&PhaseKey::of(&r)],
        index[&PhaseKey::of(&r2)],
    ];
    SingleQubitCliffords { elements, index, s1 }
});

/// The 24 single-qubit Cliffords (modulo phase) in canonical order.
pub fn single_qubit_cliffords() -> &'static [UnitaryOp] {
    &C1.elements
}

/// Index of the order-3 subgroup elements within [`single_qubit_cliffords`].
pub fn s1_indices() -> [usize; 3] {
    C1.s1
}

pub fn single_qubit_clifford_index(u: &UnitaryOp) -> Option<usize> {
    C1.index.get(&PhaseKey::of(u)).copied()
}

/// Entangling class of a two-qubit Clifford in canonical form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntanglingClass {
    Local,
    CnotLike,
    IswapLike,
    SwapLike,
}

/// Canonical product form of a two-qubit Clifford. `a`, `b` index the final
/// local layer on qubits 0 and 1; `s`, `t` index `S1` on qubits 0 and 1 for
/// the two entangling classes that use it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CliffordWord {
    pub class: EntanglingClass,
    pub a: u8,
    pub b: u8,
    pub s: u8,
    pub t: u8,
}

pub const TWO_QUBIT_CLIFFORD_COUNT: usize = 11520;

impl CliffordWord {
    pub fn from_index(index: usize) -> Result<Self> {
        if index >= TWO_QUBIT_CLIFFORD_COUNT {
            return Err(Error::Config(format!("Clifford index {index} out of range")));
        }
        let local = |i: usize| ((i / 24) as u8, (i % 24) as u8);
        let word = if index < 576 {
            let (a, b) = local(index);
            CliffordWord { class: EntanglingClass::Local, a, b, s: 0, t: 0 }
        } else if index < 576 + 5184 * 2 {
            let rem = (index - 576) % 5184;
            let class = if index < 576 + 5184 {
                EntanglingClass::CnotLike
            } else {
                EntanglingClass::IswapLike
            };
            let (a, b) = local(rem / 9);
            CliffordWord { class, a, b, s: ((rem % 9) / 3) as u8, t: (rem % 3) as u8 }
        } else {
            let (a, b) = local(index - 576 - 2 * 5184);
            CliffordWord { class: EntanglingClass::SwapLike, a, b, s: 0, t: 0 }
        };
        Ok(word)
    }

    pub fn index(&self) -> usize {
        let local = self.a as usize * 24 + self.b as usize;
        let st = self.s as usize * 3 + self.t as usize;
        match self.class {
            EntanglingClass::Local => local,
            EntanglingClass::CnotLike => 576 + local * 9 + st,
            EntanglingClass::IswapLike => 576 + 5184 + local * 9 + st,
            EntanglingClass::SwapLike => 576 + 2 * 5184 + local,
        }
    }

    /// Single-qubit Clifford for the first local layer, or `None` for the
    /// classes without one.
    pub fn first_layer(&self) -> Option<(&'static UnitaryOp, &'static UnitaryOp)> {
        match self.class {
            EntanglingClass::CnotLike | EntanglingClass::IswapLike => {
                let s1 = s1_indices();
                Some((
                    &single_qubit_cliffords()[s1[self.s as usize]],
                    &single_qubit_cliffords()[s1[self.t as usize]],
                ))
            }
            _ => None,
        }
    }

    pub fn last_layer(&self) -> (&'static UnitaryOp, &'static UnitaryOp) {
        (
            &single_qubit_cliffords()[self.a as usize],
            &single_qubit_cliffords()[self.b as usize],
        )
    }

    pub fn unitary(&self) -> UnitaryOp {
        let (a, b) = self.last_layer();
        let last = a.tensor(b);
        let middle = match self.class {
            EntanglingClass::Local => UnitaryOp::identity(4),
            EntanglingClass::CnotLike => cnot(),
            EntanglingClass::IswapLike => cnot_reversed().then_after(&cnot()).expect("4x4"),
            EntanglingClass::SwapLike => swap(),
        };
        let first = match self.first_layer() {
            Some((s, t)) => s.tensor(t),
            None => UnitaryOp::identity(4),
        };
        last.then_after(&middle)
            .and_then(|u| u.then_after(&first))
            .expect("4x4 product")
    }
}

struct TwoQubitCliffords {
    elements: Vec<UnitaryOp>,
    index: HashMap<PhaseKey, usize>,
}

static C2: Lazy<TwoQubitCliffords> = Lazy::new(|| {
    let elements: Vec<UnitaryOp> = (0..TWO_QUBIT_CLIFFORD_COUNT)
        .map(|i| CliffordWord::from_index(i).expect("in range").unitary())
        .collect();
    let index: HashMap<_, _> = elements
        .iter()
        .enumerate()
        .map(|(i, u)| (PhaseKey::of(u), i))
        .collect();
    TwoQubitCliffords { elements, index }
});

/// All 11520 two-qubit Cliffords modulo phase, indexed canonically.
pub fn two_qubit_cliffords() -> &'static [UnitaryOp] {
    &C2.elements
}

/// Number of distinct elements in the canonical index space.
pub fn two_qubit_clifford_distinct_count() -> usize {
    C2.index.len()
}

/// Canonical word of a two-qubit Clifford, if `u` is one.
pub fn two_qubit_clifford_word(u: &UnitaryOp) -> Option<CliffordWord> {
    C2.index
        .get(&PhaseKey::of(u))
        .map(|&i| CliffordWord::from_index(i).expect("stored index in range"))
}

/// Uniform Clifford sample on `n_qubits ∈ {1, 2}`.
pub fn clifford_sample<R: Rng + ?Sized>(n_qubits: usize, rng: &mut R) -> Result<UnitaryOp> {
    match n_qubits {
        1 => Ok(single_qubit_cliffords()[rng.random_range(0..24)].clone()),
        2 => Ok(two_qubit_cliffords()[rng.random_range(0..TWO_QUBIT_CLIFFORD_COUNT)].clone()),
        n => Err(Error::Unsupported(format!("Clifford sampling on {n} qubits"))),
    }
}

/// Returns `g_end · (g_m ··· g_1)⁻¹`.
pub fn invert_product(gates: &[UnitaryOp], g_end: &UnitaryOp) -> Result<UnitaryOp> {
    let d = g_end.dim();
    let mut product = UnitaryOp::identity(d);
    for g in gates {
        product = g.then_after(&product)?;
    }
    g_end.then_after(&product.dagger())
}

/// Which group the random gates are drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupKind {
    /// The full unitary group (fully randomized benchmarking).
    Haar,
    Clifford,
}

/// A gate group on `n_qubits` qubits.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GateGroup {
    pub kind: GroupKind,
    pub n_qubits: usize,
}

/// A sampled group element. Clifford elements carry their canonical index so
/// they can be compiled from their product form.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupElement {
    pub unitary: UnitaryOp,
    pub clifford_index: Option<usize>,
}

impl GateGroup {
    pub fn new(kind: GroupKind, n_qubits: usize) -> Result<Self> {
        match (kind, n_qubits) {
            (_, 0) => Err(Error::Config("group needs at least one qubit".into())),
            (GroupKind::Clifford, n) if n > 2 => {
                Err(Error::Unsupported(format!("Clifford group on {n} qubits")))
            }
            (GroupKind::Haar, n) if n > 4 => {
                Err(Error::Unsupported(format!("Haar sampling on {n} qubits")))
            }
            _ => Ok(GateGroup { kind, n_qubits }),
        }
    }

    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> GroupElement {
        match self.kind {
            GroupKind::Haar => GroupElement {
                unitary: haar_sample(self.dim(), rng),
                clifford_index: None,
            },
            GroupKind::Clifford => {
                let (index, unitary) = if self.n_qubits == 1 {
                    let i = rng.random_range(0..24);
                    (i, single_qubit_cliffords()[i].clone())
                } else {
                    let i = rng.random_range(0..TWO_QUBIT_CLIFFORD_COUNT);
                    (i, two_qubit_cliffords()[i].clone())
                };
                GroupElement {
                    unitary,
                    clifford_index: Some(index),
                }
            }
        }
    }

    /// Wrap a unitary as an element of this group, locating its canonical
    /// index for Clifford groups.
    pub fn element(&self, unitary: UnitaryOp) -> Result<GroupElement> {
        if unitary.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: unitary.dim(),
            });
        }
        let clifford_index = match self.kind {
            GroupKind::Haar => None,
            GroupKind::Clifford => {
                let idx = if self.n_qubits == 1 {
                    single_qubit_clifford_index(&unitary)
                } else {
                    two_qubit_clifford_word(&unitary).map(|w| w.index())
                };
                Some(idx.ok_or_else(|| {
                    Error::Config("gate is not in the Clifford group".into())
                })?)
            }
        };
        Ok(GroupElement {
            unitary,
            clifford_index,
        })
    }
}

/// `|Tr U|²`.
pub fn trace_overlap(u: &UnitaryOp) -> f64 {
    let t: Complex64 = u.matrix().trace();
    t.norm_sqr()
}
