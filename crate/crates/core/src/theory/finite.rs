//! Finite groups of unitaries, their Pauli-transfer representation and its
//! decomposition into irreducibles.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::field::orthonormal_range;
use crate::error::{Error, Result};
use crate::groups::{self, PhaseKey};
use crate::qcore::{pauli, unitary_to_superop, CMatrix, Superoperator, UnitaryOp};

/// Groups the theory module knows how to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BuiltinGroup {
    Trivial,
    Z2,
    Klein,
    Clifford1,
}

impl BuiltinGroup {
    pub const ALL: [BuiltinGroup; 4] = [
        BuiltinGroup::Trivial,
        BuiltinGroup::Z2,
        BuiltinGroup::Klein,
        BuiltinGroup::Clifford1,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BuiltinGroup::Trivial => "trivial",
            BuiltinGroup::Z2 => "z2",
            BuiltinGroup::Klein => "klein",
            BuiltinGroup::Clifford1 => "clifford1",
        }
    }

    fn generators(self) -> Vec<UnitaryOp> {
        let u = |m: CMatrix| UnitaryOp::new_unchecked(m);
        match self {
            BuiltinGroup::Trivial => vec![UnitaryOp::identity(2)],
            BuiltinGroup::Z2 => vec![u(pauli::x())],
            BuiltinGroup::Klein => vec![u(pauli::x()), u(pauli::z())],
            BuiltinGroup::Clifford1 => vec![groups::hadamard(), groups::s_gate()],
        }
    }
}

impl fmt::Display for BuiltinGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BuiltinGroup {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BuiltinGroup::ALL
            .into_iter()
            .find(|g| g.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::Config(format!("unknown group `{s}`")))
    }
}

/// An irreducible representation, real orthogonal on every element.
#[derive(Debug, Clone)]
pub struct Irrep {
    pub dim: usize,
    /// Copies inside the Pauli-transfer representation.
    pub multiplicity: usize,
    pub character: Vec<f64>,
    /// Whether the matrices were read off the transfer representation
    /// (exact) rather than extracted numerically.
    pub exact: bool,
    matrices: Vec<DMatrix<f64>>,
    isometry: DMatrix<f64>,
}

impl Irrep {
    pub fn matrix(&self, g: usize) -> &DMatrix<f64> {
        &self.matrices[g]
    }

    /// Orthonormal columns spanning the isotypic component in operator space.
    pub fn isometry(&self) -> &DMatrix<f64> {
        &self.isometry
    }

    pub fn is_trivial(&self) -> bool {
        self.dim == 1 && self.character.iter().all(|&c| c == 1.0)
    }
}

/// A finite group of unitaries (modulo phase) with its reference
/// representation `ω` on operator space, written in the orthonormal Pauli
/// basis `P_k/√d`.
#[derive(Debug, Clone)]
pub struct FiniteGroupRep {
    name: String,
    d: usize,
    elements: Vec<UnitaryOp>,
    table: Vec<usize>,
    inverse: Vec<usize>,
    omega: Vec<DMatrix<f64>>,
    irreps: Vec<Irrep>,
    paulis: Vec<CMatrix>,
}

impl FiniteGroupRep {
    pub fn builtin(group: BuiltinGroup) -> Result<Self> {
        Self::from_generators(group.name(), &group.generators())
    }

    pub fn from_generators(name: &str, generators: &[UnitaryOp]) -> Result<Self> {
        let elements = groups::closure(generators, 4096)?;
        let d = elements[0].dim();
        if !d.is_power_of_two() {
            return Err(Error::Unsupported(format!("dimension {d} is not a qubit register")));
        }
        let n = elements.len();
        let index: HashMap<PhaseKey, usize> = elements
            .iter()
            .enumerate()
            .map(|(i, u)| (PhaseKey::of(u), i))
            .collect();
        let mut table = vec![0; n * n];
        for a in 0..n {
            for b in 0..n {
                let ab = UnitaryOp::new_unchecked(elements[a].matrix() * elements[b].matrix());
                table[a * n + b] = *index
                    .get(&PhaseKey::of(&ab))
                    .ok_or_else(|| Error::Numerical("generated set is not closed".into()))?;
            }
        }
        let inverse = (0..n)
            .map(|a| {
                (0..n)
                    .find(|&b| table[a * n + b] == 0)
                    .ok_or_else(|| Error::Numerical("element without inverse".into()))
            })
            .collect::<Result<Vec<_>>>()?;
        let paulis = pauli::strings(d.trailing_zeros() as usize);
        let omega = elements.iter().map(|u| unitary_ptm(&paulis, u)).collect();
        let mut rep = FiniteGroupRep {
            name: name.to_string(),
            d,
            elements,
            table,
            inverse,
            omega,
            irreps: Vec::new(),
            paulis,
        };
        rep.irreps = rep.decompose()?;
        Ok(rep)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    /// Hilbert-space dimension.
    pub fn dim(&self) -> usize {
        self.d
    }

    /// Operator-space dimension `d²`.
    pub fn operator_dim(&self) -> usize {
        self.d * self.d
    }

    pub fn elements(&self) -> &[UnitaryOp] {
        &self.elements
    }

    pub fn identity(&self) -> usize {
        0
    }

    /// Index of `g·h`.
    pub fn product(&self, g: usize, h: usize) -> usize {
        self.table[g * self.order() + h]
    }

    pub fn inverse(&self, g: usize) -> usize {
        self.inverse[g]
    }

    pub fn index_of(&self, u: &UnitaryOp) -> Option<usize> {
        let key = PhaseKey::of(u);
        self.elements.iter().position(|e| PhaseKey::of(e) == key)
    }

    pub fn omega(&self, g: usize) -> &DMatrix<f64> {
        &self.omega[g]
    }

    pub fn irreps(&self) -> &[Irrep] {
        &self.irreps
    }

    /// Indices of the irreps occurring in `ω`.
    pub fn blocks(&self) -> Vec<usize> {
        (0..self.irreps.len())
            .filter(|&l| self.irreps[l].multiplicity > 0)
            .collect()
    }

    /// Ideal channels `U(·)U†` in the Liouville representation.
    pub fn ideal_superops(&self) -> Vec<Superoperator> {
        self.elements.iter().map(unitary_to_superop).collect()
    }

    /// Pauli-transfer matrix of a Hermiticity-preserving map.
    pub fn ptm(&self, s: &Superoperator) -> Result<DMatrix<f64>> {
        if s.dim() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                found: s.dim(),
            });
        }
        let n = self.paulis.len();
        let images = self
            .paulis
            .iter()
            .map(|p| s.apply(p))
            .collect::<Result<Vec<_>>>()?;
        let mut out = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                let z = (&self.paulis[i] * &images[j]).trace() / self.d as f64;
                if z.im.abs() > 1e-9 {
                    return Err(Error::Unsupported(
                        "map is not Hermiticity-preserving".into(),
                    ));
                }
                out[(i, j)] = z.re;
            }
        }
        Ok(out)
    }

    pub fn ptms(&self, phi: &[Superoperator]) -> Result<Vec<DMatrix<f64>>> {
        if phi.len() != self.order() {
            return Err(Error::DimensionMismatch {
                expected: self.order(),
                found: phi.len(),
            });
        }
        phi.iter().map(|s| self.ptm(s)).collect()
    }

    /// Pauli coordinates of a state, `Tr(P_j ρ)`.
    pub fn state_coordinates(&self, rho: &CMatrix) -> DVector<f64> {
        DVector::from_iterator(
            self.paulis.len(),
            self.paulis.iter().map(|p| (p * rho).trace().re),
        )
    }

    /// Pauli coordinates of an effect, `Tr(Π P_i)/d`; paired with
    /// [`Self::state_coordinates`] they reproduce `Tr(Π S(ρ))` through the
    /// transfer matrix.
    pub fn effect_coordinates(&self, effect: &CMatrix) -> DVector<f64> {
        DVector::from_iterator(
            self.paulis.len(),
            self.paulis
                .iter()
                .map(|p| (effect * p).trace().re / self.d as f64),
        )
    }

    fn decompose(&self) -> Result<Vec<Irrep>> {
        let mut found = None;
        for attempt in 0..8 {
            if let Some(irreps) = self.regular_irreps(attempt) {
                found = Some(irreps);
                break;
            }
        }
        let raw = found.ok_or_else(|| {
            Error::Numerical(format!("irrep extraction failed for `{}`", self.name))
        })?;
        let n = self.order();
        let dd = self.operator_dim();
        let mut irreps = Vec::with_capacity(raw.len());
        for (dim, matrices, character) in raw {
            let overlap: f64 = (0..n)
                .map(|g| character[g] * self.omega[g].trace())
                .sum::<f64>()
                / n as f64;
            if (overlap - overlap.round()).abs() > 1e-6 {
                return Err(Error::Numerical("non-integral multiplicity".into()));
            }
            let multiplicity = overlap.round() as usize;
            let isometry = if multiplicity == 0 {
                DMatrix::zeros(dd, 0)
            } else {
                let mut proj = DMatrix::zeros(dd, dd);
                for g in 0..n {
                    proj += &self.omega[g] * character[g];
                }
                proj *= dim as f64 / n as f64;
                orthonormal_range(&proj, multiplicity * dim)?
            };
            irreps.push(Irrep {
                dim,
                multiplicity,
                character,
                exact: false,
                matrices,
                isometry,
            });
        }
        let total: usize = irreps.iter().map(|r| r.dim * r.multiplicity).sum();
        if total != dd {
            return Err(Error::Numerical(format!(
                "irrep decomposition covers {total} of {dd} dimensions"
            )));
        }
        self.adopt_exact_blocks(&mut irreps);
        Ok(irreps)
    }

    /// Irreps from the regular representation: the commutant average of a
    /// random symmetric matrix has one eigenspace per irrep copy.
    #[allow(clippy::type_complexity)]
    fn regular_irreps(&self, attempt: u64) -> Option<Vec<(usize, Vec<DMatrix<f64>>, Vec<f64>)>> {
        let n = self.order();
        let mut rng = ChaCha8Rng::seed_from_u64(0x1e1e_0000 + attempt);
        let h = DMatrix::from_fn(n, n, |_, _| rng.random::<f64>() - 0.5);
        let h = &h + h.transpose();
        let mut avg = DMatrix::zeros(n, n);
        for g in 0..n {
            let gi = self.inverse(g);
            for a in 0..n {
                for b in 0..n {
                    avg[(a, b)] += h[(self.product(gi, a), self.product(gi, b))];
                }
            }
        }
        avg /= n as f64;
        let eig = avg.symmetric_eigen();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let spread = eig.eigenvalues.amax().max(1.0);
        let mut clusters: Vec<Vec<usize>> = Vec::new();
        for (k, &i) in order.iter().enumerate() {
            let gap = k > 0 && eig.eigenvalues[i] - eig.eigenvalues[order[k - 1]] > 1e-7 * spread;
            if k == 0 || gap {
                clusters.push(vec![i]);
            } else {
                clusters.last_mut().expect("nonempty").push(i);
            }
        }
        let mut out: Vec<(usize, Vec<DMatrix<f64>>, Vec<f64>)> = Vec::new();
        for cluster in clusters {
            let w = DMatrix::from_columns(
                &cluster
                    .iter()
                    .map(|&i| eig.eigenvectors.column(i).into_owned())
                    .collect::<Vec<_>>(),
            );
            let k = w.ncols();
            let mut matrices = Vec::with_capacity(n);
            for g in 0..n {
                let mut rw = DMatrix::zeros(n, k);
                for h in 0..n {
                    rw.row_mut(self.product(g, h)).copy_from(&w.row(h));
                }
                let sigma = w.transpose() * &rw;
                if (&rw - &w * &sigma).amax() > 1e-8 {
                    return None;
                }
                matrices.push(sigma);
            }
            let character: Vec<f64> = matrices.iter().map(|m| snap_integer(m.trace())).collect();
            let norm = character.iter().map(|c| c * c).sum::<f64>() / n as f64;
            if (norm - 1.0).abs() > 1e-6 {
                return None;
            }
            let known = out.iter().any(|(_, _, c)| {
                c.iter().zip(&character).all(|(a, b)| (a - b).abs() < 1e-6)
            });
            if !known {
                out.push((k, matrices, character));
            }
        }
        if out.iter().map(|(dim, _, _)| dim * dim).sum::<usize>() != n {
            return None;
        }
        out.sort_by(|a, b| {
            let trivial = |c: &Vec<f64>| !c.iter().all(|&x| x == 1.0);
            trivial(&a.2)
                .cmp(&trivial(&b.2))
                .then(a.0.cmp(&b.0))
                .then_with(|| {
                    a.2.iter()
                        .zip(&b.2)
                        .map(|(x, y)| y.total_cmp(x))
                        .find(|o| o.is_ne())
                        .unwrap_or(std::cmp::Ordering::Equal)
                })
        });
        Some(out)
    }

    /// Replace numerically extracted irreps by coordinate blocks of `ω` with
    /// the same character, when `ω` splits that way in the Pauli basis.
    fn adopt_exact_blocks(&self, irreps: &mut [Irrep]) {
        let dd = self.operator_dim();
        let n = self.order();
        let mut parent: Vec<usize> = (0..dd).collect();
        fn find(p: &mut [usize], i: usize) -> usize {
            let mut r = i;
            while p[r] != r {
                r = p[r];
            }
            p[i] = r;
            r
        }
        for w in &self.omega {
            for i in 0..dd {
                for j in 0..dd {
                    if w[(i, j)].abs() > 1e-12 {
                        let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                        parent[a] = b;
                    }
                }
            }
        }
        let mut components: Vec<Vec<usize>> = Vec::new();
        let mut seen: HashMap<usize, usize> = HashMap::new();
        for i in 0..dd {
            let root = find(&mut parent, i);
            let slot = *seen.entry(root).or_insert_with(|| {
                components.push(Vec::new());
                components.len() - 1
            });
            components[slot].push(i);
        }
        for comp in components {
            let character: Vec<f64> = self
                .omega
                .iter()
                .map(|w| comp.iter().map(|&i| w[(i, i)]).sum())
                .collect();
            if let Some(irrep) = irreps.iter_mut().find(|r| {
                !r.exact
                    && r.dim == comp.len()
                    && r.character
                        .iter()
                        .zip(&character)
                        .all(|(a, b)| (a - b).abs() < 1e-9)
            }) {
                irrep.matrices = (0..n)
                    .map(|g| {
                        DMatrix::from_fn(comp.len(), comp.len(), |a, b| {
                            self.omega[g][(comp[a], comp[b])]
                        })
                    })
                    .collect();
                irrep.exact = true;
            }
        }
    }

}

fn snap_integer(x: f64) -> f64 {
    if (x - x.round()).abs() < 1e-9 {
        x.round()
    } else {
        x
    }
}

/// Entries that sit within rounding of a multiple of 1/256 are replaced by
/// it, so Clifford and Pauli transfer matrices come out exact.
fn snap_dyadic(x: f64) -> f64 {
    let y = (x * 256.0).round() / 256.0;
    if (x - y).abs() < 1e-12 {
        y
    } else {
        x
    }
}

fn unitary_ptm(paulis: &[CMatrix], u: &UnitaryOp) -> DMatrix<f64> {
    let m = u.matrix();
    let d = m.nrows() as f64;
    let images: Vec<CMatrix> = paulis.iter().map(|p| m * p * m.adjoint()).collect();
    DMatrix::from_fn(paulis.len(), paulis.len(), |i, j| {
        snap_dyadic((&paulis[i] * &images[j]).trace().re / d)
    })
}
