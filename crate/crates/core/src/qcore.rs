//! Dense complex linear algebra for small quantum systems.
//!
//! Operators are `d x d` complex matrices with `d <= 16`. Superoperators act on
//! column-stacked vectorizations, so that `vec(A X B) = (B^T ⊗ A) vec(X)` and
//! the Hilbert-Schmidt product `<<A|B>> = Tr[A† B]` is the ordinary inner
//! product of the vectorized operators.
//!
//! Qubit registers use the convention that qubit 0 is the leftmost tensor
//! factor (most significant bit of the basis index).

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

/// Tolerance for structural checks (unitarity, CPTP).
pub const STRUCTURAL_TOL: f64 = 1e-10;
/// Tolerance for algebraic identities.
pub const ALGEBRAIC_TOL: f64 = 1e-12;

#[inline]
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(d: usize) -> CMatrix {
    CMatrix::identity(d, d)
}

/// Largest entry modulus of a matrix.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0, |acc, z| acc.max(z.norm()))
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Kronecker product of a list of matrices, left to right.
pub fn kron_all<'a>(factors: impl IntoIterator<Item = &'a CMatrix>) -> CMatrix {
    factors
        .into_iter()
        .fold(CMatrix::identity(1, 1), |acc, f| acc.kronecker(f))
}

fn ensure_square(m: &CMatrix) -> Result<usize> {
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(m.nrows())
}

pub mod pauli {
    use super::{c64, CMatrix};

    pub fn i() -> CMatrix {
        CMatrix::identity(2, 2)
    }
    pub fn x() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[c64(0., 0.), c64(1., 0.), c64(1., 0.), c64(0., 0.)])
    }
    pub fn y() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[c64(0., 0.), c64(0., -1.), c64(0., 1.), c64(0., 0.)])
    }
    pub fn z() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[c64(1., 0.), c64(0., 0.), c64(0., 0.), c64(-1., 0.)])
    }

    /// Single-qubit Paulis in the order I, X, Y, Z.
    pub fn basis() -> [CMatrix; 4] {
        [i(), x(), y(), z()]
    }

    /// All `4^n` Pauli strings on `n` qubits. Index 0 is the identity; the
    /// digit for qubit 0 is the most significant.
    pub fn strings(n: usize) -> Vec<CMatrix> {
        let singles = basis();
        let mut out = vec![CMatrix::identity(1, 1)];
        for _ in 0..n {
            out = out
                .iter()
                .flat_map(|acc| singles.iter().map(move |p| acc.kronecker(p)))
                .collect();
        }
        out
    }
}

/// Column-stacking vectorization of a square matrix.
pub fn vectorize(m: &CMatrix) -> Result<CVector> {
    ensure_square(m)?;
    Ok(CVector::from_column_slice(m.as_slice()))
}

/// Inverse of [`vectorize`].
pub fn unvectorize(v: &CVector) -> Result<CMatrix> {
    let n = v.len();
    let d = (n as f64).sqrt().round() as usize;
    if d * d != n {
        return Err(Error::NotSquare { rows: n, cols: 1 });
    }
    Ok(CMatrix::from_column_slice(d, d, v.as_slice()))
}

/// Hilbert-Schmidt inner product `Tr[A† B]`.
pub fn hs_inner(a: &CMatrix, b: &CMatrix) -> Result<Complex64> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch {
            expected: a.nrows(),
            found: b.nrows(),
        });
    }
    Ok(a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum())
}

/// Singular values, largest first.
pub fn singular_values(m: &CMatrix) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Spectral (largest singular value) norm.
pub fn spectral_norm(m: &CMatrix) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Schatten 1-norm.
pub fn trace_norm(m: &CMatrix) -> f64 {
    singular_values(m).iter().sum()
}

/// Eigen-decomposition of a Hermitian matrix; eigenvalues ascending.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let h = (m + m.adjoint()) * c64(0.5, 0.0);
    let eig = h.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = CMatrix::from_columns(
        &order
            .iter()
            .map(|&i| eig.eigenvectors.column(i).into_owned())
            .collect::<Vec<_>>(),
    );
    (vals, vecs)
}

/// `exp(-i t H)` for Hermitian `H`, computed from its eigen-decomposition.
pub fn expm_hermitian(h: &CMatrix, t: f64) -> CMatrix {
    let (vals, vecs) = hermitian_eigen(h);
    let phases = CMatrix::from_diagonal(&CVector::from_iterator(
        vals.len(),
        vals.iter().map(|&l| Complex64::from_polar(1.0, -t * l)),
    ));
    &vecs * phases * vecs.adjoint()
}

/// Embed an operator acting on `qubits` (in its own tensor order) into an
/// `n`-qubit register.
pub fn embed(op: &CMatrix, qubits: &[usize], n: usize) -> Result<CMatrix> {
    let k = qubits.len();
    if op.nrows() != 1 << k || op.ncols() != 1 << k {
        return Err(Error::DimensionMismatch {
            expected: 1 << k,
            found: op.nrows(),
        });
    }
    if let Some(&q) = qubits.iter().find(|&&q| q >= n) {
        return Err(Error::Config(format!("qubit index {q} out of range for {n} qubits")));
    }
    for (i, q) in qubits.iter().enumerate() {
        if qubits[..i].contains(q) {
            return Err(Error::Config(format!("qubit {q} repeated")));
        }
    }
    if k == n && qubits.iter().enumerate().all(|(i, &q)| i == q) {
        return Ok(op.clone());
    }
    let dim = 1usize << n;
    let target_mask: usize = qubits.iter().map(|&q| 1 << (n - 1 - q)).sum();
    let sub = |idx: usize| -> usize {
        qubits
            .iter()
            .enumerate()
            .map(|(j, &q)| ((idx >> (n - 1 - q)) & 1) << (k - 1 - j))
            .sum()
    };
    let mut out = CMatrix::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..dim {
            if (i & !target_mask) == (j & !target_mask) {
                out[(i, j)] = op[(sub(i), sub(j))];
            }
        }
    }
    Ok(out)
}

/// A unitary operator.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryOp {
    mat: CMatrix,
}

impl UnitaryOp {
    /// Validates unitarity within [`STRUCTURAL_TOL`].
    pub fn new(mat: CMatrix) -> Result<Self> {
        Self::with_tolerance(mat, STRUCTURAL_TOL)
    }

    pub fn with_tolerance(mat: CMatrix, tol: f64) -> Result<Self> {
        let d = ensure_square(&mat)?;
        let deviation = max_abs(&(mat.adjoint() * &mat - identity(d)));
        if deviation > tol {
            return Err(Error::NotUnitary { deviation });
        }
        Ok(Self { mat })
    }

    /// Skips validation; the caller guarantees unitarity.
    pub fn new_unchecked(mat: CMatrix) -> Self {
        Self { mat }
    }

    pub fn identity(d: usize) -> Self {
        Self { mat: identity(d) }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }

    pub fn into_matrix(self) -> CMatrix {
        self.mat
    }

    pub fn dagger(&self) -> Self {
        Self {
            mat: self.mat.adjoint(),
        }
    }

    /// Operator product `self · other` (other acts first).
    pub fn then_after(&self, other: &UnitaryOp) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(Self {
            mat: &self.mat * &other.mat,
        })
    }

    pub fn tensor(&self, other: &UnitaryOp) -> Self {
        Self {
            mat: self.mat.kronecker(&other.mat),
        }
    }

    /// Distance from `U†V` to the nearest scalar multiple of the identity,
    /// as a max-entry deviation.
    pub fn phase_distance(&self, other: &UnitaryOp) -> f64 {
        if self.dim() != other.dim() {
            return f64::INFINITY;
        }
        let m = self.mat.adjoint() * &other.mat;
        let tr = m.trace();
        if tr.norm() < 1e-300 {
            return f64::INFINITY;
        }
        let phase = tr / tr.norm();
        max_abs(&(m - identity(self.dim()) * phase))
    }

    /// True iff `U†V` is a scalar multiple of the identity within `tol`.
    pub fn phase_equal(&self, other: &UnitaryOp, tol: f64) -> bool {
        self.phase_distance(other) <= tol
    }

    /// `U ρ U†`.
    pub fn conjugate(&self, rho: &CMatrix) -> CMatrix {
        &self.mat * rho * self.mat.adjoint()
    }
}

/// A valid quantum state.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    mat: CMatrix,
}

impl DensityMatrix {
    pub fn new(mat: CMatrix) -> Result<Self> {
        ensure_square(&mat)?;
        let herm = max_abs(&(&mat - mat.adjoint()));
        if herm > ALGEBRAIC_TOL {
            return Err(Error::NotDensityMatrix(format!(
                "not Hermitian (deviation {herm:.3e})"
            )));
        }
        let tr = mat.trace();
        if (tr - c64(1.0, 0.0)).norm() > ALGEBRAIC_TOL {
            return Err(Error::NotDensityMatrix(format!("trace {tr} != 1")));
        }
        let (vals, _) = hermitian_eigen(&mat);
        if vals.first().copied().unwrap_or(0.0) < -STRUCTURAL_TOL {
            return Err(Error::NotDensityMatrix(format!(
                "negative eigenvalue {:.3e}",
                vals[0]
            )));
        }
        Ok(Self { mat })
    }

    /// The pure computational basis state `|k><k|`.
    pub fn basis_state(d: usize, k: usize) -> Result<Self> {
        if k >= d {
            return Err(Error::Config(format!("basis index {k} out of range for d={d}")));
        }
        let mut mat = CMatrix::zeros(d, d);
        mat[(k, k)] = c64(1.0, 0.0);
        Ok(Self { mat })
    }

    pub fn maximally_mixed(d: usize) -> Self {
        Self {
            mat: identity(d) * c64(1.0 / d as f64, 0.0),
        }
    }

    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.mat
    }
}

/// A completely positive trace-preserving map in Kraus form.
#[derive(Debug, Clone, PartialEq)]
pub struct KrausChannel {
    dim: usize,
    kraus: Vec<CMatrix>,
}

impl KrausChannel {
    /// Validates trace preservation and complete positivity.
    pub fn new(kraus: Vec<CMatrix>) -> Result<Self> {
        let ch = Self::new_unchecked(kraus)?;
        ch.check_cptp(STRUCTURAL_TOL)?;
        Ok(ch)
    }

    /// Only checks shapes.
    pub fn new_unchecked(kraus: Vec<CMatrix>) -> Result<Self> {
        let first = kraus
            .first()
            .ok_or_else(|| Error::NotCptp("empty Kraus set".into()))?;
        let dim = ensure_square(first)?;
        for k in &kraus {
            if ensure_square(k)? != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: k.nrows(),
                });
            }
        }
        Ok(Self { dim, kraus })
    }

    pub fn identity(d: usize) -> Self {
        Self {
            dim: d,
            kraus: vec![identity(d)],
        }
    }

    pub fn from_unitary(u: &UnitaryOp) -> Self {
        Self {
            dim: u.dim(),
            kraus: vec![u.matrix().clone()],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn kraus(&self) -> &[CMatrix] {
        &self.kraus
    }

    pub fn check_cptp(&self, tol: f64) -> Result<()> {
        let sum = self
            .kraus
            .iter()
            .fold(CMatrix::zeros(self.dim, self.dim), |acc, k| acc + k.adjoint() * k);
        let tp = max_abs(&(sum - identity(self.dim)));
        if tp > tol {
            return Err(Error::NotCptp(format!(
                "trace preservation violated by {tp:.3e}"
            )));
        }
        let (vals, _) = hermitian_eigen(&self.superoperator().choi());
        if let Some(&min) = vals.first() {
            if min < -tol {
                return Err(Error::NotCptp(format!("Choi eigenvalue {min:.3e} < 0")));
            }
        }
        Ok(())
    }

    /// `Σ_k A_k ρ A_k†`.
    pub fn apply(&self, rho: &CMatrix) -> CMatrix {
        self.kraus
            .iter()
            .fold(CMatrix::zeros(self.dim, self.dim), |acc, k| {
                acc + k * rho * k.adjoint()
            })
    }

    /// Channel on the tensor product of the two systems.
    pub fn tensor(&self, other: &KrausChannel) -> KrausChannel {
        let kraus = self
            .kraus
            .iter()
            .flat_map(|a| other.kraus.iter().map(move |b| a.kronecker(b)))
            .collect();
        KrausChannel {
            dim: self.dim * other.dim,
            kraus,
        }
    }

    /// The channel `after ∘ self`.
    pub fn followed_by(&self, after: &KrausChannel) -> Result<KrausChannel> {
        if self.dim != after.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: after.dim,
            });
        }
        let kraus = after
            .kraus
            .iter()
            .flat_map(|b| self.kraus.iter().map(move |a| b * a))
            .collect();
        Ok(KrausChannel {
            dim: self.dim,
            kraus,
        })
    }

    /// Embed a channel on `qubits` into an `n`-qubit register.
    pub fn embed(&self, qubits: &[usize], n: usize) -> Result<KrausChannel> {
        let kraus = self
            .kraus
            .iter()
            .map(|k| embed(k, qubits, n))
            .collect::<Result<Vec<_>>>()?;
        Ok(KrausChannel {
            dim: 1 << n,
            kraus,
        })
    }

    /// `Σ_k |Tr A_k|²`.
    pub fn trace_overlap(&self) -> f64 {
        self.kraus.iter().map(|k| k.trace().norm_sqr()).sum()
    }

    pub fn superoperator(&self) -> Superoperator {
        kraus_to_superop(self)
    }
}

/// A linear map on operators in Liouville (column-stacked) representation.
#[derive(Debug, Clone, PartialEq)]
pub struct Superoperator {
    dim: usize,
    liouville: CMatrix,
}

impl Superoperator {
    pub fn from_liouville(liouville: CMatrix) -> Result<Self> {
        let n = ensure_square(&liouville)?;
        let dim = (n as f64).sqrt().round() as usize;
        if dim * dim != n {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: n,
            });
        }
        Ok(Self { dim, liouville })
    }

    pub fn identity(d: usize) -> Self {
        Self {
            dim: d,
            liouville: identity(d * d),
        }
    }

    pub fn zero(d: usize) -> Self {
        Self {
            dim: d,
            liouville: CMatrix::zeros(d * d, d * d),
        }
    }

    /// Hilbert-space dimension `d` (the Liouville matrix is `d² x d²`).
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn liouville(&self) -> &CMatrix {
        &self.liouville
    }

    pub fn apply(&self, rho: &CMatrix) -> Result<CMatrix> {
        if rho.nrows() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: rho.nrows(),
            });
        }
        unvectorize(&(&self.liouville * vectorize(rho)?))
    }

    /// Adjoint map (Heisenberg picture), `<<A|S(B)>> = <<S†(A)|B>>`.
    pub fn adjoint(&self) -> Superoperator {
        Superoperator {
            dim: self.dim,
            liouville: self.liouville.adjoint(),
        }
    }

    pub fn sub(&self, other: &Superoperator) -> Result<Superoperator> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        Ok(Superoperator {
            dim: self.dim,
            liouville: &self.liouville - &other.liouville,
        })
    }

    /// Unnormalized Choi matrix `Σ_ij |i><j| ⊗ S(|i><j|)`, trace `d` for
    /// trace-preserving maps.
    pub fn choi(&self) -> CMatrix {
        let d = self.dim;
        let mut choi = CMatrix::zeros(d * d, d * d);
        for i in 0..d {
            for j in 0..d {
                // column of the Liouville matrix for vec(|i><j|) is j*d + i
                let col = self.liouville.column(j * d + i);
                let img = CMatrix::from_column_slice(d, d, col.as_slice());
                choi.view_mut((i * d, j * d), (d, d)).copy_from(&img);
            }
        }
        choi
    }

    /// Sum of the Liouville diagonal, equal to `Σ_k |Tr A_k|²` for a Kraus map.
    pub fn trace(&self) -> Complex64 {
        self.liouville.trace()
    }
}

/// `conj(U) ⊗ U`.
pub fn unitary_to_superop(u: &UnitaryOp) -> Superoperator {
    let m = u.matrix();
    Superoperator {
        dim: u.dim(),
        liouville: m.conjugate().kronecker(m),
    }
}

pub fn kraus_to_superop(k: &KrausChannel) -> Superoperator {
    let d = k.dim();
    let liouville = k
        .kraus()
        .iter()
        .fold(CMatrix::zeros(d * d, d * d), |acc, a| {
            acc + a.conjugate().kronecker(a)
        });
    Superoperator { dim: d, liouville }
}

pub fn superop_to_choi(s: &Superoperator) -> CMatrix {
    s.choi()
}

/// `s1 ∘ s2`: applies `s2` first.
pub fn compose(s1: &Superoperator, s2: &Superoperator) -> Result<Superoperator> {
    if s1.dim != s2.dim {
        return Err(Error::DimensionMismatch {
            expected: s1.dim,
            found: s2.dim,
        });
    }
    Ok(Superoperator {
        dim: s1.dim,
        liouville: &s1.liouville * &s2.liouville,
    })
}

/// Certified interval for the diamond norm of a superoperator.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DiamondBounds {
    pub lower: f64,
    pub upper: f64,
}

/// `‖C‖₁/d ≤ ‖S‖⋄ ≤ ‖C‖₁` with `C` the unnormalized Choi matrix.
pub fn diamond_bounds(s: &Superoperator) -> DiamondBounds {
    if max_abs(s.liouville()) < ALGEBRAIC_TOL {
        return DiamondBounds {
            lower: 0.0,
            upper: 0.0,
        };
    }
    let tn = trace_norm(&s.choi());
    DiamondBounds {
        lower: tn / s.dim() as f64,
        upper: tn,
    }
}
