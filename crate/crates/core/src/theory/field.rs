//! Scalars the theory pipeline runs on: `f64`/`Complex64` for the public
//! surface, double-double [`Quad`] when a residual has to be resolved below
//! f64 rounding.

use std::fmt::Debug;
use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use num_traits::{One, Zero};
use qd::Quad;

use crate::error::{Error, Result};
use crate::qcore::{self, CMatrix};

pub trait Field:
    nalgebra::Scalar
    + Copy
    + Debug
    + Zero
    + One
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + AddAssign
    + SubAssign
    + MulAssign
    + Send
    + Sync
{
    /// Increment below which fixed-point iterations count as converged.
    const FIXED_POINT_TOL: f64;

    fn from_f64(x: f64) -> Self;
    fn conj(self) -> Self;
    fn modulus(self) -> f64;
    fn to_c64(self) -> Complex64;
    /// Square root of the real part.
    fn sqrt_re(self) -> Self;
}

impl Field for f64 {
    const FIXED_POINT_TOL: f64 = 1e-14;

    fn from_f64(x: f64) -> Self {
        x
    }
    fn conj(self) -> Self {
        self
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
    fn to_c64(self) -> Complex64 {
        Complex64::new(self, 0.0)
    }
    fn sqrt_re(self) -> Self {
        self.sqrt()
    }
}

impl Field for Complex64 {
    const FIXED_POINT_TOL: f64 = 1e-14;

    fn from_f64(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
    fn modulus(self) -> f64 {
        self.norm()
    }
    fn to_c64(self) -> Complex64 {
        self
    }
    fn sqrt_re(self) -> Self {
        Complex64::new(self.re.sqrt(), 0.0)
    }
}

impl Field for Quad {
    const FIXED_POINT_TOL: f64 = 1e-29;

    fn from_f64(x: f64) -> Self {
        Quad::from_f64(x)
    }
    fn conj(self) -> Self {
        self
    }
    fn modulus(self) -> f64 {
        (self.0 + self.1).abs()
    }
    fn to_c64(self) -> Complex64 {
        Complex64::new(self.0 + self.1, 0.0)
    }
    fn sqrt_re(self) -> Self {
        self.sqrt()
    }
}

/// Exact division by a small integer count.
pub fn ratio<T: Field>(num: f64, den: usize) -> T {
    T::from_f64(num) / T::from_f64(den as f64)
}

pub fn lift<T: Field>(m: &DMatrix<f64>) -> DMatrix<T> {
    m.map(T::from_f64)
}

pub fn lift_vector<T: Field>(v: &DVector<f64>) -> DVector<T> {
    v.map(T::from_f64)
}

pub fn to_complex<T: Field>(m: &DMatrix<T>) -> CMatrix {
    m.map(|x| x.to_c64())
}

pub fn adjoint<T: Field>(m: &DMatrix<T>) -> DMatrix<T> {
    m.transpose().map(T::conj)
}

pub fn scale<T: Field>(m: &DMatrix<T>, s: T) -> DMatrix<T> {
    m.map(|x| x * s)
}

pub fn identity<T: Field>(n: usize) -> DMatrix<T> {
    DMatrix::from_fn(n, n, |i, j| if i == j { T::one() } else { T::zero() })
}

pub fn max_modulus<T: Field>(m: &DMatrix<T>) -> f64 {
    m.iter().map(|x| x.modulus()).fold(0.0, f64::max)
}

/// Spectral norm, evaluated in f64.
pub fn spectral_norm<T: Field>(m: &DMatrix<T>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    qcore::spectral_norm(&to_complex(m))
}

pub fn power<T: Field>(m: &DMatrix<T>, k: usize) -> DMatrix<T> {
    let mut out = identity::<T>(m.nrows());
    for _ in 0..k {
        out = &out * m;
    }
    out
}

/// Trace over the first tensor factor of a `(a·b)×(a·b)` matrix.
pub fn trace_first<T: Field>(m: &DMatrix<T>, a: usize, b: usize) -> DMatrix<T> {
    let mut out = DMatrix::<T>::zeros(b, b);
    for k in 0..a {
        out += m.view((k * b, k * b), (b, b));
    }
    out
}

/// Column-stacking reshape of a vector into an `r×c` matrix.
pub fn unvec<T: Field>(v: &DVector<T>, r: usize, c: usize) -> DMatrix<T> {
    DMatrix::from_column_slice(r, c, v.as_slice())
}

pub fn vec_of<T: Field>(m: &DMatrix<T>) -> DVector<T> {
    DVector::from_column_slice(m.as_slice())
}

/// LU factorization with partial pivoting.
#[derive(Debug, Clone)]
pub struct Lu<T: Field> {
    lu: DMatrix<T>,
    perm: Vec<usize>,
}

impl<T: Field> Lu<T> {
    pub fn new(mut a: DMatrix<T>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::NotSquare {
                rows: a.nrows(),
                cols: a.ncols(),
            });
        }
        let scale = max_modulus(&a).max(f64::MIN_POSITIVE);
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (pivot, best) = (k..n)
                .map(|i| (i, a[(i, k)].modulus()))
                .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
            if best <= 1e-13 * scale {
                return Err(Error::Numerical("singular linear system".into()));
            }
            if pivot != k {
                a.swap_rows(pivot, k);
                perm.swap(pivot, k);
            }
            let d = a[(k, k)];
            for i in k + 1..n {
                let l = a[(i, k)] / d;
                a[(i, k)] = l;
                for j in k + 1..n {
                    let u = a[(k, j)];
                    a[(i, j)] -= l * u;
                }
            }
        }
        Ok(Lu { lu: a, perm })
    }

    pub fn solve(&self, b: &DVector<T>) -> DVector<T> {
        let n = self.perm.len();
        let mut x = DVector::from_fn(n, |i, _| b[self.perm[i]]);
        for i in 0..n {
            for j in 0..i {
                let l = self.lu[(i, j)];
                let xj = x[j];
                x[i] -= l * xj;
            }
        }
        for i in (0..n).rev() {
            for j in i + 1..n {
                let u = self.lu[(i, j)];
                let xj = x[j];
                x[i] -= u * xj;
            }
            x[i] = x[i] / self.lu[(i, i)];
        }
        x
    }
}

/// Orthonormal basis (as columns) of the range of a Hermitian projector of
/// known rank, by greedy Gram-Schmidt over its columns.
pub fn orthonormal_range<T: Field>(p: &DMatrix<T>, rank: usize) -> Result<DMatrix<T>> {
    let n = p.nrows();
    let mut basis: Vec<DVector<T>> = Vec::with_capacity(rank);
    let mut residuals: Vec<DVector<T>> = (0..p.ncols()).map(|j| p.column(j).into_owned()).collect();
    for _ in 0..rank {
        let (best, norm) = residuals
            .iter()
            .enumerate()
            .map(|(j, r)| (j, r.iter().map(|x| x.modulus().powi(2)).sum::<f64>()))
            .fold((0, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if norm < 1e-12 {
            return Err(Error::Numerical(format!(
                "projector has rank below {rank}"
            )));
        }
        let mut v = residuals[best].clone();
        for _ in 0..2 {
            for b in &basis {
                let c = inner(b, &v);
                v -= b.map(|x| x * c);
            }
        }
        let nrm = inner(&v, &v).sqrt_re();
        let v = v.map(|x| x / nrm);
        for r in residuals.iter_mut() {
            let c = inner(&v, r);
            *r -= v.map(|x| x * c);
        }
        basis.push(v);
    }
    if basis.is_empty() {
        return Ok(DMatrix::zeros(n, 0));
    }
    Ok(DMatrix::from_columns(&basis))
}

/// `⟨a, b⟩ = Σ conj(a_i) b_i`.
pub fn inner<T: Field>(a: &DVector<T>, b: &DVector<T>) -> T {
    a.iter()
        .zip(b.iter())
        .fold(T::zero(), |acc, (x, y)| acc + x.conj() * *y)
}
