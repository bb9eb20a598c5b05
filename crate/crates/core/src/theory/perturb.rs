//! Block diagonalization of a perturbed projector, `X1 + E`, by a pair of
//! correctors `P1 ∈ M(V1→V2)`, `P2 ∈ M(V2→V1)`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::field::{adjoint, identity, max_modulus, orthonormal_range, spectral_norm, unvec, vec_of, Field, Lu};
use crate::error::{Error, Result};
use crate::qcore::{self, CMatrix};

pub const MAX_FIXED_POINT_ITERATIONS: usize = 500;

/// Norms entering the lemma, the bounds it promises and what was achieved.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LemmaReport {
    pub e11: f64,
    pub e12: f64,
    pub e21: f64,
    pub e22: f64,
    /// `1 - ‖X1EX1‖ - ‖X2EX2‖`.
    pub gap: f64,
    /// `‖X1EX2‖·‖X2EX1‖ / gap²`, must stay below 1/4.
    pub coupling: f64,
    pub p1_norm: f64,
    pub p1_bound: f64,
    pub p2_norm: f64,
    pub p2_bound: f64,
    pub iterations: usize,
}

impl LemmaReport {
    pub fn bounds_hold(&self) -> bool {
        self.p1_norm <= self.p1_bound && self.p2_norm <= self.p2_bound
    }
}

/// Result of splitting `F = X1 + E`. Everything is kept in the reduced
/// coordinates of orthonormal bases `V1` (range of `X1`) and `V2` (its
/// complement); full-space operators are reassembled on demand.
#[derive(Debug, Clone)]
pub struct BlockDiagonalization<T: Field> {
    pub v1: DMatrix<T>,
    pub v2: DMatrix<T>,
    /// `V2† P1 V1`.
    pub p: DMatrix<T>,
    /// `V1† P2 V2`.
    pub q: DMatrix<T>,
    /// `V1† A'_1 V1`, equal to the compressed `X1 F (X1 + X2 P1)`.
    pub a1: DMatrix<T>,
    /// `V2† A'_2 V2`.
    pub a2: DMatrix<T>,
    pub report: LemmaReport,
}

impl<T: Field> BlockDiagonalization<T> {
    fn embed(&self, left: &DMatrix<T>, m: &DMatrix<T>, right: &DMatrix<T>) -> DMatrix<T> {
        left * m * adjoint(right)
    }

    pub fn x1(&self) -> DMatrix<T> {
        &self.v1 * adjoint(&self.v1)
    }

    pub fn x2(&self) -> DMatrix<T> {
        &self.v2 * adjoint(&self.v2)
    }

    pub fn p1(&self) -> DMatrix<T> {
        self.embed(&self.v2, &self.p, &self.v1)
    }

    pub fn p2(&self) -> DMatrix<T> {
        self.embed(&self.v1, &self.q, &self.v2)
    }

    pub fn a1_full(&self) -> DMatrix<T> {
        self.embed(&self.v1, &self.a1, &self.v1)
    }

    pub fn a2_full(&self) -> DMatrix<T> {
        self.embed(&self.v2, &self.a2, &self.v2)
    }

    /// `R1 = X1 + P1`.
    pub fn r1(&self) -> DMatrix<T> {
        self.x1() + self.p1()
    }

    /// `R2 = X2 + P2 + P1 P2`.
    pub fn r2(&self) -> DMatrix<T> {
        let (p1, p2) = (self.p1(), self.p2());
        self.x2() + &p2 + p1 * p2
    }

    /// `L1† = X1 - P2 + P2 P1`.
    pub fn l1_dag(&self) -> DMatrix<T> {
        let (p1, p2) = (self.p1(), self.p2());
        self.x1() - &p2 + p2 * p1
    }

    /// `L2† = X2 - P1`.
    pub fn l2_dag(&self) -> DMatrix<T> {
        self.x2() - self.p1()
    }

    /// Largest entry of the off-diagonal blocks `L1† F R2`, `L2† F R1`.
    pub fn off_diagonal_residual(&self, f: &DMatrix<T>) -> f64 {
        let a = self.l1_dag() * f * self.r2();
        let b = self.l2_dag() * f * self.r1();
        max_modulus(&a).max(max_modulus(&b))
    }

    /// Largest entry of `F - R1 A'_1 L1† - R2 A'_2 L2†`.
    pub fn reconstruction_error(&self, f: &DMatrix<T>) -> f64 {
        let rebuilt = self.r1() * self.a1_full() * self.l1_dag() + self.r2() * self.a2_full() * self.l2_dag();
        max_modulus(&(f - rebuilt))
    }
}

fn rank_of_projector<T: Field>(x1: &DMatrix<T>) -> Result<usize> {
    let tr = x1.trace().to_c64().re;
    if (tr - tr.round()).abs() > 1e-6 || tr < -0.5 {
        return Err(Error::Numerical(format!("trace {tr} of X1 is not a rank")));
    }
    Ok(tr.round() as usize)
}

/// Sylvester operator `p ↦ p·b - a·p` on `r×c` matrices, column-stacked.
fn sylvester<T: Field>(b: &DMatrix<T>, a: &DMatrix<T>) -> DMatrix<T> {
    let (r, c) = (a.nrows(), b.nrows());
    b.transpose().kronecker(&identity::<T>(r)) - identity::<T>(c).kronecker(a)
}

fn solve_sylvester<T: Field>(lu: &Lu<T>, rhs: &DMatrix<T>) -> DMatrix<T> {
    unvec(&lu.solve(&vec_of(rhs)), rhs.nrows(), rhs.ncols())
}

/// Split `X1 + E` per the perturbation lemma with `sep(X1, 0) = 1`.
pub fn block_diagonalize<T: Field>(x1: &DMatrix<T>, e: &DMatrix<T>) -> Result<BlockDiagonalization<T>> {
    let n = x1.nrows();
    if x1.ncols() != n || e.nrows() != n || e.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: e.nrows(),
        });
    }
    let n1 = rank_of_projector(x1)?;
    let x2 = identity::<T>(n) - x1;
    let v1 = orthonormal_range(x1, n1)?;
    let v2 = orthonormal_range(&x2, n - n1)?;
    let (v1h, v2h) = (adjoint(&v1), adjoint(&v2));
    let f = x1 + e;
    let b11 = &v1h * &f * &v1;
    let e12 = &v1h * &f * &v2;
    let e21 = &v2h * &f * &v1;
    let b22 = &v2h * &f * &v2;
    let e11 = &b11 - identity::<T>(n1);

    let norms = [
        spectral_norm(&e11),
        spectral_norm(&e12),
        spectral_norm(&e21),
        spectral_norm(&b22),
    ];
    let gap = 1.0 - norms[0] - norms[3];
    if gap <= 0.0 {
        return Err(Error::PremiseViolated(format!(
            "1 - ‖X1EX1‖ - ‖X2EX2‖ = {gap:.3e} is not positive"
        )));
    }
    let coupling = norms[1] * norms[2] / (gap * gap);
    if coupling >= 0.25 {
        return Err(Error::PremiseViolated(format!(
            "coupling ratio {coupling:.3e} is not below 1/4"
        )));
    }

    let n2 = n - n1;
    let mut p = DMatrix::<T>::zeros(n2, n1);
    let mut iterations = 0;
    if n1 > 0 && n2 > 0 {
        let lu = Lu::new(sylvester(&b11, &b22))?;
        loop {
            iterations += 1;
            let next = solve_sylvester(&lu, &(&e21 - &p * &e12 * &p));
            let step = max_modulus(&(&next - &p));
            p = next;
            if step < T::FIXED_POINT_TOL {
                break;
            }
            if iterations >= MAX_FIXED_POINT_ITERATIONS {
                return Err(Error::Numerical(format!(
                    "corrector iteration stalled (last increment {step:.3e})"
                )));
            }
        }
    }
    let a1 = &b11 + &e12 * &p;
    let a2 = &b22 - &p * &e12;
    // q·A2'' - A1''·q = X1 E X2
    let q = if n1 > 0 && n2 > 0 {
        let lu = Lu::new(sylvester(&a2, &a1))?;
        solve_sylvester(&lu, &e12)
    } else {
        DMatrix::zeros(n1, n2)
    };

    let p1_norm = spectral_norm(&p);
    let p2_norm = spectral_norm(&q);
    let p1_bound = 2.0 * norms[2] / gap;
    let p2_bound = norms[1] / (1.0 - spectral_norm(&(&a1 - identity::<T>(n1))) - spectral_norm(&a2));
    let report = LemmaReport {
        e11: norms[0],
        e12: norms[1],
        e21: norms[2],
        e22: norms[3],
        gap,
        coupling,
        p1_norm,
        p1_bound,
        p2_norm,
        p2_bound,
        iterations,
    };
    Ok(BlockDiagonalization {
        v1,
        v2,
        p,
        q,
        a1,
        a2,
        report,
    })
}

/// `sep(A1, A2)`: smallest singular value of `P ↦ A1 P - P A2` on maps from
/// `span V2` to `span V1`.
pub fn sep_numeric(a1: &CMatrix, a2: &CMatrix, v1: &CMatrix, v2: &CMatrix) -> Result<f64> {
    if v1.ncols() == 0 || v2.ncols() == 0 {
        return Err(Error::InvalidParameter {
            name: "subspace",
            value: 0.0,
            reason: "zero-dimensional subspace",
        });
    }
    let a1r = v1.adjoint() * a1 * v1;
    let a2r = v2.adjoint() * a2 * v2;
    let op = -sylvester(&a2r, &a1r);
    Ok(qcore::singular_values(&op)
        .into_iter()
        .fold(f64::INFINITY, f64::min))
}
