//! Fourier operators over a finite group and the survival probability they
//! encode.

use nalgebra::{DMatrix, DVector};

use super::field::{identity, lift, lift_vector, power, ratio, trace_first, Field};
use super::finite::FiniteGroupRep;
use crate::error::{Error, Result};

/// State and effect in Pauli coordinates, see
/// [`FiniteGroupRep::state_coordinates`] and
/// [`FiniteGroupRep::effect_coordinates`].
#[derive(Debug, Clone, PartialEq)]
pub struct Spam {
    pub rho: DVector<f64>,
    pub effect: DVector<f64>,
}

impl Spam {
    /// Prepare `|0…0⟩`, measure its projector.
    pub fn ground(rep: &FiniteGroupRep) -> Self {
        let d = rep.dim();
        let mut p = crate::qcore::CMatrix::zeros(d, d);
        p[(0, 0)] = 1.0.into();
        Spam {
            rho: rep.state_coordinates(&p),
            effect: rep.effect_coordinates(&p),
        }
    }

    /// The rank-one operator `|ρ⟩⟩⟨⟨Π|`.
    pub fn outer<T: Field>(&self) -> DMatrix<T> {
        lift_vector::<T>(&self.rho) * lift_vector::<T>(&self.effect).transpose()
    }
}

fn check_phi(rep: &FiniteGroupRep, phi: &[DMatrix<f64>]) -> Result<()> {
    if phi.len() != rep.order() {
        return Err(Error::DimensionMismatch {
            expected: rep.order(),
            found: phi.len(),
        });
    }
    let dd = rep.operator_dim();
    if let Some(bad) = phi.iter().find(|m| m.nrows() != dd || m.ncols() != dd) {
        return Err(Error::DimensionMismatch {
            expected: dd,
            found: bad.nrows(),
        });
    }
    Ok(())
}

/// `F(φ)^λ = (1/|G|) Σ_g conj(σ_λ(g)) ⊗ φ(g)`, irrep factor first.
pub fn fourier<T: Field>(rep: &FiniteGroupRep, phi: &[DMatrix<f64>], irrep: usize) -> Result<DMatrix<T>> {
    check_phi(rep, phi)?;
    let sigma = rep
        .irreps()
        .get(irrep)
        .ok_or_else(|| Error::Config(format!("no irrep {irrep}")))?;
    let dim = sigma.dim * rep.operator_dim();
    let mut out = DMatrix::<T>::zeros(dim, dim);
    for (g, f) in phi.iter().enumerate() {
        out += lift::<T>(sigma.matrix(g)).kronecker(&lift::<T>(f));
    }
    let w = ratio::<T>(1.0, rep.order());
    Ok(out.map(|x| x * w))
}

/// `F(ω)^λ`.
pub fn reference_fourier<T: Field>(rep: &FiniteGroupRep, irrep: usize) -> Result<DMatrix<T>> {
    let omega: Vec<DMatrix<f64>> = (0..rep.order()).map(|g| rep.omega(g).clone()).collect();
    fourier(rep, &omega, irrep)
}

/// Fourier blocks for every irrep in `ω`, plus `extra` irreps on request.
pub fn fourier_blocks<T: Field>(
    rep: &FiniteGroupRep,
    phi: &[DMatrix<f64>],
    extra: &[usize],
) -> Result<Vec<(usize, DMatrix<T>)>> {
    let mut which = rep.blocks();
    for &l in extra {
        if !which.contains(&l) {
            which.push(l);
        }
    }
    which
        .into_iter()
        .map(|l| Ok((l, fourier(rep, phi, l)?)))
        .collect()
}

/// Exact survival probabilities `p(m)`, `m = 1..=m_max`, from the
/// `(m+1)`-fold group convolution of `φ` ending on `g_end`.
pub fn convolution_survival<T: Field>(
    rep: &FiniteGroupRep,
    phi: &[DMatrix<f64>],
    spam: &Spam,
    g_end: usize,
    m_max: usize,
) -> Result<Vec<T>> {
    check_phi(rep, phi)?;
    let n = rep.order();
    let phi: Vec<DMatrix<T>> = phi.iter().map(lift).collect();
    let rho = lift_vector::<T>(&spam.rho);
    let effect = lift_vector::<T>(&spam.effect);
    let w = ratio::<T>(1.0, n);
    let mut current = phi.clone();
    let mut out = Vec::with_capacity(m_max);
    for _ in 0..m_max {
        let next: Vec<DMatrix<T>> = (0..n)
            .map(|g| {
                let mut acc = DMatrix::<T>::zeros(rho.len(), rho.len());
                for (h, c) in current.iter().enumerate() {
                    acc += &phi[rep.product(g, rep.inverse(h))] * c;
                }
                acc.map(|x| x * w)
            })
            .collect();
        current = next;
        out.push(effect.dot(&(&current[g_end] * &rho)));
    }
    Ok(out)
}

/// The same survival probability assembled from Fourier blocks of every irrep:
/// `Σ_λ d_λ ⟨⟨Π| Tr_1[(conj σ_λ(g_end⁻¹) ⊗ I) (F(φ)^λ)^{m+1}] |ρ⟩⟩`.
pub fn fourier_survival<T: Field>(
    rep: &FiniteGroupRep,
    phi: &[DMatrix<f64>],
    spam: &Spam,
    g_end: usize,
    m: usize,
) -> Result<T> {
    let dd = rep.operator_dim();
    let rho = lift_vector::<T>(&spam.rho);
    let effect = lift_vector::<T>(&spam.effect);
    let inv = rep.inverse(g_end);
    let mut total = T::zero();
    for (l, irrep) in rep.irreps().iter().enumerate() {
        let f = fourier::<T>(rep, phi, l)?;
        let twist = lift::<T>(irrep.matrix(inv)).kronecker(&identity::<T>(dd));
        let reduced = trace_first(&(twist * power(&f, m + 1)), irrep.dim, dd);
        total += T::from_f64(irrep.dim as f64) * effect.dot(&(reduced * &rho));
    }
    Ok(total)
}
