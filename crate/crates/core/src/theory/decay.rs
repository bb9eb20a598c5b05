//! Decay matrices `M_λ`, `A_λ` of a noisy implementation, the certified noise
//! strength δ, and the residual bound check.

use nalgebra::DMatrix;
use num_complex::Complex64;
use qd::Quad;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::field::{adjoint, identity, lift, max_modulus, power, scale, to_complex, Field};
use super::finite::FiniteGroupRep;
use super::fourier::{convolution_survival, fourier, reference_fourier, Spam};
use super::perturb::{block_diagonalize, BlockDiagonalization, LemmaReport};
use crate::error::{Error, Result};
use crate::qcore::{self, c64, diamond_bounds, expm_hermitian, unitary_to_superop, CMatrix, Superoperator, UnitaryOp};

/// The residual bound needs `δ < 1/9`.
pub const PREMISE_THRESHOLD: f64 = 1.0 / 9.0;

/// Group average of the diamond-norm interval of `φ(g) - ω(g)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeltaCertificate {
    pub upper: f64,
    pub lower: f64,
}

impl DeltaCertificate {
    pub fn premise_met(&self) -> bool {
        self.upper < PREMISE_THRESHOLD
    }
}

pub fn delta_certify(rep: &FiniteGroupRep, phi: &[Superoperator]) -> Result<DeltaCertificate> {
    if phi.len() != rep.order() {
        return Err(Error::DimensionMismatch {
            expected: rep.order(),
            found: phi.len(),
        });
    }
    let (mut upper, mut lower) = (0.0, 0.0);
    for (s, u) in phi.iter().zip(rep.elements()) {
        let b = diamond_bounds(&s.sub(&unitary_to_superop(u))?);
        upper += b.upper;
        lower += b.lower;
    }
    let n = rep.order() as f64;
    Ok(DeltaCertificate {
        upper: upper / n,
        lower: lower / n,
    })
}

/// `16/(1-9δ) · [δ(2 + 4δ/(1-5δ))]^m`.
pub fn theorem_bound(delta: f64, m: usize) -> f64 {
    16.0 / (1.0 - 9.0 * delta) * (delta * (2.0 + 4.0 * delta / (1.0 - 5.0 * delta))).powi(m as i32)
}

#[derive(Debug, Clone)]
pub struct SystemBlock<T: Field> {
    pub irrep: usize,
    pub dim: usize,
    pub multiplicity: usize,
    /// `F(φ)^λ`.
    pub f: DMatrix<T>,
    /// `F(ω)^λ`.
    pub x1: DMatrix<T>,
    pub split: BlockDiagonalization<T>,
}

/// Fourier blocks of `φ` for every irrep of `ω`, each split into its
/// dominant and remainder parts.
#[derive(Debug, Clone)]
pub struct FourierSystem<T: Field> {
    pub blocks: Vec<SystemBlock<T>>,
    pub delta: Option<DeltaCertificate>,
}

impl<T: Field> FourierSystem<T> {
    /// `phi` holds transfer matrices, one per group element.
    pub fn new(rep: &FiniteGroupRep, phi: &[DMatrix<f64>]) -> Result<Self> {
        let blocks = rep
            .blocks()
            .into_iter()
            .map(|l| {
                let f = fourier::<T>(rep, phi, l)?;
                let x1 = reference_fourier::<T>(rep, l)?;
                let split = block_diagonalize(&x1, &(&f - &x1))?;
                let irrep = &rep.irreps()[l];
                Ok(SystemBlock {
                    irrep: l,
                    dim: irrep.dim,
                    multiplicity: irrep.multiplicity,
                    f,
                    x1,
                    split,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FourierSystem { blocks, delta: None })
    }

    pub fn with_delta(mut self, delta: DeltaCertificate) -> Self {
        self.delta = Some(delta);
        self
    }

    /// Largest entry of `F(ω)² - F(ω)` over blocks.
    pub fn projector_error(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| max_modulus(&(&b.x1 * &b.x1 - &b.x1)))
            .fold(0.0, f64::max)
    }

    /// Largest off-diagonal residual of the splits.
    pub fn split_residual(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| b.split.off_diagonal_residual(&b.f))
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone)]
pub struct DecayBlock<T: Field> {
    pub irrep: usize,
    /// `n_λ×n_λ`.
    pub m: DMatrix<T>,
    /// `n_λ×n_λ`.
    pub a: DMatrix<T>,
}

#[derive(Debug, Clone)]
pub struct DecayModel<T: Field> {
    pub blocks: Vec<DecayBlock<T>>,
}

impl<T: Field> DecayModel<T> {
    /// `Σ_λ Tr(A_λ M_λ^m)`.
    pub fn predict(&self, m: usize) -> T {
        self.blocks
            .iter()
            .fold(T::zero(), |acc, b| acc + (&b.a * power(&b.m, m)).trace())
    }

    pub fn eigenvalues(&self) -> Vec<Vec<Complex64>> {
        self.blocks
            .iter()
            .map(|b| {
                let (_, t) = to_complex(&b.m).schur().unpack();
                t.diagonal().iter().copied().collect()
            })
            .collect()
    }
}

/// `M_λ = X1 F(φ)^λ (X1 + X2 P1)` and
/// `A_λ = d_λ X1 L1† (I ⊗ |ρ⟩⟩⟨⟨Π|)(conj σ_λ(g_end⁻¹) ⊗ I) F(φ)^λ R1 X1`,
/// both compressed onto `V1`.
pub fn decay_model<T: Field>(
    rep: &FiniteGroupRep,
    system: &FourierSystem<T>,
    spam: &Spam,
    g_end: usize,
) -> Result<DecayModel<T>> {
    if g_end >= rep.order() {
        return Err(Error::Config(format!("g_end index {g_end} out of range")));
    }
    let dd = rep.operator_dim();
    let outer = spam.outer::<T>();
    let blocks = system
        .blocks
        .iter()
        .map(|b| {
            let s = &b.split;
            let sigma = lift::<T>(rep.irreps()[b.irrep].matrix(rep.inverse(g_end)));
            let w = identity::<T>(b.dim).kronecker(&outer) * sigma.kronecker(&identity::<T>(dd));
            let n1 = s.v1.ncols();
            let left = (identity::<T>(n1) + &s.q * &s.p) * adjoint(&s.v1) - &s.q * adjoint(&s.v2);
            let right = &s.v1 + &s.v2 * &s.p;
            let a = scale(&(left * w * &b.f * right), T::from_f64(b.dim as f64));
            DecayBlock {
                irrep: b.irrep,
                m: s.a1.clone(),
                a,
            }
        })
        .collect();
    Ok(DecayModel { blocks })
}

/// Gate-dependent noise `φ(g) = K_g ∘ ω(g)` with `K_g = exp(-i s H_g)`, `H_g`
/// a random Hermitian matrix of unit spectral norm drawn per element.
pub fn kick_noise(rep: &FiniteGroupRep, strength: f64, seed: u64) -> Vec<Superoperator> {
    let d = rep.dim();
    rep.elements()
        .iter()
        .enumerate()
        .map(|(g, u)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(g as u64);
            let a = CMatrix::from_fn(d, d, |_, _| {
                c64(rng.sample(StandardNormal), rng.sample(StandardNormal))
            });
            let h = (&a + a.adjoint()) * c64(0.5, 0.0);
            let h = &h * c64(1.0 / qcore::spectral_norm(&h), 0.0);
            let k = expm_hermitian(&h, strength);
            unitary_to_superop(&UnitaryOp::new_unchecked(k * u.matrix()))
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct KickCalibration {
    pub strength: f64,
    pub delta: DeltaCertificate,
    pub phi: Vec<Superoperator>,
}

/// Kick noise whose certified δ equals `target`, found by bisection on the
/// kick strength.
pub fn kick_noise_for_delta(rep: &FiniteGroupRep, target: f64, seed: u64) -> Result<KickCalibration> {
    if !(target > 0.0 && target < 1.0) {
        return Err(Error::InvalidParameter {
            name: "delta",
            value: target,
            reason: "target must lie in (0, 1)",
        });
    }
    let eval = |s: f64| -> Result<DeltaCertificate> { delta_certify(rep, &kick_noise(rep, s, seed)) };
    let mut hi = 1e-3;
    while eval(hi)?.upper < target {
        hi *= 2.0;
        if hi > std::f64::consts::PI {
            return Err(Error::InvalidParameter {
                name: "delta",
                value: target,
                reason: "unreachable with unitary kicks",
            });
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if eval(mid)?.upper < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let phi = kick_noise(rep, hi, seed);
    Ok(KickCalibration {
        strength: hi,
        delta: delta_certify(rep, &phi)?,
        phi,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoremPoint {
    pub m: usize,
    pub exact: f64,
    pub predicted: f64,
    pub residual: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockSummary {
    pub irrep: usize,
    pub dim: usize,
    pub multiplicity: usize,
    pub split_residual: f64,
    /// Eigenvalues of `M_λ` as `[re, im]`.
    pub eigenvalues: Vec<[f64; 2]>,
    pub lemma: LemmaReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremReport {
    pub group: String,
    pub order: usize,
    pub delta: DeltaCertificate,
    pub blocks: Vec<BlockSummary>,
    pub points: Vec<TheoremPoint>,
    pub pass: bool,
}

/// Compare the exact survival probability (group convolution) with the
/// decay model for `m = 1..=m_max`. Both sides are evaluated in double-double
/// arithmetic so that residuals far below f64 rounding are resolved.
pub fn verify_theorem(
    rep: &FiniteGroupRep,
    phi: &[Superoperator],
    spam: &Spam,
    g_end: usize,
    m_max: usize,
) -> Result<TheoremReport> {
    let delta = delta_certify(rep, phi)?;
    if !delta.premise_met() {
        return Err(Error::PremiseViolated(format!(
            "certified delta {:.6} is not below 1/9",
            delta.upper
        )));
    }
    let ptm = rep.ptms(phi)?;
    let system = FourierSystem::<Quad>::new(rep, &ptm)?.with_delta(delta);
    let model = decay_model(rep, &system, spam, g_end)?;
    let exact = convolution_survival::<Quad>(rep, &ptm, spam, g_end, m_max)?;
    let points: Vec<TheoremPoint> = exact
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let m = i + 1;
            let predicted = model.predict(m);
            let residual = (p - predicted).modulus();
            let bound = theorem_bound(delta.upper, m);
            TheoremPoint {
                m,
                exact: p.to_c64().re,
                predicted: predicted.to_c64().re,
                residual,
                bound,
                pass: residual <= bound,
            }
        })
        .collect();
    let blocks = system
        .blocks
        .iter()
        .zip(model.eigenvalues())
        .map(|(b, eig)| BlockSummary {
            irrep: b.irrep,
            dim: b.dim,
            multiplicity: b.multiplicity,
            split_residual: b.split.off_diagonal_residual(&b.f),
            eigenvalues: eig.iter().map(|z| [z.re, z.im]).collect(),
            lemma: b.split.report,
        })
        .collect();
    Ok(TheoremReport {
        group: rep.name().to_string(),
        order: rep.order(),
        delta,
        blocks,
        pass: points.iter().all(|p| p.pass),
        points,
    })
}

#[cfg(test)]
mod tests {
    use super::super::finite::BuiltinGroup;
    use super::*;
    use crate::noise::depolarizing;
    use crate::qcore::{compose, kraus_to_superop};

    fn clifford() -> FiniteGroupRep {
        FiniteGroupRep::builtin(BuiltinGroup::Clifford1).unwrap()
    }

    fn depolarized(rep: &FiniteGroupRep, p: f64) -> Vec<Superoperator> {
        let noise = kraus_to_superop(&depolarizing(1, p).unwrap());
        rep.ideal_superops()
            .iter()
            .map(|s| compose(&noise, s).unwrap())
            .collect()
    }

    #[test]
    fn noiseless_model_is_exact() {
        let rep = clifford();
        let ptm = rep.ptms(&rep.ideal_superops()).unwrap();
        let system = FourierSystem::<f64>::new(&rep, &ptm).unwrap();
        assert!(system.projector_error() < 1e-10);
        let spam = Spam::ground(&rep);
        let h = rep.index_of(&crate::groups::hadamard()).unwrap();
        for g_end in [0, h] {
            let model = decay_model(&rep, &system, &spam, g_end).unwrap();
            for eig in model.eigenvalues() {
                assert!(eig.iter().all(|z| (z - Complex64::new(1.0, 0.0)).norm() < 1e-12));
            }
            let exact = convolution_survival::<f64>(&rep, &ptm, &spam, g_end, 5).unwrap();
            for m in 1..=5 {
                assert!((model.predict(m) - exact[m - 1]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn depolarizing_shrinks_the_nontrivial_block() {
        let rep = clifford();
        let p = 0.03;
        let ptm = rep.ptms(&depolarized(&rep, p)).unwrap();
        let system = FourierSystem::<f64>::new(&rep, &ptm).unwrap();
        let spam = Spam::ground(&rep);
        let model = decay_model(&rep, &system, &spam, 0).unwrap();
        let ms: Vec<f64> = model.blocks.iter().map(|b| b.m[(0, 0)]).collect();
        assert!((ms[0] - 1.0).abs() < 1e-12);
        assert!((ms[1] - (1.0 - p)).abs() < 1e-12);
        let exact = convolution_survival::<f64>(&rep, &ptm, &spam, 0, 6).unwrap();
        for m in 1..=6 {
            assert!((model.predict(m) - exact[m - 1]).abs() < 1e-12);
        }
    }

    #[test]
    fn delta_examples() {
        let rep = clifford();
        let zero = delta_certify(&rep, &rep.ideal_superops()).unwrap();
        assert_eq!((zero.lower, zero.upper), (0.0, 0.0));
        let p = 0.02;
        let d = delta_certify(&rep, &depolarized(&rep, p)).unwrap();
        let known = 1.5 * p;
        assert!(d.lower <= known + 1e-12 && known <= d.upper + 1e-12, "{d:?}");
        let strong = depolarized(&rep, 0.1);
        assert!(!delta_certify(&rep, &strong).unwrap().premise_met());
        let err = verify_theorem(&rep, &strong, &Spam::ground(&rep), 0, 3).unwrap_err();
        assert!(err.is_premise());
    }

    #[test]
    fn kick_calibration_hits_target() {
        let rep = clifford();
        let cal = kick_noise_for_delta(&rep, 0.02, 11).unwrap();
        assert!((cal.delta.upper - 0.02).abs() < 1e-10);
        assert!(cal.delta.lower <= cal.delta.upper);
    }

    #[test]
    fn quad_and_f64_models_agree() {
        let rep = clifford();
        let cal = kick_noise_for_delta(&rep, 0.02, 3).unwrap();
        let ptm = rep.ptms(&cal.phi).unwrap();
        let spam = Spam::ground(&rep);
        let lo = decay_model(&rep, &FourierSystem::<f64>::new(&rep, &ptm).unwrap(), &spam, 0).unwrap();
        let hi = decay_model(&rep, &FourierSystem::<Quad>::new(&rep, &ptm).unwrap(), &spam, 0).unwrap();
        for m in 1..=10 {
            assert!((lo.predict(m) - hi.predict(m).to_c64().re).abs() < 1e-12);
        }
    }

    #[test]
    fn residual_bound_holds_for_gate_dependent_kicks() {
        for group in BuiltinGroup::ALL {
            let rep = FiniteGroupRep::builtin(group).unwrap();
            let cal = kick_noise_for_delta(&rep, 0.02, 5).unwrap();
            let report = verify_theorem(&rep, &cal.phi, &Spam::ground(&rep), 0, 10).unwrap();
            assert!(report.pass, "{group}: {:?}", report.points);
            let mults: Vec<usize> = report.blocks.iter().map(|b| b.multiplicity).collect();
            let expect: Vec<usize> = rep.blocks().iter().map(|&l| rep.irreps()[l].multiplicity).collect();
            assert_eq!(mults, expect);
        }
    }

    #[test]
    fn bound_formula() {
        assert_eq!(theorem_bound(0.0, 3), 0.0);
        let b = theorem_bound(0.01, 1);
        let expect = 16.0 / 0.91 * 0.01 * (2.0 + 0.04 / 0.95);
        assert!((b - expect).abs() < 1e-15);
        assert!(theorem_bound(0.02, 5) < theorem_bound(0.02, 4));
    }
}
