//! Finite-group surrogate of the decay-model theory: Fourier operators,
//! block diagonalization of their perturbations, and an explicit bound on how
//! far the survival probability can stray from the matrix-exponential model.

mod field;
pub mod decay;
pub mod finite;
pub mod fourier;
pub mod perturb;

pub use decay::{
    decay_model, delta_certify, kick_noise, kick_noise_for_delta, theorem_bound, verify_theorem, DecayBlock,
    DecayModel, DeltaCertificate, FourierSystem, KickCalibration, SystemBlock, TheoremPoint, TheoremReport,
    PREMISE_THRESHOLD,
};
pub use field::Field;
pub use finite::{BuiltinGroup, FiniteGroupRep, Irrep};
pub use fourier::{convolution_survival, fourier, fourier_blocks, fourier_survival, reference_fourier, Spam};
pub use perturb::{block_diagonalize, sep_numeric, BlockDiagonalization, LemmaReport};
pub use qd::Quad;
