//! Shared fixtures for the criterion benches.

use rblab_core::groups::GroupKind;
use rblab_core::noise::NoiseModel;
use rblab_core::rbengine::{FixedGate, RbConfig};

/// Interleaved two-qubit experiment at bench scale.
pub fn interleaved_config(group: GroupKind) -> RbConfig {
    RbConfig {
        lengths: Some(vec![1, 4, 16, 64]),
        circuits_per_length: 8,
        shots: 0,
        noise: NoiseModel::reference_depolarizing(),
        interleaved: Some(FixedGate::Cnot),
        seed: 1,
        ..RbConfig::new(group, 2)
    }
}

/// Noiseless-shape decay samples `0.7·α^m + 0.25`.
pub fn decay_points(alpha: f64) -> Vec<rblab_core::analysis::FitPoint> {
    [1, 2, 4, 8, 16, 32, 48, 64, 96, 128, 192]
        .iter()
        .map(|&m| rblab_core::analysis::FitPoint {
            m: m as f64,
            p: 0.7 * alpha.powi(m) + 0.25,
            weight: 1.0,
        })
        .collect()
}
