//! Fitting `p_m = A·α^m + B` and turning α into error rates.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rbengine::RbDataset;

/// One averaged survival point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitPoint {
    pub m: f64,
    pub p: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
    pub alpha: f64,
    /// Row-major covariance of `(A, B, α)`.
    pub covariance: [[f64; 3]; 3],
    /// Weighted residual 2-norm.
    pub residual_norm: f64,
    pub converged: bool,
    /// Set when the data carry no decay information (constant survival).
    pub degenerate: bool,
    pub iterations: usize,
}

impl DecayFit {
    pub fn alpha_std(&self) -> f64 {
        self.covariance[2][2].max(0.0).sqrt()
    }

    pub fn predict(&self, m: f64) -> f64 {
        self.a * self.alpha.powf(m) + self.b
    }
}

const MAX_ITERATIONS: usize = 200;
const GRADIENT_TOL: f64 = 1e-12;

fn model(theta: &Vector3<f64>, m: f64) -> f64 {
    theta[0] * theta[2].powf(m) + theta[1]
}

fn cost(points: &[FitPoint], theta: &Vector3<f64>) -> f64 {
    points
        .iter()
        .map(|pt| pt.weight * (pt.p - model(theta, pt.m)).powi(2))
        .sum()
}

/// Normal matrix `JᵀWJ` and gradient `JᵀW r`.
fn normal_equations(points: &[FitPoint], theta: &Vector3<f64>) -> (Matrix3<f64>, Vector3<f64>) {
    let mut jtj = Matrix3::zeros();
    let mut jtr = Vector3::zeros();
    for pt in points {
        let am = theta[2].powf(pt.m);
        let dalpha = if pt.m == 0.0 {
            0.0
        } else {
            theta[0] * pt.m * theta[2].powf(pt.m - 1.0)
        };
        let j = Vector3::new(am, 1.0, dalpha);
        let r = pt.p - model(theta, pt.m);
        jtj += j * j.transpose() * pt.weight;
        jtr += j * (r * pt.weight);
    }
    (jtj, jtr)
}

/// Initial guess from the tail mean and a log-linear fit of the rest.
fn tercile_start(points: &[FitPoint]) -> Vector3<f64> {
    let mut sorted = points.to_vec();
    sorted.sort_by(|x, y| x.m.total_cmp(&y.m));
    let tail = (sorted.len() / 3).max(1);
    let b0 = sorted[sorted.len() - tail..].iter().map(|p| p.p).sum::<f64>() / tail as f64;
    let logs: Vec<(f64, f64)> = sorted
        .iter()
        .filter(|p| p.p - b0 > 1e-12)
        .map(|p| (p.m, (p.p - b0).ln()))
        .collect();
    let alpha0 = if logs.len() >= 2 {
        let n = logs.len() as f64;
        let mx = logs.iter().map(|x| x.0).sum::<f64>() / n;
        let my = logs.iter().map(|x| x.1).sum::<f64>() / n;
        let sxx: f64 = logs.iter().map(|x| (x.0 - mx).powi(2)).sum();
        let sxy: f64 = logs.iter().map(|x| (x.0 - mx) * (x.1 - my)).sum();
        if sxx > 0.0 {
            (sxy / sxx).exp()
        } else {
            0.9
        }
    } else {
        0.9
    };
    let alpha0 = alpha0.clamp(1e-3, 1.0 - 1e-9);
    let first = sorted[0];
    let a0 = (first.p - b0) / alpha0.powf(first.m);
    Vector3::new(a0, b0, alpha0)
}

/// Weighted linear solve for `(A, B)` at fixed α.
fn linear_ab(points: &[FitPoint], alpha: f64) -> Option<(f64, f64)> {
    let (mut s11, mut s12, mut s22, mut t1, mut t2) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for pt in points {
        let x = alpha.powf(pt.m);
        s11 += pt.weight * x * x;
        s12 += pt.weight * x;
        s22 += pt.weight;
        t1 += pt.weight * x * pt.p;
        t2 += pt.weight * pt.p;
    }
    let det = s11 * s22 - s12 * s12;
    if det.abs() < 1e-300 {
        return None;
    }
    Some(((t1 * s22 - t2 * s12) / det, (s11 * t2 - s12 * t1) / det))
}

/// Initial guess from a grid over α with `(A, B)` solved exactly.
fn grid_start(points: &[FitPoint]) -> Option<Vector3<f64>> {
    let mut best: Option<(f64, Vector3<f64>)> = None;
    for i in 0..=240 {
        let alpha = 1.0 - 10f64.powf(-6.0 + 6.0 * i as f64 / 240.0);
        if let Some((a, b)) = linear_ab(points, alpha) {
            let theta = Vector3::new(a, b, alpha);
            let c = cost(points, &theta);
            if best.as_ref().map_or(true, |(bc, _)| c < *bc) {
                best = Some((c, theta));
            }
        }
    }
    best.map(|(_, t)| t)
}

struct Refined {
    theta: Vector3<f64>,
    cost: f64,
    converged: bool,
    iterations: usize,
}

/// Levenberg-Marquardt with α kept in `[0, 1]` by shortening the step.
fn refine(points: &[FitPoint], start: Vector3<f64>) -> Refined {
    let mut theta = start;
    theta[2] = theta[2].clamp(0.0, 1.0);
    let mut c = cost(points, &theta);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let (jtj, jtr) = normal_equations(points, &theta);
        let scale = jtj.diagonal().max().max(1.0);
        if jtr.norm() < GRADIENT_TOL * scale.sqrt().max(1.0) {
            converged = true;
            break;
        }
        let mut improved = false;
        while lambda < 1e16 {
            let mut damped = jtj;
            for k in 0..3 {
                damped[(k, k)] += lambda * jtj[(k, k)].max(1e-12 * scale);
            }
            let Some(step) = damped.lu().solve(&jtr) else {
                lambda *= 10.0;
                continue;
            };
            let mut t = 1.0;
            let new_alpha = theta[2] + step[2];
            if new_alpha > 1.0 {
                t = (1.0 - theta[2]) / step[2];
            } else if new_alpha < 0.0 {
                t = -theta[2] / step[2];
            }
            let candidate = theta + step * t;
            let cc = cost(points, &candidate);
            if cc <= c {
                let small = (candidate - theta).norm() <= 1e-15 * (theta.norm() + 1e-15);
                theta = candidate;
                c = cc;
                lambda = (lambda / 10.0).max(1e-12);
                improved = true;
                converged = small;
                break;
            }
            lambda *= 10.0;
        }
        if !improved {
            // No downhill step at any damping: a minimum to working precision.
            converged = true;
            break;
        }
        if converged {
            break;
        }
    }
    Refined {
        theta,
        cost: c,
        converged,
        iterations,
    }
}

/// Weighted least-squares fit of `p_m = A·α^m + B`.
pub fn fit_decay(points: &[FitPoint]) -> Result<DecayFit> {
    let mut ms: Vec<f64> = points.iter().map(|p| p.m).collect();
    ms.sort_by(f64::total_cmp);
    ms.dedup();
    if ms.len() < 4 {
        return Err(Error::Config(format!(
            "decay fit needs at least 4 distinct lengths, got {}",
            ms.len()
        )));
    }
    if points.iter().any(|p| !(p.weight > 0.0) || !p.p.is_finite()) {
        return Err(Error::Config("fit points need finite values and positive weights".into()));
    }
    let p0 = points[0].p;
    if points.iter().all(|p| (p.p - p0).abs() <= 1e-12) {
        return Ok(DecayFit {
            a: 0.0,
            b: p0,
            alpha: 1.0,
            covariance: [[0.0; 3]; 3],
            residual_norm: 0.0,
            converged: false,
            degenerate: true,
            iterations: 0,
        });
    }
    let mut best = refine(points, tercile_start(points));
    if let Some(g) = grid_start(points) {
        let alt = refine(points, g);
        if alt.cost < best.cost {
            best = alt;
        }
    }
    let n = points.len();
    let (jtj, _) = normal_equations(points, &best.theta);
    let dof = n.saturating_sub(3).max(1) as f64;
    let covariance = match jtj.try_inverse() {
        Some(inv) => inv * (best.cost / dof),
        None => Matrix3::from_element(f64::INFINITY),
    };
    let mut cov = [[0.0; 3]; 3];
    for (i, row) in cov.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = covariance[(i, j)];
        }
    }
    Ok(DecayFit {
        a: best.theta[0],
        b: best.theta[1],
        alpha: best.theta[2],
        covariance: cov,
        residual_norm: best.cost.sqrt(),
        converged: best.converged,
        degenerate: false,
        iterations: best.iterations,
    })
}

/// Fit points from a dataset: inverse binomial variance of the mean at
/// `shots > 0`, uniform weights at `shots = 0`.
pub fn points_from_dataset(ds: &RbDataset) -> Vec<FitPoint> {
    ds.lengths
        .iter()
        .map(|l| {
            let weight = if ds.shots > 0 {
                let n = (ds.shots as f64) * l.n_circuits() as f64;
                let p = l.mean.clamp(0.5 / ds.shots as f64, 1.0 - 0.5 / ds.shots as f64);
                n / (p * (1.0 - p))
            } else {
                1.0
            };
            FitPoint {
                m: l.m as f64,
                p: l.mean,
                weight,
            }
        })
        .collect()
}

pub fn fit_dataset(ds: &RbDataset) -> Result<DecayFit> {
    fit_decay(&points_from_dataset(ds))
}

/// Average error per group element, `r = (1 − α)(D − 1)/D`.
pub fn error_per_gate(fit: &DecayFit, dim: usize) -> f64 {
    let d = dim as f64;
    (1.0 - fit.alpha.min(1.0)) * (d - 1.0) / d
}

pub fn error_per_gate_std(fit: &DecayFit, dim: usize) -> f64 {
    let d = dim as f64;
    fit.alpha_std() * (d - 1.0) / d
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterleavedReport {
    pub fidelity: f64,
    pub uncertainty: f64,
    pub alpha_ref: f64,
    pub alpha_int: f64,
    /// `α_int > α_ref`: the interleaved gate looks better than perfect.
    pub unphysical: bool,
}

/// Gate fidelity of the interleaved gate with first-order uncertainty.
pub fn interleaved_report(fit_ref: &DecayFit, fit_int: &DecayFit, dim: usize) -> Result<InterleavedReport> {
    for (name, f) in [("reference", fit_ref), ("interleaved", fit_int)] {
        if f.degenerate {
            return Err(Error::Numerical(format!("{name} fit is degenerate")));
        }
        if !f.converged {
            return Err(Error::Numerical(format!("{name} fit did not converge")));
        }
    }
    let (ar, ai) = (fit_ref.alpha, fit_int.alpha);
    if ar <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "alpha_ref",
            value: ar,
            reason: "must be positive",
        });
    }
    let d = dim as f64;
    let k = (d - 1.0) / d;
    let fidelity = 1.0 - k * (1.0 - ai / ar);
    let (sr, si) = (fit_ref.alpha_std(), fit_int.alpha_std());
    let uncertainty = k * ((si / ar).powi(2) + (ai * sr / (ar * ar)).powi(2)).sqrt();
    let unphysical = ai > ar;
    if unphysical {
        log::warn!("interleaved decay {ai} exceeds reference decay {ar}");
    }
    Ok(InterleavedReport {
        fidelity,
        uncertainty,
        alpha_ref: ar,
        alpha_int: ai,
        unphysical,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Binomial, Distribution};

    fn exact(a: f64, b: f64, alpha: f64, ms: impl IntoIterator<Item = usize>) -> Vec<FitPoint> {
        ms.into_iter()
            .map(|m| FitPoint {
                m: m as f64,
                p: a * alpha.powi(m as i32) + b,
                weight: 1.0,
            })
            .collect()
    }

    #[test]
    fn zero_residual_recovery() {
        let fit = fit_decay(&exact(0.75, 0.25, 0.98, 1..=10)).unwrap();
        assert!((fit.alpha - 0.98).abs() < 1e-9, "{fit:?}");
        assert!((fit.a - 0.75).abs() < 1e-7);
        assert!((fit.b - 0.25).abs() < 1e-7);
        assert!(fit.converged);
    }

    #[test]
    fn constant_data_is_degenerate() {
        let fit = fit_decay(&exact(0.0, 1.0, 0.5, 1..=6)).unwrap();
        assert!(fit.degenerate);
        let err = interleaved_report(&fit, &fit, 4).unwrap_err();
        assert!(err.is_numerical());
    }

    #[test]
    fn too_few_lengths() {
        assert!(fit_decay(&exact(0.7, 0.3, 0.9, [1, 2, 3])).is_err());
    }

    #[test]
    fn slow_decay_far_from_tail() {
        // Tail mean is far above B; the grid start rescues the fit.
        let fit = fit_decay(&exact(0.75, 0.25, 0.999, [1, 2, 5, 10, 20, 50])).unwrap();
        assert!((fit.alpha - 0.999).abs() < 1e-9, "{fit:?}");
    }

    #[test]
    fn error_rate_formulas() {
        let fit = fit_decay(&exact(0.75, 0.25, 0.99, 1..=10)).unwrap();
        assert!((error_per_gate(&fit, 4) - 0.0075).abs() < 1e-9);
        let one = DecayFit { alpha: 1.0, ..fit.clone() };
        assert_eq!(error_per_gate(&one, 4), 0.0);
        let rep = interleaved_report(&fit, &fit, 4).unwrap();
        assert!((rep.fidelity - 1.0).abs() < 1e-15);
        assert!(!rep.unphysical);
    }

    fn binomial_points(alpha: f64, shots: u64, circuits: u64, rng: &mut ChaCha8Rng) -> Vec<FitPoint> {
        [1usize, 2, 4, 8, 16, 32, 64, 100]
            .iter()
            .map(|&m| {
                let p = 0.75 * alpha.powi(m as i32) + 0.25;
                let n = shots * circuits;
                let k = Binomial::new(n, p).unwrap().sample(rng);
                let est = k as f64 / n as f64;
                FitPoint {
                    m: m as f64,
                    p: est,
                    weight: n as f64 / (est * (1.0 - est)),
                }
            })
            .collect()
    }

    #[test]
    fn binomial_noise_coverage() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let alpha = 0.98;
        let trials = 200;
        let covered = (0..trials)
            .filter(|_| {
                let fit = fit_decay(&binomial_points(alpha, 5000, 30, &mut rng)).unwrap();
                (fit.alpha - alpha).abs() <= 3.0 * fit.alpha_std()
            })
            .count();
        assert!(covered as f64 >= 0.9 * trials as f64, "coverage {covered}/{trials}");
    }

    #[test]
    fn interleaved_uncertainty_shrinks_with_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut widths = Vec::new();
        for circuits in [30, 480] {
            let mut acc = 0.0;
            for _ in 0..20 {
                let r = fit_decay(&binomial_points(0.98, 5000, circuits, &mut rng)).unwrap();
                let i = fit_decay(&binomial_points(0.97, 5000, circuits, &mut rng)).unwrap();
                let rep = interleaved_report(&r, &i, 4).unwrap();
                assert!(rep.uncertainty >= 0.0);
                acc += rep.uncertainty;
            }
            widths.push(acc / 20.0);
        }
        // 16x the data: about 4x narrower.
        let ratio = widths[0] / widths[1];
        assert!((3.0..5.3).contains(&ratio), "ratio {ratio}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn scale_equivariance(alpha in 0.85f64..0.995, c in 0.3f64..1.0) {
            let pts = exact(0.7, 0.3, alpha, 1..=12);
            let scaled: Vec<_> = pts.iter().map(|p| FitPoint { p: p.p * c, ..*p }).collect();
            let f1 = fit_decay(&pts).unwrap();
            let f2 = fit_decay(&scaled).unwrap();
            prop_assert!((f1.alpha - f2.alpha).abs() < 1e-9);
            prop_assert!((f2.a - c * f1.a).abs() < 1e-7);
            prop_assert!((f2.b - c * f1.b).abs() < 1e-7);
        }

        #[test]
        fn shift_covariance(alpha in 0.85f64..0.995) {
            let pts = exact(0.7, 0.3, alpha, 1..=12);
            let shifted: Vec<_> = pts.iter().map(|p| FitPoint { m: p.m + 1.0, ..*p }).collect();
            let f1 = fit_decay(&pts).unwrap();
            let f2 = fit_decay(&shifted).unwrap();
            prop_assert!((f1.alpha - f2.alpha).abs() < 1e-9);
            prop_assert!((f2.a - f1.a / f1.alpha).abs() < 1e-7);
        }
    }
}
