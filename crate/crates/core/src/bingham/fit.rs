//! Maximum-likelihood fitting.
//!
//! `V` comes from the eigenvectors of the scatter matrix `S = (1/n)Σ xxᵀ`
//! sorted by descending eigenvalue. `Λ` is then chosen so that the model
//! moments `∂ log F/∂λᵢ` equal the trailing three eigenvalues, solved by
//! coordinate-wise bracketed Newton iterations swept until the whole system
//! is consistent.

use nalgebra::{Matrix4, SymmetricEigen};

use super::{BinghamDistribution, Normalizer, Quadrature};
use crate::orientation::{ConcentrationMatrix, OrientationMatrix};
use crate::quaternion::QuatCoords;

/// Lower bound for fitted concentrations.
pub const FIT_LAMBDA_MIN: f64 = -1000.0;
/// Moment residual at which the sweep stops.
pub const FIT_TOLERANCE: f64 = 1e-6;
const MAX_SWEEPS: usize = 500;
const MIN_EIGEN_GAP: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FitError {
    #[error("at least 4 samples are required, got {0}")]
    InsufficientSamples(usize),
    #[error("scatter matrix eigenvalues {i} and {j} are separated by only {gap:e}")]
    DegenerateScatter { i: usize, j: usize, gap: f64 },
    #[error("moment matching did not converge (residual {0:e})")]
    NoConvergence(f64),
}

pub fn fit_mle<Q: QuatCoords>(
    samples: &[Q],
    quadrature: &Quadrature,
) -> Result<BinghamDistribution, FitError> {
    if samples.len() < 4 {
        return Err(FitError::InsufficientSamples(samples.len()));
    }
    let mut scatter = Matrix4::zeros();
    for q in samples {
        let x = nalgebra::Vector4::from(q.coords());
        scatter += x * x.transpose();
    }
    scatter /= samples.len() as f64;

    let eig = SymmetricEigen::new(scatter);
    let mut order = [0usize, 1, 2, 3];
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values: [f64; 4] = order.map(|i| eig.eigenvalues[i]);
    for i in 0..3 {
        let gap = values[i] - values[i + 1];
        if gap < MIN_EIGEN_GAP {
            return Err(FitError::DegenerateScatter { i, j: i + 1, gap });
        }
    }
    let mut v = Matrix4::zeros();
    for (col, &i) in order.iter().enumerate() {
        v.set_column(col, &eig.eigenvectors.column(i));
    }
    let v = OrientationMatrix::new(v).expect("eigenvectors of a symmetric matrix are orthonormal");

    let target = [values[1], values[2], values[3]];
    let lambdas = solve_concentrations(target, quadrature)?;
    // moment ordering implies concentration ordering; enforce it against rounding
    let mut l = lambdas.map(|x| x.min(0.0));
    l[1] = l[1].min(l[0]);
    l[2] = l[2].min(l[1]);
    let lambda = ConcentrationMatrix::new(l).expect("sorted non-positive concentrations");
    Ok(BinghamDistribution::new(v, lambda, quadrature))
}

/// Finds `Λ` in `[FIT_LAMBDA_MIN, 0]³` with `∇ log F(Λ) = target`.
fn solve_concentrations(target: [f64; 3], quadrature: &Quadrature) -> Result<[f64; 3], FitError> {
    let mut l = target.map(|t| (-0.5 / t.max(1e-12)).clamp(FIT_LAMBDA_MIN, 0.0));
    let mut residual = f64::INFINITY;
    for _ in 0..MAX_SWEEPS {
        for i in 0..3 {
            l[i] = solve_axis(l, i, target[i], quadrature);
        }
        residual = projected_residual(l, target, quadrature);
        if residual < FIT_TOLERANCE {
            return Ok(l);
        }
    }
    Err(FitError::NoConvergence(residual))
}

/// Residual of the moment equations, ignoring axes held at a bound whose
/// moment still pulls further past that bound.
fn projected_residual(l: [f64; 3], target: [f64; 3], quadrature: &Quadrature) -> f64 {
    let g = quadrature.log_normalizer(l).grad;
    (0..3)
        .map(|i| {
            let r = g[i] - target[i];
            let pinned = (l[i] >= 0.0 && r < 0.0) || (l[i] <= FIT_LAMBDA_MIN && r > 0.0);
            if pinned {
                0.0
            } else {
                r.abs()
            }
        })
        .fold(0.0, f64::max)
}

/// One-dimensional root of `∂ log F/∂λᵢ = target` with the other axes fixed.
/// The moment is increasing in `λᵢ`, so a bracket is kept and Newton steps
/// that leave it fall back to bisection.
fn solve_axis(l: [f64; 3], i: usize, target: f64, quadrature: &Quadrature) -> f64 {
    let eval = |x: f64| {
        let mut p = l;
        p[i] = x;
        let m = quadrature.moments(p);
        (m.grad[i] - target, m.hessian[i][i])
    };
    let (mut lo, mut hi) = (FIT_LAMBDA_MIN, 0.0);
    let (r_hi, _) = eval(hi);
    if r_hi <= 0.0 {
        return hi;
    }
    let (r_lo, _) = eval(lo);
    if r_lo >= 0.0 {
        return lo;
    }
    let mut x = l[i].clamp(lo, hi);
    for _ in 0..100 {
        let (r, d) = eval(x);
        if r.abs() < 1e-3 * FIT_TOLERANCE {
            return x;
        }
        if r > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let newton = x - r / d;
        x = if d > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if hi - lo < 1e-12 {
            break;
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orientation::birdal_v;
    use crate::quaternion::{geodesic_distance, UnitQuaternion};

    #[test]
    fn too_few_samples() {
        let q = Quadrature::new(8);
        assert_eq!(
            fit_mle(&[UnitQuaternion::IDENTITY; 3], &q),
            Err(FitError::InsufficientSamples(3))
        );
    }

    #[test]
    fn identical_samples_are_degenerate() {
        let q = Quadrature::new(8);
        assert!(matches!(
            fit_mle(&[UnitQuaternion::IDENTITY; 10], &q),
            Err(FitError::DegenerateScatter { .. })
        ));
    }

    #[test]
    fn moment_solver_inverts_the_gradient() {
        let quad = Quadrature::new(40);
        let truth = [-2.0, -9.0, -31.0];
        let target = quad.grad_log_f(truth);
        let l = solve_concentrations(target, &quad).unwrap();
        for i in 0..3 {
            assert!((l[i] - truth[i]).abs() < 1e-3 * truth[i].abs(), "{l:?}");
        }
    }

    #[test]
    fn uniform_samples_fit_near_zero() {
        let quad = Quadrature::new(32);
        let xs = BinghamDistribution::uniform().sample_seeded(20_000, 11);
        let d = fit_mle(&xs, &quad).unwrap();
        assert!(
            d.lambda().lambdas().iter().all(|l| l.abs() < 0.2),
            "{:?}",
            d.lambda()
        );
    }

    #[test]
    fn fit_is_invariant_to_sign_flips() {
        let quad = Quadrature::new(24);
        let truth = BinghamDistribution::new(
            birdal_v(&UnitQuaternion::new(0.4, -0.1, 0.8, 0.3).unwrap()),
            ConcentrationMatrix::new([-4.0, -8.0, -15.0]).unwrap(),
            &quad,
        );
        let xs = truth.sample_seeded(2000, 3);
        let flipped: alloc::vec::Vec<[f64; 4]> = xs
            .iter()
            .enumerate()
            .map(|(i, q)| {
                if i % 3 == 0 {
                    q.antipode()
                } else {
                    q.to_array()
                }
            })
            .collect();
        let a = fit_mle(&xs, &quad).unwrap();
        let b = fit_mle(&flipped, &quad).unwrap();
        for (x, y) in a.lambda().lambdas().iter().zip(b.lambda().lambdas()) {
            assert!((x - y).abs() < 1e-9);
        }
        assert_eq!(a.mode(), b.mode());
        assert!(geodesic_distance(&a.mode(), &b.mode()).radians() < 1e-7);
    }
}
