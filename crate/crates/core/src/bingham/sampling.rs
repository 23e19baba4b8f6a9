//! Rejection sampling with an angular central Gaussian envelope
//! (Kent, Ganeiber & Mardia, 2013).
//!
//! Writing the density as `exp(−xᵀAx)` with `A = −VΛVᵀ ⪰ 0`, the envelope
//! is ACG with `Ω = I + 2A/b`, where `b` solves `Σᵢ 1/(b + 2aᵢ) = 1` over
//! the eigenvalues `aᵢ` of `A`. The ratio of the two densities is bounded
//! by `exp(−(q − b)/2)(q/b)^{q/2}` with `q = 4`.

use alloc::vec::Vec;

use nalgebra::Vector4;
#[cfg(not(feature = "std"))]
use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::BinghamDistribution;
use crate::quaternion::{canonicalize, UnitQuaternion};

const DIM: f64 = 4.0;

pub(super) struct AcgSampler<'a> {
    dist: &'a BinghamDistribution,
    /// Standard deviations of the ACG Gaussian along each column of V.
    scales: [f64; 4],
    a: [f64; 4],
    b: f64,
    log_bound: f64,
}

impl<'a> AcgSampler<'a> {
    pub(super) fn new(dist: &'a BinghamDistribution) -> Self {
        let l = dist.lambda().lambdas();
        let a = [0.0, -l[0], -l[1], -l[2]];
        let b = solve_b(&a);
        let scales = a.map(|ai| 1.0 / (1.0 + 2.0 * ai / b).sqrt());
        let log_bound = -(DIM - b) / 2.0 + (DIM / 2.0) * (DIM / b).ln();
        Self {
            dist,
            scales,
            a,
            b,
            log_bound,
        }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vector4<f64> {
        loop {
            let mut y = Vector4::zeros();
            for i in 0..4 {
                let z: f64 = StandardNormal.sample(rng);
                y += self.dist.v().column(i) * (z * self.scales[i]);
            }
            let n = y.norm();
            if n <= 1e-300 {
                continue;
            }
            let x = y / n;
            let proj: [f64; 4] = core::array::from_fn(|i| self.dist.v().column(i).dot(&x));
            let xax: f64 = (0..4).map(|i| self.a[i] * proj[i] * proj[i]).sum();
            let xox = 1.0 + 2.0 * xax / self.b;
            let log_ratio = -xax + (DIM / 2.0) * xox.ln() - self.log_bound;
            let u: f64 = rng.random();
            if u.ln() < log_ratio {
                return x;
            }
        }
    }

    pub(super) fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<UnitQuaternion> {
        (0..n)
            .map(|_| {
                let x = self.draw(rng);
                canonicalize([x[0], x[1], x[2], x[3]]).expect("sample is unit")
            })
            .collect()
    }
}

/// Root of `Σᵢ 1/(b + 2aᵢ) − 1` on `[1, 4]` (one `aᵢ` is zero).
fn solve_b(a: &[f64; 4]) -> f64 {
    let f = |b: f64| a.iter().map(|ai| 1.0 / (b + 2.0 * ai)).sum::<f64>() - 1.0;
    let (mut lo, mut hi) = (1.0, DIM);
    if f(hi) >= 0.0 {
        return hi;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    0.5 * (lo + hi)
}
