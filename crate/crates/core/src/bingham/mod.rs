//! The Bingham distribution on S³.
//!
//! `p(x) = exp(xᵀVΛVᵀx) / F(Λ)` with `Λ = diag(0, λ₁, λ₂, λ₃)` and
//! `0 ≥ λ₁ ≥ λ₂ ≥ λ₃`. The normalization constant comes from a
//! [`Normalizer`]: either the direct [`Quadrature`] or an interpolated
//! [`NormalizationTable`].

mod fit;
mod normalizer;
mod sampling;
mod table;

use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use fit::{fit_mle, FitError, FIT_LAMBDA_MIN, FIT_TOLERANCE};
pub use normalizer::{LogNormalizer, Moments, Normalizer, Quadrature, DEFAULT_NODES};
pub use table::{
    AxisSpec, NormalizationTable, TableError, TableSpec, MIN_SUPPORTED_LAMBDA, TABLE_MAGIC,
    TABLE_VERSION,
};

use crate::orientation::{sigmoid, ConcentrationMatrix, OrientationMatrix};
use crate::quaternion::{QuatCoords, UnitQuaternion};

/// A Bingham distribution with its cached normalization constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinghamDistribution {
    v: OrientationMatrix,
    lambda: ConcentrationMatrix,
    log_f: f64,
    grad_log_f: [f64; 3],
}

impl BinghamDistribution {
    pub fn new(
        v: OrientationMatrix,
        lambda: ConcentrationMatrix,
        normalizer: &impl Normalizer,
    ) -> Self {
        let n = normalizer.log_normalizer(lambda.lambdas());
        Self {
            v,
            lambda,
            log_f: n.log_f,
            grad_log_f: n.grad,
        }
    }

    /// Assembles a distribution from an already evaluated normalizer.
    pub fn from_parts(
        v: OrientationMatrix,
        lambda: ConcentrationMatrix,
        normalizer: LogNormalizer,
    ) -> Self {
        Self {
            v,
            lambda,
            log_f: normalizer.log_f,
            grad_log_f: normalizer.grad,
        }
    }

    /// The uniform distribution on S³.
    pub fn uniform() -> Self {
        Self {
            v: OrientationMatrix::identity(),
            lambda: ConcentrationMatrix::uniform(),
            log_f: (2.0 * core::f64::consts::PI * core::f64::consts::PI).ln(),
            grad_log_f: [0.25; 3],
        }
    }

    pub fn v(&self) -> &OrientationMatrix {
        &self.v
    }

    pub fn lambda(&self) -> &ConcentrationMatrix {
        &self.lambda
    }

    pub fn log_f(&self) -> f64 {
        self.log_f
    }

    /// `∂ log F/∂λᵢ`, equal to `E[(vᵢ₊₁ᵀx)²]`.
    pub fn grad_log_f(&self) -> [f64; 3] {
        self.grad_log_f
    }

    pub fn mode(&self) -> UnitQuaternion {
        self.v.mode()
    }

    /// `xᵀVΛVᵀx = Σⱼ λⱼ (vⱼ₊₁ᵀx)²`.
    pub fn quadratic_form(&self, x: &impl QuatCoords) -> f64 {
        let x = nalgebra::Vector4::from(x.coords());
        let l = self.lambda.lambdas();
        (0..3)
            .map(|j| l[j] * self.v.column(j + 1).dot(&x).powi(2))
            .sum()
    }

    pub fn log_pdf(&self, x: &impl QuatCoords) -> f64 {
        self.quadratic_form(x) - self.log_f
    }

    pub fn pdf(&self, x: &impl QuatCoords) -> f64 {
        self.log_pdf(x).exp()
    }

    /// `log F − Σᵢ λᵢ ∂ log F/∂λᵢ`.
    pub fn entropy(&self) -> f64 {
        let l = self.lambda.lambdas();
        self.log_f - (0..3).map(|i| l[i] * self.grad_log_f[i]).sum::<f64>()
    }

    /// Entropy squashed into `(0, 1)`.
    pub fn uncertainty(&self) -> f64 {
        sigmoid(self.entropy())
    }

    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<UnitQuaternion> {
        sampling::AcgSampler::new(self).sample(n, rng)
    }

    /// `n` draws from a ChaCha8 stream seeded with `seed`.
    pub fn sample_seeded(&self, n: usize, seed: u64) -> Vec<UnitQuaternion> {
        self.sample(n, &mut ChaCha8Rng::seed_from_u64(seed))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orientation::birdal_v;
    use core::f64::consts::PI;
    use rand_distr::{Distribution, StandardNormal};

    fn log_area() -> f64 {
        (2.0 * PI * PI).ln()
    }

    fn random_unit(rng: &mut ChaCha8Rng) -> [f64; 4] {
        let v: [f64; 4] = core::array::from_fn(|_| StandardNormal.sample(rng));
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.map(|x| x / n)
    }

    fn dist(q: &UnitQuaternion, l: [f64; 3], quad: &Quadrature) -> BinghamDistribution {
        BinghamDistribution::new(birdal_v(q), ConcentrationMatrix::new(l).unwrap(), quad)
    }

    #[test]
    fn uniform_log_pdf_and_entropy() {
        let quad = Quadrature::new(32);
        let d = dist(&UnitQuaternion::IDENTITY, [0.0; 3], &quad);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            let x = random_unit(&mut rng);
            assert!((d.log_pdf(&x) + log_area()).abs() < 1e-10);
        }
        assert!((d.entropy() - log_area()).abs() < 1e-10);
        assert!((d.uncertainty() - 0.9519).abs() < 5e-4);
        assert!((BinghamDistribution::uniform().entropy() - d.entropy()).abs() < 1e-10);
    }

    #[test]
    fn mode_maximizes_density() {
        let quad = Quadrature::new(32);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let q = UnitQuaternion::random(&mut rng);
        let d = dist(&q, [-2.0, -5.0, -9.0], &quad);
        assert!((d.log_pdf(&q) + d.log_f()).abs() < 1e-12);
        assert_eq!(d.mode(), q);
        for _ in 0..200 {
            let x = random_unit(&mut rng);
            assert!(d.log_pdf(&x) <= d.log_pdf(&q) + 1e-12);
            let neg = x.map(|c| -c);
            assert_eq!(d.log_pdf(&x), d.log_pdf(&neg));
        }
    }

    #[test]
    fn entropy_decreases_with_concentration() {
        let quad = Quadrature::new(48);
        let mut prev = log_area() + 1e-12;
        for s in 1..30 {
            let c = -(s as f64) * 2.0;
            let d = dist(&UnitQuaternion::IDENTITY, [c, 1.5 * c, 2.0 * c], &quad);
            let e = d.entropy();
            assert!(e < prev, "entropy not decreasing at scale {c}");
            prev = e;
        }
    }

    #[test]
    fn shifting_the_exponent_keeps_the_density() {
        // Λ' = Λ + c·I changes both the quadratic form and F by the same e^c
        let quad = Quadrature::new(48);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let q = UnitQuaternion::random(&mut rng);
        let d = dist(&q, [-1.0, -4.0, -6.0], &quad);
        let c = -0.75;
        let shifted_log_f = quad.log_f(d.lambda().lambdas()) + c;
        for _ in 0..20 {
            let x = random_unit(&mut rng);
            let shifted = d.quadratic_form(&x) + c - shifted_log_f;
            assert!((shifted - d.log_pdf(&x)).abs() < 1e-9);
        }
    }
}
