use alloc::vec::Vec;
use core::f64::consts::FRAC_PI_2;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::quadrature::GaussLegendre;

/// Default Gauss–Legendre nodes per hyperspherical angle.
pub const DEFAULT_NODES: usize = 64;

/// `log F(Λ)` and its gradient with respect to `(λ₁, λ₂, λ₃)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogNormalizer {
    pub log_f: f64,
    pub grad: [f64; 3],
    /// Axes whose concentration fell outside the supported range and was
    /// clamped before evaluation. Their gradient entry is zero.
    pub clamped: [bool; 3],
}

/// Source of the normalization constant of a Bingham distribution.
pub trait Normalizer {
    fn log_normalizer(&self, lambdas: [f64; 3]) -> LogNormalizer;
}

impl<N: Normalizer + ?Sized> Normalizer for &N {
    fn log_normalizer(&self, lambdas: [f64; 3]) -> LogNormalizer {
        (**self).log_normalizer(lambdas)
    }
}

/// `log F`, its gradient and Hessian.
///
/// The gradient holds the second moments `E[(vᵢ₊₁ᵀx)²]`; the Hessian is
/// their covariance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub log_f: f64,
    pub grad: [f64; 3],
    pub hessian: [[f64; 3]; 3],
}

/// Product Gauss–Legendre rule over S³ in hyperspherical angles.
///
/// The integrand `exp(λ₁x₂² + λ₂x₃² + λ₃x₄²)` is even in every coordinate,
/// so integration runs over the positive orthant (all three angles in
/// `[0, π/2]`) and is scaled by 16. Every place the integrand can
/// concentrate (`xᵢ = 0` or `xᵢ = ±1`) then sits on an interval endpoint,
/// where Gauss–Legendre nodes cluster.
#[derive(Debug, Clone)]
pub struct Quadrature {
    nodes_per_angle: usize,
    // (weight including Jacobian, x₂², x₃², x₄²)
    points: Vec<[f64; 4]>,
}

impl Quadrature {
    pub fn new(nodes_per_angle: usize) -> Self {
        let gl = GaussLegendre::new(nodes_per_angle);
        let rule: Vec<(f64, f64)> = gl.on_interval(0.0, FRAC_PI_2).collect();
        let mut points = Vec::with_capacity(nodes_per_angle.pow(3));
        for &(t1, w1) in &rule {
            let (s1, c1) = t1.sin_cos();
            for &(t2, w2) in &rule {
                let (s2, c2) = t2.sin_cos();
                for &(p, w3) in &rule {
                    let (s3, c3) = p.sin_cos();
                    let x2 = s1 * c2;
                    let x3 = s1 * s2 * c3;
                    let x4 = s1 * s2 * s3;
                    let _ = c1;
                    let w = 16.0 * w1 * w2 * w3 * s1 * s1 * s2;
                    points.push([w, x2 * x2, x3 * x3, x4 * x4]);
                }
            }
        }
        Self {
            nodes_per_angle,
            points,
        }
    }

    pub fn nodes_per_angle(&self) -> usize {
        self.nodes_per_angle
    }

    /// `log F(Λ)`.
    pub fn log_f(&self, lambdas: [f64; 3]) -> f64 {
        let [l1, l2, l3] = lambdas;
        self.points
            .iter()
            .map(|p| p[0] * (l1 * p[1] + l2 * p[2] + l3 * p[3]).exp())
            .sum::<f64>()
            .ln()
    }

    /// `log F(Λ)` with the exact derivative of the quadrature sum.
    pub fn log_f_and_grad(&self, lambdas: [f64; 3]) -> (f64, [f64; 3]) {
        let [l1, l2, l3] = lambdas;
        let mut s = 0.0;
        let mut g = [0.0; 3];
        for p in &self.points {
            let e = p[0] * (l1 * p[1] + l2 * p[2] + l3 * p[3]).exp();
            s += e;
            g[0] += e * p[1];
            g[1] += e * p[2];
            g[2] += e * p[3];
        }
        (s.ln(), g.map(|x| x / s))
    }

    pub fn grad_log_f(&self, lambdas: [f64; 3]) -> [f64; 3] {
        self.log_f_and_grad(lambdas).1
    }

    pub fn moments(&self, lambdas: [f64; 3]) -> Moments {
        let [l1, l2, l3] = lambdas;
        let mut s = 0.0;
        let mut g = [0.0; 3];
        let mut h = [[0.0; 3]; 3];
        for p in &self.points {
            let e = p[0] * (l1 * p[1] + l2 * p[2] + l3 * p[3]).exp();
            s += e;
            let y = [p[1], p[2], p[3]];
            for i in 0..3 {
                g[i] += e * y[i];
                for j in i..3 {
                    h[i][j] += e * y[i] * y[j];
                }
            }
        }
        let grad = g.map(|x| x / s);
        let mut hessian = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in i..3 {
                let c = h[i][j] / s - grad[i] * grad[j];
                hessian[i][j] = c;
                hessian[j][i] = c;
            }
        }
        Moments {
            log_f: s.ln(),
            grad,
            hessian,
        }
    }
}

impl Default for Quadrature {
    fn default() -> Self {
        Self::new(DEFAULT_NODES)
    }
}

impl Normalizer for Quadrature {
    fn log_normalizer(&self, lambdas: [f64; 3]) -> LogNormalizer {
        let (log_f, grad) = self.log_f_and_grad(lambdas);
        LogNormalizer {
            log_f,
            grad,
            clamped: [false; 3],
        }
    }
}
