//! Orientation matrices `V` and concentration values `Λ` built from raw
//! predictor outputs.
//!
//! Three constructions are provided for `V`: Gram–Schmidt on an
//! unconstrained 4×4 matrix, the quaternion-matrix frame of the mode
//! ("Birdal"), and the Cayley transform of a skew-symmetric matrix. Each has
//! a matching backward pass mapping `∂L/∂V` to gradients of the raw values.

use alloc::vec::Vec;

use nalgebra::{Matrix4, Vector4};
#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::quaternion::{canonicalize, UnitQuaternion};

/// Gram–Schmidt residuals at or below this norm are rejected.
pub const DEGENERATE_RESIDUAL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum OrientationError {
    #[error(
        "Gram-Schmidt residual norm {norm:e} for column {column} is below the degeneracy threshold"
    )]
    DegenerateColumns { column: usize, norm: f64 },
    #[error("expected {expected} raw values, got {actual}")]
    RawLength { expected: usize, actual: usize },
    #[error("raw values must be finite")]
    NonFinite,
    #[error("raw quaternion has zero norm")]
    ZeroNorm,
    #[error("matrix is not orthonormal (residual {0:e})")]
    NotOrthonormal(f64),
    #[error("concentrations must satisfy 0 >= l1 >= l2 >= l3, got {0:?}")]
    InvalidConcentration([f64; 3]),
}

/// Orthogonal 4×4 matrix whose first column is the mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientationMatrix(Matrix4<f64>);

impl OrientationMatrix {
    /// Wraps `m` after checking `mᵀm = I` within `1e-9` (Frobenius).
    pub fn new(m: Matrix4<f64>) -> Result<Self, OrientationError> {
        let residual = orthonormality_residual(&m);
        if !residual.is_finite() || residual > 1e-9 {
            return Err(OrientationError::NotOrthonormal(residual));
        }
        Ok(Self(m))
    }

    pub fn identity() -> Self {
        Self(Matrix4::identity())
    }

    pub fn matrix(&self) -> &Matrix4<f64> {
        &self.0
    }

    pub fn column(&self, i: usize) -> Vector4<f64> {
        self.0.column(i).into_owned()
    }

    /// The first column, canonicalized.
    pub fn mode(&self) -> UnitQuaternion {
        let c = self.column(0);
        canonicalize([c[0], c[1], c[2], c[3]]).expect("columns of an orthogonal matrix are unit")
    }
}

/// `‖VᵀV − I‖_F`.
pub fn orthonormality_residual(m: &Matrix4<f64>) -> f64 {
    (m.transpose() * m - Matrix4::identity()).norm()
}

/// The free concentrations `(λ₁, λ₂, λ₃)` of `Λ = diag(0, λ₁, λ₂, λ₃)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConcentrationMatrix([f64; 3]);

impl ConcentrationMatrix {
    pub fn new(lambdas: [f64; 3]) -> Result<Self, OrientationError> {
        let [l1, l2, l3] = lambdas;
        let ok = lambdas.iter().all(|l| l.is_finite()) && 0.0 >= l1 && l1 >= l2 && l2 >= l3;
        if !ok {
            return Err(OrientationError::InvalidConcentration(lambdas));
        }
        Ok(Self(lambdas))
    }

    pub fn uniform() -> Self {
        Self([0.0; 3])
    }

    /// `λⱼ = −Σ_{k≤j} softplus(oₖ)`.
    pub fn from_raw(raw: [f64; 3]) -> Self {
        let mut acc = 0.0;
        let lambdas = raw.map(|o| {
            acc -= softplus(o);
            acc
        });
        Self(lambdas)
    }

    pub fn lambdas(&self) -> [f64; 3] {
        self.0
    }

    /// The full diagonal `(0, λ₁, λ₂, λ₃)`.
    pub fn diagonal(&self) -> [f64; 4] {
        [0.0, self.0[0], self.0[1], self.0[2]]
    }
}

/// `ln(1 + eˣ)`, evaluated without overflow.
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Backward pass of [`ConcentrationMatrix::from_raw`].
pub fn lambda_backward(raw: [f64; 3], grad_lambda: [f64; 3]) -> [f64; 3] {
    let mut out = [0.0; 3];
    let mut tail = 0.0;
    for k in (0..3).rev() {
        tail += grad_lambda[k];
        out[k] = -sigmoid(raw[k]) * tail;
    }
    out
}

/// Classical Gram–Schmidt over the columns of `m`.
pub fn gram_schmidt_v(m: &Matrix4<f64>) -> Result<OrientationMatrix, OrientationError> {
    let (v, _) = gram_schmidt_forward(m)?;
    Ok(OrientationMatrix(v))
}

fn gram_schmidt_forward(m: &Matrix4<f64>) -> Result<(Matrix4<f64>, [f64; 4]), OrientationError> {
    let mut v = Matrix4::zeros();
    let mut norms = [0.0; 4];
    for i in 0..4 {
        let mi = m.column(i).into_owned();
        let mut r = mi;
        for k in 0..i {
            let vk = v.column(k).into_owned();
            r -= vk * vk.dot(&mi);
        }
        let n = r.norm();
        if !n.is_finite() || n <= DEGENERATE_RESIDUAL {
            return Err(OrientationError::DegenerateColumns { column: i, norm: n });
        }
        norms[i] = n;
        v.set_column(i, &(r / n));
    }
    Ok((v, norms))
}

fn gram_schmidt_backward(
    m: &Matrix4<f64>,
    grad_v: &Matrix4<f64>,
) -> Result<Matrix4<f64>, OrientationError> {
    let (v, norms) = gram_schmidt_forward(m)?;
    let mut gv = *grad_v;
    let mut gm = Matrix4::zeros();
    for i in (0..4).rev() {
        let vi = v.column(i).into_owned();
        let gi = gv.column(i).into_owned();
        let g_res = (gi - vi * vi.dot(&gi)) / norms[i];
        let mi = m.column(i).into_owned();
        let mut g_mi = g_res;
        for k in 0..i {
            let vk = v.column(k).into_owned();
            let c = vk.dot(&mi);
            let g_c = -g_res.dot(&vk);
            let upd = g_res * (-c) + mi * g_c;
            let cur = gv.column(k).into_owned();
            gv.set_column(k, &(cur + upd));
            g_mi += vk * g_c;
        }
        gm.set_column(i, &g_mi);
    }
    Ok(gm)
}

fn birdal_matrix(q: [f64; 4]) -> Matrix4<f64> {
    let [q1, q2, q3, q4] = q;
    Matrix4::new(
        q1, -q2, -q3, q4, //
        q2, q1, q4, q3, //
        q3, -q4, q1, -q2, //
        q4, q3, -q2, -q1,
    )
}

/// The quaternion frame `V(q)` whose first column is `q`.
pub fn birdal_v(q: &UnitQuaternion) -> OrientationMatrix {
    OrientationMatrix(birdal_matrix(q.to_array()))
}

fn skew(q: [f64; 4]) -> Matrix4<f64> {
    let [q1, q2, q3, q4] = q;
    Matrix4::new(
        0.0, -q1, q4, -q3, //
        q1, 0.0, q3, q2, //
        -q4, -q3, 0.0, -q1, //
        q3, -q2, q1, 0.0,
    )
}

/// Cayley transform `(I − S)⁻¹(I + S)` of the skew matrix `S(q)`.
pub fn cayley_v(q: &[f64; 4]) -> OrientationMatrix {
    let (v, _) = cayley_forward(*q);
    OrientationMatrix(v)
}

fn cayley_forward(q: [f64; 4]) -> (Matrix4<f64>, Matrix4<f64>) {
    let s = skew(q);
    let id = Matrix4::identity();
    // I − S is always invertible for skew-symmetric S
    let inv = (id - s)
        .try_inverse()
        .expect("I - S is invertible for skew S");
    (inv * (id + s), inv)
}

fn basis(k: usize) -> [f64; 4] {
    let mut e = [0.0; 4];
    e[k] = 1.0;
    e
}

fn frobenius_dot(a: &Matrix4<f64>, b: &Matrix4<f64>) -> f64 {
    a.component_mul(b).sum()
}

/// Strategy used to turn raw outputs into `V`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VStrategy {
    GramSchmidt,
    #[default]
    Birdal,
    Cayley,
}

impl VStrategy {
    /// Number of raw values consumed by this construction.
    pub fn raw_len(self) -> usize {
        match self {
            VStrategy::GramSchmidt => 16,
            VStrategy::Birdal | VStrategy::Cayley => 4,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            VStrategy::GramSchmidt => "gram_schmidt",
            VStrategy::Birdal => "birdal",
            VStrategy::Cayley => "cayley",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "gram_schmidt" => Some(VStrategy::GramSchmidt),
            "birdal" => Some(VStrategy::Birdal),
            "cayley" => Some(VStrategy::Cayley),
            _ => None,
        }
    }

    /// Builds `V` from `raw`. Gram–Schmidt reads `raw` as a column-major
    /// 4×4 matrix; Birdal normalizes the 4-vector first; Cayley uses it as is.
    pub fn build(self, raw: &[f64]) -> Result<OrientationMatrix, OrientationError> {
        self.check(raw)?;
        match self {
            VStrategy::GramSchmidt => gram_schmidt_v(&Matrix4::from_column_slice(raw)),
            VStrategy::Birdal => {
                let (q, _) = normalize4(raw)?;
                Ok(OrientationMatrix(birdal_matrix(q)))
            }
            VStrategy::Cayley => Ok(cayley_v(&[raw[0], raw[1], raw[2], raw[3]])),
        }
    }

    /// Maps `∂L/∂V` back onto the raw values used by [`VStrategy::build`].
    pub fn backward(
        self,
        raw: &[f64],
        grad_v: &Matrix4<f64>,
    ) -> Result<Vec<f64>, OrientationError> {
        self.check(raw)?;
        match self {
            VStrategy::GramSchmidt => {
                let gm = gram_schmidt_backward(&Matrix4::from_column_slice(raw), grad_v)?;
                Ok(gm.as_slice().to_vec())
            }
            VStrategy::Birdal => {
                let (q, norm) = normalize4(raw)?;
                let gq: [f64; 4] =
                    core::array::from_fn(|k| frobenius_dot(grad_v, &birdal_matrix(basis(k))));
                let proj: f64 = (0..4).map(|k| q[k] * gq[k]).sum();
                Ok((0..4).map(|k| (gq[k] - q[k] * proj) / norm).collect())
            }
            VStrategy::Cayley => {
                let q = [raw[0], raw[1], raw[2], raw[3]];
                let (v, inv) = cayley_forward(q);
                let a = inv.transpose() * grad_v * (v + Matrix4::identity()).transpose();
                Ok((0..4).map(|k| frobenius_dot(&a, &skew(basis(k)))).collect())
            }
        }
    }

    fn check(self, raw: &[f64]) -> Result<(), OrientationError> {
        if raw.len() != self.raw_len() {
            return Err(OrientationError::RawLength {
                expected: self.raw_len(),
                actual: raw.len(),
            });
        }
        if raw.iter().any(|r| !r.is_finite()) {
            return Err(OrientationError::NonFinite);
        }
        Ok(())
    }
}

fn normalize4(raw: &[f64]) -> Result<([f64; 4], f64), OrientationError> {
    let norm = raw.iter().map(|r| r * r).sum::<f64>().sqrt();
    if norm <= crate::quaternion::ZERO_NORM_THRESHOLD {
        return Err(OrientationError::ZeroNorm);
    }
    Ok((
        [raw[0] / norm, raw[1] / norm, raw[2] / norm, raw[3] / norm],
        norm,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gram_schmidt_examples() {
        let v = gram_schmidt_v(&Matrix4::identity()).unwrap();
        assert_eq!(*v.matrix(), Matrix4::identity());
        let mut m = Matrix4::identity();
        m[(0, 0)] = 2.0;
        let v = gram_schmidt_v(&m).unwrap();
        assert!((v.matrix() - Matrix4::identity()).norm() < 1e-15);
    }

    #[test]
    fn gram_schmidt_rejects_rank_deficiency() {
        let mut m = Matrix4::identity();
        m.set_column(3, &Vector4::new(1.0, 1.0, 0.0, 0.0));
        assert!(matches!(
            gram_schmidt_v(&m),
            Err(OrientationError::DegenerateColumns { column: 3, .. })
        ));
    }

    #[test]
    fn birdal_examples() {
        let v = birdal_v(&UnitQuaternion::IDENTITY);
        assert_eq!(
            *v.matrix(),
            Matrix4::from_diagonal(&Vector4::new(1.0, 1.0, 1.0, -1.0))
        );
        let q = UnitQuaternion::new(0.0, 1.0, 0.0, 0.0).unwrap();
        let v = birdal_v(&q);
        assert_eq!(v.column(0), Vector4::new(0.0, 1.0, 0.0, 0.0));
        assert!(orthonormality_residual(v.matrix()) < 1e-15);
    }

    #[test]
    fn cayley_examples() {
        assert!((cayley_v(&[0.0; 4]).matrix() - Matrix4::identity()).norm() < 1e-15);
        let q = [0.3, -1.2, 0.5, 2.0];
        let a = cayley_v(&q);
        let b = cayley_v(&q.map(|x| 2.0 * x));
        assert!(orthonormality_residual(a.matrix()) < 1e-10);
        assert!((a.matrix().determinant() - 1.0).abs() < 1e-10);
        assert!((a.matrix() - b.matrix()).norm() > 1e-3);
    }

    #[test]
    fn lambda_examples() {
        let ln2 = core::f64::consts::LN_2;
        let l = ConcentrationMatrix::from_raw([0.0; 3]).lambdas();
        for (j, lj) in l.iter().enumerate() {
            assert!((lj + (j as f64 + 1.0) * ln2).abs() < 1e-15);
        }
        let l = ConcentrationMatrix::from_raw([-50.0; 3]).lambdas();
        assert!(l.iter().all(|x| x.abs() < 1e-12));
        // softplus(1) = ln(1 + e)
        let sp1 = (1.0 + core::f64::consts::E).ln();
        let l = ConcentrationMatrix::from_raw([1.0; 3]).lambdas();
        assert!(
            (l[0] + sp1).abs() < 1e-14
                && (l[1] + 2.0 * sp1).abs() < 1e-14
                && (l[2] + 3.0 * sp1).abs() < 1e-14
        );
        assert!(
            (l[0] + 1.3133).abs() < 1e-4
                && (l[1] + 2.6265).abs() < 1e-4
                && (l[2] + 3.9398).abs() < 1e-4
        );
    }

    #[test]
    fn softplus_is_stable() {
        assert_eq!(softplus(1000.0), 1000.0);
        assert!(softplus(-1000.0) >= 0.0 && softplus(-1000.0) < 1e-300);
        assert!((sigmoid(0.0) - 0.5).abs() < 1e-15);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) <= 1.0);
    }

    #[test]
    fn concentration_validation() {
        assert!(ConcentrationMatrix::new([0.0, -1.0, -2.0]).is_ok());
        assert!(ConcentrationMatrix::new([0.1, -1.0, -2.0]).is_err());
        assert!(ConcentrationMatrix::new([-1.0, -0.5, -2.0]).is_err());
        assert!(ConcentrationMatrix::new([-1.0, -2.0, f64::NAN]).is_err());
    }

    fn check_backward(strategy: VStrategy, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let raw: Vec<f64> = (0..strategy.raw_len())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let weights = Matrix4::from_fn(|_, _| rng.random_range(-1.0..1.0));
        let loss = |r: &[f64]| frobenius_dot(strategy.build(r).unwrap().matrix(), &weights);
        let grad = strategy.backward(&raw, &weights).unwrap();
        for k in 0..raw.len() {
            let h = 1e-6;
            let mut a = raw.clone();
            let mut b = raw.clone();
            a[k] += h;
            b[k] -= h;
            let fd = (loss(&a) - loss(&b)) / (2.0 * h);
            assert!(
                (fd - grad[k]).abs() < 1e-6 * fd.abs().max(1.0),
                "{strategy:?} k={k}: {fd} vs {}",
                grad[k]
            );
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        for seed in 0..10 {
            check_backward(VStrategy::GramSchmidt, seed);
            check_backward(VStrategy::Birdal, seed);
            check_backward(VStrategy::Cayley, seed);
        }
    }

    #[test]
    fn lambda_backward_matches_finite_differences() {
        let raw = [0.3, -1.1, 2.0];
        let w = [0.7, -0.2, 1.3];
        let f = |r: [f64; 3]| {
            let l = ConcentrationMatrix::from_raw(r).lambdas();
            l[0] * w[0] + l[1] * w[1] + l[2] * w[2]
        };
        let g = lambda_backward(raw, w);
        for k in 0..3 {
            let mut a = raw;
            let mut b = raw;
            a[k] += 1e-6;
            b[k] -= 1e-6;
            assert!(((f(a) - f(b)) / 2e-6 - g[k]).abs() < 1e-8);
        }
    }

    #[test]
    fn strategy_names_round_trip() {
        for s in [VStrategy::GramSchmidt, VStrategy::Birdal, VStrategy::Cayley] {
            assert_eq!(VStrategy::from_name(s.name()), Some(s));
        }
        assert_eq!(VStrategy::from_name("euler"), None);
    }
}
