//! Unit quaternions, hemisphere canonicalization and rotation distances.
//!
//! Components are stored scalar-first, `(w, x, y, z)`. Every
//! [`UnitQuaternion`] is kept in canonical form: unit norm and the first
//! nonzero component positive, so `q` and `-q` share one representative.

use core::fmt;

use nalgebra::{Matrix3, Vector3, Vector4};
#[cfg(not(feature = "std"))]
use num_traits::Float;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Inputs with a norm at or below this are rejected by [`canonicalize`].
pub const ZERO_NORM_THRESHOLD: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
pub enum QuaternionError {
    #[error("quaternion norm {0:e} is too small to normalize")]
    ZeroNorm(f64),
    #[error("quaternion has non-finite components")]
    NonFinite,
}

/// A rotation as a canonical unit quaternion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitQuaternion {
    coords: [f64; 4],
}

/// Anything that can be read as a raw `(w, x, y, z)` 4-vector.
///
/// Distance functions accept this so they can be evaluated on raw,
/// non-canonical vectors (e.g. `-q`) as well as on [`UnitQuaternion`]s.
pub trait QuatCoords {
    fn coords(&self) -> [f64; 4];
}

impl QuatCoords for UnitQuaternion {
    fn coords(&self) -> [f64; 4] {
        self.coords
    }
}

impl QuatCoords for [f64; 4] {
    fn coords(&self) -> [f64; 4] {
        *self
    }
}

impl QuatCoords for Vector4<f64> {
    fn coords(&self) -> [f64; 4] {
        [self[0], self[1], self[2], self[3]]
    }
}

/// Normalizes `q` and flips it into the canonical hemisphere.
pub fn canonicalize(q: [f64; 4]) -> Result<UnitQuaternion, QuaternionError> {
    if q.iter().any(|c| !c.is_finite()) {
        return Err(QuaternionError::NonFinite);
    }
    let norm = q.iter().map(|c| c * c).sum::<f64>().sqrt();
    if norm <= ZERO_NORM_THRESHOLD {
        return Err(QuaternionError::ZeroNorm(norm));
    }
    // already-normalized input is left untouched so canonicalize is idempotent
    let mut coords = if (norm - 1.0).abs() <= 4.0 * f64::EPSILON {
        q
    } else {
        q.map(|c| c / norm)
    };
    let leading = coords.iter().copied().find(|c| *c != 0.0).unwrap_or(1.0);
    if leading < 0.0 {
        coords = coords.map(|c| -c);
    }
    // -0.0 would survive the flip of trailing zeros
    coords = coords.map(|c| if c == 0.0 { 0.0 } else { c });
    Ok(UnitQuaternion { coords })
}

impl UnitQuaternion {
    pub const IDENTITY: UnitQuaternion = UnitQuaternion {
        coords: [1.0, 0.0, 0.0, 0.0],
    };

    pub fn new(w: f64, x: f64, y: f64, z: f64) -> Result<Self, QuaternionError> {
        canonicalize([w, x, y, z])
    }

    /// Rotation of `angle` radians about `axis` (need not be unit length).
    pub fn from_axis_angle(axis: [f64; 3], angle: f64) -> Result<Self, QuaternionError> {
        let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        if n <= ZERO_NORM_THRESHOLD {
            return Err(QuaternionError::ZeroNorm(n));
        }
        let (s, c) = (angle / 2.0).sin_cos();
        canonicalize([c, s * axis[0] / n, s * axis[1] / n, s * axis[2] / n])
    }

    /// Draws a rotation uniformly from SO(3) (Haar measure).
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        loop {
            let q: [f64; 4] = core::array::from_fn(|_| StandardNormal.sample(rng));
            if let Ok(q) = canonicalize(q) {
                return q;
            }
        }
    }

    pub fn w(&self) -> f64 {
        self.coords[0]
    }
    pub fn x(&self) -> f64 {
        self.coords[1]
    }
    pub fn y(&self) -> f64 {
        self.coords[2]
    }
    pub fn z(&self) -> f64 {
        self.coords[3]
    }

    pub fn to_array(&self) -> [f64; 4] {
        self.coords
    }

    pub fn to_vector(&self) -> Vector4<f64> {
        Vector4::from(self.coords)
    }

    /// The antipodal representative `-q` as a raw vector.
    pub fn antipode(&self) -> [f64; 4] {
        self.coords.map(|c| -c)
    }

    pub fn conjugate(&self) -> Self {
        let [w, x, y, z] = self.coords;
        canonicalize([w, -x, -y, -z]).expect("conjugate of a unit quaternion is unit")
    }

    /// Hamilton product `self ∘ rhs` (apply `rhs` first, then `self`).
    pub fn compose(&self, rhs: &UnitQuaternion) -> Self {
        canonicalize(hamilton(self.coords, rhs.coords))
            .expect("product of unit quaternions is unit")
    }

    pub fn to_rotation_matrix(&self) -> Matrix3<f64> {
        rotation_matrix(self.coords)
    }

    pub fn rotate(&self, v: [f64; 3]) -> [f64; 3] {
        let r = self.to_rotation_matrix() * Vector3::from(v);
        [r[0], r[1], r[2]]
    }
}

impl fmt::Display for UnitQuaternion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [w, x, y, z] = self.coords;
        write!(f, "[{w}, {x}, {y}, {z}]")
    }
}

/// Raw Hamilton product of two 4-vectors.
pub fn hamilton(a: [f64; 4], b: [f64; 4]) -> [f64; 4] {
    let [w1, x1, y1, z1] = a;
    let [w2, x2, y2, z2] = b;
    [
        w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
        w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
        w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
        w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
    ]
}

/// Rotation matrix of a unit 4-vector `(w, x, y, z)`.
pub fn rotation_matrix(q: [f64; 4]) -> Matrix3<f64> {
    let [w, x, y, z] = q;
    Matrix3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        1.0 - 2.0 * (x * x + y * y),
    )
}

/// Partial derivatives of [`rotation_matrix`] with respect to `w, x, y, z`.
pub fn rotation_matrix_jacobian(q: [f64; 4]) -> [Matrix3<f64>; 4] {
    let [w, x, y, z] = q;
    let d_w = Matrix3::new(
        0.0,
        -2.0 * z,
        2.0 * y,
        2.0 * z,
        0.0,
        -2.0 * x,
        -2.0 * y,
        2.0 * x,
        0.0,
    );
    let d_x = Matrix3::new(
        0.0,
        2.0 * y,
        2.0 * z,
        2.0 * y,
        -4.0 * x,
        -2.0 * w,
        2.0 * z,
        2.0 * w,
        -4.0 * x,
    );
    let d_y = Matrix3::new(
        -4.0 * y,
        2.0 * x,
        2.0 * w,
        2.0 * x,
        0.0,
        2.0 * z,
        -2.0 * w,
        2.0 * z,
        -4.0 * y,
    );
    let d_z = Matrix3::new(
        -4.0 * z,
        -2.0 * w,
        2.0 * x,
        2.0 * w,
        -4.0 * z,
        2.0 * y,
        2.0 * x,
        2.0 * y,
        0.0,
    );
    [d_w, d_x, d_y, d_z]
}

/// Angle between two rotations, in radians.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct RotationError(f64);

impl RotationError {
    pub fn radians(self) -> f64 {
        self.0
    }
    pub fn degrees(self) -> f64 {
        self.0.to_degrees()
    }
}

fn dot(a: [f64; 4], b: [f64; 4]) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

/// `2 arccos |q · q̂|`, the rotation angle separating `q` and `q̂`.
pub fn geodesic_distance(q: &impl QuatCoords, q_hat: &impl QuatCoords) -> RotationError {
    let d = dot(q.coords(), q_hat.coords()).abs().min(1.0);
    RotationError(2.0 * d.acos())
}

/// `(q₁ · q₂)²`, i.e. `cos²(θ/2)` for rotations `θ` apart.
pub fn bingham_metric(q1: &impl QuatCoords, q2: &impl QuatCoords) -> f64 {
    let d = dot(q1.coords(), q2.coords()).clamp(-1.0, 1.0);
    d * d
}

/// Antipodal-aware ℓ₁ distance `min(‖q − q̂‖₁, ‖q + q̂‖₁)`.
pub fn quaternion_l1(q: &impl QuatCoords, q_hat: &impl QuatCoords) -> f64 {
    let (a, b) = (q.coords(), q_hat.coords());
    let minus: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).sum();
    let plus: f64 = a.iter().zip(b.iter()).map(|(x, y)| (x + y).abs()).sum();
    minus.min(plus)
}

/// Rotation about the z axis by `angle` radians.
pub fn rot_z(angle: f64) -> UnitQuaternion {
    UnitQuaternion::from_axis_angle([0.0, 0.0, 1.0], angle).expect("z axis is nonzero")
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn close(a: [f64; 4], b: [f64; 4], tol: f64) -> bool {
        a.iter().zip(b.iter()).all(|(x, y)| (x - y).abs() < tol)
    }

    #[test]
    fn canonicalize_examples() {
        let q = canonicalize([0.0, 0.0, 0.0, -1.0]).unwrap();
        assert_eq!(q.to_array(), [0.0, 0.0, 0.0, 1.0]);
        let q = canonicalize([2.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(q.to_array(), [1.0, 0.0, 0.0, 0.0]);
        let q = canonicalize([-0.5, 0.5, 0.5, 0.5]).unwrap();
        assert!(close(q.to_array(), [0.5, -0.5, -0.5, -0.5], 1e-15));
    }

    #[test]
    fn canonicalize_rejects_zero() {
        assert!(matches!(
            canonicalize([0.0; 4]),
            Err(QuaternionError::ZeroNorm(_))
        ));
        assert!(matches!(
            canonicalize([1e-13, 0.0, 0.0, 0.0]),
            Err(QuaternionError::ZeroNorm(_))
        ));
        assert_eq!(
            canonicalize([f64::NAN, 0.0, 0.0, 1.0]),
            Err(QuaternionError::NonFinite)
        );
    }

    #[test]
    fn geodesic_examples() {
        let q = UnitQuaternion::IDENTITY;
        assert_eq!(geodesic_distance(&q, &q).radians(), 0.0);
        let r = [(PI / 4.0).cos(), (PI / 4.0).sin(), 0.0, 0.0];
        assert!((geodesic_distance(&q, &r).radians() - PI / 2.0).abs() < 1e-12);
        assert_eq!(geodesic_distance(&q, &q.antipode()).radians(), 0.0);
    }

    #[test]
    fn bingham_metric_examples() {
        let q = UnitQuaternion::IDENTITY;
        assert!((bingham_metric(&q, &q) - 1.0).abs() < 1e-15);
        assert_eq!(bingham_metric(&q, &[0.0, 1.0, 0.0, 0.0]), 0.0);
        let r = rot_z(PI / 2.0);
        assert!((bingham_metric(&q, &r) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn l1_examples() {
        let q = UnitQuaternion::new(0.3, -0.2, 0.9, 0.1).unwrap();
        assert_eq!(quaternion_l1(&q, &q), 0.0);
        assert_eq!(quaternion_l1(&q, &q.antipode()), 0.0);
        assert_eq!(
            quaternion_l1(&[1.0, 0.0, 0.0, 0.0], &[0.0, 1.0, 0.0, 0.0]),
            2.0
        );
    }

    #[test]
    fn rotation_matrix_matches_rotate() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let q = UnitQuaternion::random(&mut rng);
            let r = q.to_rotation_matrix();
            assert!(((r.transpose() * r) - Matrix3::identity()).norm() < 1e-12);
            assert!((r.determinant() - 1.0).abs() < 1e-12);
            // composition agrees with matrix products
            let p = UnitQuaternion::random(&mut rng);
            let lhs = q.compose(&p).to_rotation_matrix();
            assert!((lhs - r * p.to_rotation_matrix()).norm() < 1e-12);
        }
        let q = rot_z(PI / 2.0);
        let v = q.rotate([1.0, 0.0, 0.0]);
        assert!((v[0]).abs() < 1e-12 && (v[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rotation_jacobian_matches_finite_differences() {
        let q = [0.3, -0.4, 0.5, 0.7];
        let jac = rotation_matrix_jacobian(q);
        for k in 0..4 {
            let h = 1e-6;
            let mut a = q;
            let mut b = q;
            a[k] += h;
            b[k] -= h;
            let fd = (rotation_matrix(a) - rotation_matrix(b)) / (2.0 * h);
            assert!((fd - jac[k]).norm() < 1e-8, "component {k}");
        }
    }
}
