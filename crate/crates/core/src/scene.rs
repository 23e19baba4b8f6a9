//! Procedurally generated training data with known pose ambiguities.
//!
//! Point-cloud scenes rotate a template about the origin. The network sees
//! the rotated points sorted lexicographically and flattened, so two poses
//! that map the template onto itself produce the same input and the label
//! becomes multimodal.
//!
//! `ambiguous_views` is the camera analog: a camera at pose `(q, t)` sees a
//! symmetric landmark set in its own frame, and every pose related by a
//! symmetry of the landmarks yields the same view.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;

#[cfg(not(feature = "std"))]
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::quaternion::{rot_z, UnitQuaternion};

const ANCHOR_HEIGHT: f64 = 0.7;
const VIEW_SCALE: f64 = 2.0;
pub const DEFAULT_NOISE: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SceneError {
    #[error("unknown scene kind {0:?}")]
    UnknownKind(String),
    #[error("symmetry order must be at least 1")]
    ZeroOrder,
    #[error("noise level must be finite and non-negative")]
    Noise,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SceneKind {
    /// `k` points on the unit circle plus an anchor on the symmetry axis.
    Cyclic(usize),
    /// Five points with no rotational symmetry.
    Asymmetric,
    /// Camera views of a `k`-fold symmetric landmark set, with translation.
    AmbiguousViews(usize),
    /// `cyclic_1`, with Gaussian noise of the given deviation added to the
    /// points of every other sample.
    Mixed(f64),
}

impl SceneKind {
    pub fn parse(name: &str) -> Result<Self, SceneError> {
        let order = |s: &str| -> Result<usize, SceneError> {
            let k: usize = s
                .parse()
                .map_err(|_| SceneError::UnknownKind(name.into()))?;
            if k == 0 {
                return Err(SceneError::ZeroOrder);
            }
            Ok(k)
        };
        match name {
            "asymmetric" => Ok(SceneKind::Asymmetric),
            "ambiguous_views" => Ok(SceneKind::AmbiguousViews(2)),
            "mixed" => Ok(SceneKind::Mixed(DEFAULT_NOISE)),
            _ => {
                if let Some(k) = name.strip_prefix("cyclic_") {
                    Ok(SceneKind::Cyclic(order(k)?))
                } else if let Some(k) = name.strip_prefix("ambiguous_views_") {
                    Ok(SceneKind::AmbiguousViews(order(k)?))
                } else {
                    Err(SceneError::UnknownKind(name.into()))
                }
            }
        }
    }

    pub fn name(&self) -> String {
        match self {
            SceneKind::Cyclic(k) => format!("cyclic_{k}"),
            SceneKind::Asymmetric => "asymmetric".into(),
            SceneKind::AmbiguousViews(2) => "ambiguous_views".into(),
            SceneKind::AmbiguousViews(k) => format!("ambiguous_views_{k}"),
            SceneKind::Mixed(_) => "mixed".into(),
        }
    }

    /// Order of the symmetry group about z.
    pub fn order(&self) -> usize {
        match self {
            SceneKind::Cyclic(k) | SceneKind::AmbiguousViews(k) => *k,
            SceneKind::Asymmetric | SceneKind::Mixed(_) => 1,
        }
    }

    pub fn has_translation(&self) -> bool {
        matches!(self, SceneKind::AmbiguousViews(_))
    }

    fn validate(&self) -> Result<(), SceneError> {
        match *self {
            SceneKind::Cyclic(0) | SceneKind::AmbiguousViews(0) => Err(SceneError::ZeroOrder),
            SceneKind::Mixed(s) if !(s.is_finite() && s >= 0.0) => Err(SceneError::Noise),
            _ => Ok(()),
        }
    }

    /// Template point set in the object (or world) frame.
    pub fn template(&self) -> Vec<[f64; 3]> {
        match *self {
            SceneKind::Cyclic(k) => cyclic_template(k, 1.0),
            SceneKind::Mixed(_) => cyclic_template(1, 1.0),
            SceneKind::AmbiguousViews(k) => cyclic_template(k, VIEW_SCALE),
            SceneKind::Asymmetric => alloc::vec![
                [1.0, 0.0, 0.0],
                [-0.3, 0.8, 0.1],
                [-0.5, -0.6, 0.4],
                [0.2, 0.3, 0.9],
                [0.1, -0.2, -0.7],
            ],
        }
    }

    /// The rotations mapping the template onto itself.
    pub fn symmetries(&self) -> Vec<UnitQuaternion> {
        let k = self.order();
        (0..k)
            .map(|j| rot_z(2.0 * PI * j as f64 / k as f64))
            .collect()
    }
}

impl fmt::Display for SceneKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

fn cyclic_template(k: usize, scale: f64) -> Vec<[f64; 3]> {
    let mut pts: Vec<[f64; 3]> = (0..k)
        .map(|j| {
            let a = 2.0 * PI * j as f64 / k as f64;
            [scale * a.cos(), scale * a.sin(), 0.0]
        })
        .collect();
    pts.push([0.0, 0.0, scale * ANCHOR_HEIGHT]);
    pts
}

/// A rotation with an optional translation. Point-cloud scenes carry a zero
/// translation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub rotation: UnitQuaternion,
    pub translation: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub input: Vec<f64>,
    pub pose: Pose,
    /// Every pose indistinguishable from `pose`; contains `pose` itself.
    pub modes: Vec<Pose>,
    /// Noise was added to this sample's points.
    pub corrupted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScene {
    pub kind: SceneKind,
    pub samples: Vec<Sample>,
}

impl SyntheticScene {
    pub fn input_len(&self) -> usize {
        self.kind.template().len() * 3
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Flattens points after sorting them lexicographically by coordinates.
pub fn sorted_features(mut points: Vec<[f64; 3]>) -> Vec<f64> {
    points.sort_by(|a, b| {
        a[0].total_cmp(&b[0])
            .then(a[1].total_cmp(&b[1]))
            .then(a[2].total_cmp(&b[2]))
    });
    points.into_iter().flatten().collect()
}

/// Camera-frame coordinates `Rᵀ(p − t)` of world points.
pub fn camera_view(points: &[[f64; 3]], pose: &Pose) -> Vec<[f64; 3]> {
    let inv = pose.rotation.conjugate();
    points
        .iter()
        .map(|p| {
            inv.rotate([
                p[0] - pose.translation[0],
                p[1] - pose.translation[1],
                p[2] - pose.translation[2],
            ])
        })
        .collect()
}

pub fn generate_scene(
    kind: SceneKind,
    n_samples: usize,
    seed: u64,
) -> Result<SyntheticScene, SceneError> {
    kind.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let template = kind.template();
    let symmetries = kind.symmetries();
    let samples = (0..n_samples)
        .map(|n| {
            let rotation = UnitQuaternion::random(&mut rng);
            match kind {
                SceneKind::AmbiguousViews(_) => {
                    let translation: [f64; 3] =
                        core::array::from_fn(|_| rng.random_range(-1.0..1.0));
                    let pose = Pose {
                        rotation,
                        translation,
                    };
                    // a symmetry s of the landmarks maps (R, t) to (sR, st)
                    let modes = symmetries
                        .iter()
                        .map(|s| Pose {
                            rotation: s.compose(&rotation),
                            translation: s.rotate(translation),
                        })
                        .collect();
                    Sample {
                        input: sorted_features(camera_view(&template, &pose)),
                        pose,
                        modes,
                        corrupted: false,
                    }
                }
                _ => {
                    let pose = Pose {
                        rotation,
                        translation: [0.0; 3],
                    };
                    // R s p = R p for a symmetry s, so q and q∘s look alike
                    let modes = symmetries
                        .iter()
                        .map(|s| Pose {
                            rotation: rotation.compose(s),
                            translation: [0.0; 3],
                        })
                        .collect();
                    let mut points: Vec<[f64; 3]> =
                        template.iter().map(|p| rotation.rotate(*p)).collect();
                    let corrupted = matches!(kind, SceneKind::Mixed(s) if s > 0.0) && n % 2 == 1;
                    if corrupted {
                        let SceneKind::Mixed(sigma) = kind else {
                            unreachable!()
                        };
                        let noise = Normal::new(0.0, sigma).expect("validated");
                        for p in &mut points {
                            for c in p.iter_mut() {
                                *c += noise.sample(&mut rng);
                            }
                        }
                    }
                    Sample {
                        input: sorted_features(points),
                        pose,
                        modes,
                        corrupted,
                    }
                }
            }
        })
        .collect();
    Ok(SyntheticScene { kind, samples })
}

/// Per-feature affine normalization fitted on training inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    /// Mean and standard deviation of every feature; a constant feature
    /// keeps unit scale.
    pub fn fit(inputs: &[&[f64]]) -> Self {
        let dim = inputs.first().map_or(0, |x| x.len());
        let n = inputs.len().max(1) as f64;
        let mean: Vec<f64> = (0..dim)
            .map(|j| inputs.iter().map(|x| x[j]).sum::<f64>() / n)
            .collect();
        let scale = (0..dim)
            .map(|j| {
                let var = inputs.iter().map(|x| (x[j] - mean[j]).powi(2)).sum::<f64>() / n;
                if var > 1e-24 {
                    var.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, scale }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            mean: alloc::vec![0.0; dim],
            scale: alloc::vec![1.0; dim],
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quaternion::geodesic_distance;

    #[test]
    fn names_round_trip() {
        for name in [
            "cyclic_1",
            "cyclic_4",
            "asymmetric",
            "ambiguous_views",
            "ambiguous_views_3",
            "mixed",
        ] {
            assert_eq!(SceneKind::parse(name).unwrap().name(), name);
        }
        assert_eq!(SceneKind::parse("cyclic_0"), Err(SceneError::ZeroOrder));
        assert!(matches!(
            SceneKind::parse("torus"),
            Err(SceneError::UnknownKind(_))
        ));
    }

    #[test]
    fn symmetric_poses_give_identical_inputs() {
        let scene = generate_scene(SceneKind::Cyclic(4), 20, 3).unwrap();
        let tmpl = scene.kind.template();
        for s in &scene.samples {
            assert_eq!(s.modes.len(), 4);
            for m in &s.modes {
                let pts: Vec<_> = tmpl.iter().map(|p| m.rotation.rotate(*p)).collect();
                let x = sorted_features(pts);
                for (a, b) in x.iter().zip(&s.input) {
                    assert!((a - b).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn modes_are_distinct_rotations() {
        let scene = generate_scene(SceneKind::Cyclic(3), 10, 4).unwrap();
        for s in &scene.samples {
            let d = geodesic_distance(&s.modes[0].rotation, &s.modes[1].rotation).degrees();
            assert!((d - 120.0).abs() < 1e-9, "{d}");
            assert_eq!(s.modes[0].rotation, s.pose.rotation);
        }
    }

    #[test]
    fn views_share_appearance_across_modes() {
        let scene = generate_scene(SceneKind::AmbiguousViews(2), 10, 5).unwrap();
        let tmpl = scene.kind.template();
        for s in &scene.samples {
            assert_eq!(s.modes.len(), 2);
            let other = sorted_features(camera_view(&tmpl, &s.modes[1]));
            for (a, b) in other.iter().zip(&s.input) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn mixed_corrupts_every_other_sample() {
        let scene = generate_scene(SceneKind::Mixed(0.2), 6, 1).unwrap();
        let flags: Vec<bool> = scene.samples.iter().map(|s| s.corrupted).collect();
        assert_eq!(flags, [false, true, false, true, false, true]);
        assert!(scene.samples.iter().all(|s| s.modes.len() == 1));
    }

    #[test]
    fn deterministic_per_seed() {
        let a = generate_scene(SceneKind::Cyclic(2), 5, 9).unwrap();
        let b = generate_scene(SceneKind::Cyclic(2), 5, 9).unwrap();
        let c = generate_scene(SceneKind::Cyclic(2), 5, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn standardizer_centers_features() {
        let xs = [[1.0, 5.0], [3.0, 5.0]];
        let refs: Vec<&[f64]> = xs.iter().map(|x| x.as_slice()).collect();
        let s = Standardizer::fit(&refs);
        assert_eq!(s.apply(&xs[0]), [-1.0, 0.0]);
        assert_eq!(s.apply(&xs[1]), [1.0, 0.0]);
    }
}
