//! Mixtures of Bingham distributions for rotations and of diagonal Gaussians
//! for translations, plus the per-hypothesis uncertainty that combines them.

use alloc::vec::Vec;
use core::f64::consts::PI;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::bingham::BinghamDistribution;
use crate::orientation::softplus;
use crate::quaternion::{QuatCoords, UnitQuaternion};

/// Floor applied to mixture weights inside logarithms.
pub const WEIGHT_FLOOR: f64 = 1e-12;
/// Added to `softplus(raw)` when a variance is predicted.
pub const VARIANCE_FLOOR: f64 = 1e-6;
const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MixtureError {
    #[error("a mixture needs at least one component")]
    Empty,
    #[error("{components} components but {weights} weights")]
    LengthMismatch { components: usize, weights: usize },
    #[error("weights must be finite and non-negative")]
    InvalidWeight,
    #[error("weights sum to {0}, expected 1")]
    WeightSum(f64),
    #[error("variances must be finite and positive")]
    InvalidVariance,
}

fn check_weights(n: usize, weights: &[f64]) -> Result<(), MixtureError> {
    if n == 0 {
        return Err(MixtureError::Empty);
    }
    if n != weights.len() {
        return Err(MixtureError::LengthMismatch {
            components: n,
            weights: weights.len(),
        });
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(MixtureError::InvalidWeight);
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
        return Err(MixtureError::WeightSum(sum));
    }
    Ok(())
}

fn normalized(weights: &[f64]) -> Result<Vec<f64>, MixtureError> {
    let sum: f64 = weights.iter().sum();
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) || sum <= 0.0 {
        return Err(MixtureError::InvalidWeight);
    }
    Ok(weights.iter().map(|w| w / sum).collect())
}

/// `log Σᵢ exp(xᵢ)`.
pub fn log_sum_exp(xs: impl IntoIterator<Item = f64> + Clone) -> f64 {
    let m = xs.clone().into_iter().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.into_iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// Index of the largest weight; the first one wins ties.
pub fn argmax_first(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Weighted mixture of Bingham distributions.
#[derive(Debug, Clone, PartialEq)]
pub struct BinghamMixture {
    components: Vec<BinghamDistribution>,
    weights: Vec<f64>,
}

impl BinghamMixture {
    pub fn new(
        components: Vec<BinghamDistribution>,
        weights: Vec<f64>,
    ) -> Result<Self, MixtureError> {
        check_weights(components.len(), &weights)?;
        Ok(Self {
            components,
            weights,
        })
    }

    /// Rescales `weights` to sum to one.
    pub fn from_unnormalized(
        components: Vec<BinghamDistribution>,
        weights: &[f64],
    ) -> Result<Self, MixtureError> {
        let w = normalized(weights)?;
        Self::new(components, w)
    }

    pub fn single(d: BinghamDistribution) -> Self {
        Self {
            components: alloc::vec![d],
            weights: alloc::vec![1.0],
        }
    }

    pub fn components(&self) -> &[BinghamDistribution] {
        &self.components
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn log_pdf(&self, q: &impl QuatCoords) -> f64 {
        let terms = self
            .components
            .iter()
            .zip(&self.weights)
            .map(|(c, w)| w.max(WEIGHT_FLOOR).ln() + c.log_pdf(q));
        log_sum_exp(terms)
    }

    /// Index of the component with the largest weight.
    pub fn dominant(&self) -> usize {
        argmax_first(&self.weights)
    }

    /// Mode of the most heavily weighted component and its weight.
    pub fn weighted_mode(&self) -> (UnitQuaternion, f64) {
        let i = self.dominant();
        (self.components[i].mode(), self.weights[i])
    }

    pub fn modes(&self) -> Vec<UnitQuaternion> {
        self.components.iter().map(|c| c.mode()).collect()
    }
}

/// Diagonal-covariance Gaussian over a 3-D translation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianComponent {
    mean: [f64; 3],
    sigma2: [f64; 3],
}

const DIM: f64 = 3.0;

impl GaussianComponent {
    pub fn new(mean: [f64; 3], sigma2: [f64; 3]) -> Result<Self, MixtureError> {
        if sigma2.iter().any(|s| !s.is_finite() || *s <= 0.0) || mean.iter().any(|m| !m.is_finite())
        {
            return Err(MixtureError::InvalidVariance);
        }
        Ok(Self { mean, sigma2 })
    }

    /// Variances from raw outputs: `σ² = softplus(raw) + 1e-6`.
    pub fn from_raw(mean: [f64; 3], raw_variance: [f64; 3]) -> Self {
        Self {
            mean,
            sigma2: raw_variance.map(|r| softplus(r) + VARIANCE_FLOOR),
        }
    }

    pub fn mean(&self) -> [f64; 3] {
        self.mean
    }

    pub fn sigma2(&self) -> [f64; 3] {
        self.sigma2
    }

    pub fn log_pdf(&self, t: [f64; 3]) -> f64 {
        let mut quad = 0.0;
        let mut log_det = 0.0;
        for i in 0..3 {
            let d = t[i] - self.mean[i];
            quad += d * d / self.sigma2[i];
            log_det += self.sigma2[i].ln();
        }
        -0.5 * quad - 0.5 * DIM * (2.0 * PI).ln() - 0.5 * log_det
    }

    /// `c/2 + (c/2)·log 2π + ½·log|Σ|` with `c = 3`.
    pub fn entropy(&self) -> f64 {
        let log_det: f64 = self.sigma2.iter().map(|s| s.ln()).sum();
        DIM / 2.0 + DIM / 2.0 * (2.0 * PI).ln() + 0.5 * log_det
    }
}

/// Weighted mixture of [`GaussianComponent`]s.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    components: Vec<GaussianComponent>,
    weights: Vec<f64>,
}

impl GaussianMixture {
    pub fn new(
        components: Vec<GaussianComponent>,
        weights: Vec<f64>,
    ) -> Result<Self, MixtureError> {
        check_weights(components.len(), &weights)?;
        Ok(Self {
            components,
            weights,
        })
    }

    pub fn single(g: GaussianComponent) -> Self {
        Self {
            components: alloc::vec![g],
            weights: alloc::vec![1.0],
        }
    }

    pub fn components(&self) -> &[GaussianComponent] {
        &self.components
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn log_pdf(&self, t: [f64; 3]) -> f64 {
        log_sum_exp(
            self.components
                .iter()
                .zip(&self.weights)
                .map(|(c, w)| w.max(WEIGHT_FLOOR).ln() + c.log_pdf(t)),
        )
    }

    pub fn weighted_mean(&self) -> ([f64; 3], f64) {
        let i = argmax_first(&self.weights);
        (self.components[i].mean(), self.weights[i])
    }
}

/// One pose hypothesis: a component's mode, its weight, and its uncertainty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseHypothesis {
    pub rotation: UnitQuaternion,
    pub translation: [f64; 3],
    pub weight: f64,
    pub rot_entropy: f64,
    pub trans_entropy: f64,
    pub combined_uncertainty: f64,
}

/// Min-max normalizes each entropy vector over the hypotheses and sums them.
/// A vector whose entries are all equal normalizes to zeros.
pub fn combined_uncertainty(rot_entropies: &[f64], trans_entropies: &[f64]) -> Vec<f64> {
    assert_eq!(
        rot_entropies.len(),
        trans_entropies.len(),
        "one entropy of each kind per hypothesis"
    );
    let r = min_max(rot_entropies);
    let t = min_max(trans_entropies);
    r.iter().zip(&t).map(|(a, b)| a + b).collect()
}

fn min_max(xs: &[f64]) -> Vec<f64> {
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return alloc::vec![0.0; xs.len()];
    }
    xs.iter().map(|x| (x - lo) / (hi - lo)).collect()
}
