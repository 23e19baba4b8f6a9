//! Serializable mirrors of the core types.
//!
//! Quaternions are `[w, x, y, z]` arrays. Orientation matrices are written
//! as four rows of four values.

use bingham_core::metrics::{
    EvalReport, OracleEntry, PruningPoint, RecallEntry, RecallSpec, Summary, ThresholdRow,
};
use bingham_core::scene::Pose;
use bingham_core::{
    BinghamDistribution, BinghamMixture, ConcentrationMatrix, GaussianComponent, GaussianMixture,
    Normalizer, OrientationMatrix, PoseHypothesis, UnitQuaternion,
};
use nalgebra::Matrix4;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum DtoError {
    #[error("invalid quaternion {0:?}")]
    Quaternion([f64; 4]),
    #[error("invalid orientation matrix: {0}")]
    Orientation(String),
    #[error("invalid mixture: {0}")]
    Mixture(String),
}

pub fn quat(q: [f64; 4]) -> Result<UnitQuaternion, DtoError> {
    UnitQuaternion::new(q[0], q[1], q[2], q[3]).map_err(|_| DtoError::Quaternion(q))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BinghamDto {
    pub mode: [f64; 4],
    #[serde(rename = "V")]
    pub v: [[f64; 4]; 4],
    pub lambda: [f64; 3],
}

impl From<&BinghamDistribution> for BinghamDto {
    fn from(d: &BinghamDistribution) -> Self {
        let m = d.v().matrix();
        Self {
            mode: d.mode().to_array(),
            v: std::array::from_fn(|r| std::array::from_fn(|c| m[(r, c)])),
            lambda: d.lambda().lambdas(),
        }
    }
}

impl BinghamDto {
    /// Rebuilds the distribution; the stored mode is informational and the
    /// first column of `V` is authoritative.
    pub fn to_distribution(
        &self,
        normalizer: &impl Normalizer,
    ) -> Result<BinghamDistribution, DtoError> {
        let m = Matrix4::from_fn(|r, c| self.v[r][c]);
        let v = OrientationMatrix::new(m).map_err(|e| DtoError::Orientation(e.to_string()))?;
        let l = ConcentrationMatrix::new(self.lambda)
            .map_err(|e| DtoError::Orientation(e.to_string()))?;
        Ok(BinghamDistribution::new(v, l, normalizer))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureDto {
    pub weights: Vec<f64>,
    pub components: Vec<BinghamDto>,
}

impl From<&BinghamMixture> for MixtureDto {
    fn from(m: &BinghamMixture) -> Self {
        Self {
            weights: m.weights().to_vec(),
            components: m.components().iter().map(BinghamDto::from).collect(),
        }
    }
}

impl MixtureDto {
    pub fn to_mixture(&self, normalizer: &impl Normalizer) -> Result<BinghamMixture, DtoError> {
        let comps = self
            .components
            .iter()
            .map(|c| c.to_distribution(normalizer))
            .collect::<Result<Vec<_>, _>>()?;
        BinghamMixture::new(comps, self.weights.clone())
            .map_err(|e| DtoError::Mixture(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianDto {
    pub mean: [f64; 3],
    pub sigma2: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianMixtureDto {
    pub weights: Vec<f64>,
    pub components: Vec<GaussianDto>,
}

impl From<&GaussianMixture> for GaussianMixtureDto {
    fn from(m: &GaussianMixture) -> Self {
        Self {
            weights: m.weights().to_vec(),
            components: m
                .components()
                .iter()
                .map(|c| GaussianDto {
                    mean: c.mean(),
                    sigma2: c.sigma2(),
                })
                .collect(),
        }
    }
}

impl GaussianMixtureDto {
    pub fn to_mixture(&self) -> Result<GaussianMixture, DtoError> {
        let comps = self
            .components
            .iter()
            .map(|c| GaussianComponent::new(c.mean, c.sigma2))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| DtoError::Mixture(e.to_string()))?;
        GaussianMixture::new(comps, self.weights.clone())
            .map_err(|e| DtoError::Mixture(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseDto {
    pub rotation: [f64; 4],
    pub translation: [f64; 3],
}

impl From<&Pose> for PoseDto {
    fn from(p: &Pose) -> Self {
        Self {
            rotation: p.rotation.to_array(),
            translation: p.translation,
        }
    }
}

impl PoseDto {
    pub fn to_pose(&self) -> Result<Pose, DtoError> {
        Ok(Pose {
            rotation: quat(self.rotation)?,
            translation: self.translation,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HypothesisDto {
    pub rotation: [f64; 4],
    pub translation: [f64; 3],
    pub weight: f64,
    pub rot_entropy: f64,
    pub trans_entropy: f64,
    pub combined_uncertainty: f64,
}

impl From<&PoseHypothesis> for HypothesisDto {
    fn from(h: &PoseHypothesis) -> Self {
        Self {
            rotation: h.rotation.to_array(),
            translation: h.translation,
            weight: h.weight,
            rot_entropy: h.rot_entropy,
            trans_entropy: h.trans_entropy,
            combined_uncertainty: h.combined_uncertainty,
        }
    }
}

impl HypothesisDto {
    pub fn to_hypothesis(&self) -> Result<PoseHypothesis, DtoError> {
        Ok(PoseHypothesis {
            rotation: quat(self.rotation)?,
            translation: self.translation,
            weight: self.weight,
            rot_entropy: self.rot_entropy,
            trans_entropy: self.trans_entropy,
            combined_uncertainty: self.combined_uncertainty,
        })
    }
}

/// Thresholds of a recall test. JSON has no infinity, so a rotation-only
/// spec stores `null` for the translation threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecallSpecDto {
    pub rot_threshold_deg: f64,
    pub trans_threshold: Option<f64>,
}

impl From<&RecallSpec> for RecallSpecDto {
    fn from(s: &RecallSpec) -> Self {
        Self {
            rot_threshold_deg: s.rot_threshold_deg,
            trans_threshold: s.trans_threshold.is_finite().then_some(s.trans_threshold),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecallDto {
    pub spec: RecallSpecDto,
    pub recall: f64,
    pub oracle_recall: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleDto {
    pub hypotheses: usize,
    pub median_rot_deg: f64,
    pub median_trans: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SummaryDto {
    pub mean: f64,
    pub median: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PruningDto {
    pub retained: f64,
    pub kept: usize,
    pub mean_error: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdDto {
    pub threshold: f64,
    pub count: usize,
    pub mean_error: Option<f64>,
}

/// Evaluation summary as written to `report.json` and embedded in runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportDto {
    pub samples: usize,
    pub recall: Vec<RecallDto>,
    pub median_rot_deg: f64,
    pub median_trans: f64,
    pub oracle: Vec<OracleDto>,
    /// Mean self-EMD in radians.
    pub semd: f64,
    pub chamfer: Option<SummaryDto>,
    pub mode_detection_rate: f64,
    pub detection_spec: RecallSpecDto,
    pub pruning: Vec<PruningDto>,
    pub thresholds: Vec<ThresholdDto>,
}

impl From<&EvalReport> for ReportDto {
    fn from(r: &EvalReport) -> Self {
        let recall = |e: &RecallEntry| RecallDto {
            spec: RecallSpecDto::from(&e.spec),
            recall: e.recall,
            oracle_recall: e.oracle_recall,
        };
        let oracle = |e: &OracleEntry| OracleDto {
            hypotheses: e.hypotheses,
            median_rot_deg: e.median_rot_deg,
            median_trans: e.median_trans,
        };
        let summary = |s: &Summary| SummaryDto {
            mean: s.mean,
            median: s.median,
        };
        let pruning = |p: &PruningPoint| PruningDto {
            retained: p.retained,
            kept: p.kept,
            mean_error: p.mean_error,
            threshold: p.threshold,
        };
        let threshold = |t: &ThresholdRow| ThresholdDto {
            threshold: t.threshold,
            count: t.count,
            mean_error: t.mean_error,
        };
        Self {
            samples: r.samples,
            recall: r.recall.iter().map(recall).collect(),
            median_rot_deg: r.median_rot_deg,
            median_trans: r.median_trans,
            oracle: r.oracle.iter().map(oracle).collect(),
            semd: r.semd,
            chamfer: r.chamfer.as_ref().map(summary),
            mode_detection_rate: r.mode_detection_rate,
            detection_spec: RecallSpecDto::from(&r.detection_spec),
            pruning: r.pruning.iter().map(pruning).collect(),
            thresholds: r.thresholds.iter().map(threshold).collect(),
        }
    }
}
