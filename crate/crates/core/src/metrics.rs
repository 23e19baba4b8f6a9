//! Evaluation metrics for single and multi-hypothesis pose predictions.
//!
//! Rotation errors are geodesic angles in degrees, translation errors are
//! Euclidean distances in scene units.

use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::mixture::{argmax_first, BinghamMixture, PoseHypothesis};
use crate::quaternion::{geodesic_distance, UnitQuaternion};
use crate::scene::Pose;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("metric needs at least one sample")]
    EmptyInput,
    #[error("{what}: {left} vs {right} entries")]
    LengthMismatch {
        what: &'static str,
        left: usize,
        right: usize,
    },
    #[error("thresholds must be positive")]
    InvalidThreshold,
    #[error("retained fractions must lie in (0, 1]")]
    InvalidFraction,
}

/// A prediction counts as correct when both errors are strictly below these
/// thresholds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecallSpec {
    pub rot_threshold_deg: f64,
    pub trans_threshold: f64,
}

impl RecallSpec {
    pub fn new(rot_threshold_deg: f64, trans_threshold: f64) -> Result<Self, MetricsError> {
        let s = Self {
            rot_threshold_deg,
            trans_threshold,
        };
        s.validate()?;
        Ok(s)
    }

    /// Ignores translation, for point-cloud scenes.
    pub fn rotation_only(rot_threshold_deg: f64) -> Result<Self, MetricsError> {
        Self::new(rot_threshold_deg, f64::INFINITY)
    }

    pub fn validate(&self) -> Result<(), MetricsError> {
        if self.rot_threshold_deg > 0.0 && self.trans_threshold > 0.0 {
            Ok(())
        } else {
            Err(MetricsError::InvalidThreshold)
        }
    }

    pub fn accepts(&self, e: &PoseError) -> bool {
        e.rot_deg < self.rot_threshold_deg && e.trans < self.trans_threshold
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseError {
    pub rot_deg: f64,
    pub trans: f64,
}

impl PoseError {
    pub fn between(pred: &Pose, truth: &Pose) -> Self {
        let d = [0, 1, 2].map(|i| pred.translation[i] - truth.translation[i]);
        Self {
            rot_deg: geodesic_distance(&pred.rotation, &truth.rotation).degrees(),
            trans: (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt(),
        }
    }

    /// Scalar used to rank hypotheses: radians plus translation units.
    pub fn combined(&self) -> f64 {
        self.rot_deg.to_radians() + self.trans
    }
}

impl From<&PoseHypothesis> for Pose {
    fn from(h: &PoseHypothesis) -> Self {
        Pose {
            rotation: h.rotation,
            translation: h.translation,
        }
    }
}

fn check_len(what: &'static str, left: usize, right: usize) -> Result<(), MetricsError> {
    if left == 0 || right == 0 {
        return Err(MetricsError::EmptyInput);
    }
    if left != right {
        return Err(MetricsError::LengthMismatch { what, left, right });
    }
    Ok(())
}

/// Fraction of predictions inside both thresholds.
pub fn recall(
    predictions: &[Pose],
    ground_truths: &[Pose],
    spec: &RecallSpec,
) -> Result<f64, MetricsError> {
    check_len(
        "predictions vs ground truths",
        predictions.len(),
        ground_truths.len(),
    )?;
    spec.validate()?;
    let hits = predictions
        .iter()
        .zip(ground_truths)
        .filter(|(p, g)| spec.accepts(&PoseError::between(p, g)))
        .count();
    Ok(hits as f64 / predictions.len() as f64)
}

/// Per sample, the error of the hypothesis closest to the ground truth
/// under [`PoseError::combined`]. Ties go to the earlier hypothesis.
pub fn oracle_error(
    hypothesis_sets: &[Vec<Pose>],
    ground_truths: &[Pose],
) -> Result<Vec<PoseError>, MetricsError> {
    check_len(
        "hypothesis sets vs ground truths",
        hypothesis_sets.len(),
        ground_truths.len(),
    )?;
    hypothesis_sets
        .iter()
        .zip(ground_truths)
        .map(|(hs, g)| {
            hs.iter()
                .map(|h| PoseError::between(h, g))
                .reduce(|best, e| {
                    if e.combined() < best.combined() {
                        e
                    } else {
                        best
                    }
                })
                .ok_or(MetricsError::EmptyInput)
        })
        .collect()
}

/// Self earth mover's distance: the cost, in radians, of moving all weight
/// onto the heaviest hypothesis (the first one on ties).
pub fn semd(rotations: &[UnitQuaternion], weights: &[f64]) -> Result<f64, MetricsError> {
    check_len("rotations vs weights", rotations.len(), weights.len())?;
    let total: f64 = weights.iter().sum();
    let reference = rotations[argmax_first(weights)];
    Ok(rotations
        .iter()
        .zip(weights)
        .map(|(r, w)| w / total * geodesic_distance(r, &reference).radians())
        .sum())
}

pub fn semd_mixture(m: &BinghamMixture) -> f64 {
    semd(&m.modes(), m.weights()).expect("mixtures are non-empty")
}

fn nearest(p: &[f64; 3], set: &[[f64; 3]]) -> f64 {
    set.iter()
        .map(|q| ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2) + (p[2] - q[2]).powi(2)).sqrt())
        .fold(f64::INFINITY, f64::min)
}

/// Symmetric mean nearest-neighbor distance.
pub fn chamfer(p: &[[f64; 3]], q: &[[f64; 3]]) -> Result<f64, MetricsError> {
    if p.is_empty() || q.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let a: f64 = p.iter().map(|x| nearest(x, q)).sum::<f64>() / p.len() as f64;
    let b: f64 = q.iter().map(|x| nearest(x, p)).sum::<f64>() / q.len() as f64;
    Ok(0.5 * (a + b))
}

/// Fraction of all ground-truth modes that have at least one hypothesis
/// within the thresholds.
pub fn mode_detection_rate(
    hypothesis_sets: &[Vec<Pose>],
    mode_sets: &[Vec<Pose>],
    spec: &RecallSpec,
) -> Result<f64, MetricsError> {
    check_len(
        "hypothesis sets vs mode sets",
        hypothesis_sets.len(),
        mode_sets.len(),
    )?;
    spec.validate()?;
    let mut found = 0usize;
    let mut total = 0usize;
    for (hs, modes) in hypothesis_sets.iter().zip(mode_sets) {
        for m in modes {
            total += 1;
            if hs.iter().any(|h| spec.accepts(&PoseError::between(h, m))) {
                found += 1;
            }
        }
    }
    if total == 0 {
        return Err(MetricsError::EmptyInput);
    }
    Ok(found as f64 / total as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PruningPoint {
    /// Fraction of samples kept, most certain first.
    pub retained: f64,
    pub kept: usize,
    pub mean_error: f64,
    /// Largest uncertainty among the kept samples.
    pub threshold: f64,
}

fn certainty_order(uncertainties: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..uncertainties.len()).collect();
    order.sort_by(|a, b| {
        uncertainties[*a]
            .total_cmp(&uncertainties[*b])
            .then(a.cmp(b))
    });
    order
}

/// Mean error of the most certain `⌈f·n⌉` samples for every retained
/// fraction `f`.
pub fn pruning_curve(
    errors: &[f64],
    uncertainties: &[f64],
    fractions: &[f64],
) -> Result<Vec<PruningPoint>, MetricsError> {
    check_len("errors vs uncertainties", errors.len(), uncertainties.len())?;
    if fractions.iter().any(|f| !(*f > 0.0 && *f <= 1.0)) {
        return Err(MetricsError::InvalidFraction);
    }
    let order = certainty_order(uncertainties);
    let n = errors.len();
    Ok(fractions
        .iter()
        .map(|&f| {
            let kept = ((f * n as f64).ceil() as usize).clamp(1, n);
            let idx = &order[..kept];
            PruningPoint {
                retained: f,
                kept,
                mean_error: idx.iter().map(|i| errors[*i]).sum::<f64>() / kept as f64,
                threshold: uncertainties[idx[kept - 1]],
            }
        })
        .collect())
}

/// Evenly spaced retained fractions `1, 1 − 1/steps, …, 1/steps`.
pub fn default_fractions(steps: usize) -> Vec<f64> {
    (0..steps)
        .map(|i| (steps - i) as f64 / steps as f64)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdRow {
    pub threshold: f64,
    pub count: usize,
    /// `None` when no sample falls below the threshold.
    pub mean_error: Option<f64>,
}

/// Mean error of the samples whose uncertainty is at most each threshold.
pub fn threshold_table(
    errors: &[f64],
    uncertainties: &[f64],
    thresholds: &[f64],
) -> Result<Vec<ThresholdRow>, MetricsError> {
    check_len("errors vs uncertainties", errors.len(), uncertainties.len())?;
    Ok(thresholds
        .iter()
        .map(|&t| {
            let kept: Vec<f64> = errors
                .iter()
                .zip(uncertainties)
                .filter(|(_, u)| **u <= t)
                .map(|(e, _)| *e)
                .collect();
            ThresholdRow {
                threshold: t,
                count: kept.len(),
                mean_error: (!kept.is_empty())
                    .then(|| kept.iter().sum::<f64>() / kept.len() as f64),
            }
        })
        .collect())
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

pub fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Everything the evaluator needs about one held-out sample.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSample {
    /// Sorted by weight, heaviest first.
    pub hypotheses: Vec<PoseHypothesis>,
    pub truth: Pose,
    pub modes: Vec<Pose>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RecallEntry {
    pub spec: RecallSpec,
    pub recall: f64,
    pub oracle_recall: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleEntry {
    /// Number of heaviest hypotheses the oracle may choose from.
    pub hypotheses: usize,
    pub median_rot_deg: f64,
    pub median_trans: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub median: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub samples: usize,
    pub recall: Vec<RecallEntry>,
    pub median_rot_deg: f64,
    pub median_trans: f64,
    pub oracle: Vec<OracleEntry>,
    pub semd: f64,
    /// Between the template posed by the weighted mode and by the truth.
    pub chamfer: Option<Summary>,
    pub mode_detection_rate: f64,
    pub detection_spec: RecallSpec,
    /// Rotation error against the weighted mode, pruned by the dominant
    /// hypothesis's rotation entropy.
    pub pruning: Vec<PruningPoint>,
    pub thresholds: Vec<ThresholdRow>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOptions<'a> {
    pub recall_specs: &'a [RecallSpec],
    pub detection_spec: RecallSpec,
    pub fractions: &'a [f64],
    /// Uncertainty thresholds for the threshold table; empty picks the
    /// pruning-curve thresholds.
    pub uncertainty_thresholds: &'a [f64],
    pub template: Option<&'a [[f64; 3]]>,
}

pub fn evaluate(samples: &[EvalSample], opts: &EvalOptions) -> Result<EvalReport, MetricsError> {
    if samples.is_empty() || samples.iter().any(|s| s.hypotheses.is_empty()) {
        return Err(MetricsError::EmptyInput);
    }
    let best: Vec<Pose> = samples
        .iter()
        .map(|s| Pose::from(&s.hypotheses[0]))
        .collect();
    let truths: Vec<Pose> = samples.iter().map(|s| s.truth).collect();
    let sets: Vec<Vec<Pose>> = samples
        .iter()
        .map(|s| s.hypotheses.iter().map(Pose::from).collect())
        .collect();
    let errors: Vec<PoseError> = best
        .iter()
        .zip(&truths)
        .map(|(p, g)| PoseError::between(p, g))
        .collect();
    let oracle_all = oracle_error(&sets, &truths)?;

    let mut recall_entries = Vec::with_capacity(opts.recall_specs.len());
    for spec in opts.recall_specs {
        spec.validate()?;
        let r = recall(&best, &truths, spec)?;
        let o = oracle_all.iter().filter(|e| spec.accepts(e)).count() as f64 / samples.len() as f64;
        recall_entries.push(RecallEntry {
            spec: *spec,
            recall: r,
            oracle_recall: o,
        });
    }

    let m = sets.iter().map(|s| s.len()).max().unwrap_or(1);
    let mut oracle = Vec::with_capacity(m);
    for k in 1..=m {
        let top: Vec<Vec<Pose>> = sets.iter().map(|s| s[..k.min(s.len())].to_vec()).collect();
        let e = oracle_error(&top, &truths)?;
        oracle.push(OracleEntry {
            hypotheses: k,
            median_rot_deg: median(&e.iter().map(|x| x.rot_deg).collect::<Vec<_>>()).unwrap_or(0.0),
            median_trans: median(&e.iter().map(|x| x.trans).collect::<Vec<_>>()).unwrap_or(0.0),
        });
    }

    let semds: Vec<f64> = samples
        .iter()
        .map(|s| {
            let rots: Vec<UnitQuaternion> = s.hypotheses.iter().map(|h| h.rotation).collect();
            let ws: Vec<f64> = s.hypotheses.iter().map(|h| h.weight).collect();
            semd(&rots, &ws)
        })
        .collect::<Result<_, _>>()?;

    let chamfer_summary = match opts.template {
        Some(t) => {
            let cds: Vec<f64> = best
                .iter()
                .zip(&truths)
                .map(|(p, g)| {
                    let a: Vec<[f64; 3]> = t.iter().map(|x| p.rotation.rotate(*x)).collect();
                    let b: Vec<[f64; 3]> = t.iter().map(|x| g.rotation.rotate(*x)).collect();
                    chamfer(&a, &b)
                })
                .collect::<Result<_, _>>()?;
            Some(Summary {
                mean: mean(&cds).unwrap_or(0.0),
                median: median(&cds).unwrap_or(0.0),
            })
        }
        None => None,
    };

    let modes: Vec<Vec<Pose>> = samples.iter().map(|s| s.modes.clone()).collect();
    let detection = mode_detection_rate(&sets, &modes, &opts.detection_spec)?;

    let rot_errors: Vec<f64> = errors.iter().map(|e| e.rot_deg).collect();
    let uncertainty: Vec<f64> = samples
        .iter()
        .map(|s| s.hypotheses[0].rot_entropy)
        .collect();
    let pruning = pruning_curve(&rot_errors, &uncertainty, opts.fractions)?;
    let thresholds: Vec<f64> = if opts.uncertainty_thresholds.is_empty() {
        pruning.iter().map(|p| p.threshold).collect()
    } else {
        opts.uncertainty_thresholds.to_vec()
    };
    let table = threshold_table(&rot_errors, &uncertainty, &thresholds)?;

    Ok(EvalReport {
        samples: samples.len(),
        recall: recall_entries,
        median_rot_deg: median(&rot_errors).unwrap_or(0.0),
        median_trans: median(&errors.iter().map(|e| e.trans).collect::<Vec<_>>()).unwrap_or(0.0),
        oracle,
        semd: mean(&semds).unwrap_or(0.0),
        chamfer: chamfer_summary,
        mode_detection_rate: detection,
        detection_spec: opts.detection_spec,
        pruning,
        thresholds: table,
    })
}
