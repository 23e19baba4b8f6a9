//! Desk-scale training of unimodal and multimodal Bingham predictors.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
#[cfg(not(feature = "std"))]
use num_traits::Float;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::bingham::{BinghamDistribution, Normalizer, TableSpec};
use crate::losses::{
    ewta_k, gaussian_nll, scheme_loss, Head, HeadLayout, LossError, RwtaConfig, Scheme, Selection,
    WtaVariant,
};
use crate::mixture::{combined_uncertainty, BinghamMixture, GaussianMixture, PoseHypothesis};
use crate::network::{Adam, Mlp, NetworkError};
use crate::orientation::VStrategy;
use crate::scene::{SceneKind, Standardizer, SyntheticScene};

pub const DEFAULT_HIDDEN: [usize; 3] = [64, 128, 128];

/// Normalizer grid used for training when no table is supplied. It reaches
/// further than the default table so that confident components are not
/// held at the grid edge.
pub fn training_table_spec() -> TableSpec {
    TableSpec::cube(-400.0, 0.0, 32)
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    Config(&'static str),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error("scene inputs have {actual} features, network expects {expected}")]
    SceneMismatch { expected: usize, actual: usize },
    #[error(
        "loss became non-finite at epoch {epoch}, batch {batch} (value {value}, {clamped} concentration value(s) clamped to the normalizer range)"
    )]
    DivergenceDetected {
        epoch: usize,
        batch: usize,
        value: f64,
        clamped: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// The learning rate decays exponentially, reaching this fraction of its
    /// initial value after the last epoch.
    pub final_lr_fraction: f64,
    pub seed: u64,
    pub scheme: Scheme,
    /// Number of mixture components `M`.
    pub components: usize,
    pub strategy: VStrategy,
    pub hidden: Vec<usize>,
    pub rwta: RwtaConfig,
    /// Epochs between EWTA halvings of `k`; `None` spreads the halvings
    /// evenly so that `k` reaches 1 for the last stretch.
    pub ewta_interval: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 300,
            batch_size: 32,
            learning_rate: 1e-3,
            final_lr_fraction: 0.05,
            seed: 0,
            scheme: Scheme::Mbn,
            components: 10,
            strategy: VStrategy::default(),
            hidden: DEFAULT_HIDDEN.to_vec(),
            rwta: RwtaConfig::default(),
            ewta_interval: None,
        }
    }
}

impl TrainConfig {
    /// Defaults for a scene: camera-style scenes train 300 epochs and select
    /// branches by ℓ₁ distance, point-cloud scenes train 500 epochs and
    /// select by probability.
    pub fn for_scene(kind: &SceneKind) -> Self {
        let camera = kind.has_translation();
        let mut cfg = Self {
            epochs: if camera { 300 } else { 500 },
            ..Self::default()
        };
        cfg.rwta.selection = if camera {
            Selection::L1
        } else {
            Selection::Probability
        };
        cfg
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        if self.epochs == 0 {
            return Err(TrainError::Config("epochs must be positive"));
        }
        if self.batch_size == 0 {
            return Err(TrainError::Config("batch size must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(TrainError::Config("learning rate must be positive"));
        }
        if !(self.final_lr_fraction > 0.0 && self.final_lr_fraction <= 1.0) {
            return Err(TrainError::Config(
                "final learning-rate fraction must lie in (0, 1]",
            ));
        }
        if self.hidden.contains(&0) {
            return Err(TrainError::Config("hidden layer sizes must be positive"));
        }
        if self.ewta_interval == Some(0) {
            return Err(TrainError::Config("EWTA interval must be positive"));
        }
        self.scheme.check_components(self.components)?;
        if self.components > 1 {
            self.rwta.validate(self.components)?;
        }
        Ok(())
    }

    /// Learning rate used throughout `epoch`.
    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        self.learning_rate
            * self
                .final_lr_fraction
                .powf(epoch as f64 / self.epochs as f64)
    }

    pub fn ewta_interval(&self) -> usize {
        self.ewta_interval.unwrap_or_else(|| {
            let halvings = usize::BITS - self.components.leading_zeros();
            (self.epochs / halvings as usize).max(1)
        })
    }
}

/// Which loss terms drive the update during an epoch.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Translation,
    Rotation,
    Joint,
}

/// Translation scenes train the translation head for the first 40% of
/// epochs, then the rotation head for the next 40%, then both.
pub fn stage_at(epoch: usize, epochs: usize, translation: bool) -> Stage {
    if !translation {
        return Stage::Rotation;
    }
    let pos = epoch * 10;
    if pos < epochs * 4 {
        Stage::Translation
    } else if pos < epochs * 8 {
        Stage::Rotation
    } else {
        Stage::Joint
    }
}

/// Feed-forward predictor with a Bingham mixture head.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyNetwork {
    mlp: Mlp,
    layout: HeadLayout,
    standardizer: Standardizer,
}

/// Network output decoded into distributions.
#[derive(Debug, Clone)]
pub struct Prediction {
    pub rotation: BinghamMixture,
    pub translation: Option<GaussianMixture>,
    /// Concentration values clamped to the normalizer range while decoding.
    pub clamped: usize,
}

impl Prediction {
    /// The single distribution of a one-component head.
    pub fn as_distribution(&self) -> Option<&BinghamDistribution> {
        match self.rotation.components() {
            [d] => Some(d),
            _ => None,
        }
    }

    /// One hypothesis per component, heaviest first.
    pub fn hypotheses(&self) -> Vec<PoseHypothesis> {
        let comps = self.rotation.components();
        let rot: Vec<f64> = comps.iter().map(|c| c.entropy()).collect();
        let trans: Vec<f64> = match &self.translation {
            Some(g) => g.components().iter().map(|c| c.entropy()).collect(),
            None => vec![0.0; comps.len()],
        };
        let combined = combined_uncertainty(&rot, &trans);
        let mut out: Vec<PoseHypothesis> = (0..comps.len())
            .map(|i| PoseHypothesis {
                rotation: comps[i].mode(),
                translation: self
                    .translation
                    .as_ref()
                    .map_or([0.0; 3], |g| g.components()[i].mean()),
                weight: self.rotation.weights()[i],
                rot_entropy: rot[i],
                trans_entropy: trans[i],
                combined_uncertainty: combined[i],
            })
            .collect();
        out.sort_by(|a, b| b.weight.total_cmp(&a.weight));
        out
    }
}

impl ToyNetwork {
    pub fn new(input_len: usize, cfg: &TrainConfig, translation: bool) -> Result<Self, TrainError> {
        cfg.validate()?;
        let layout = HeadLayout::new(cfg.components, cfg.strategy, translation);
        let mut sizes = vec![input_len];
        sizes.extend(&cfg.hidden);
        sizes.push(layout.len());
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let mlp = Mlp::new(&sizes, &mut rng)?;
        Ok(Self {
            mlp,
            layout,
            standardizer: Standardizer::identity(input_len),
        })
    }

    /// Reassembles a network from its parts, e.g. after deserialization.
    pub fn from_parts(
        mlp: Mlp,
        layout: HeadLayout,
        standardizer: Standardizer,
    ) -> Result<Self, TrainError> {
        if mlp.output_len() != layout.len() {
            return Err(NetworkError::ShapeMismatch {
                expected: layout.len(),
                actual: mlp.output_len(),
            }
            .into());
        }
        if standardizer.mean.len() != mlp.input_len() || standardizer.scale.len() != mlp.input_len()
        {
            return Err(NetworkError::ShapeMismatch {
                expected: mlp.input_len(),
                actual: standardizer.mean.len(),
            }
            .into());
        }
        Ok(Self {
            mlp,
            layout,
            standardizer,
        })
    }

    pub fn mlp(&self) -> &Mlp {
        &self.mlp
    }

    pub fn layout(&self) -> HeadLayout {
        self.layout
    }

    pub fn standardizer(&self) -> &Standardizer {
        &self.standardizer
    }

    pub fn input_len(&self) -> usize {
        self.mlp.input_len()
    }

    /// Raw head outputs for one unstandardized input.
    pub fn raw_output(&self, input: &[f64]) -> Result<Vec<f64>, TrainError> {
        if input.len() != self.input_len() {
            return Err(NetworkError::ShapeMismatch {
                expected: self.input_len(),
                actual: input.len(),
            }
            .into());
        }
        Ok(self.mlp.forward(&self.standardizer.apply(input))?)
    }

    pub fn forward(
        &self,
        input: &[f64],
        normalizer: &impl Normalizer,
    ) -> Result<Prediction, TrainError> {
        let raw = self.raw_output(input)?;
        let head = Head::decode(self.layout, &raw, normalizer)?;
        Ok(Prediction {
            rotation: head.mixture(),
            translation: head.gaussian_mixture(),
            clamped: head.clamped_count(),
        })
    }
}

pub fn predict_hypotheses(
    net: &ToyNetwork,
    input: &[f64],
    normalizer: &impl Normalizer,
) -> Result<Vec<PoseHypothesis>, TrainError> {
    Ok(net.forward(input, normalizer)?.hypotheses())
}

/// Predictions for every sample of `scene`, in order.
pub fn predict_scene(
    net: &ToyNetwork,
    scene: &SyntheticScene,
    normalizer: &impl Normalizer,
) -> Result<Vec<Prediction>, TrainError> {
    scene
        .samples
        .iter()
        .map(|s| net.forward(&s.input, normalizer))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean per-sample loss of every epoch. Translation scenes report the
    /// sum of both terms whichever stage is active.
    pub loss_trace: Vec<f64>,
    /// Fraction of decoded concentration values that hit the normalizer
    /// range, per epoch.
    pub clamped_fraction: Vec<f64>,
}

impl TrainReport {
    /// Means of the first and last `window` epochs.
    pub fn trend(&self, window: usize) -> (f64, f64) {
        let n = self.loss_trace.len();
        let w = window.clamp(1, n.max(1));
        let mean = |s: &[f64]| -> f64 { s.iter().sum::<f64>() / s.len().max(1) as f64 };
        (
            mean(&self.loss_trace[..w.min(n)]),
            mean(&self.loss_trace[n.saturating_sub(w)..]),
        )
    }
}

/// Minibatch Adam on `scene`. The input standardizer is refitted on the
/// scene first. Deterministic given `cfg.seed`.
pub fn train(
    net: &mut ToyNetwork,
    scene: &SyntheticScene,
    cfg: &TrainConfig,
    normalizer: &impl Normalizer,
) -> Result<TrainReport, TrainError> {
    cfg.validate()?;
    if net.layout.components != cfg.components || net.layout.strategy != cfg.strategy {
        return Err(TrainError::Config(
            "network head does not match the configuration",
        ));
    }
    if scene.is_empty() {
        return Err(TrainError::Config("scene has no samples"));
    }
    let dim = net.input_len();
    if let Some(s) = scene.samples.iter().find(|s| s.input.len() != dim) {
        return Err(TrainError::SceneMismatch {
            expected: dim,
            actual: s.input.len(),
        });
    }
    let translation = net.layout.translation;
    if translation && !scene.kind.has_translation() {
        return Err(TrainError::Config(
            "translation head needs a scene with translations",
        ));
    }

    let refs: Vec<&[f64]> = scene.samples.iter().map(|s| s.input.as_slice()).collect();
    net.standardizer = Standardizer::fit(&refs);
    let inputs: Vec<Vec<f64>> = refs.iter().map(|x| net.standardizer.apply(x)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut opt = Adam::new(net.mlp.param_count());
    let mut order: Vec<usize> = (0..scene.len()).collect();
    let n_out = net.layout.len();
    let interval = cfg.ewta_interval();
    let mut report = TrainReport {
        loss_trace: Vec::with_capacity(cfg.epochs),
        clamped_fraction: Vec::with_capacity(cfg.epochs),
    };

    for epoch in 0..cfg.epochs {
        let stage = stage_at(epoch, cfg.epochs, translation);
        let mut rwta = cfg.rwta;
        if cfg.scheme == Scheme::Ewta || rwta.variant == WtaVariant::Ewta {
            rwta.ewta_k = ewta_k(cfg.components, epoch, interval);
        }
        let lr = cfg.learning_rate_at(epoch);
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut clamped = 0usize;
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let x = DMatrix::from_fn(dim, batch.len(), |r, c| inputs[batch[c]][r]);
            let acts = net.mlp.forward_batch(&x)?;
            let out = acts.output();
            let mut grad = DMatrix::<f64>::zeros(n_out, batch.len());
            let scale = 1.0 / batch.len() as f64;
            let mut batch_loss = 0.0;
            let mut batch_clamped = 0;
            for (c, &idx) in batch.iter().enumerate() {
                let sample = &scene.samples[idx];
                let raw = out.column(c);
                let head = Head::decode(net.layout, raw.as_slice(), normalizer)?;
                batch_clamped += head.clamped_count();
                let rot = scheme_loss(&head, &sample.pose.rotation, cfg.scheme, &rwta)?;
                batch_loss += rot.value;
                if stage != Stage::Translation {
                    for (g, v) in grad.column_mut(c).iter_mut().zip(&rot.grad) {
                        *g += scale * v;
                    }
                }
                if translation {
                    let tl = gaussian_nll(&head, sample.pose.translation)?;
                    batch_loss += tl.value;
                    if stage != Stage::Rotation {
                        for (g, v) in grad.column_mut(c).iter_mut().zip(&tl.grad) {
                            *g += scale * v;
                        }
                    }
                }
            }
            if !batch_loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(TrainError::DivergenceDetected {
                    epoch,
                    batch: b,
                    value: batch_loss,
                    clamped: batch_clamped,
                });
            }
            epoch_loss += batch_loss;
            clamped += batch_clamped;
            let grads = net.mlp.backward(&acts, &grad);
            opt.update(&mut net.mlp, &grads, lr);
        }
        if !net.mlp.is_finite() {
            return Err(TrainError::DivergenceDetected {
                epoch,
                batch: 0,
                value: f64::NAN,
                clamped,
            });
        }
        report.loss_trace.push(epoch_loss / scene.len() as f64);
        report
            .clamped_fraction
            .push(clamped as f64 / (3 * cfg.components * scene.len()) as f64);
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stages_split_forty_forty_twenty() {
        let stages: Vec<Stage> = (0..10).map(|e| stage_at(e, 10, true)).collect();
        assert_eq!(&stages[..4], &[Stage::Translation; 4]);
        assert_eq!(&stages[4..8], &[Stage::Rotation; 4]);
        assert_eq!(&stages[8..], &[Stage::Joint; 2]);
        assert_eq!(stage_at(0, 10, false), Stage::Rotation);
    }

    #[test]
    fn scene_defaults() {
        let cam = TrainConfig::for_scene(&SceneKind::AmbiguousViews(2));
        assert_eq!((cam.epochs, cam.rwta.selection), (300, Selection::L1));
        let pc = TrainConfig::for_scene(&SceneKind::Cyclic(4));
        assert_eq!(
            (pc.epochs, pc.rwta.selection),
            (500, Selection::Probability)
        );
    }

    #[test]
    fn learning_rate_decays_geometrically() {
        let cfg = TrainConfig {
            epochs: 100,
            ..TrainConfig::default()
        };
        assert_eq!(cfg.learning_rate_at(0), 1e-3);
        assert!((cfg.learning_rate_at(50) - 1e-3 * 0.05f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn default_ewta_interval_reaches_one() {
        let cfg = TrainConfig {
            epochs: 200,
            components: 10,
            ..TrainConfig::default()
        };
        let i = cfg.ewta_interval();
        assert_eq!(ewta_k(10, 0, i), 10);
        assert_eq!(ewta_k(10, 199, i), 1);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let base = TrainConfig::default();
        for cfg in [
            TrainConfig {
                epochs: 0,
                ..base.clone()
            },
            TrainConfig {
                batch_size: 0,
                ..base.clone()
            },
            TrainConfig {
                learning_rate: -1.0,
                ..base.clone()
            },
            TrainConfig {
                scheme: Scheme::Ubn,
                components: 3,
                ..base.clone()
            },
            TrainConfig {
                ewta_interval: Some(0),
                ..base.clone()
            },
        ] {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }
}
