//! Toy training runs and their `run.json` record.

use bingham_core::bingham::TableError;
use bingham_core::metrics::{
    default_fractions, evaluate, EvalOptions, EvalReport, EvalSample, MetricsError, RecallSpec,
};
use bingham_core::scene::{generate_scene, SceneKind};
use bingham_core::trainer::{predict_scene, train, training_table_spec, ToyNetwork, TrainError};
use bingham_core::{NormalizationTable, Quadrature, TableSpec};
use serde::{Deserialize, Serialize};

use crate::config::{ToySettings, DETECTION_DEG, DETECTION_TRANS_FRACTION};
use crate::dto::{DtoError, GaussianMixtureDto, HypothesisDto, MixtureDto, PoseDto, ReportDto};

pub const RUN_FORMAT: &str = "bingham-run";
pub const RUN_VERSION: u32 = 1;
/// Added to the training seed to draw the held-out set.
pub const HELD_OUT_SEED_OFFSET: u64 = 1000;
/// Quadrature resolution of the built-in training table; within 4e-6 of
/// the 64-node rule in log F across the grid.
pub const TRAINING_TABLE_NODES: usize = 32;
/// Retained fractions of the pruning curve: 1.0, 0.9, ..., 0.1.
pub const PRUNING_STEPS: usize = 10;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Train(#[from] TrainError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Dto(#[from] DtoError),
    #[error("scene: {0}")]
    Scene(String),
    #[error("unsupported run file: format {format:?}, version {version}")]
    Format { format: String, version: u32 },
}

/// Settings as recorded in a run file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scene: String,
    /// Noise deviation of the corrupted half of a mixed scene.
    pub noise: Option<f64>,
    pub scheme: String,
    #[serde(rename = "M")]
    pub m: usize,
    pub seed: u64,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub final_lr_fraction: f64,
    pub hidden: Vec<usize>,
    pub samples: usize,
    pub held_out: usize,
    pub v_strategy: String,
    pub selection: String,
    pub epsilon: f64,
    pub ewta_interval: usize,
}

impl From<&ToySettings> for RunConfig {
    fn from(s: &ToySettings) -> Self {
        let t = &s.train;
        Self {
            scene: s.scene.name(),
            noise: match s.scene {
                SceneKind::Mixed(n) => Some(n),
                _ => None,
            },
            scheme: t.scheme.name().into(),
            m: t.components,
            seed: t.seed,
            epochs: t.epochs,
            batch_size: t.batch_size,
            lr: t.learning_rate,
            final_lr_fraction: t.final_lr_fraction,
            hidden: t.hidden.clone(),
            samples: s.samples,
            held_out: s.held_out,
            v_strategy: t.strategy.name().into(),
            selection: t.rwta.selection.name().into(),
            epsilon: t.rwta.epsilon,
            ewta_interval: t.ewta_interval(),
        }
    }
}

impl RunConfig {
    pub fn scene_kind(&self) -> Result<SceneKind, RunError> {
        let kind = SceneKind::parse(&self.scene).map_err(|e| RunError::Scene(e.to_string()))?;
        Ok(match (kind, self.noise) {
            (SceneKind::Mixed(_), Some(n)) => SceneKind::Mixed(n),
            (k, _) => k,
        })
    }
}

/// Grid of the normalization table a run used.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableInfo {
    pub min: [f64; 3],
    pub max: [f64; 3],
    pub count: [u32; 3],
}

impl From<&TableSpec> for TableInfo {
    fn from(s: &TableSpec) -> Self {
        Self {
            min: s.axes.map(|a| a.min),
            max: s.axes.map(|a| a.max),
            count: s.axes.map(|a| a.count),
        }
    }
}

/// Prediction for one held-out sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeldOutSample {
    pub truth: PoseDto,
    pub modes: Vec<PoseDto>,
    pub corrupted: bool,
    pub rotation: MixtureDto,
    pub translation: Option<GaussianMixtureDto>,
    /// Heaviest first.
    pub hypotheses: Vec<HypothesisDto>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunFile {
    pub format: String,
    pub version: u32,
    pub config: RunConfig,
    pub table: TableInfo,
    pub loss_trace: Vec<f64>,
    pub clamped_fraction: Vec<f64>,
    pub metrics: ReportDto,
    pub held_out: Vec<HeldOutSample>,
}

impl RunFile {
    pub fn check_format(&self) -> Result<(), RunError> {
        if self.format != RUN_FORMAT || self.version != RUN_VERSION {
            return Err(RunError::Format {
                format: self.format.clone(),
                version: self.version,
            });
        }
        Ok(())
    }

    pub fn eval_samples(&self) -> Result<Vec<EvalSample>, RunError> {
        self.held_out
            .iter()
            .map(|s| {
                Ok(EvalSample {
                    hypotheses: s
                        .hypotheses
                        .iter()
                        .map(HypothesisDto::to_hypothesis)
                        .collect::<Result<_, _>>()?,
                    truth: s.truth.to_pose()?,
                    modes: s
                        .modes
                        .iter()
                        .map(PoseDto::to_pose)
                        .collect::<Result<_, _>>()?,
                })
            })
            .collect()
    }
}

/// Largest distance between two ground-truth translations.
pub fn translation_diameter(samples: &[EvalSample]) -> f64 {
    let ts: Vec<[f64; 3]> = samples.iter().map(|s| s.truth.translation).collect();
    let mut d: f64 = 0.0;
    for (i, a) in ts.iter().enumerate() {
        for b in &ts[i + 1..] {
            let n = (0..3).map(|k| (a[k] - b[k]).powi(2)).sum::<f64>().sqrt();
            d = d.max(n);
        }
    }
    d
}

/// 5° and a tenth of the translation diameter; rotation only when every
/// translation is the same.
pub fn default_detection_spec(samples: &[EvalSample]) -> RecallSpec {
    let d = translation_diameter(samples);
    let spec = if d > 0.0 {
        RecallSpec::new(DETECTION_DEG, DETECTION_TRANS_FRACTION * d)
    } else {
        RecallSpec::rotation_only(DETECTION_DEG)
    };
    spec.expect("positive thresholds")
}

/// Evaluation settings for the samples of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalSettings {
    pub recall: Vec<RecallSpec>,
    pub detection: Option<RecallSpec>,
    pub uncertainty_thresholds: Vec<f64>,
}

pub fn evaluate_samples(
    kind: &SceneKind,
    samples: &[EvalSample],
    settings: &EvalSettings,
) -> Result<EvalReport, RunError> {
    let fractions = default_fractions(PRUNING_STEPS);
    // a rotated template only measures alignment when there is no translation
    let template = (!kind.has_translation()).then(|| kind.template());
    Ok(evaluate(
        samples,
        &EvalOptions {
            recall_specs: &settings.recall,
            detection_spec: settings
                .detection
                .unwrap_or_else(|| default_detection_spec(samples)),
            fractions: &fractions,
            uncertainty_thresholds: &settings.uncertainty_thresholds,
            template: template.as_deref(),
        },
    )?)
}

/// The table used by `train-toy` when none is configured.
pub fn training_table(threads: usize) -> Result<NormalizationTable, TableError> {
    crate::io::build_table(
        training_table_spec(),
        &Quadrature::new(TRAINING_TABLE_NODES),
        threads,
    )
}

/// Trains on a fresh scene, predicts the held-out set and evaluates it.
pub fn execute(
    settings: &ToySettings,
    table: &NormalizationTable,
    eval: &EvalSettings,
) -> Result<RunFile, RunError> {
    let seed = settings.train.seed;
    let scene_err = |e: bingham_core::scene::SceneError| RunError::Scene(e.to_string());
    let train_set = generate_scene(settings.scene, settings.samples, seed).map_err(scene_err)?;
    let test_set = generate_scene(
        settings.scene,
        settings.held_out,
        seed.wrapping_add(HELD_OUT_SEED_OFFSET),
    )
    .map_err(scene_err)?;

    let mut net = ToyNetwork::new(
        train_set.input_len(),
        &settings.train,
        settings.scene.has_translation(),
    )?;
    let report = train(&mut net, &train_set, &settings.train, table)?;
    let predictions = predict_scene(&net, &test_set, table)?;

    let held_out: Vec<HeldOutSample> = test_set
        .samples
        .iter()
        .zip(&predictions)
        .map(|(s, p)| HeldOutSample {
            truth: PoseDto::from(&s.pose),
            modes: s.modes.iter().map(PoseDto::from).collect(),
            corrupted: s.corrupted,
            rotation: MixtureDto::from(&p.rotation),
            translation: p.translation.as_ref().map(GaussianMixtureDto::from),
            hypotheses: p.hypotheses().iter().map(HypothesisDto::from).collect(),
        })
        .collect();

    let samples: Vec<EvalSample> = test_set
        .samples
        .iter()
        .zip(&predictions)
        .map(|(s, p)| EvalSample {
            hypotheses: p.hypotheses(),
            truth: s.pose,
            modes: s.modes.clone(),
        })
        .collect();
    let metrics = evaluate_samples(&settings.scene, &samples, eval)?;

    Ok(RunFile {
        format: RUN_FORMAT.into(),
        version: RUN_VERSION,
        config: RunConfig::from(settings),
        table: TableInfo::from(table.spec()),
        loss_trace: report.loss_trace,
        clamped_fraction: report.clamped_fraction,
        metrics: ReportDto::from(&metrics),
        held_out,
    })
}
