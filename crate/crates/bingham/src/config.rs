//! Settings merged from command-line flags, an optional JSON config file
//! and the environment. Flags win over the file, the file over
//! `BINGHAM_TABLE`, and that over built-in defaults.

use std::path::{Path, PathBuf};

use bingham_core::losses::{Scheme, Selection};
use bingham_core::metrics::RecallSpec;
use bingham_core::scene::SceneKind;
use bingham_core::trainer::TrainConfig;
use bingham_core::VStrategy;
use serde::{Deserialize, Serialize};

use crate::io::{self, DEFAULT_TABLE_FILE, TABLE_ENV};

pub const DEFAULT_SAMPLES: usize = 8000;
pub const DEFAULT_HELD_OUT: usize = 500;
pub const DEFAULT_THRESHOLDS: &str = "10:0.1,15:0.2,20:0.3";
/// Rotation threshold of the mode-detection test, in degrees.
pub const DETECTION_DEG: f64 = 5.0;
/// Translation threshold of the mode-detection test as a fraction of the
/// diameter of the ground-truth translations.
pub const DETECTION_TRANS_FRACTION: f64 = 0.1;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error(transparent)]
    Read(#[from] io::IoError),
    #[error("invalid value for {key}: {message}")]
    Invalid { key: &'static str, message: String },
}

fn invalid(key: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        key,
        message: message.into(),
    }
}

/// Contents of a `--config` file. Every key is optional; unknown keys are
/// rejected.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub table: Option<PathBuf>,
    pub threads: Option<usize>,
    pub scene: Option<String>,
    pub noise: Option<f64>,
    pub scheme: Option<String>,
    #[serde(rename = "M")]
    pub m: Option<usize>,
    pub seed: Option<u64>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub lr: Option<f64>,
    pub final_lr_fraction: Option<f64>,
    pub hidden: Option<Vec<usize>>,
    pub samples: Option<usize>,
    pub held_out: Option<usize>,
    pub v_strategy: Option<String>,
    pub selection: Option<String>,
    pub epsilon: Option<f64>,
    pub ewta_interval: Option<usize>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, ConfigError> {
        match path {
            Some(p) => Ok(io::read_json(p)?),
            None => Ok(Self::default()),
        }
    }

    /// Fills every unset field of `self` from `lower`.
    pub fn or(self, lower: FileConfig) -> FileConfig {
        FileConfig {
            table: self.table.or(lower.table),
            threads: self.threads.or(lower.threads),
            scene: self.scene.or(lower.scene),
            noise: self.noise.or(lower.noise),
            scheme: self.scheme.or(lower.scheme),
            m: self.m.or(lower.m),
            seed: self.seed.or(lower.seed),
            epochs: self.epochs.or(lower.epochs),
            batch_size: self.batch_size.or(lower.batch_size),
            lr: self.lr.or(lower.lr),
            final_lr_fraction: self.final_lr_fraction.or(lower.final_lr_fraction),
            hidden: self.hidden.or(lower.hidden),
            samples: self.samples.or(lower.samples),
            held_out: self.held_out.or(lower.held_out),
            v_strategy: self.v_strategy.or(lower.v_strategy),
            selection: self.selection.or(lower.selection),
            epsilon: self.epsilon.or(lower.epsilon),
            ewta_interval: self.ewta_interval.or(lower.ewta_interval),
        }
    }

    pub fn threads(&self) -> Result<usize, ConfigError> {
        match self.threads {
            Some(0) => Err(invalid("threads", "must be at least 1")),
            Some(n) => Ok(n),
            None => Ok(1),
        }
    }

    /// Resolves the table location.
    pub fn table_source(&self) -> TableSource {
        if let Some(p) = &self.table {
            return TableSource::Explicit(p.clone());
        }
        match std::env::var_os(TABLE_ENV) {
            Some(p) if !p.is_empty() => TableSource::Explicit(PathBuf::from(p)),
            _ => TableSource::Default(PathBuf::from(DEFAULT_TABLE_FILE)),
        }
    }
}

/// Where a table comes from. A missing default file is not an error for
/// commands that can do without a table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TableSource {
    Explicit(PathBuf),
    Default(PathBuf),
}

impl TableSource {
    pub fn path(&self) -> &Path {
        match self {
            TableSource::Explicit(p) | TableSource::Default(p) => p,
        }
    }

    /// The path if it should be read: always when named, otherwise only if
    /// the default file exists.
    pub fn existing(&self) -> Option<&Path> {
        match self {
            TableSource::Explicit(p) => Some(p),
            TableSource::Default(p) => p.exists().then_some(p.as_path()),
        }
    }
}

/// Fully resolved `train-toy` settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ToySettings {
    pub scene: SceneKind,
    pub train: TrainConfig,
    pub samples: usize,
    pub held_out: usize,
}

impl ToySettings {
    pub fn resolve(cfg: &FileConfig) -> Result<Self, ConfigError> {
        let scene_name = cfg.scene.as_deref().unwrap_or("cyclic_4");
        let mut scene =
            SceneKind::parse(scene_name).map_err(|e| invalid("scene", e.to_string()))?;
        if let Some(noise) = cfg.noise {
            match scene {
                SceneKind::Mixed(_) if noise.is_finite() && noise >= 0.0 => {
                    scene = SceneKind::Mixed(noise)
                }
                SceneKind::Mixed(_) => return Err(invalid("noise", "must be non-negative")),
                _ => return Err(invalid("noise", "only the mixed scene takes a noise level")),
            }
        }
        let mut train = TrainConfig::for_scene(&scene);
        if let Some(s) = &cfg.scheme {
            train.scheme = Scheme::from_name(s)
                .ok_or_else(|| invalid("scheme", format!("unknown scheme {s:?}")))?;
        }
        train.components = match (cfg.m, train.scheme) {
            (Some(m), _) => m,
            (None, Scheme::Ubn) => 1,
            (None, _) => train.components,
        };
        if let Some(v) = cfg.seed {
            train.seed = v;
        }
        if let Some(v) = cfg.epochs {
            train.epochs = v;
        }
        if let Some(v) = cfg.batch_size {
            train.batch_size = v;
        }
        if let Some(v) = cfg.lr {
            train.learning_rate = v;
        }
        if let Some(v) = cfg.final_lr_fraction {
            train.final_lr_fraction = v;
        }
        if let Some(v) = &cfg.hidden {
            train.hidden = v.clone();
        }
        if let Some(s) = &cfg.v_strategy {
            train.strategy = VStrategy::from_name(s)
                .ok_or_else(|| invalid("v_strategy", format!("unknown strategy {s:?}")))?;
        }
        if let Some(s) = &cfg.selection {
            train.rwta.selection = Selection::from_name(s)
                .ok_or_else(|| invalid("selection", format!("unknown selection {s:?}")))?;
        }
        if let Some(v) = cfg.epsilon {
            train.rwta.epsilon = v;
        }
        train.ewta_interval = cfg.ewta_interval;
        if train.ewta_interval == Some(0) {
            return Err(invalid("ewta_interval", "must be positive"));
        }
        train
            .validate()
            .map_err(|e| invalid("training", e.to_string()))?;
        train
            .scheme
            .check_components(train.components)
            .map_err(|e| invalid("M", e.to_string()))?;
        train
            .rwta
            .validate(train.components)
            .map_err(|e| invalid("epsilon", e.to_string()))?;

        let samples = cfg.samples.unwrap_or(DEFAULT_SAMPLES);
        let held_out = cfg.held_out.unwrap_or(DEFAULT_HELD_OUT);
        if samples == 0 {
            return Err(invalid("samples", "must be positive"));
        }
        if held_out == 0 {
            return Err(invalid("held_out", "must be positive"));
        }
        Ok(Self {
            scene,
            train,
            samples,
            held_out,
        })
    }
}

/// Parses `deg:trans,deg:trans,...`; `inf` disables the translation test.
pub fn parse_thresholds(s: &str) -> Result<Vec<RecallSpec>, ConfigError> {
    s.split(',')
        .map(|part| {
            let (r, t) = part.split_once(':').ok_or_else(|| {
                invalid("thresholds", format!("expected deg:trans, got {part:?}"))
            })?;
            let num = |x: &str| {
                x.trim()
                    .parse::<f64>()
                    .map_err(|_| invalid("thresholds", format!("not a number: {x:?}")))
            };
            RecallSpec::new(num(r)?, num(t)?).map_err(|e| invalid("thresholds", e.to_string()))
        })
        .collect()
}

/// Parses a comma-separated list of exactly `N` numbers.
pub fn parse_list<T: std::str::FromStr, const N: usize>(
    key: &'static str,
    s: &str,
) -> Result<[T; N], ConfigError> {
    let items: Vec<T> = s
        .split(',')
        .map(|x| {
            x.trim()
                .parse()
                .map_err(|_| invalid(key, format!("not a number: {x:?}")))
        })
        .collect::<Result<_, _>>()?;
    let n = items.len();
    items
        .try_into()
        .map_err(|_| invalid(key, format!("expected {N} values, got {n}")))
}
