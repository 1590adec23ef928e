use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{DecayForm, LongTailConfig, NoiseConfig};
use crate::error::{Error, Result};
use crate::loss::LossConfig;
use crate::network::{EarlyStop, Objective, Optimizer, Reduction, TrainConfig};
use crate::oversample::{BalanceConfig, WeightScheme, WeightTransform, DEFAULT_NEIGHBORS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerKind {
    #[default]
    Adam,
    Sgd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSettings {
    pub hidden: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub optimizer: OptimizerKind,
    /// Stop when the epoch loss improves by less than 1e-6 over 10 epochs.
    pub early_stop: bool,
}

impl Default for NetworkSettings {
    fn default() -> Self {
        NetworkSettings {
            hidden: 64,
            epochs: 200,
            learning_rate: 1e-3,
            batch_size: 64,
            optimizer: OptimizerKind::Adam,
            early_stop: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossSettings {
    /// Epochs over which the KL weight ramps from 0 to 1.
    pub anneal_epochs: usize,
    pub per_view_terms: bool,
    pub reduction: Reduction,
}

impl Default for LossSettings {
    fn default() -> Self {
        LossSettings {
            anneal_epochs: 10,
            per_view_terms: true,
            reduction: Reduction::Mean,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Ablation {
    #[default]
    Full,
    /// Skip oversampling entirely.
    V1NoOversample,
    /// Oversample with random mixing weights.
    V2RandomWeights,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OversampleSettings {
    /// Neighbors per center (R).
    pub neighbors: usize,
    pub transform: WeightTransform,
    /// Per-class target count; the largest training class when unset.
    pub target: Option<usize>,
    pub ablation: Ablation,
    /// Start the second training phase from the first phase's parameters.
    pub warm_start: bool,
}

impl Default for OversampleSettings {
    fn default() -> Self {
        OversampleSettings {
            neighbors: DEFAULT_NEIGHBORS,
            transform: WeightTransform::Inverse,
            target: None,
            ablation: Ablation::Full,
            warm_start: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LongTailSettings {
    pub eta: f64,
    pub decay_form: DecayForm,
    pub min_per_class: usize,
}

impl Default for LongTailSettings {
    fn default() -> Self {
        let d = LongTailConfig::default();
        LongTailSettings {
            eta: d.eta,
            decay_form: d.decay_form,
            min_per_class: d.min_per_class,
        }
    }
}

/// Every knob of one experiment. All fields have defaults, so an empty
/// config file is valid apart from the dataset path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub dataset: Option<PathBuf>,
    pub seed: u64,
    pub train_fraction: f64,
    /// Z-score each view with statistics of the training rows.
    pub normalize: bool,
    pub network: NetworkSettings,
    pub loss: LossSettings,
    pub oversample: OversampleSettings,
    pub long_tail: LongTailSettings,
    pub noise: NoiseConfig,
    pub report: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            dataset: None,
            seed: 0,
            train_fraction: 0.8,
            normalize: true,
            network: NetworkSettings::default(),
            loss: LossSettings::default(),
            oversample: OversampleSettings::default(),
            long_tail: LongTailSettings::default(),
            noise: NoiseConfig::None,
            report: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a TOML config file. Relative dataset and report paths are
    /// resolved against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.dataset, &mut cfg.report].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return fail(format!("train_fraction must lie in (0, 1), got {}", self.train_fraction));
        }
        let n = &self.network;
        if n.hidden == 0 {
            return fail("network.hidden must be positive".into());
        }
        if n.batch_size == 0 {
            return fail("network.batch_size must be positive".into());
        }
        if !(n.learning_rate.is_finite() && n.learning_rate > 0.0) {
            return fail(format!("network.learning_rate must be positive, got {}", n.learning_rate));
        }
        if self.loss.anneal_epochs == 0 {
            return fail("loss.anneal_epochs must be positive".into());
        }
        if self.oversample.neighbors == 0 {
            return fail("oversample.neighbors must be positive".into());
        }
        let eta = self.long_tail.eta;
        if !(eta > 0.0 && eta <= 1.0) {
            return fail(format!("long_tail.eta must lie in (0, 1], got {eta}"));
        }
        self.noise.validate()
    }

    pub fn dataset_path(&self) -> Result<&Path> {
        self.dataset
            .as_deref()
            .ok_or_else(|| Error::Config("no dataset manifest given".into()))
    }

    pub fn train_config(&self) -> TrainConfig {
        let n = &self.network;
        TrainConfig {
            epochs: n.epochs,
            batch_size: n.batch_size,
            optimizer: match n.optimizer {
                OptimizerKind::Adam => Optimizer::adam(n.learning_rate),
                OptimizerKind::Sgd => Optimizer::Sgd { lr: n.learning_rate },
            },
            objective: Objective {
                loss: LossConfig {
                    anneal_epochs: self.loss.anneal_epochs,
                    current_epoch: 0,
                },
                per_view_terms: self.loss.per_view_terms,
                reduction: self.loss.reduction,
            },
            early_stop: n.early_stop.then(EarlyStop::default),
        }
    }

    pub fn long_tail_config(&self) -> LongTailConfig {
        LongTailConfig {
            eta: self.long_tail.eta,
            decay_form: self.long_tail.decay_form,
            min_per_class: self.long_tail.min_per_class,
            seed: self.seed,
        }
    }

    pub fn balance_config(&self) -> BalanceConfig {
        BalanceConfig {
            neighbors: self.oversample.neighbors,
            transform: self.oversample.transform,
            scheme: match self.oversample.ablation {
                Ablation::V2RandomWeights => WeightScheme::Random,
                _ => WeightScheme::Uncertainty,
            },
            seed: self.seed,
        }
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    /// Whether two configs produce the same train/test rows and preprocessing.
    pub fn same_data_pipeline(&self, other: &ExperimentConfig) -> bool {
        self.seed == other.seed
            && self.train_fraction == other.train_fraction
            && self.normalize == other.normalize
            && self.long_tail == other.long_tail
    }
}
