use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use mvtrust::data::NoiseConfig;
use mvtrust::experiment::{ExperimentConfig, SweepParameter};
use mvtrust::{Error, Result};
use serde::de::DeserializeOwned;

pub const REPORT_DIR_ENV: &str = "MVTRUST_REPORT_DIR";

#[derive(Debug, Parser)]
#[command(name = "mvtrust", version, about = "Evidential multi-view classification on long-tailed data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train on the long-tailed training rows and report on the test rows.
    Train {
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        out: OutDir,
    },
    /// Oversample minority classes with a phase-1 checkpoint and retrain.
    OversampleRetrain {
        /// Phase-1 checkpoint written by `train`.
        #[arg(long)]
        checkpoint: PathBuf,
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        out: OutDir,
    },
    /// Evaluate a checkpoint on clean or corrupted test rows.
    Evaluate {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Dataset manifest; defaults to the one the checkpoint was trained on.
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[command(flatten)]
        noise: NoiseArgs,
        /// Evaluate every row of the dataset instead of the held-out test rows.
        #[arg(long)]
        all_rows: bool,
        /// Report path; defaults to <out-dir>/evaluate-report.json.
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        out: OutDir,
    },
    /// Run the full pipeline once per value of R or eta.
    Sweep {
        /// Parameter to vary: R or eta.
        #[arg(long, value_parser = parse_sweep_parameter)]
        param: SweepParameter,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[command(flatten)]
        config: ConfigArgs,
        #[command(flatten)]
        out: OutDir,
    },
    /// Write joint evidence, label and uncertainty per sample as CSV.
    DumpEvidence {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Dataset manifest; defaults to the one the checkpoint was trained on.
        #[arg(long)]
        dataset: Option<PathBuf>,
        /// Output file; defaults to <out-dir>/evidence.csv.
        #[arg(long)]
        output: Option<PathBuf>,
        #[command(flatten)]
        out: OutDir,
    },
    /// Write a synthetic Gaussian-blob dataset in manifest form.
    MakeFixture {
        /// Number of classes K.
        #[arg(long, default_value_t = 6)]
        classes: usize,
        /// Comma-separated feature count per view.
        #[arg(long, value_delimiter = ',', default_value = "4,4,4")]
        view_dims: Vec<usize>,
        /// Samples per class, used when --class-counts is absent.
        #[arg(long, default_value_t = 125)]
        per_class: usize,
        /// Comma-separated samples for each class.
        #[arg(long, value_delimiter = ',')]
        class_counts: Option<Vec<usize>>,
        /// Distance between the closest pair of class means, per view.
        #[arg(long, default_value_t = 2.0)]
        separation: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// File stem of the manifest and data files.
        #[arg(long, default_value = "fixture")]
        name: String,
        #[command(flatten)]
        out: OutDir,
    },
}

#[derive(Debug, Args)]
pub struct OutDir {
    /// Directory for checkpoints, reports and exports.
    #[arg(long, env = REPORT_DIR_ENV, default_value = ".")]
    pub out_dir: PathBuf,
}

/// Command-line overrides of [`ExperimentConfig`] fields.
#[derive(Debug, Args, Default)]
pub struct ConfigArgs {
    /// TOML config file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dataset manifest.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub train_fraction: Option<f64>,
    /// Z-score each view with training statistics (true/false).
    #[arg(long)]
    pub normalize: Option<bool>,

    #[arg(long, help_heading = "Network")]
    pub hidden: Option<usize>,
    #[arg(long, help_heading = "Network")]
    pub epochs: Option<usize>,
    #[arg(long, help_heading = "Network")]
    pub learning_rate: Option<f64>,
    #[arg(long, help_heading = "Network")]
    pub batch_size: Option<usize>,
    /// adam or sgd.
    #[arg(long, help_heading = "Network")]
    pub optimizer: Option<String>,
    #[arg(long, help_heading = "Network")]
    pub early_stop: Option<bool>,

    /// Epochs over which the KL weight ramps up.
    #[arg(long, help_heading = "Loss")]
    pub anneal_epochs: Option<usize>,
    #[arg(long, help_heading = "Loss")]
    pub per_view_terms: Option<bool>,
    /// mean or sum over the batch.
    #[arg(long, help_heading = "Loss")]
    pub reduction: Option<String>,

    /// Neighbors per center.
    #[arg(long, short = 'R', help_heading = "Oversampling")]
    pub neighbors: Option<usize>,
    /// Entropy-to-weight transform (inverse).
    #[arg(long, help_heading = "Oversampling")]
    pub transform: Option<String>,
    /// Per-class target count; defaults to the largest training class.
    #[arg(long, help_heading = "Oversampling")]
    pub target: Option<usize>,
    /// full, v1-no-oversample or v2-random-weights.
    #[arg(long, help_heading = "Oversampling")]
    pub ablation: Option<String>,
    /// Start retraining from the phase-1 parameters.
    #[arg(long, help_heading = "Oversampling")]
    pub warm_start: Option<bool>,

    #[arg(long, help_heading = "Long tail")]
    pub eta: Option<f64>,
    /// normalized-exponent or geometric-per-class.
    #[arg(long, help_heading = "Long tail")]
    pub decay_form: Option<String>,
    #[arg(long, help_heading = "Long tail")]
    pub min_per_class: Option<usize>,

    #[command(flatten)]
    pub noise: NoiseArgs,

    /// Report path; defaults to <out-dir>/<command>-report.json.
    #[arg(long)]
    pub report: Option<PathBuf>,
}

#[derive(Debug, Args, Default)]
pub struct NoiseArgs {
    /// Test-time corruption: none, gaussian or conflictive.
    #[arg(long, help_heading = "Noise")]
    pub noise: Option<String>,
    /// Gaussian noise standard deviation.
    #[arg(long, help_heading = "Noise")]
    pub sigma: Option<f64>,
    /// Fraction of test rows given a conflicting view.
    #[arg(long, help_heading = "Noise")]
    pub fraction: Option<f64>,
}

/// Parses a kebab-case enum value through its serde representation.
fn kebab<T: DeserializeOwned>(flag: &str, value: &str) -> Result<T> {
    serde_json::from_value(serde_json::Value::String(value.to_string()))
        .map_err(|_| Error::Config(format!("--{flag}: unknown value {value:?}")))
}

fn parse_sweep_parameter(s: &str) -> std::result::Result<SweepParameter, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

impl NoiseArgs {
    /// Combines the flags with `current`. `--sigma` alone implies gaussian
    /// noise and `--fraction` alone conflictive noise (default fraction 1).
    pub fn resolve(&self, current: NoiseConfig) -> Result<NoiseConfig> {
        let kind = match (&self.noise, self.sigma, self.fraction) {
            (Some(k), _, _) => k.as_str(),
            (None, Some(_), Some(_)) => {
                return Err(Error::Config("--sigma and --fraction need an explicit --noise kind".into()))
            }
            (None, Some(_), None) => "gaussian",
            (None, None, Some(_)) => "conflictive",
            (None, None, None) => return Ok(current),
        };
        let noise = match kind {
            "none" => NoiseConfig::None,
            "gaussian" => {
                let sigma = match (self.sigma, current) {
                    (Some(s), _) => s,
                    (None, NoiseConfig::Gaussian { sigma }) => sigma,
                    _ => return Err(Error::Config("--noise gaussian needs --sigma".into())),
                };
                NoiseConfig::Gaussian { sigma }
            }
            "conflictive" => {
                let fraction = match (self.fraction, current) {
                    (Some(f), _) => f,
                    (None, NoiseConfig::Conflictive { fraction }) => fraction,
                    _ => 1.0,
                };
                NoiseConfig::Conflictive { fraction }
            }
            other => return Err(Error::Config(format!("--noise: unknown kind {other:?}"))),
        };
        noise.validate()?;
        Ok(noise)
    }
}

impl ConfigArgs {
    /// The config file (or `base` when no file is given) with every flag applied.
    pub fn resolve(&self, base: Option<ExperimentConfig>) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => base.unwrap_or_default(),
        };
        self.apply(&mut cfg)?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn apply(&self, cfg: &mut ExperimentConfig) -> Result<()> {
        fn set<T: Clone>(slot: &mut T, value: &Option<T>) {
            if let Some(v) = value {
                *slot = v.clone();
            }
        }
        if self.dataset.is_some() {
            cfg.dataset = self.dataset.clone();
        }
        set(&mut cfg.seed, &self.seed);
        set(&mut cfg.train_fraction, &self.train_fraction);
        set(&mut cfg.normalize, &self.normalize);

        let n = &mut cfg.network;
        set(&mut n.hidden, &self.hidden);
        set(&mut n.epochs, &self.epochs);
        set(&mut n.learning_rate, &self.learning_rate);
        set(&mut n.batch_size, &self.batch_size);
        set(&mut n.early_stop, &self.early_stop);
        if let Some(o) = &self.optimizer {
            n.optimizer = kebab("optimizer", o)?;
        }

        set(&mut cfg.loss.anneal_epochs, &self.anneal_epochs);
        set(&mut cfg.loss.per_view_terms, &self.per_view_terms);
        if let Some(r) = &self.reduction {
            cfg.loss.reduction = kebab("reduction", r)?;
        }

        let o = &mut cfg.oversample;
        set(&mut o.neighbors, &self.neighbors);
        set(&mut o.warm_start, &self.warm_start);
        if self.target.is_some() {
            o.target = self.target;
        }
        if let Some(t) = &self.transform {
            o.transform = kebab("transform", t)?;
        }
        if let Some(a) = &self.ablation {
            o.ablation = kebab("ablation", a)?;
        }

        set(&mut cfg.long_tail.eta, &self.eta);
        set(&mut cfg.long_tail.min_per_class, &self.min_per_class);
        if let Some(d) = &self.decay_form {
            cfg.long_tail.decay_form = kebab("decay-form", d)?;
        }

        cfg.noise = self.noise.resolve(cfg.noise)?;
        if self.report.is_some() {
            cfg.report = self.report.clone();
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use mvtrust::experiment::Ablation;

    #[test]
    fn flags_override_defaults() {
        let args = ConfigArgs {
            seed: Some(4),
            neighbors: Some(5),
            ablation: Some("v2-random-weights".into()),
            decay_form: Some("geometric-per-class".into()),
            ..ConfigArgs::default()
        };
        let cfg = args.resolve(None).unwrap();
        assert_eq!(cfg.seed, 4);
        assert_eq!(cfg.oversample.neighbors, 5);
        assert_eq!(cfg.oversample.ablation, Ablation::V2RandomWeights);
        assert_eq!(cfg.network.epochs, 200);
    }

    #[test]
    fn bad_values_are_config_errors() {
        for args in [
            ConfigArgs {
                ablation: Some("v3".into()),
                ..ConfigArgs::default()
            },
            ConfigArgs {
                eta: Some(0.0),
                ..ConfigArgs::default()
            },
            ConfigArgs {
                noise: NoiseArgs {
                    noise: Some("gaussian".into()),
                    ..NoiseArgs::default()
                },
                ..ConfigArgs::default()
            },
        ] {
            assert!(matches!(args.resolve(None), Err(Error::Config(_))), "{args:?}");
        }
    }

    #[test]
    fn noise_flags_infer_the_kind() {
        let sigma = NoiseArgs {
            sigma: Some(0.5),
            ..NoiseArgs::default()
        };
        assert_eq!(sigma.resolve(NoiseConfig::None).unwrap(), NoiseConfig::Gaussian { sigma: 0.5 });
        let conflict = NoiseArgs {
            noise: Some("conflictive".into()),
            ..NoiseArgs::default()
        };
        assert_eq!(
            conflict.resolve(NoiseConfig::None).unwrap(),
            NoiseConfig::Conflictive { fraction: 1.0 }
        );
        let keep = NoiseArgs::default();
        assert_eq!(
            keep.resolve(NoiseConfig::Gaussian { sigma: 2.0 }).unwrap(),
            NoiseConfig::Gaussian { sigma: 2.0 }
        );
    }
}
