//! File-level commands: read inputs from disk, run the pipeline, write
//! checkpoints, reports and exports.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::pipeline::{
    oversample_and_retrain, prepare, run_pipeline, test_rows, train_phase1, TrainedPhase, PHASE_1, PHASE_2,
};
use super::report::{compute_metrics, write_json, MetricsReport, PhaseReport, SCHEMA_VERSION};
use crate::data::{
    load_dataset, make_synthetic_fixture, write_dataset, FixtureSpec, Matrix, MultiViewDataset, NoiseConfig,
};
use crate::error::{Error, Result};
use crate::network::{Checkpoint, CheckpointMeta};
use crate::oversample::{write_provenance, PseudoSample};

pub const PHASE1_CHECKPOINT: &str = "checkpoint-phase1.json";
pub const PHASE2_CHECKPOINT: &str = "checkpoint-phase2.json";
pub const PSEUDO_STEM: &str = "pseudo";
pub const PROVENANCE_FILE: &str = "pseudo_provenance.jsonl";

/// A report and the files a command wrote.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandOutput {
    pub report: MetricsReport,
    pub report_path: PathBuf,
    pub files: Vec<PathBuf>,
}

fn report_path(cfg: &ExperimentConfig, out_dir: &Path, command: &str) -> PathBuf {
    cfg.report
        .clone()
        .unwrap_or_else(|| out_dir.join(format!("{command}-report.json")))
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn config_json(cfg: &ExperimentConfig) -> serde_json::Value {
    serde_json::to_value(cfg).expect("config serializes")
}

fn checkpoint_for(
    phase: &TrainedPhase,
    label: &str,
    cfg: &ExperimentConfig,
    normalization: Option<crate::data::Normalization>,
) -> Checkpoint {
    Checkpoint::from_model(
        &phase.model,
        CheckpointMeta {
            phase: label.to_string(),
            normalization,
            train_class_counts: phase.train_class_counts.clone(),
            pseudo_counts: phase.pseudo_counts.clone(),
            loss_history: phase.state.loss_history.clone(),
            config_hash: cfg.hash(),
            config: config_json(cfg),
        },
    )
}

fn checkpoint_config(ckpt: &Checkpoint) -> Result<ExperimentConfig> {
    serde_json::from_value(ckpt.meta.config.clone())
        .map_err(|e| Error::Checkpoint(format!("embedded config is unreadable: {e}")))
}

fn phase_report(ckpt: &Checkpoint, metrics: super::report::Metrics) -> PhaseReport {
    PhaseReport {
        phase: ckpt.meta.phase.clone(),
        train_class_counts: ckpt.meta.train_class_counts.clone(),
        pseudo_counts: ckpt.meta.pseudo_counts.clone(),
        epochs_run: ckpt.meta.loss_history.len(),
        loss_history: ckpt.meta.loss_history.clone(),
        metrics,
    }
}

fn finish(
    command: &str,
    dataset: &str,
    cfg: &ExperimentConfig,
    phases: Vec<PhaseReport>,
    warnings: Vec<String>,
    started: Instant,
) -> MetricsReport {
    MetricsReport {
        schema_version: SCHEMA_VERSION,
        command: command.to_string(),
        dataset: dataset.to_string(),
        noise: cfg.noise,
        phases,
        warnings,
        config: cfg.clone(),
        config_hash: cfg.hash(),
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    }
}

/// Phase-1 training on the long-tailed training rows; reports on the test rows.
pub fn cmd_train(cfg: &ExperimentConfig, out_dir: &Path) -> Result<CommandOutput> {
    let started = Instant::now();
    cfg.validate()?;
    let (data, _) = load_dataset(cfg.dataset_path()?)?;
    let prepared = prepare(cfg, &data)?;
    let phase = train_phase1(cfg, &prepared.train)?;
    let test = cfg.noise.apply(&prepared.test, cfg.seed)?;
    let metrics = compute_metrics(&phase.model, &test, &phase.train_class_counts)?;

    create_dir(out_dir)?;
    let ckpt_path = out_dir.join(PHASE1_CHECKPOINT);
    checkpoint_for(&phase, PHASE_1, cfg, prepared.normalization.clone()).save(&ckpt_path)?;
    let report = finish("train", data.name(), cfg, vec![phase.report(PHASE_1, metrics)], Vec::new(), started);
    let path = report_path(cfg, out_dir, "train");
    report.write(&path)?;
    Ok(CommandOutput {
        report,
        report_path: path,
        files: vec![ckpt_path],
    })
}

fn pseudo_dataset(like: &MultiViewDataset, samples: &[PseudoSample]) -> Result<MultiViewDataset> {
    let views = like.view_dims().iter().map(|&d| Matrix::zeros(0, d)).collect();
    let mut out = MultiViewDataset::new(format!("{}-pseudo", like.name()), like.num_classes(), views, Vec::new())?;
    for s in samples {
        out.push(&s.views, s.label)?;
    }
    Ok(out)
}

/// Oversamples the minority classes with a phase-1 checkpoint's evidence,
/// retrains, and reports both phases on the test rows.
pub fn cmd_oversample_retrain(cfg: &ExperimentConfig, checkpoint: &Path, out_dir: &Path) -> Result<CommandOutput> {
    let started = Instant::now();
    cfg.validate()?;
    let ckpt = Checkpoint::load(checkpoint)?;
    let trained_with = checkpoint_config(&ckpt)?;
    if !cfg.same_data_pipeline(&trained_with) {
        return Err(Error::Checkpoint(format!(
            "{} was trained with a different seed, split or long-tail setting",
            checkpoint.display()
        )));
    }
    let (data, _) = load_dataset(cfg.dataset_path()?)?;
    ckpt.check_dataset(&data)?;
    let prepared = prepare(cfg, &data)?;
    let phase1 = ckpt.model()?;
    let outcome = oversample_and_retrain(cfg, &prepared.train, &phase1)?;

    let test = cfg.noise.apply(&prepared.test, cfg.seed)?;
    let counts = &ckpt.meta.train_class_counts;
    let phases = vec![
        phase_report(&ckpt, compute_metrics(&phase1, &test, counts)?),
        outcome.phase.report(PHASE_2, compute_metrics(&outcome.phase.model, &test, counts)?),
    ];

    create_dir(out_dir)?;
    let ckpt_path = out_dir.join(PHASE2_CHECKPOINT);
    checkpoint_for(&outcome.phase, PHASE_2, cfg, prepared.normalization.clone()).save(&ckpt_path)?;
    let pseudo = pseudo_dataset(&prepared.train, &outcome.balance.samples)?;
    let manifest = write_dataset(out_dir, PSEUDO_STEM, &pseudo, prepared.normalization.as_ref())?;
    let provenance = out_dir.join(PROVENANCE_FILE);
    write_provenance(&provenance, &outcome.balance.samples, prepared.train.len())?;

    let report = finish(
        "oversample-retrain",
        data.name(),
        cfg,
        phases,
        outcome.balance.warnings.clone(),
        started,
    );
    let path = report_path(cfg, out_dir, "oversample-retrain");
    report.write(&path)?;
    Ok(CommandOutput {
        report,
        report_path: path,
        files: vec![ckpt_path, manifest, provenance],
    })
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvaluateOptions {
    /// Dataset manifest; defaults to the one the checkpoint was trained on.
    pub dataset: Option<PathBuf>,
    pub noise: NoiseConfig,
    /// Evaluate every row instead of re-deriving the held-out test rows.
    pub all_rows: bool,
    pub report: Option<PathBuf>,
}

/// Evaluates a checkpoint on clean or corrupted test rows.
pub fn cmd_evaluate(checkpoint: &Path, opts: &EvaluateOptions, out_dir: &Path) -> Result<CommandOutput> {
    let started = Instant::now();
    opts.noise.validate()?;
    let ckpt = Checkpoint::load(checkpoint)?;
    let mut cfg = checkpoint_config(&ckpt)?;
    cfg.noise = opts.noise;
    if let Some(d) = &opts.dataset {
        cfg.dataset = Some(d.clone());
    }
    cfg.report = opts.report.clone();
    let (data, _) = load_dataset(cfg.dataset_path()?)?;
    ckpt.check_dataset(&data)?;
    let model = ckpt.model()?;
    let rows = if opts.all_rows {
        match &ckpt.meta.normalization {
            Some(n) => n.apply(&data)?,
            None => data.clone(),
        }
    } else {
        test_rows(&cfg, &data, ckpt.meta.normalization.as_ref())?
    };
    let rows = cfg.noise.apply(&rows, cfg.seed)?;
    let metrics = compute_metrics(&model, &rows, &ckpt.meta.train_class_counts)?;
    let report = finish("evaluate", data.name(), &cfg, vec![phase_report(&ckpt, metrics)], Vec::new(), started);
    let path = report_path(&cfg, out_dir, "evaluate");
    report.write(&path)?;
    Ok(CommandOutput {
        report,
        report_path: path,
        files: Vec::new(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepParameter {
    /// Neighbor count R.
    Neighbors,
    /// Long-tail decay rate.
    Eta,
}

impl FromStr for SweepParameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "R" | "r" | "neighbors" => Ok(SweepParameter::Neighbors),
            "eta" => Ok(SweepParameter::Eta),
            other => Err(Error::Config(format!("unknown sweep parameter {other:?} (expected R or eta)"))),
        }
    }
}

/// Smallest decay rate a sweep will use; 0 itself removes every tail sample.
pub const MIN_SWEEP_ETA: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub report: Option<MetricsReport>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub schema_version: u32,
    pub parameter: SweepParameter,
    pub rows: Vec<SweepRow>,
    pub notices: Vec<String>,
    pub config: ExperimentConfig,
    pub wall_clock_seconds: f64,
}

impl SweepReport {
    pub fn render_table(&self) -> String {
        let name = match self.parameter {
            SweepParameter::Neighbors => "R",
            SweepParameter::Eta => "eta",
        };
        let mut s = String::new();
        let _ = writeln!(s, "{name:>10} {:>10} {:>10} {:>10}", "phase-1", "final", "mean_u");
        for row in &self.rows {
            match &row.report {
                Some(r) => {
                    let first = &r.phases[0].metrics;
                    let last = &r.final_phase().metrics;
                    let _ = writeln!(
                        s,
                        "{:>10} {:>10.2} {:>10.2} {:>10.4}",
                        row.value,
                        100.0 * first.accuracy,
                        100.0 * last.accuracy,
                        last.mean_uncertainty
                    );
                }
                None => {
                    let _ = writeln!(s, "{:>10} failed: {}", row.value, row.error.as_deref().unwrap_or("?"));
                }
            }
        }
        for n in &self.notices {
            let _ = writeln!(s, "notice: {n}");
        }
        s
    }
}

/// Applies one sweep value to a copy of `base`.
fn sweep_config(base: &ExperimentConfig, parameter: SweepParameter, value: f64) -> Result<ExperimentConfig> {
    let mut cfg = base.clone();
    cfg.report = None;
    match parameter {
        SweepParameter::Neighbors => {
            if !(value >= 1.0 && value.fract() == 0.0) {
                return Err(Error::Config(format!("R must be a positive integer, got {value}")));
            }
            cfg.oversample.neighbors = value as usize;
        }
        SweepParameter::Eta => cfg.long_tail.eta = value,
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Full pipeline once per value with a shared base seed. Duplicate values are
/// dropped, and an eta of 0 is raised to [`MIN_SWEEP_ETA`]; both are noted.
/// A failing run is recorded in its row and the sweep moves on.
pub fn cmd_sweep(
    base: &ExperimentConfig,
    parameter: SweepParameter,
    values: &[f64],
    out_dir: &Path,
) -> Result<(SweepReport, PathBuf)> {
    let started = Instant::now();
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    base.validate()?;
    let mut notices = Vec::new();
    let mut unique: Vec<f64> = Vec::new();
    for &v in values {
        let v = if parameter == SweepParameter::Eta && v == 0.0 {
            notices.push(format!("eta = 0 is undefined for both decay forms; using {MIN_SWEEP_ETA}"));
            eprintln!("warning: eta = 0 clamped to {MIN_SWEEP_ETA}");
            MIN_SWEEP_ETA
        } else {
            v
        };
        if unique.contains(&v) {
            notices.push(format!("duplicate value {v} dropped"));
        } else {
            unique.push(v);
        }
    }
    let (data, _) = load_dataset(base.dataset_path()?)?;
    let rows = unique
        .into_iter()
        .map(|value| {
            let run = || -> Result<MetricsReport> {
                let run_started = Instant::now();
                let cfg = sweep_config(base, parameter, value)?;
                let run = run_pipeline(&cfg, &data)?;
                let phases = run.evaluate(&cfg.noise, cfg.seed)?;
                let warnings = run.phase2.as_ref().map(|o| o.balance.warnings.clone()).unwrap_or_default();
                Ok(finish("sweep", data.name(), &cfg, phases, warnings, run_started))
            };
            match run() {
                Ok(report) => SweepRow {
                    value,
                    report: Some(report),
                    error: None,
                },
                Err(e) => SweepRow {
                    value,
                    report: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    let report = SweepReport {
        schema_version: SCHEMA_VERSION,
        parameter,
        rows,
        notices,
        config: base.clone(),
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    };
    let name = match parameter {
        SweepParameter::Neighbors => "R",
        SweepParameter::Eta => "eta",
    };
    let path = base
        .report
        .clone()
        .unwrap_or_else(|| out_dir.join(format!("sweep-{name}-report.json")));
    write_json(&path, &report)?;
    Ok((report, path))
}

/// Writes one row per sample: the K joint evidence values, the label and the
/// joint uncertainty. Returns the row count.
pub fn cmd_dump_evidence(checkpoint: &Path, dataset: Option<&Path>, out: &Path) -> Result<usize> {
    let ckpt = Checkpoint::load(checkpoint)?;
    let cfg = checkpoint_config(&ckpt)?;
    let manifest = match dataset {
        Some(p) => p.to_path_buf(),
        None => cfg.dataset_path()?.to_path_buf(),
    };
    let (data, _) = load_dataset(&manifest)?;
    ckpt.check_dataset(&data)?;
    let rows = match &ckpt.meta.normalization {
        Some(n) => n.apply(&data)?,
        None => data,
    };
    let model = ckpt.model()?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    let mut wtr = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(out)
        .map_err(|e| Error::Data(format!("{}: {e}", out.display())))?;
    for i in 0..rows.len() {
        let p = model.predict(&rows.sample(i))?;
        let mut record: Vec<String> = p.joint_evidence.masses().iter().map(f64::to_string).collect();
        record.push(rows.labels()[i].to_string());
        record.push(p.joint.uncertainty().to_string());
        wtr.write_record(&record)
            .map_err(|e| Error::Data(format!("{}: {e}", out.display())))?;
    }
    wtr.flush().map_err(|e| Error::io(out, e))?;
    Ok(rows.len())
}

/// Writes a synthetic Gaussian-blob dataset; returns the manifest path.
pub fn cmd_make_fixture(spec: &FixtureSpec, dir: &Path, stem: &str) -> Result<PathBuf> {
    let data = make_synthetic_fixture(spec)?;
    write_dataset(dir, stem, &data, None)
}
