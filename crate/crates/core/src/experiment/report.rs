use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::data::{MultiViewDataset, NoiseConfig};
use crate::error::{Error, Result};
use crate::network::MultiViewModel;

pub const SCHEMA_VERSION: u32 = 1;
pub const HISTOGRAM_BINS: usize = 50;

/// Reporting partition of the classes by training frequency.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassGroups {
    pub head: Vec<usize>,
    pub medium: Vec<usize>,
    pub tail: Vec<usize>,
}

impl ClassGroups {
    /// Classes sorted by descending training count (ties: lower id first);
    /// the first `min(3, K)` are head, the next `min(5, K - head)` medium,
    /// the rest tail.
    pub fn from_counts(train_counts: &[usize]) -> Self {
        let mut order: Vec<usize> = (0..train_counts.len()).collect();
        order.sort_by(|&a, &b| train_counts[b].cmp(&train_counts[a]).then(a.cmp(&b)));
        let head = order.len().min(3);
        let medium = (order.len() - head).min(5);
        ClassGroups {
            head: order[..head].to_vec(),
            medium: order[head..head + medium].to_vec(),
            tail: order[head + medium..].to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupAccuracy {
    pub head: Option<f64>,
    pub medium: Option<f64>,
    pub tail: Option<f64>,
}

/// Test-set metrics of one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub samples: usize,
    pub accuracy: f64,
    /// `None` for classes absent from the evaluated set.
    pub per_class_accuracy: Vec<Option<f64>>,
    pub class_counts: Vec<usize>,
    pub groups: ClassGroups,
    pub group_accuracy: GroupAccuracy,
    pub mean_uncertainty: f64,
    pub median_uncertainty: f64,
    /// Joint uncertainty counts in 50 equal bins over [0, 1].
    pub uncertainty_histogram: Vec<usize>,
}

/// Per-sample outputs gathered during evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleOutputs {
    pub decisions: Vec<usize>,
    pub uncertainties: Vec<f64>,
}

pub fn predict_all(model: &MultiViewModel, data: &MultiViewDataset) -> Result<SampleOutputs> {
    model.check_compatible(data)?;
    let mut decisions = Vec::with_capacity(data.len());
    let mut uncertainties = Vec::with_capacity(data.len());
    for i in 0..data.len() {
        let p = model.predict(&data.sample(i))?;
        decisions.push(p.decision);
        uncertainties.push(p.joint.uncertainty());
    }
    Ok(SampleOutputs {
        decisions,
        uncertainties,
    })
}

fn ratio(hits: usize, total: usize) -> Option<f64> {
    (total > 0).then(|| hits as f64 / total as f64)
}

/// Accuracy and uncertainty statistics of `model` on `data`. Head/medium/tail
/// groups are defined by `train_counts`.
pub fn compute_metrics(
    model: &MultiViewModel,
    data: &MultiViewDataset,
    train_counts: &[usize],
) -> Result<Metrics> {
    if data.is_empty() {
        return Err(Error::Data("cannot evaluate on an empty dataset".into()));
    }
    if train_counts.len() != data.num_classes() {
        return Err(Error::invalid("train counts must have one entry per class"));
    }
    let out = predict_all(model, data)?;
    let k = data.num_classes();
    let mut hits = vec![0usize; k];
    let class_counts = data.class_counts();
    for (&d, &y) in out.decisions.iter().zip(data.labels()) {
        if d == y {
            hits[y] += 1;
        }
    }
    let total_hits: usize = hits.iter().sum();
    let groups = ClassGroups::from_counts(train_counts);
    let group = |classes: &[usize]| {
        ratio(
            classes.iter().map(|&c| hits[c]).sum(),
            classes.iter().map(|&c| class_counts[c]).sum(),
        )
    };
    let group_accuracy = GroupAccuracy {
        head: group(&groups.head),
        medium: group(&groups.medium),
        tail: group(&groups.tail),
    };

    let n = out.uncertainties.len();
    let mean_uncertainty = out.uncertainties.iter().sum::<f64>() / n as f64;
    let mut sorted = out.uncertainties.clone();
    sorted.sort_by(f64::total_cmp);
    let median_uncertainty = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    let mut histogram = vec![0usize; HISTOGRAM_BINS];
    for u in &out.uncertainties {
        let bin = ((u * HISTOGRAM_BINS as f64) as usize).min(HISTOGRAM_BINS - 1);
        histogram[bin] += 1;
    }

    Ok(Metrics {
        samples: n,
        accuracy: total_hits as f64 / n as f64,
        per_class_accuracy: hits.iter().zip(&class_counts).map(|(&h, &c)| ratio(h, c)).collect(),
        class_counts,
        groups,
        group_accuracy,
        mean_uncertainty,
        median_uncertainty,
        uncertainty_histogram: histogram,
    })
}

/// Training summary and test metrics of one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseReport {
    /// "phase-1" (long-tailed data) or "phase-2" (after oversampling).
    pub phase: String,
    pub train_class_counts: Vec<usize>,
    pub pseudo_counts: Vec<usize>,
    pub epochs_run: usize,
    pub loss_history: Vec<f64>,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub schema_version: u32,
    pub command: String,
    pub dataset: String,
    pub noise: NoiseConfig,
    pub phases: Vec<PhaseReport>,
    pub warnings: Vec<String>,
    pub config: ExperimentConfig,
    pub config_hash: String,
    /// Kept apart from the metric payload; the only field that varies between identical runs.
    pub wall_clock_seconds: f64,
}

impl MetricsReport {
    /// Metrics of the last phase.
    pub fn final_phase(&self) -> &PhaseReport {
        self.phases.last().expect("reports hold at least one phase")
    }

    pub fn phase(&self, name: &str) -> Option<&PhaseReport> {
        self.phases.iter().find(|p| p.phase == name)
    }

    /// JSON of everything except the wall-clock time.
    pub fn payload_json(&self) -> String {
        let mut copy = self.clone();
        copy.wall_clock_seconds = 0.0;
        serde_json::to_string(&copy).expect("report serializes")
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Aligned plain-text summary.
    pub fn render_table(&self) -> String {
        let pct = |x: Option<f64>| x.map_or_else(|| "-".to_string(), |v| format!("{:.2}", 100.0 * v));
        let mut s = String::new();
        let _ = writeln!(s, "{} on {} (noise: {})", self.command, self.dataset, describe_noise(&self.noise));
        let _ = writeln!(
            s,
            "{:<8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>8} {:>7}",
            "phase", "acc", "head", "medium", "tail", "mean_u", "med_u", "pseudo"
        );
        for p in &self.phases {
            let m = &p.metrics;
            let _ = writeln!(
                s,
                "{:<8} {:>8} {:>8} {:>8} {:>8} {:>8.4} {:>8.4} {:>7}",
                p.phase,
                pct(Some(m.accuracy)),
                pct(m.group_accuracy.head),
                pct(m.group_accuracy.medium),
                pct(m.group_accuracy.tail),
                m.mean_uncertainty,
                m.median_uncertainty,
                p.pseudo_counts.iter().sum::<usize>()
            );
        }
        for w in &self.warnings {
            let _ = writeln!(s, "warning: {w}");
        }
        s
    }
}

pub fn describe_noise(noise: &NoiseConfig) -> String {
    match noise {
        NoiseConfig::None => "none".into(),
        NoiseConfig::Gaussian { sigma } => format!("gaussian sigma={sigma}"),
        NoiseConfig::Conflictive { fraction } => format!("conflictive fraction={fraction}"),
    }
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let text = serde_json::to_string_pretty(value)? + "\n";
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
