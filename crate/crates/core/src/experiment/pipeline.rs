//! In-memory pipeline steps shared by the commands and the test suites.

use crate::data::{make_long_tailed, split, MultiViewDataset, NoiseConfig, Normalization};
use crate::error::Result;
use crate::network::{train, MultiViewModel, TrainState};
use crate::opinion::Evidence;
use crate::oversample::{augment, balance_all, BalanceReport, SampleEvidence};

use super::config::{Ablation, ExperimentConfig};
use super::report::{compute_metrics, Metrics, PhaseReport};

pub const PHASE_1: &str = "phase-1";
pub const PHASE_2: &str = "phase-2";

/// Long-tailed training rows and balanced test rows, both preprocessed.
#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    pub train: MultiViewDataset,
    pub test: MultiViewDataset,
    pub normalization: Option<Normalization>,
}

/// Splits, long-tails the training side, and standardizes both sides with
/// statistics fitted on the long-tailed training rows.
pub fn prepare(cfg: &ExperimentConfig, data: &MultiViewDataset) -> Result<Prepared> {
    let (train_full, test) = split(data, cfg.train_fraction, cfg.seed)?;
    let train = make_long_tailed(&train_full, &cfg.long_tail_config())?;
    if !cfg.normalize {
        return Ok(Prepared {
            train,
            test,
            normalization: None,
        });
    }
    let norm = Normalization::fit(&train)?;
    Ok(Prepared {
        train: norm.apply(&train)?,
        test: norm.apply(&test)?,
        normalization: Some(norm),
    })
}

/// The preprocessed test rows for a model trained under `cfg`.
pub fn test_rows(
    cfg: &ExperimentConfig,
    data: &MultiViewDataset,
    normalization: Option<&Normalization>,
) -> Result<MultiViewDataset> {
    let (_, test) = split(data, cfg.train_fraction, cfg.seed)?;
    match normalization {
        Some(n) => n.apply(&test),
        None => Ok(test),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedPhase {
    pub model: MultiViewModel,
    pub state: TrainState,
    /// Real (long-tailed) training rows per class.
    pub train_class_counts: Vec<usize>,
    /// Pseudo-samples added per class before this phase.
    pub pseudo_counts: Vec<usize>,
}

impl TrainedPhase {
    pub fn report(&self, phase: &str, metrics: Metrics) -> PhaseReport {
        PhaseReport {
            phase: phase.to_string(),
            train_class_counts: self.train_class_counts.clone(),
            pseudo_counts: self.pseudo_counts.clone(),
            epochs_run: self.state.epoch,
            loss_history: self.state.loss_history.clone(),
            metrics,
        }
    }
}

/// Trains fresh networks on `train`.
pub fn train_phase1(cfg: &ExperimentConfig, train_set: &MultiViewDataset) -> Result<TrainedPhase> {
    let mut model = MultiViewModel::init(
        &train_set.view_dims(),
        cfg.network.hidden,
        train_set.num_classes(),
        cfg.seed,
    )?;
    let state = train(&mut model, train_set, &cfg.train_config(), cfg.seed)?;
    Ok(TrainedPhase {
        model,
        state,
        train_class_counts: train_set.class_counts(),
        pseudo_counts: vec![0; train_set.num_classes()],
    })
}

/// Per-view evidence of every row of `data` under `model`.
pub fn sample_evidence(model: &MultiViewModel, data: &MultiViewDataset) -> Result<SampleEvidence> {
    model.check_compatible(data)?;
    let views = model
        .nets()
        .iter()
        .enumerate()
        .map(|(v, net)| {
            (0..data.len())
                .map(|i| net.forward(data.view(v).row(i)))
                .collect::<Result<Vec<Evidence>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    SampleEvidence::new(views)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OversampleOutcome {
    pub phase: TrainedPhase,
    pub balance: BalanceReport,
    pub augmented: MultiViewDataset,
}

/// Balances the training classes with pseudo-samples built from the phase-1
/// model's evidence, then trains again on the augmented set. The v1 ablation
/// skips the pseudo-samples.
pub fn oversample_and_retrain(
    cfg: &ExperimentConfig,
    train_set: &MultiViewDataset,
    phase1: &MultiViewModel,
) -> Result<OversampleOutcome> {
    let balance = if cfg.oversample.ablation == Ablation::V1NoOversample {
        BalanceReport {
            target: 0,
            pseudo_counts: vec![0; train_set.num_classes()],
            ..BalanceReport::default()
        }
    } else {
        let evidence = sample_evidence(phase1, train_set)?;
        balance_all(
            train_set,
            &evidence,
            phase1.base_rates(),
            &cfg.balance_config(),
            cfg.oversample.target,
        )?
    };
    let augmented = augment(train_set, &balance.samples)?;
    let mut model = if cfg.oversample.warm_start {
        phase1.clone()
    } else {
        MultiViewModel::init(
            &augmented.view_dims(),
            cfg.network.hidden,
            augmented.num_classes(),
            cfg.seed,
        )?
    };
    let state = train(&mut model, &augmented, &cfg.train_config(), cfg.seed)?;
    Ok(OversampleOutcome {
        phase: TrainedPhase {
            model,
            state,
            train_class_counts: train_set.class_counts(),
            pseudo_counts: balance.pseudo_counts.clone(),
        },
        balance,
        augmented,
    })
}

/// Everything produced by one end-to-end run.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineRun {
    pub prepared: Prepared,
    pub phase1: TrainedPhase,
    /// Absent for the v1 ablation.
    pub phase2: Option<OversampleOutcome>,
}

impl PipelineRun {
    /// The model the run ends with.
    pub fn final_model(&self) -> &MultiViewModel {
        self.phase2.as_ref().map_or(&self.phase1.model, |o| &o.phase.model)
    }

    /// Phase reports on the (optionally corrupted) test rows.
    pub fn evaluate(&self, noise: &NoiseConfig, seed: u64) -> Result<Vec<PhaseReport>> {
        let test = noise.apply(&self.prepared.test, seed)?;
        let counts = &self.phase1.train_class_counts;
        let mut phases = vec![self
            .phase1
            .report(PHASE_1, compute_metrics(&self.phase1.model, &test, counts)?)];
        if let Some(o) = &self.phase2 {
            phases.push(o.phase.report(PHASE_2, compute_metrics(&o.phase.model, &test, counts)?));
        }
        Ok(phases)
    }
}

/// Prepare, train, and (unless the v1 ablation is selected) oversample and retrain.
pub fn run_pipeline(cfg: &ExperimentConfig, data: &MultiViewDataset) -> Result<PipelineRun> {
    cfg.validate()?;
    let prepared = prepare(cfg, data)?;
    let phase1 = train_phase1(cfg, &prepared.train)?;
    let phase2 = match cfg.oversample.ablation {
        Ablation::V1NoOversample => None,
        _ => Some(oversample_and_retrain(cfg, &prepared.train, &phase1.model)?),
    };
    Ok(PipelineRun {
        prepared,
        phase1,
        phase2,
    })
}
