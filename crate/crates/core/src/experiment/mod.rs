//! Configuration, the end-to-end pipeline, metrics reports and the commands
//! the CLI exposes.

pub mod commands;
pub mod config;
pub mod pipeline;
pub mod report;

pub use commands::{
    cmd_dump_evidence, cmd_evaluate, cmd_make_fixture, cmd_oversample_retrain, cmd_sweep, cmd_train,
    CommandOutput, EvaluateOptions, SweepParameter, SweepReport, SweepRow,
};
pub use config::{Ablation, ExperimentConfig};
pub use pipeline::{run_pipeline, PipelineRun, Prepared};
pub use report::{ClassGroups, Metrics, MetricsReport, PhaseReport};
