mod args;

use std::process::ExitCode;

use clap::Parser;
use mvtrust::data::FixtureSpec;
use mvtrust::experiment::{
    cmd_dump_evidence, cmd_evaluate, cmd_make_fixture, cmd_oversample_retrain, cmd_sweep, cmd_train,
    CommandOutput, EvaluateOptions, ExperimentConfig,
};
use mvtrust::network::Checkpoint;
use mvtrust::{Error, Result};

use args::{Cli, Command};

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) => 2,
        Error::Data(_) | Error::Io { .. } | Error::Checkpoint(_) | Error::Json(_) => 3,
        Error::Divergence { .. } => 4,
        _ => 1,
    }
}

fn print_output(out: &CommandOutput) {
    print!("{}", out.report.render_table());
    println!("report: {}", out.report_path.display());
    for f in &out.files {
        println!("wrote: {}", f.display());
    }
}

/// Config embedded in a checkpoint, used when no config file is given.
fn checkpoint_config(path: &std::path::Path) -> Result<ExperimentConfig> {
    let ckpt = Checkpoint::load(path)?;
    serde_json::from_value(ckpt.meta.config)
        .map_err(|e| Error::Checkpoint(format!("{}: embedded config is unreadable: {e}", path.display())))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train { config, out } => {
            let cfg = config.resolve(None)?;
            print_output(&cmd_train(&cfg, &out.out_dir)?);
        }
        Command::OversampleRetrain { checkpoint, config, out } => {
            let base = match config.config {
                Some(_) => None,
                None => Some(checkpoint_config(&checkpoint)?),
            };
            let cfg = config.resolve(base)?;
            print_output(&cmd_oversample_retrain(&cfg, &checkpoint, &out.out_dir)?);
        }
        Command::Evaluate {
            checkpoint,
            dataset,
            noise,
            all_rows,
            report,
            out,
        } => {
            let opts = EvaluateOptions {
                dataset,
                noise: noise.resolve(Default::default())?,
                all_rows,
                report,
            };
            print_output(&cmd_evaluate(&checkpoint, &opts, &out.out_dir)?);
        }
        Command::Sweep {
            param,
            values,
            config,
            out,
        } => {
            let cfg = config.resolve(None)?;
            let (report, path) = cmd_sweep(&cfg, param, &values, &out.out_dir)?;
            print!("{}", report.render_table());
            println!("report: {}", path.display());
        }
        Command::DumpEvidence {
            checkpoint,
            dataset,
            output,
            out,
        } => {
            let path = output.unwrap_or_else(|| out.out_dir.join("evidence.csv"));
            let rows = cmd_dump_evidence(&checkpoint, dataset.as_deref(), &path)?;
            println!("wrote {rows} rows: {}", path.display());
        }
        Command::MakeFixture {
            classes,
            view_dims,
            per_class,
            class_counts,
            separation,
            seed,
            name,
            out,
        } => {
            let spec = FixtureSpec {
                num_classes: classes,
                view_dims,
                class_counts: class_counts.unwrap_or_else(|| vec![per_class; classes]),
                separation,
                seed,
            };
            let manifest = cmd_make_fixture(&spec, &out.out_dir, &name)?;
            println!("manifest: {}", manifest.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
