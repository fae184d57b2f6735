//! The `gridlight` batch CLI: run the whole pipeline or one stage.
//!
//! Exit codes: 0 on success, 2 for config problems (including missing input
//! files, which are named in the message), 1 when a stage fails (the stage is
//! named in the message).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gridlight::pipeline::{exit_code, read_run_config, run_pipeline, run_stage, RunConfig, Stage};
use gridlight::{Error, Result};

#[derive(Parser)]
#[command(
    name = "gridlight",
    version,
    about = "Estimate and explain regional electrification rates from interaction records"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Run config JSON file; optional with --synthetic.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Master seed; overrides the config file. Required when no config file
    /// sets one.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the config file.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Use generated synthetic input with default settings.
    #[arg(long)]
    synthetic: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run every stage in order and write the run report.
    Run {
        #[command(flatten)]
        common: CommonArgs,
        /// Run a single stage instead of the full pipeline.
        #[arg(long, value_name = "STAGE")]
        stage: Option<Stage>,
    },
    /// Generate the synthetic sites, communes, boundary, and records.
    Synth(CommonArgs),
    /// Tessellate tower cells and label them from commune census data.
    Geo(CommonArgs),
    /// Build the labeled interaction-network feature table.
    Features(CommonArgs),
    /// Split the table, train the configured models, and evaluate them.
    Train(CommonArgs),
    /// Explain the test instances with the configured explainers.
    Explain(CommonArgs),
    /// Aggregate explanations, export plot CSVs, and write the run report.
    Report(CommonArgs),
}

/// Builds the effective config from the file (if any) and the flag overrides.
/// `implied_synthetic` is set by the `synth` subcommand, which cannot mean
/// anything else.
fn resolve_config(common: &CommonArgs, implied_synthetic: bool) -> Result<RunConfig> {
    let synthetic = common.synthetic || implied_synthetic;
    let mut config = match &common.config {
        Some(path) => read_run_config(path)?,
        None if synthetic => {
            let seed = common.seed.ok_or_else(|| {
                Error::InvalidConfig("--synthetic without a config file needs --seed".to_string())
            })?;
            RunConfig::synthetic(seed)
        }
        None => {
            return Err(Error::InvalidConfig(
                "pass --config <FILE>, or --synthetic for generated input".to_string(),
            ))
        }
    };
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if let Some(out) = &common.out {
        config.out_dir = out.display().to_string();
    }
    config.normalize();
    config.validate()?;
    Ok(config)
}

fn run_one(stage: Stage, common: &CommonArgs) -> Result<()> {
    let config = resolve_config(common, stage == Stage::Synth)?;
    run_stage(stage, &config)?;
    println!("stage {stage} complete: {}", config.out_dir);
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Run {
            common,
            stage: Some(stage),
        } => run_one(*stage, common),
        Command::Run {
            common,
            stage: None,
        } => {
            let config = resolve_config(common, false)?;
            let report = run_pipeline(&config)?;
            for (code, metrics) in &report.metrics {
                println!(
                    "{code}: acc {:.3}, mae {:.3}, mae/max {:.3}",
                    metrics.acc, metrics.mae, metrics.mae_ratio
                );
            }
            println!(
                "run complete: {} artifacts, report at {}/run_report.json",
                report.artifacts.len(),
                config.out_dir
            );
            Ok(())
        }
        Command::Synth(common) => run_one(Stage::Synth, common),
        Command::Geo(common) => run_one(Stage::Geo, common),
        Command::Features(common) => run_one(Stage::Features, common),
        Command::Train(common) => run_one(Stage::Train, common),
        Command::Explain(common) => run_one(Stage::Explain, common),
        Command::Report(common) => run_one(Stage::Report, common),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
