//! Command-line driver for the soil classification study, the oracle
//! imputation study and their explanations.
//!
//! Every command writes its artifacts plus a `manifest.json` recording the
//! resolved settings, input checksums and output checksums; `replay` re-runs
//! a manifest and fails unless every artifact comes out byte-identical.

pub mod commands;
pub mod config;
pub mod manifest;
pub mod metrics;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use commands::{cmd_explain, cmd_generate, cmd_impute, cmd_soil_demo, replay, ImputeInputs};
use config::{resolve, Overrides, Settings, SEED_ENV};
use manifest::RunManifest;

#[derive(Debug, Parser)]
#[command(name = "geoinfer", version, about = "Kernel posterior inference for geotechnical tables")]
pub struct Cli {
    /// JSON file with default settings; flags take precedence
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Print a machine-readable summary to stdout
    #[arg(long, global = true)]
    pub json: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Classify the built-in N/Vs fixture and draw its charts
    SoilDemo {
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Impute missing targets of a test table given a training table
    Impute {
        #[arg(long)]
        train: PathBuf,
        #[arg(long)]
        test: PathBuf,
        /// JSON list of {name, role, units}
        #[arg(long)]
        schema: PathBuf,
        /// Fully observed test table for RMSE reporting
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Shapley attribution for every target of an impute run
    Explain {
        /// Output directory of an impute run
        #[arg(long)]
        run: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Write a Gaussian oracle benchmark (train, test, truth, schema)
    Generate {
        #[arg(long, default_value_t = 500)]
        n_train: usize,
        #[arg(long, default_value_t = 40)]
        n_test: usize,
        #[arg(long, default_value_t = 0.5)]
        missing_rate: f64,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Re-run a recorded manifest and verify identical artifacts
    Replay {
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Serialize)]
pub struct Summary {
    pub out_dir: PathBuf,
    pub manifest: RunManifest,
}

fn settings_for(cli: &Cli, overrides: &Overrides) -> anyhow::Result<Settings> {
    let file = cli.config.as_deref().map(Overrides::from_file).transpose()?;
    let env = std::env::var(SEED_ENV).ok();
    resolve(overrides, file.as_ref(), env.as_deref())
}

pub fn run(cli: &Cli) -> anyhow::Result<Summary> {
    let (out, manifest) = match &cli.command {
        Command::SoilDemo { out, overrides } => (out, cmd_soil_demo(out, &settings_for(cli, overrides)?)?),
        Command::Impute { train, test, schema, truth, out, overrides } => {
            let inputs = ImputeInputs { train, test, schema, truth: truth.as_deref() };
            (out, cmd_impute(&inputs, &settings_for(cli, overrides)?, out)?)
        }
        Command::Explain { run, out, overrides } => (out, cmd_explain(run, &settings_for(cli, overrides)?, out)?),
        Command::Generate { n_train, n_test, missing_rate, out, overrides } => (
            out,
            cmd_generate(*n_train, *n_test, *missing_rate, &settings_for(cli, overrides)?, out)?,
        ),
        Command::Replay { manifest, out } => (out, replay(manifest, out)?),
    };
    Ok(Summary { out_dir: Path::new(out).to_path_buf(), manifest })
}
