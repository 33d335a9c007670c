//! Command-line entry point: prepare, run, compute, report and validate.
//!
//! Exit codes: 0 success, 1 partial failure (no cell produced metrics, or a
//! meter failed), 2 invalid input or usage.

mod commands;
mod config;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::{parse_enum, CliConfig, Overrides, RunSection};

use crate::domain::{GqiEnergyMode, NormalizationScope, SiAggregation};
use crate::error::Error;

pub const EXIT_OK: u8 = 0;
pub const EXIT_PARTIAL: u8 = 1;
pub const EXIT_INVALID: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "carbonbench", version, about = "Carbon and quality metrics for batched code generation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Turn a JSONL task dataset into runnable modules.
    Prepare {
        /// JSONL dataset; falls back to `dataset` in the config.
        dataset: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Execute generation batches under a meter and write emission logs.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Print the plan without executing anything.
        #[arg(long)]
        dry_run: bool,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Compute every metric for the logged cells.
    Compute {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Render rankings and tables from a metrics artifact.
    Report {
        /// Metrics artifact written by `compute`.
        #[arg(long)]
        artifact: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// csv, json or markdown; repeat or comma-separate.
        #[arg(long, value_delimiter = ',')]
        format: Vec<String>,
        /// Also write SVG bar charts with their data.
        #[arg(long)]
        charts: bool,
    },
    /// Schema-check logs, coverage files, datasets and configs.
    Validate {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct OverrideArgs {
    #[arg(long)]
    pub grid_intensity: Option<f64>,
    #[arg(long)]
    pub runs_per_batch: Option<u32>,
    /// Comma-separated β list.
    #[arg(long, value_delimiter = ',')]
    pub betas: Option<Vec<f64>>,
    /// raw_energy_kwh or normalized_efficiency.
    #[arg(long, value_parser = parse_enum::<GqiEnergyMode>)]
    pub gqi_mode: Option<GqiEnergyMode>,
    /// mean_over_primary_metrics or per_metric.
    #[arg(long, value_parser = parse_enum::<SiAggregation>)]
    pub si_aggregation: Option<SiAggregation>,
    /// all_cells or per_prompt_variant.
    #[arg(long, value_parser = parse_enum::<NormalizationScope>)]
    pub norm_scope: Option<NormalizationScope>,
}

impl From<OverrideArgs> for Overrides {
    fn from(a: OverrideArgs) -> Self {
        Overrides {
            grid_intensity: a.grid_intensity,
            runs_per_batch: a.runs_per_batch,
            betas: a.betas,
            gqi_mode: a.gqi_mode,
            si_aggregation: a.si_aggregation,
            norm_scope: a.norm_scope,
        }
    }
}

pub fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Meter(_) | Error::UndefinedMetric { .. } => EXIT_PARTIAL,
        Error::Io { source, .. } if source.kind() != std::io::ErrorKind::NotFound => EXIT_PARTIAL,
        _ => EXIT_INVALID,
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
        }
    };
    match commands::dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
