//! Batch front end for `verity-core`: manifests in, CSV/JSON/Markdown reports out.
//!
//! Exit codes: 0 success, 1 data error (including any failed report row),
//! 2 usage or configuration error.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod report;

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use verity_core::alignment::Dimension;

use crate::commands::{cmd_compare, cmd_ibs, cmd_metrics, cmd_nfss, cmd_stats, render_nfss, CompareArgs, NfssArgs};
use crate::config::{parse_metric_list, Format, Provider, RunConfig};
use crate::error::{CliError, CliResult};
use crate::manifest::Manifest;
use crate::report::{emit, render_metrics, render_stats};

#[derive(Debug, Parser)]
#[command(name = "verity", version, about = "Image quality metrics, IBS scaling and human-alignment reports")]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Report destination (stdout when omitted).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    /// Extra IBS tables; same-named tables replace the built-in ones.
    #[arg(long, global = true)]
    pub ibs_tables: Option<PathBuf>,
    /// Worker threads for per-image work.
    #[arg(long, global = true, env = "VERITY_JOBS")]
    pub jobs: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Per-image and per-model metric report for a manifest.
    Metrics {
        #[arg(long)]
        manifest: PathBuf,
        /// Comma-separated metric names.
        #[arg(long)]
        metrics: Option<String>,
        #[arg(long, value_enum)]
        provider: Option<Provider>,
    },
    /// Map one raw metric value onto the 0-5 scale.
    Ibs {
        metric: String,
        #[arg(allow_negative_numbers = true)]
        value: f64,
    },
    /// Hue, saturation, brightness, vibrancy and entropy per image and model.
    Stats {
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Compare scaled metric scores with human mean opinion scores.
    Compare {
        /// CSV with `model,metric,raw[,scaled]`.
        metrics_csv: PathBuf,
        /// CSV with `model,dimension,mean_score`; the bundled table when omitted.
        #[arg(long)]
        mos: Option<PathBuf>,
        #[arg(long, value_parser = parse_dimension)]
        dimension: Dimension,
        /// Use the `scaled` column where present instead of the IBS table.
        #[arg(long)]
        scaled_override: bool,
    },
    /// NFSS and its components for one reference/test pair.
    Nfss {
        reference: PathBuf,
        test: PathBuf,
        #[arg(long)]
        ref_features: Option<PathBuf>,
        #[arg(long)]
        test_features: Option<PathBuf>,
    },
}

fn parse_dimension(s: &str) -> Result<Dimension, String> {
    s.parse().map_err(|e: verity_core::Error| e.to_string())
}

fn resolve_config(cli: &Cli) -> CliResult<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(f) = cli.format {
        cfg.format = f;
    }
    if let Some(t) = &cli.ibs_tables {
        cfg.ibs_tables = Some(t.clone());
    }
    if cli.jobs.is_some() {
        cfg.jobs = cli.jobs;
    }
    if let Command::Metrics { metrics, provider, .. } = &cli.command {
        if let Some(list) = metrics {
            cfg.metrics = parse_metric_list(list)?;
        }
        if let Some(p) = provider {
            cfg.provider = *p;
        }
    }
    cfg.finalize()
}

fn failed_rows(n: usize) -> CliResult<()> {
    if n == 0 {
        Ok(())
    } else {
        Err(CliError::data(format!("{n} report rows carry errors")))
    }
}

/// Execute a parsed command line.
pub fn run(cli: &Cli) -> CliResult<()> {
    let cfg = resolve_config(cli)?;
    let tables = cfg.tables()?;
    let out = cli.out.as_deref();
    match &cli.command {
        Command::Metrics { manifest, .. } => {
            let manifest = Manifest::load(manifest)?;
            let outcome = cmd_metrics(&manifest, &cfg, &tables)?;
            emit(&render_metrics(&outcome.rows, cfg.format)?, out)?;
            failed_rows(outcome.failed)
        }
        Command::Stats { manifest } => {
            let manifest = Manifest::load(manifest)?;
            let outcome = cmd_stats(&manifest, &cfg)?;
            emit(&render_stats(&outcome.rows, cfg.format)?, out)?;
            failed_rows(outcome.failed)
        }
        Command::Ibs { metric, value } => {
            let mut line = cmd_ibs(metric, *value, &tables)?;
            line.push('\n');
            emit(&line, out)
        }
        Command::Compare {
            metrics_csv,
            mos,
            dimension,
            scaled_override,
        } => {
            let args = CompareArgs {
                metrics_csv,
                mos_csv: mos.as_deref(),
                dimension: *dimension,
                use_overrides: *scaled_override,
            };
            emit(&cmd_compare(&args, &cfg, &tables, cfg.format)?, out)
        }
        Command::Nfss {
            reference,
            test,
            ref_features,
            test_features,
        } => {
            let args = NfssArgs {
                reference,
                test,
                ref_features: ref_features.as_deref(),
                test_features: test_features.as_deref(),
            };
            emit(&render_nfss(&cmd_nfss(&args, &cfg)?, cfg.format)?, out)
        }
    }
}
