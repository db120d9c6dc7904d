//! `macroq`: batch driver for macrostate and Kac ring experiments.
//!
//! ```text
//! macroq run <config>
//! macroq sweep <config> --param <name> --values <v1,v2,...>
//! ```
//!
//! Exit codes: 0 success, 2 invalid input, 3 numerical failure.

mod config;
mod error;
mod experiments;
mod table;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::error::{invalid, CliError, Result};
use crate::table::{write_outputs, ResultTable};

#[derive(Parser)]
#[command(name = "macroq", version, about = "Finite-size quantum macrostate experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run { config: PathBuf },
    /// Repeat the experiment over values of one numeric parameter.
    Sweep {
        config: PathBuf,
        /// `seed`, an experiment field, or `field[i]` for an array entry.
        #[arg(long)]
        param: String,
        /// Comma-separated values; empty for an empty table.
        #[arg(long, allow_hyphen_values = true)]
        values: String,
    },
}

fn workers(config: &ExperimentConfig) -> Result<usize> {
    match std::env::var("MACROQ_WORKERS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(invalid(format!("MACROQ_WORKERS must be a positive integer, got `{v}`"))),
        },
        Err(_) => Ok(config.workers.unwrap_or(1)),
    }
}

fn header(config: &ExperimentConfig, extra: &str) -> String {
    format!(
        "macroq {}\nkind = {}\n{extra}\n{}",
        env!("CARGO_PKG_VERSION"),
        config.experiment.kind(),
        config.echo()
    )
}

fn run(path: &Path) -> Result<()> {
    let start = Instant::now();
    let config = ExperimentConfig::load(path)?;
    let n_workers = workers(&config)?;
    let outcome = experiments::execute(&config)?;
    write_outputs(
        &config.output,
        &outcome.table,
        &header(&config, "command = run"),
        "run",
        start.elapsed(),
        n_workers,
    )?;
    log::info!("wrote {} rows to {}", outcome.table.rows.len(), config.output.display());
    Ok(())
}

fn parse_values(values: &str) -> Result<Vec<f64>> {
    let mut out = values
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| invalid(format!("sweep value `{s}` is not a finite number")))
        })
        .collect::<Result<Vec<f64>>>()?;
    out.sort_by(f64::total_cmp);
    Ok(out)
}

fn sweep(path: &Path, param: &str, values: &str) -> Result<()> {
    let start = Instant::now();
    let config = ExperimentConfig::load(path)?;
    let n_workers = workers(&config)?;
    let values = parse_values(values)?;
    // Resolve every point before running any, so bad names fail fast even for
    // an empty list.
    let probe = config.with_parameter(param, 0.0);
    if let Err(e @ CliError::UnknownParameter(_)) = probe {
        return Err(e);
    }
    let points = values
        .iter()
        .map(|&v| config.with_parameter(param, v))
        .collect::<Result<Vec<_>>>()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(n_workers)
        .build()
        .map_err(|e| invalid(format!("cannot start {n_workers} workers: {e}")))?;
    let summaries = pool.install(|| {
        points
            .par_iter()
            .map(|c| experiments::execute(c).map(|o| o.summary))
            .collect::<Result<Vec<_>>>()
    })?;
    let names = experiments::summary_columns(&config);
    let mut columns = vec![param];
    columns.extend(names.iter().copied());
    let mut table = ResultTable::new(&columns);
    for (v, summary) in values.iter().zip(summaries) {
        let mut row = vec![*v];
        row.extend(summary.into_iter().map(|(_, x)| x));
        table.push(row);
    }
    let list: Vec<String> = values.iter().map(|v| format!("{v:?}")).collect();
    let extra = format!("command = sweep\nparam = {param}\nvalues = [{}]", list.join(", "));
    write_outputs(&config.output, &table, &header(&config, &extra), "sweep", start.elapsed(), n_workers)?;
    log::info!("wrote {} sweep rows to {}", table.rows.len(), config.output.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { config } => run(config),
        Command::Sweep { config, param, values } => sweep(config, param, values),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("macroq: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
