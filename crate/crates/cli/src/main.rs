//! Batch driver for the stage-construction workbench.
//!
//! Exit codes: 0 all invariants pass, 1 an invariant failed (report
//! written), 2 config or trace parse trouble.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use stagegraph_core::config::RunConfig;
use stagegraph_core::driver::{self, DriverError};
use stagegraph_core::report::{all_pass, render};

#[derive(Parser)]
#[command(
    name = "stagegraph",
    version,
    about = "Run and verify stage-based graph constructions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a construction from a config file and write its artifacts.
    Run {
        /// JSON run config.
        #[arg(long)]
        config: PathBuf,
        /// Output directory for trace, graph dumps, and the report.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Override the config's stage horizon.
        #[arg(long)]
        horizon: Option<usize>,
        /// Override the per-stage search budget.
        #[arg(long)]
        budget: Option<u64>,
        /// Override the pair-size cap.
        #[arg(long = "n-cap")]
        n_cap: Option<usize>,
    },
    /// Re-run an invariant suite against a stored trace.
    Verify {
        #[arg(long)]
        trace: PathBuf,
        /// Suite name; `all` selects everything the construction offers.
        #[arg(long, default_value = "all")]
        suite: String,
    },
    /// Render a stored graph dump as DOT.
    DumpDot {
        #[arg(long)]
        graph: PathBuf,
        /// Write here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            let code = match err {
                DriverError::Io { .. } => 2,
                DriverError::Config(_) | DriverError::Json(_) => 2,
                DriverError::EmptyTrace | DriverError::UnknownSuite { .. } => 2,
                _ => 1,
            };
            ExitCode::from(code)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, DriverError> {
    match cli.command {
        Command::Run {
            config,
            out,
            horizon,
            budget,
            n_cap,
        } => {
            let content = fs::read_to_string(&config).map_err(|source| DriverError::Io {
                path: config.clone(),
                source,
            })?;
            let mut cfg: RunConfig = serde_json::from_str(&content)?;
            if let Some(h) = horizon {
                cfg.horizon = h;
            }
            if let Some(b) = budget {
                cfg.budget = Some(b);
            }
            if let Some(c) = n_cap {
                cfg.n_cap = Some(c);
            }
            let report = driver::run_config(&cfg, &out)?;
            print!("{}", render(&report.checks));
            if report.all_pass() {
                println!(
                    "ok: {} checks, artifacts in {}",
                    report.checks.len(),
                    out.display()
                );
                Ok(ExitCode::SUCCESS)
            } else {
                println!("invariant violations; report in {}", out.display());
                Ok(ExitCode::from(1))
            }
        }
        Command::Verify { trace, suite } => {
            let checks = driver::verify_trace(&trace, &suite)?;
            print!("{}", render(&checks));
            if all_pass(&checks) {
                Ok(ExitCode::SUCCESS)
            } else {
                Ok(ExitCode::from(1))
            }
        }
        Command::DumpDot { graph, out } => {
            let dot = driver::dump_dot(&graph)?;
            match out {
                Some(path) => fs::write(&path, dot).map_err(|source| DriverError::Io {
                    path: path.clone(),
                    source,
                })?,
                None => print!("{dot}"),
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
