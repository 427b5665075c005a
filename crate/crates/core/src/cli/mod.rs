//! Command-line front end: one JSON config per run, `--set` overrides, and an
//! output directory holding the resolved config, results and a hash manifest.
//!
//! Exit codes: 0 success, 1 numerical failure (recorded in `failure.json`),
//! 2 usage or configuration error.

mod commands;
mod config;
mod output;

use std::ffi::OsString;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

pub use commands::{cmd_flow, cmd_lambda, cmd_scan, cmd_variations};
pub use config::{
    ExperimentConfig, FlowSection, GridSpec, LambdaSection, ScanSection, StabilitySection,
    VariationsSection,
};
pub use output::{OutputDir, MANIFEST, RESOLVED_CONFIG};

use crate::error::LabError;

/// Environment variable naming the external `report` renderer.
pub const REPORT_ENV: &str = "LAMBDA_LAB_REPORT";
/// Renderer used when [`REPORT_ENV`] is unset.
pub const DEFAULT_REPORT: &str = "lambda-lab-report";

pub const EXIT_NUMERICAL: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "lambda-lab",
    version,
    about = "Perelman's λ-functional on discretized flat tori"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug)]
pub struct RunArgs {
    /// JSON experiment config.
    #[arg(long)]
    pub config: PathBuf,
    /// Override a config value by dotted path, e.g. `--set grid.res=24`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// λ, the low spectrum of −4Δ + R, and statistics of the minimizer f.
    Lambda(RunArgs),
    /// First, second and third variations of λ by every available method.
    Variations(RunArgs),
    /// Ricci–DeTurck flow with monitor rows, snapshots and optional stability runs.
    Flow(RunArgs),
    /// Seeded neighborhood scans (`lojasiewicz`, `theorem_a`, `bound`).
    Scan(RunArgs),
    /// Render figures with the external report tool; arguments pass through.
    Report {
        #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
        args: Vec<OsString>,
    },
}

#[derive(Serialize)]
struct Failure {
    command: &'static str,
    error: String,
}

/// Parses `args` and runs the command.
pub fn main_with<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    crate::par::configure_threads(None);
    let (name, run): (&'static str, &RunArgs) = match &cli.command {
        Command::Lambda(a) => ("lambda", a),
        Command::Variations(a) => ("variations", a),
        Command::Flow(a) => ("flow", a),
        Command::Scan(a) => ("scan", a),
        Command::Report { args } => return report(args),
    };
    let usage = |e: LabError| {
        eprintln!("lambda-lab {name}: {e}");
        ExitCode::from(EXIT_USAGE)
    };
    let cfg = match ExperimentConfig::load(&run.config, &run.overrides) {
        Ok(c) => c,
        Err(e) => return usage(e),
    };
    let setup = || -> crate::Result<_> {
        let grid = cfg.grid.build()?;
        let g = cfg.build_metric(&grid)?;
        let out = OutputDir::create(&cfg.output)?;
        out.write_json(RESOLVED_CONFIG, &cfg)?;
        Ok((g, out))
    };
    let (g, out) = match setup() {
        Ok(v) => v,
        Err(e) => return usage(e),
    };
    let result = match &cli.command {
        Command::Lambda(_) => cmd_lambda(&cfg, &g, &out),
        Command::Variations(_) => cmd_variations(&cfg, &g, &out),
        Command::Flow(_) => cmd_flow(&cfg, &g, &out),
        Command::Scan(_) => cmd_scan(&cfg, &out),
        Command::Report { .. } => unreachable!(),
    };
    let code = match &result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is_usage() => return usage(result.unwrap_err()),
        Err(e) => {
            eprintln!("lambda-lab {name}: numerical failure: {e}");
            if let Err(w) = out.write_json(
                "failure.json",
                &Failure {
                    command: name,
                    error: e.to_string(),
                },
            ) {
                eprintln!("lambda-lab {name}: cannot record failure: {w}");
            }
            ExitCode::from(EXIT_NUMERICAL)
        }
    };
    if let Err(e) = out.finish(name, result.is_ok()) {
        eprintln!("lambda-lab {name}: cannot write manifest: {e}");
        return ExitCode::from(EXIT_USAGE);
    }
    code
}

/// Hands `args` to the external renderer and forwards its exit status.
fn report(args: &[OsString]) -> ExitCode {
    let program = std::env::var_os(REPORT_ENV).unwrap_or_else(|| DEFAULT_REPORT.into());
    match std::process::Command::new(&program).args(args).status() {
        Ok(status) => ExitCode::from(
            status
                .code()
                .map_or(EXIT_NUMERICAL, |c| c.clamp(0, 255) as u8),
        ),
        Err(e) => {
            eprintln!(
                "lambda-lab report: cannot run `{}` ({e}); install the report tool or set {REPORT_ENV}",
                program.to_string_lossy()
            );
            ExitCode::from(EXIT_USAGE)
        }
    }
}
