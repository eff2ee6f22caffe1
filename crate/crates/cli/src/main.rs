//! `locsim`: scenario validation, mobility traces, single runs, CMR sweeps
//! and sweep reports.

mod commands;
mod output;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "locsim", version, about = "Location-management simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a `#mobtrace v1` file from a synthetic mobility model.
    GenerateMobility(GenerateArgs),
    /// Run one scenario and write its ledger as CSV.
    Simulate(SimulateArgs),
    /// Run every scheme at every cmr and seed.
    Sweep(SweepArgs),
    /// Check a scenario file and print one line per check.
    Validate(ValidateArgs),
    /// Aggregate run or sweep CSVs into mean±std per scheme and cmr.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long)]
    model: String,
    #[arg(long)]
    nodes: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Seconds of simulated movement.
    #[arg(long, default_value_t = 600.0)]
    duration: f64,
    /// Topology whose grid sizes the area and counts crossings.
    #[arg(long, default_value = "canonical")]
    topology: String,
    #[arg(long)]
    width: Option<f64>,
    #[arg(long)]
    height: Option<f64>,
    #[arg(long)]
    min_speed: Option<f64>,
    #[arg(long)]
    max_speed: Option<f64>,
    #[arg(long)]
    pause_time: Option<f64>,
    #[arg(long)]
    step_time: Option<f64>,
    #[arg(long)]
    gm_alpha: Option<f64>,
    #[arg(long)]
    group_size: Option<usize>,
    /// Any other model parameter as `key=value`.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    params: Vec<String>,
    /// Also write the zone crossings as a `#zonetrace v1` file.
    #[arg(long)]
    zones: Option<PathBuf>,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    scenario: PathBuf,
    /// Overrides the scenario's scheme.
    #[arg(long)]
    scheme: Option<String>,
    /// Overrides `[run] output`; stdout when neither is set.
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Check every directory invariant after each event.
    #[arg(long)]
    check_invariants: bool,
}

#[derive(Args, Debug)]
struct SweepArgs {
    scenario: PathBuf,
    /// Comma-separated cmr values.
    #[arg(long, value_delimiter = ',', required = true)]
    cmr: Vec<f64>,
    /// Comma-separated scheme names.
    #[arg(long, value_delimiter = ',', default_value = "hlr,ws-hlr,hier,ws-hier")]
    schemes: Vec<String>,
    /// Seeds as a list (`1,2,5`) or range (`1-10`); defaults to the scenario seed.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long, short)]
    out: PathBuf,
    /// Whitespace-separated per-cell means for external plotting.
    #[arg(long)]
    plot_data: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    scenario: PathBuf,
}

#[derive(Args, Debug)]
struct ReportArgs {
    #[arg(required = true)]
    inputs: Vec<PathBuf>,
    #[arg(long, short)]
    out: Option<PathBuf>,
}

/// Failure classes mapped onto exit codes.
#[derive(Debug)]
pub enum Failure {
    /// A validation report listed failures.
    Checks,
    /// Bad arguments or configuration.
    Usage(anyhow::Error),
    /// The run stopped on an inconsistent directory state.
    Consistency(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Checks => 1,
            Failure::Usage(_) => 2,
            Failure::Consistency(_) => 3,
        }
    }
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Usage(e.into())
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::GenerateMobility(a) => commands::generate_mobility(a),
        Command::Simulate(a) => commands::simulate(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Validate(a) => commands::validate(a),
        Command::Report(a) => report::run(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Failure::Checks => {}
                Failure::Usage(e) => eprintln!("error: {e:#}"),
                Failure::Consistency(e) => eprintln!("consistency abort: {e:#}"),
            }
            ExitCode::from(f.code())
        }
    }
}
