//! `stepturn`: simulate, tabulate, fit and evaluate steps-and-turns walks.
//!
//! Every output gets a JSON sidecar holding the full run record, and every
//! written file is appended to `<out>/manifest.jsonl` with its digest.

mod checks;
mod commands;
mod error;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use stepturn::Exec;

use commands::{
    CoverageArgs, CrossvalArgs, DirectfitArgs, FitArgs, ObserveArgs, OracleArgs, ReftableArgs, RscanArgs,
    SimulateArgs, SummarizeArgs,
};

#[derive(Parser)]
#[command(name = "stepturn", version, about = "Steps-and-turns random walks: simulation and ABC inference")]
struct Cli {
    /// Base seed; every stochastic task draws from a stream derived from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (1 runs sequentially). Never changes any output.
    #[arg(long, global = true, env = "STEPTURN_WORKERS")]
    workers: Option<usize>,
    /// Output directory, created if missing.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// JSON parameters for the subcommand, or a sidecar to rerun from.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Also write gnuplot scripts for plottable outputs.
    #[arg(long, global = true)]
    gnuplot: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a latent path and its regular observation.
    Simulate(SimulateArgs),
    /// Observe an existing latent path at a regular interval.
    Observe(ObserveArgs),
    /// Summary statistics of observed tracks.
    Summarize(SummarizeArgs),
    /// Build a prior-predictive reference table (sharded, resumable).
    Reftable(ReftableArgs),
    /// ABC posterior for one observation.
    Fit(FitArgs),
    /// Leave-one-out cross-validation over the reference table.
    Crossval(CrossvalArgs),
    /// Coverage diagnostics from a cross-validation report.
    Coverage(CoverageArgs),
    /// Estimation error across observation ratios R = lambda * dt.
    Rscan(RscanArgs),
    /// Conjugate fit on a path with known steps and turns.
    Directfit(DirectfitArgs),
    /// Density normalization and Monte Carlo checks.
    OracleCheck(OracleArgs),
}

pub struct Global {
    pub seed: Option<u64>,
    pub exec: Exec,
    pub out: PathBuf,
    pub config: Option<PathBuf>,
    pub gnuplot: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if cli.workers == Some(0) {
        eprintln!("error: invalid input: --workers must be >= 1");
        return ExitCode::from(1);
    }
    let g = Global {
        seed: cli.seed,
        exec: Exec::from_workers(cli.workers),
        out: cli.out,
        config: cli.config,
        gnuplot: cli.gnuplot,
    };
    let result = match cli.command {
        Command::Simulate(a) => commands::simulate(&g, a),
        Command::Observe(a) => commands::observe(&g, a),
        Command::Summarize(a) => commands::summarize(&g, a),
        Command::Reftable(a) => commands::reftable(&g, a),
        Command::Fit(a) => commands::fit(&g, a),
        Command::Crossval(a) => commands::crossval(&g, a),
        Command::Coverage(a) => commands::coverage(&g, a),
        Command::Rscan(a) => commands::rscan(&g, a),
        Command::Directfit(a) => commands::directfit(&g, a),
        Command::OracleCheck(a) => commands::oracle_check(&g, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit()
        }
    }
}
