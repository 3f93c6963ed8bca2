//! `bnmix`: generate synthetic mixtures, fit them, choose `K` and score traces.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use bnmix::Result;
use clap::{Parser, Subcommand};

use crate::config::{ConfigFile, EvaluateOpts, FitOpts, GenerateOpts, SelectOpts, SummarizeOpts};

#[derive(Parser)]
#[command(
    name = "bnmix",
    version,
    about = "Mixtures of Gaussian Bayesian networks with covariate-dependent gating"
)]
struct Cli {
    /// TOML file with one section per subcommand; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Only log warnings and errors.
    #[arg(short, long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a synthetic mixture and a dataset from it.
    Generate(GenerateOpts),
    /// Run the Gibbs sampler and write its trace and a summary.
    Fit(FitOpts),
    /// Compare values of K by held-out log predictive density.
    Select(SelectOpts),
    /// Score a trace: MSHD against ground truth, LMPPD on test data, WAIC on training data.
    Evaluate(EvaluateOpts),
    /// Summarise a trace: acceptance, log-score series and edge frequencies.
    Summarize(SummarizeOpts),
}

fn run(cli: Cli) -> Result<()> {
    let file = match &cli.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::default(),
    };
    match cli.command {
        Command::Generate(o) => commands::generate_cmd(o.overlay(file.generate)),
        Command::Fit(o) => commands::fit_cmd(o.overlay(file.fit)),
        Command::Select(o) => commands::select_cmd(o.overlay(file.select)),
        Command::Evaluate(o) => commands::evaluate_cmd(o.overlay(file.evaluate)),
        Command::Summarize(o) => commands::summarize_cmd(o.overlay(file.summarize)),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
