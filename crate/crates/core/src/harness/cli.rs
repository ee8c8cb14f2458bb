//! Command-line front end shared by the binary and the tests.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use super::{run, ExperimentConfig, HarnessError, Kind, Overrides, Params, SeedList};

#[derive(Debug, Parser)]
#[command(name = "parshare", version, about = "Run information-dynamics and pursuit experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Convergence-time bound as a function of the centralization coefficient.
    BoundsSweep(RunArgs),
    /// Simulate one homogeneous information process.
    MailpSim(RunArgs),
    /// Check simulated convergence against the closed-form bounds.
    MailpVerify(RunArgs),
    /// Run the stochastic-game transform property suite.
    PosgProps(RunArgs),
    /// Train tabular pursuit policies.
    PursuitTrain(RunArgs),
    /// Evaluate a saved pursuit policy.
    PursuitEval(RunArgs),
    /// Uniformly random pursuit baseline.
    PursuitRandom(RunArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// TOML configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seeds: `a..b`, `a..=b`, `a` or `a,b,c`.
    #[arg(long)]
    seeds: Option<String>,
    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
}

impl Command {
    fn split(self) -> (Kind, RunArgs) {
        match self {
            Command::BoundsSweep(a) => (Kind::BoundsSweep, a),
            Command::MailpSim(a) => (Kind::MailpSim, a),
            Command::MailpVerify(a) => (Kind::MailpVerify, a),
            Command::PosgProps(a) => (Kind::PosgProps, a),
            Command::PursuitTrain(a) => (Kind::PursuitTrain, a),
            Command::PursuitEval(a) => (Kind::PursuitEval, a),
            Command::PursuitRandom(a) => (Kind::PursuitRandom, a),
        }
    }
}

fn configure(kind: Kind, args: RunArgs) -> Result<ExperimentConfig, HarnessError> {
    let mut config = match &args.config {
        Some(path) => ExperimentConfig::load(path, Some(kind)).map_err(|e| match e {
            HarnessError::Io { path, source } => {
                HarnessError::Config(format!("cannot read {}: {source}", path.display()))
            }
            other => other,
        })?,
        None => ExperimentConfig::new(Params::default_for(kind)),
    };
    let seeds = args.seeds.as_deref().map(str::parse::<SeedList>).transpose()?;
    config.apply(Overrides {
        out: args.out,
        seeds,
        jobs: args.jobs,
    })?;
    Ok(config)
}

/// Parses `args` (including the program name), runs the experiment and
/// returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let (kind, args) = cli.command.split();
    let result = configure(kind, args).and_then(|config| run(&config));
    match result {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
