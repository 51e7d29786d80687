mod config;
mod experiments;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::Kind;

#[derive(Parser)]
#[command(name = "chainfluct", version, about = "Equilibrium fluctuation experiments for the anharmonic chain with conservative noise")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    /// TOML experiment config (see docs/config-schema.md).
    #[arg(long)]
    config: PathBuf,
    /// Overrides `seed` from the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Gibbs potential, means, covariance, linear coefficients and mode rotation.
    Thermo(RunArgs),
    /// One equilibrium-started trajectory, dumped as `t,site,p,r,e`.
    Simulate(RunArgs),
    /// Mode series of an equilibrium ensemble with fitted frequencies.
    Modes(RunArgs),
    /// Predicted mode covariances of the linearized Euler system.
    Euler(RunArgs),
    /// Spectral gap of the microcanonical noise for each K.
    Gap(RunArgs),
    /// Microcanonical versus canonical expectations over n.
    Ensembles(RunArgs),
    /// Space-time variance of the Boltzmann-Gibbs residual over N.
    BgResidual(RunArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, args) = match cli.command {
        Command::Thermo(a) => (Kind::Thermo, a),
        Command::Simulate(a) => (Kind::Simulate, a),
        Command::Modes(a) => (Kind::Modes, a),
        Command::Euler(a) => (Kind::Euler, a),
        Command::Gap(a) => (Kind::Gap, a),
        Command::Ensembles(a) => (Kind::Ensembles, a),
        Command::BgResidual(a) => (Kind::BgResidual, a),
    };
    let cfg = match config::load(&args.config, kind, args.seed, args.out) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    if let Some(t) = cfg.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    match experiments::run(&cfg) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
