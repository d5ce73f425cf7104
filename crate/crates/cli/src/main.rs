use std::process::ExitCode;

use clap::{Parser, Subcommand};
use edsimo_cli::{execute, CommonArgs, ExperimentConfig, Scenario};

#[derive(Parser)]
#[command(
    name = "edsimo",
    version,
    about = "Energy-detection constellation design and evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize the power allocation with the alternating algorithm.
    Optimize(CommonArgs),
    /// Error probability of a given (or ramp) constellation at optimal thresholds.
    Sep(CommonArgs),
    /// Monte Carlo symbol error rate of the optimized (or given) constellation.
    Simulate(CommonArgs),
    /// Exhaustive grid search over power allocations.
    BruteForce(CommonArgs),
    /// Error probability versus antenna count.
    SweepN(CommonArgs),
    /// Error probability versus constellation size.
    SweepM(CommonArgs),
    /// Error probability versus SNR.
    SweepSnr(CommonArgs),
    /// Compare simulated energies with the Gaussian approximation.
    Gaussianity(CommonArgs),
    /// Random convex-combination check of the error probability.
    Convexity(CommonArgs),
    /// Run the cross-check bundle; nonzero exit if any check fails.
    Validate(CommonArgs),
}

impl Command {
    fn split(self) -> (Scenario, CommonArgs) {
        match self {
            Command::Optimize(a) => (Scenario::Optimize, a),
            Command::Sep(a) => (Scenario::Sep, a),
            Command::Simulate(a) => (Scenario::Simulate, a),
            Command::BruteForce(a) => (Scenario::BruteForce, a),
            Command::SweepN(a) => (Scenario::SweepN, a),
            Command::SweepM(a) => (Scenario::SweepM, a),
            Command::SweepSnr(a) => (Scenario::SweepSnr, a),
            Command::Gaussianity(a) => (Scenario::Gaussianity, a),
            Command::Convexity(a) => (Scenario::Convexity, a),
            Command::Validate(a) => (Scenario::Validate, a),
        }
    }
}

fn main() -> ExitCode {
    let (scenario, args) = Cli::parse().command.split();
    let result = ExperimentConfig::resolve(scenario, args).and_then(|c| execute(&c));
    match result {
        Ok(failures) if failures.is_empty() => ExitCode::SUCCESS,
        Ok(failures) => {
            for f in &failures {
                eprintln!("FAILED {f}");
            }
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
