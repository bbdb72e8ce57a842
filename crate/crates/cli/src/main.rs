use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use novikov_lab::{run_experiment, Command as RunCommand, ExperimentConfig, EXIT_INVALID_CONFIG};

#[derive(Parser)]
#[command(
    name = "novikov-lab",
    about = "Peakon dynamics, conservative Novikov solvers in characteristic coordinates, and transport-metric experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: CliCommand,
}

#[derive(Subcommand)]
enum CliCommand {
    /// Integrate the multi-peakon ODE system
    Peakons(RunArgs),
    /// Evolve the semi-linear characteristic-coordinate system
    Semilinear(RunArgs),
    /// Evolve smooth data directly in x-coordinates
    Smooth(RunArgs),
    /// Seeded metric-comparison study over random profile pairs
    Metric(RunArgs),
    /// Camassa-Holm conservation and tangent-growth study
    Ch(RunArgs),
    /// Two-peakon collision with localized energy tracking
    Concentration(RunArgs),
}

#[derive(clap::Args)]
struct RunArgs {
    /// Experiment configuration (JSON)
    #[arg(long)]
    config: PathBuf,
    /// Override the config's output directory
    #[arg(long)]
    out: Option<PathBuf>,
}

fn expected(cmd: &CliCommand) -> RunCommand {
    match cmd {
        CliCommand::Peakons(_) => RunCommand::Peakons,
        CliCommand::Semilinear(_) => RunCommand::Semilinear,
        CliCommand::Smooth(_) => RunCommand::Smooth,
        CliCommand::Metric(_) => RunCommand::Metric,
        CliCommand::Ch(_) => RunCommand::Ch,
        CliCommand::Concentration(_) => RunCommand::Concentration,
    }
}

fn args(cmd: &CliCommand) -> &RunArgs {
    match cmd {
        CliCommand::Peakons(a)
        | CliCommand::Semilinear(a)
        | CliCommand::Smooth(a)
        | CliCommand::Metric(a)
        | CliCommand::Ch(a)
        | CliCommand::Concentration(a) => a,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let run_args = args(&cli.command);

    let json = match std::fs::read_to_string(&run_args.config) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("cannot read config {}: {e}", run_args.config.display());
            return ExitCode::from(EXIT_INVALID_CONFIG as u8);
        }
    };
    let cfg = match ExperimentConfig::from_json(&json) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    if cfg.command != expected(&cli.command) {
        eprintln!(
            "config command does not match the invoked subcommand; fix one of them"
        );
        return ExitCode::from(EXIT_INVALID_CONFIG as u8);
    }

    match run_experiment(&cfg, run_args.out.as_deref()) {
        Ok(summary) => {
            println!("wrote {} artifact files", summary.files.len() + 2);
            for e in summary.events.iter().take(1) {
                println!("first event: t = {:.6}, Y = {:.6} ({})", e.t, e.y, e.kind);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
