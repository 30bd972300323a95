use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use wipt::harness::{emit_csv, output_path, run_analysis, run_experiment, ExperimentSpec};
use wipt::Error;

#[derive(Parser)]
#[command(name = "wipt", version, about = "Joint information and energy beamforming experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo sweep and write `<out>/<scenario>.csv`.
    Run {
        #[command(flatten)]
        spec: SpecArg,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        parallel: Option<usize>,
    },
    /// Print closed-form predictions for every sweep point as CSV.
    Analyze {
        #[command(flatten)]
        spec: SpecArg,
    },
    /// Parse and validate an experiment file.
    Validate {
        #[command(flatten)]
        spec: SpecArg,
    },
}

#[derive(Args)]
struct SpecArg {
    #[arg(long = "spec")]
    path: PathBuf,
}

fn exit_code(err: &Error) -> ExitCode {
    match err {
        Error::Config { .. } | Error::InvalidMu(_) | Error::Io { .. } => ExitCode::from(2),
        _ => ExitCode::from(3),
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run {
            spec,
            out,
            seed,
            trials,
            parallel,
        } => {
            let mut spec = ExperimentSpec::load(&spec.path)?;
            if let Some(seed) = seed {
                spec.seed = seed;
                spec.base.seed = seed;
            }
            spec.trials = trials.unwrap_or(spec.trials);
            spec.parallel = parallel.unwrap_or(spec.parallel);
            let table = run_experiment(&spec)?;
            let path = output_path(&spec, &out);
            emit_csv(&table, &path)?;
            eprintln!("wrote {} rows to {}", table.rows.len(), path.display());
        }
        Command::Analyze { spec } => {
            let spec = ExperimentSpec::load(&spec.path)?;
            print!("{}", run_analysis(&spec)?.to_csv_string());
        }
        Command::Validate { spec } => {
            let spec = ExperimentSpec::load(&spec.path)?;
            println!("{spec}");
            println!("ok");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            exit_code(&err)
        }
    }
}
