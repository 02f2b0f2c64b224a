use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dropletpvi::config::{run_experiment, Experiment, ExperimentConfig};
use dropletpvi::{Error, Execution};

#[derive(Parser)]
#[command(name = "dropletpvi", version, about = "Droplet contact-line simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run any droplet config (custom, splitting or teapot).
    Simulate(Args),
    /// Convergence table against a fine self-reference.
    Accuracy(Args),
    /// Droplet splitting on the inclined groove.
    Splitting(Args),
    /// Droplets merging inside the teapot.
    Teapot(Args),
    /// Energy and endpoint bounds of the implicit scheme.
    Stability(Args),
    /// Pinned obstacle splitting: tau ladder and projection oracle.
    Pinned(Args),
}

#[derive(clap::Args)]
struct Args {
    #[arg(long, value_name = "FILE")]
    config: PathBuf,
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Overrides the seed of randomized experiments.
    #[arg(long)]
    seed: Option<u64>,
    /// Run batch work on the current thread only.
    #[arg(long)]
    sequential: bool,
}

impl Command {
    fn args(&self) -> &Args {
        match self {
            Command::Simulate(a)
            | Command::Accuracy(a)
            | Command::Splitting(a)
            | Command::Teapot(a)
            | Command::Stability(a)
            | Command::Pinned(a) => a,
        }
    }

    fn accepts(&self, e: &Experiment) -> bool {
        matches!(
            (self, e),
            (
                Command::Simulate(_),
                Experiment::Custom(_) | Experiment::Splitting(_) | Experiment::Teapot(_)
            ) | (Command::Accuracy(_), Experiment::Accuracy(_))
                | (Command::Splitting(_), Experiment::Splitting(_))
                | (Command::Teapot(_), Experiment::Teapot(_))
                | (Command::Stability(_), Experiment::Stability(_))
                | (Command::Pinned(_), Experiment::Pinned(_))
        )
    }
}

fn exit_code(e: &Error) -> ExitCode {
    ExitCode::from(if e.is_validation() { 2 } else { 3 })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let args = cli.command.args();
    let mut config = match ExperimentConfig::load(&args.config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_code(&e);
        }
    };
    if !cli.command.accepts(&config.experiment) {
        let e = Error::Schema(format!(
            "config describes a {} experiment, which this subcommand does not run",
            config.experiment.name()
        ));
        eprintln!("error: {e}");
        return exit_code(&e);
    }
    if let Some(seed) = args.seed {
        config.set_seed(seed);
    }
    let Some(out) = args.out.clone().or_else(|| config.output_dir.clone()) else {
        let e = Error::Schema("no output directory: pass --out or set output_dir".into());
        eprintln!("error: {e}");
        return exit_code(&e);
    };
    let exec = if args.sequential {
        Execution::Sequential
    } else {
        Execution::default()
    };
    match run_experiment(&config, &out, exec) {
        Ok(files) => {
            for f in files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(f) => {
            for p in &f.written {
                println!("{}", p.display());
            }
            eprintln!("error: {}", f.error);
            exit_code(&f.error)
        }
    }
}
