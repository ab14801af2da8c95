use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thermistor_cli::{parse_config, run, Command};

#[derive(Parser)]
#[command(name = "thermistor", version, about = "Steady thermistor solver on box domains")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Args)]
struct Common {
    /// Configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Seed for randomized probes; overrides the config value.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Sub {
    /// Solve the coupled problem once.
    Solve(Common),
    /// Run the manufactured-solution convergence study.
    Verify(Common),
    /// Sweep the forcing scale and probe contraction of the fixed-point map.
    ContractionStudy(Common),
    /// Measure Hoelder and Campanato seminorms under refinement.
    RegularityStudy(Common),
    /// Solve, then recover the magnetic field from the current.
    Reconstruct(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Sub::Solve(a) => (Command::Solve, a),
        Sub::Verify(a) => (Command::Verify, a),
        Sub::ContractionStudy(a) => (Command::ContractionStudy, a),
        Sub::RegularityStudy(a) => (Command::RegularityStudy, a),
        Sub::Reconstruct(a) => (Command::Reconstruct, a),
    };
    if let Some(t) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {}: {e}", args.config.display());
            return ExitCode::from(2);
        }
    };
    let config = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => {
            for d in &e.0 {
                eprintln!("{}: {d}", args.config.display());
            }
            return ExitCode::from(2);
        }
    };
    let seed = args.seed.unwrap_or(config.seed);
    match run(command, &config, &args.out, seed) {
        Ok(outcome) => {
            for line in &outcome.summary {
                println!("{line}");
            }
            println!("{}: {}", command.name(), if outcome.ok { "ok" } else { "FAILED" });
            if outcome.ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
