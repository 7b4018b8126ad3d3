use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cising::acceptance::{run_criterion, Suite, DEFAULT_SEED};
use cising::config::ExperimentConfig;
use cising::error::Error;
use cising::experiment;

#[derive(Parser)]
#[command(name = "cising", about = "Continuum Ising and spin boson Monte Carlo lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run { config: PathBuf },
    /// Run an acceptance suite (`fast` or `full`).
    Check {
        suite: String,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Run only these criteria.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u32>,
    },
    /// Kernel families accepted in the `[kernel]` block.
    Kernels {
        #[command(subcommand)]
        action: KernelsAction,
    },
    Version,
}

#[derive(Subcommand)]
enum KernelsAction {
    List,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. } | Error::Usage(_) | Error::InvalidModel(_) | Error::Kernel(_) => 2,
        Error::Numerical(_) => 3,
        Error::Io(_) => 1,
    }
}

fn fail(e: Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(exit_code(&e))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config } => {
            let cfg = match ExperimentConfig::load(&config) {
                Ok(c) => c,
                Err(e) => return fail(e),
            };
            match experiment::run(&cfg) {
                Ok(out) => {
                    for f in &out.manifest.files {
                        println!("{}  {}", f.sha256, out.output_dir.join(&f.path).display());
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
        Command::Check { suite, seed, only } => {
            let suite: Suite = match suite.parse() {
                Ok(s) => s,
                Err(e) => return fail(e),
            };
            let ids: Vec<u32> = if only.is_empty() {
                suite.criteria().to_vec()
            } else {
                only
            };
            let mut all_passed = true;
            for id in ids {
                match run_criterion(id, seed) {
                    Ok(r) => {
                        all_passed &= r.passed;
                        println!("{}", serde_json::to_string(&r).expect("serializable"));
                        eprintln!(
                            "criterion {:>2}: {} ({:.1} s)",
                            r.id,
                            if r.passed { "pass" } else { "FAIL" },
                            r.seconds
                        );
                    }
                    Err(e) => return fail(e),
                }
            }
            if all_passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(4)
            }
        }
        Command::Kernels {
            action: KernelsAction::List,
        } => {
            println!("modes     g(t) = sum_j weight_j exp(-freq_j |t|)   fields: modes = [{{ weight, freq }}, ...]");
            println!("powerlaw  g(t) = S_(d-1) int_0^K r^(d-1-2 delta) exp(-|t| r) dr   fields: dimension, delta, cutoff");
            println!("poly      g(t) = C / (1 + t^2)   fields: amplitude");
            ExitCode::SUCCESS
        }
        Command::Version => {
            println!("cising {}", env!("CARGO_PKG_VERSION"));
            ExitCode::SUCCESS
        }
    }
}
