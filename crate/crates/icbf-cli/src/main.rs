use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use icbf_cli::config::{parse_config, RunConfig};
use icbf_cli::runner::{run, RunError, VariantOutcome};

const EXIT_CONFIG: u8 = 1;
const EXIT_HALT: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser)]
#[command(name = "icbf-cli", about = "Safety-filtered controller simulation runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the configured controller variants and write CSVs.
    Run { config: PathBuf },
    /// Run the built-in diagnostic suite.
    Selftest {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print the default config in parseable form.
    PrintDefaults,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config } => {
            let cfg = match parse_config(&config) {
                Ok(cfg) => cfg,
                Err(e) => {
                    eprintln!("config error: {e}");
                    return ExitCode::from(EXIT_CONFIG);
                }
            };
            match run(&cfg) {
                Ok(summary) => {
                    print!("{}", summary.render());
                    if summary.any_halted() {
                        for v in &summary.variants {
                            if let VariantOutcome::Halted { reason } = &v.outcome {
                                eprintln!("{} halted: {reason}", v.variant.name());
                            }
                        }
                        ExitCode::from(EXIT_HALT)
                    } else {
                        ExitCode::SUCCESS
                    }
                }
                Err(RunError::Config(message)) => {
                    eprintln!("config error: {message}");
                    ExitCode::from(EXIT_CONFIG)
                }
                Err(RunError::Io(e)) => {
                    eprintln!("i/o error: {e}");
                    ExitCode::from(EXIT_IO)
                }
            }
        }
        Command::Selftest { seed } => {
            let report = icbf::selfcheck::run_selfcheck(seed);
            for r in &report.results {
                println!("{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
            }
            if report.passed() {
                println!("selftest passed (seed {seed})");
                ExitCode::SUCCESS
            } else {
                eprintln!("selftest failed (seed {seed})");
                ExitCode::from(EXIT_HALT)
            }
        }
        Command::PrintDefaults => {
            print!("{}", RunConfig::render_defaults());
            ExitCode::SUCCESS
        }
    }
}
