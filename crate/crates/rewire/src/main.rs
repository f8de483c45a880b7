use clap::{Parser, Subcommand};
use rewire::config::ExperimentConfig;
use rewire::error::Error;
use rewire::experiment::{emit_plot_data, run_sweep, run_training, run_transfer};
use rewire::theory::{run_suite, SUITES};
use std::path::PathBuf;
use std::process::ExitCode;

const EXIT_CONFIG: u8 = 1;
const EXIT_NUMERICAL: u8 = 2;
const EXIT_CHECK_FAILED: u8 = 3;

#[derive(Parser)]
#[command(
    name = "rewire",
    about = "Train networks that stay sparse at every moment of training",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model from a plain-text key-value config file
    Train { config: PathBuf },
    /// Run one training per connectivity grid point and write a summary table
    Sweep { config: PathBuf },
    /// Train with labels re-shuffled every epoch, recording weight and
    /// activity correlations between subsequent epochs
    Transfer { config: PathBuf },
    /// Run the stationary-distribution verification suites
    BenchTheory {
        /// One of: langevin, counting, replenish, architecture, all
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long, default_value_t = 20_260_101)]
        seed: u64,
    },
    /// Convert metrics, correlation, or sweep tables into per-figure data files
    EmitPlots {
        /// Input tables (schema is detected from the header)
        #[arg(required = true)]
        metrics: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Smoothing window for relative rewiring counts
        #[arg(long, default_value_t = 100)]
        boxcar: usize,
    },
}

fn load_config(path: &PathBuf) -> Result<ExperimentConfig, Error> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    ExperimentConfig::from_text(&text)
}

fn exit_for(err: &Error) -> u8 {
    match err {
        Error::Numerical(_) => EXIT_NUMERICAL,
        _ => EXIT_CONFIG,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Train { config } => match load_config(&config).and_then(|c| run_training(&c)) {
            Ok(out) => {
                println!("metrics: {}", out.metrics_path.display());
                println!("final_test_accuracy: {:.4}", out.final_test_accuracy);
                println!("final_connectivity: {:.6}", out.final_connectivity);
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
        Command::Sweep { config } => match load_config(&config).and_then(|c| run_sweep(&c)) {
            Ok(path) => {
                println!("sweep summary: {}", path.display());
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
        Command::Transfer { config } => {
            match load_config(&config).and_then(|c| run_transfer(&c)) {
                Ok(out) => {
                    println!("metrics: {}", out.metrics_path.display());
                    println!("final_test_accuracy: {:.4}", out.final_test_accuracy);
                    ExitCode::SUCCESS
                }
                Err(e) => fail(e),
            }
        }
        Command::BenchTheory { suite, seed } => match run_suite(&suite, seed) {
            Ok(report) => {
                print!("{}", report.render());
                if report.all_pass() {
                    ExitCode::SUCCESS
                } else {
                    eprintln!("error: one or more checks failed");
                    ExitCode::from(EXIT_CHECK_FAILED)
                }
            }
            Err(e) => {
                eprintln!("error: {e}");
                eprintln!("available suites: {}, all", SUITES.join(", "));
                ExitCode::from(exit_for(&e))
            }
        },
        Command::EmitPlots {
            metrics,
            out,
            boxcar,
        } => match emit_plot_data(&metrics, &out, boxcar) {
            Ok(written) => {
                for p in written {
                    println!("{}", p.display());
                }
                ExitCode::SUCCESS
            }
            Err(e) => fail(e),
        },
    }
}

fn fail(e: Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(exit_for(&e))
}
