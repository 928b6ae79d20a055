//! Thin command-line front end over [`cnmf::cli`]. Exit codes: 0 success,
//! 2 configuration errors, 3 numeric failures (including diverged runs),
//! 4 I/O errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cnmf::cli::{
    cmd_bench, cmd_compress, cmd_evaluate, cmd_factorize, cmd_generate, ExperimentConfig,
};
use cnmf::solvers::StopReason;

#[derive(Parser)]
#[command(
    name = "cnmf",
    version,
    about = "Nonnegative matrix factorization from sketched data"
)]
struct Cli {
    /// Experiment config file (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config's output directory.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    /// Master seed s: synthetic data uses s, the sketch s+1, init s+2.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Allow commands to read the full data matrix for metrics.
    #[arg(long, global = true)]
    with_full_eval: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic data of the config and save it.
    Generate,
    /// Sketch and compress the data into output_dir/compressed/.
    Compress,
    /// Fit factors against the compressed record only.
    Factorize,
    /// Compute full-data metrics for saved factors.
    Evaluate,
    /// Sweep the bench grid (k × lambda × seeds) and aggregate a CSV.
    Bench,
}

fn run(cli: Cli) -> cnmf::Result<u8> {
    let path = cli
        .config
        .ok_or_else(|| cnmf::Error::Config("--config <path> is required".into()))?;
    let mut config = ExperimentConfig::load(&path)?;
    config.apply_overrides(cli.output, cli.seed, cli.with_full_eval);
    match cli.command {
        Command::Generate => {
            cmd_generate(&config)?;
            println!("generate: wrote data into {}", config.output_dir.display());
        }
        Command::Compress => {
            cmd_compress(&config)?;
            println!(
                "compress: wrote record into {}",
                config.output_dir.join("compressed").display()
            );
        }
        Command::Factorize => {
            let stop = cmd_factorize(&config)?;
            if stop == StopReason::Diverged {
                eprintln!("factorize: solver diverged; factors and trace were still written");
                return Ok(3);
            }
            println!(
                "factorize: stopped with {} in {}",
                stop.as_str(),
                config.output_dir.display()
            );
        }
        Command::Evaluate => {
            let report = cmd_evaluate(&config)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Bench => {
            cmd_bench(&config)?;
            println!(
                "bench: wrote {}",
                config.output_dir.join("bench.csv").display()
            );
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
