mod commands;
mod config;
mod error;
mod published;
mod svg;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::Ctx;
use crate::config::{Overrides, RunConfig};
use crate::error::{CliError, CliResult};

#[derive(Parser)]
#[command(name = "gra", version, about = "Glaucoma risk assessment from structured EHR data")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, created if absent.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Directory holding inputs from earlier stages. Defaults to --out.
    #[arg(long, global = true)]
    data: Option<PathBuf>,
    /// Trainable layer counts, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    k: Option<Vec<usize>>,
    /// Training data percentages, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    fraction: Option<Vec<u32>>,
    /// Worker threads for parallel stages.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Also score the generator's latent risk (reads truth.jsonl).
    #[arg(long, global = true)]
    oracle: bool,
    /// Model checkpoint for finetune, grid, eval and calibrate.
    #[arg(long, global = true)]
    checkpoint: Option<PathBuf>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Generate a source cohort and a shifted target cohort.
    Synth,
    /// Pretrain autoencoders and the CNN on the source cohort.
    Pretrain,
    /// Fine-tune the last k layers on a fraction of the target training set.
    Finetune,
    /// Fine-tune and evaluate every (k, fraction, seed) cell.
    Grid,
    /// Evaluate the fine-tuned model on the target test set.
    Eval,
    /// Decile calibration against diagnosis, treatment, IOP and CDR.
    Calibrate,
    /// Demographics-only boosted trees on the target site.
    Baseline,
    /// Merge computed results with the published reference table.
    Report,
}

fn run(cli: Cli) -> CliResult<()> {
    let overrides = Overrides { seed: cli.seed, threads: cli.threads, k: cli.k, fraction: cli.fraction };
    let cfg = RunConfig::load(cli.config.as_deref())?.resolve(&overrides)?;
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    std::fs::create_dir_all(&cli.out)
        .map_err(|e| CliError::Config(format!("cannot create output directory {}: {e}", cli.out.display())))?;
    let ctx = Ctx { cfg, data: cli.data.unwrap_or_else(|| cli.out.clone()), out: cli.out, checkpoint: cli.checkpoint, oracle: cli.oracle };
    match cli.command {
        Command::Synth => commands::synth(&ctx),
        Command::Pretrain => commands::pretrain(&ctx),
        Command::Finetune => commands::finetune(&ctx),
        Command::Grid => commands::grid(&ctx),
        Command::Eval => commands::eval(&ctx),
        Command::Calibrate => commands::calibrate(&ctx),
        Command::Baseline => commands::baseline(&ctx),
        Command::Report => commands::report(&ctx),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("gra: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
