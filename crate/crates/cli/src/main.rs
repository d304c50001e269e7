use std::path::PathBuf;
use std::process::ExitCode;

use albench_cli::commands::{self, AnalyzeArgs, BsoArgs, RunArgs};
use albench_cli::CliError;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "albench", version, about = "Pool-based active learning benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunFlags {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; completed trials found there are skipped.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads (0 = one per core).
    #[arg(long, default_value_t = 0)]
    workers: usize,
    /// Overrides the configured master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Label column for datasets given as `.csv` paths (default: last column).
    #[arg(long)]
    label_col: Option<usize>,
}

impl From<RunFlags> for RunArgs {
    fn from(f: RunFlags) -> Self {
        RunArgs {
            config: f.config,
            out: f.out,
            workers: f.workers,
            seed: f.seed,
            label_col: f.label_col,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run every configured (dataset, strategy, trial) cell.
    Run(RunFlags),
    /// Run the beam-search oracle on the configured datasets.
    Bso {
        #[command(flatten)]
        run: RunFlags,
        /// Beam width.
        #[arg(long)]
        width: Option<usize>,
        /// Queries per trial.
        #[arg(long)]
        budget: Option<usize>,
        /// Evaluate at most this many seeded candidates per beam and step.
        #[arg(long)]
        candidate_cap: Option<usize>,
    },
    /// Win-tie-loss, rankings and dataset difficulty from a results directory.
    Analyze {
        results: PathBuf,
        /// Where to write the tables (default: the results directory).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = albench_core::analysis::DEFAULT_TIE_THRESHOLD)]
        tie_threshold: f64,
        /// Treat the tie threshold as relative to the larger value.
        #[arg(long)]
        relative: bool,
    },
    /// Mean budget curves as SVG.
    Plot {
        results: PathBuf,
        #[arg(long)]
        dataset: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a synthetic dataset (gcloudb, gcloudub, xor) as CSV.
    GenData {
        kind: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long, default_value_t = albench_core::datasets::DEFAULT_GENERATOR_SEED)]
        seed: u64,
    },
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run(flags) => commands::cmd_run(&flags.into()).map(drop),
        Command::Bso {
            run,
            width,
            budget,
            candidate_cap,
        } => commands::cmd_bso(&BsoArgs {
            run: run.into(),
            width,
            budget,
            candidate_cap,
        })
        .map(drop),
        Command::Analyze {
            results,
            out,
            tie_threshold,
            relative,
        } => commands::cmd_analyze(&AnalyzeArgs {
            results,
            out,
            tie_threshold,
            relative,
        })
        .map(drop),
        Command::Plot { results, dataset, out } => {
            for p in commands::cmd_plot(&results, dataset.as_deref(), out.as_deref())? {
                println!("{}", p.display());
            }
            Ok(())
        }
        Command::GenData { kind, out, n, seed } => commands::cmd_gen_data(&kind, n, seed, &out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
