//! Experiment driver: dataset generation, DR training, ranking sweeps,
//! the downstream task and plot-data export.

mod commands;
mod config;

use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use commands::{DrMode, RankMethod};
pub use config::{EvalSection, ExperimentConfig, TargetsSection, TaskSection, TrainSection};

use crate::error::{Error, Result};
use commands::Ctx;

/// Environment variable that sets the worker-thread count.
pub const THREADS_ENV: &str = "DYNREP_THREADS";

#[derive(Debug, Parser)]
#[command(name = "dynrep", version, about = "Dynamic-representation experiments on synthetic sequences")]
pub struct Cli {
    /// Experiment config (TOML); defaults are used for anything it omits.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overwrite existing artifacts.
    #[arg(long, global = true)]
    pub force: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate every split of the synthetic dataset.
    GenData,
    /// Solve per-window target kernels on the pretrain split.
    SolveTargets {
        #[arg(long = "T")]
        t: usize,
        #[arg(long = "S", default_value_t = 1)]
        s: usize,
    },
    /// Train a DR network with the rank loss or against solved targets.
    TrainDr {
        #[arg(long = "T")]
        t: usize,
        #[arg(long = "S", default_value_t = 1)]
        s: usize,
        #[arg(long, value_enum, default_value_t = DrMode::Rank)]
        mode: DrMode,
    },
    /// Score a ranking method over a (T, S) grid on the held-out split.
    EvalRank {
        #[arg(long, value_enum, default_value_t = RankMethod::Network)]
        method: RankMethod,
        /// Use this checkpoint for every grid cell instead of the per-cell default.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long = "t-grid", value_delimiter = ',')]
        t_grid: Option<Vec<usize>>,
        #[arg(long = "s-grid", value_delimiter = ',')]
        s_grid: Option<Vec<usize>>,
    },
    /// Train the downstream regressor on stacked levels.
    TrainTask {
        #[arg(long, value_delimiter = ',')]
        levels: Option<Vec<usize>>,
    },
    /// Score a trained downstream regressor on the test split.
    EvalTask {
        #[arg(long, value_delimiter = ',')]
        levels: Option<Vec<usize>>,
    },
    /// Collect evaluation results into plot-ready CSV series.
    PlotData,
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| Error::Config {
        field: THREADS_ENV.into(),
        reason: format!("expected a positive integer, got `{raw}`"),
    })?;
    // A second call in the same process keeps the first pool.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

pub fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    let config = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    let ctx = Ctx {
        config,
        force: cli.force,
    };
    match cli.command {
        Command::GenData => commands::gen_data(&ctx),
        Command::SolveTargets { t, s } => commands::solve_targets(&ctx, t, s),
        Command::TrainDr { t, s, mode } => commands::train_dr(&ctx, t, s, mode),
        Command::EvalRank {
            method,
            checkpoint,
            t_grid,
            s_grid,
        } => {
            let t_grid = t_grid.unwrap_or_else(|| ctx.config.eval.t_grid.clone());
            let s_grid = s_grid.unwrap_or_else(|| ctx.config.eval.s_grid.clone());
            commands::eval_rank(&ctx, method, checkpoint.as_deref(), &t_grid, &s_grid)
        }
        Command::TrainTask { levels } => {
            let levels = levels.unwrap_or_else(|| ctx.config.task.levels.clone());
            commands::train_task(&ctx, &levels)
        }
        Command::EvalTask { levels } => {
            let levels = levels.unwrap_or_else(|| ctx.config.task.levels.clone());
            commands::eval_task(&ctx, &levels)
        }
        Command::PlotData => commands::plot_data(&ctx),
    }
}

/// Machine-readable error line printed on stderr.
pub fn error_json(kind: &str, message: &str) -> String {
    serde_json::json!({"error": kind, "message": message}).to_string()
}

/// Parses `std::env::args`, runs, and returns the process exit code.
pub fn main_with_args() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                e.exit();
            }
            eprintln!("{}", error_json("usage", e.to_string().trim()));
            return 2;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", error_json(e.kind(), &e.to_string()));
            1
        }
    }
}
