use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

mod commands;

/// Cross-venue microstructure pipeline: synthetic data, features, transforms,
/// lead-lag networks, linear models, taker backtests and the maker simulator.
#[derive(Parser, Debug)]
#[command(name = "fragnet", version)]
struct Cli {
    /// Directory holding every artifact.
    #[arg(long, global = true, default_value = "run")]
    dir: PathBuf,
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every random draw.
    #[arg(long, global = true, default_value_t = 7)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the default run configuration.
    InitConfig {
        #[arg(long, default_value = "config.toml")]
        out: PathBuf,
    },
    /// Generate a synthetic snapshot panel and an order-by-order event stream.
    Gen {
        /// TOML generator configuration.
        #[arg(long)]
        gen_config: Option<PathBuf>,
        /// Panel length.
        #[arg(long)]
        duration_ms: Option<i64>,
        /// Event-stream length.
        #[arg(long)]
        l3_duration_ms: Option<i64>,
    },
    /// Resample raw books and trades onto the common grid.
    Resample,
    /// Compute feature and target columns.
    Features,
    /// Calibrate step transforms and write the transformed feature table.
    CalibrateTransform,
    /// Pick TFI, PRET and DIV horizons.
    SelectHorizons {
        #[arg(long)]
        delta: Option<i64>,
    },
    /// Pairwise lead-lag R² network.
    Leadlag {
        #[arg(long)]
        delta: Option<i64>,
    },
    /// Fit per-target models.
    Fit {
        kind: FitKind,
        #[arg(long)]
        delta: Option<i64>,
        /// Geometric grid `start..endxfactor`, e.g. `0.001..0.256x2`.
        #[arg(long)]
        lambda_grid: Option<String>,
    },
    /// Taker backtest of the pairwise models.
    Backtest {
        #[arg(long)]
        delta: Option<i64>,
    },
    /// Maker strategy and never-cancel benchmark on the event stream.
    MakerSim {
        /// Cancel threshold; calibrated from the stream when omitted.
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Plot-ready report tables.
    Report { what: ReportKind },
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum FitKind {
    Baseline,
    Lasso,
    Meta,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum ReportKind {
    Leadlag,
    Pnl,
    Models,
    Maker,
    All,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (code, body) = commands::error_json(&e);
            eprintln!("{body}");
            ExitCode::from(code)
        }
    }
}
