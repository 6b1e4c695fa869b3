use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use soibart::harness::preset_names;
use soibart::{Feedback, LagSpec, MonthStamp};

/// Seed used when `--seed` is not given.
pub const DEFAULT_SEED: u64 = 42;

/// BART forecasting and diagnostics for the Southern Oscillation Index.
#[derive(Debug, Parser)]
#[command(name = "soi-bart", version, about, propagate_version = true)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse a data file and write the canonical `year,month,value` series.
    Ingest {
        #[command(flatten)]
        common: Common,
    },
    /// Run one of the named experiments and write `<name>.csv`.
    Preset(PresetArgs),
    /// Variable importance from tree-starved fits.
    Select(SelectArgs),
    /// Multi-horizon backtest of BART against the AR baseline.
    Backtest(BacktestArgs),
    /// Forecast the months following the end of the series.
    Forecast(ForecastArgs),
    /// Periodogram and correlogram of the series.
    Diagnose(DiagnoseArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Model {
    Bart,
    /// Least-squares AR on the same lags, iterated plug-in point forecasts.
    Ar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Monthly series, BOM plaintext or `year,month,value` CSV.
    #[arg(long, default_value = "data/soi.txt")]
    pub data: PathBuf,
    /// First month to use (YYYY-MM).
    #[arg(long, value_parser = parse_stamp)]
    pub start: Option<MonthStamp>,
    /// Last month to use (YYYY-MM).
    #[arg(long, value_parser = parse_stamp)]
    pub end: Option<MonthStamp>,
    /// Master seed.
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Output directory, created if missing.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    /// Worker threads (default: available parallelism).
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub jobs: Option<u32>,
    /// Token marking a missing month; repeat to give several. Replaces the defaults `*` and `-999.9`.
    #[arg(long = "missing-token", value_name = "TOKEN")]
    pub missing_tokens: Vec<String>,
    /// Numeric sentinel marking a missing month; repeat to give several.
    #[arg(long = "missing-value", value_name = "VALUE", allow_hyphen_values = true)]
    pub missing_values: Vec<f64>,
    /// Values with larger magnitude are treated as missing.
    #[arg(long, default_value_t = 90.0, conflicts_with = "no_max_abs")]
    pub max_abs: f64,
    /// Disable the magnitude cutoff.
    #[arg(long)]
    pub no_max_abs: bool,
}

#[derive(Debug, Args)]
pub struct Sampler {
    /// Total MCMC iterations per fit.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub iters: Option<u32>,
    /// Discarded iterations per fit.
    #[arg(long)]
    pub burn_in: Option<u32>,
}

#[derive(Debug, Args)]
pub struct PresetArgs {
    #[arg(value_parser = clap::builder::PossibleValuesParser::new(preset_names()))]
    pub name: String,
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub sampler: Sampler,
    /// Override the preset's tree count.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub trees: Option<u32>,
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub runs: Option<u32>,
    #[arg(long, value_parser = parse_fraction)]
    pub train_fraction: Option<f64>,
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..))]
    pub horizon: Option<u32>,
    /// Also report the run with the lowest test RMSE.
    #[arg(long)]
    pub best_of: bool,
    /// Repeat the preset at each tree count, e.g. `10,20,40`.
    #[arg(long, value_delimiter = ',', value_parser = clap::value_parser!(u32).range(1..))]
    pub sweep: Vec<u32>,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub sampler: Sampler,
    #[arg(long, value_parser = parse_lags, default_value = "1..9,41,73")]
    pub lags: LagSpec,
    /// Restrict targets to one calendar month (1-12).
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..=12))]
    pub month: Option<u32>,
    #[arg(long, default_value_t = 20, value_parser = clap::value_parser!(u32).range(1..))]
    pub trees: u32,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u32).range(1..))]
    pub runs: u32,
    /// Fit on a random fraction of rows instead of all of them.
    #[arg(long, value_parser = parse_fraction)]
    pub train_fraction: Option<f64>,
}

#[derive(Debug, Args)]
pub struct BacktestArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub sampler: Sampler,
    #[arg(long, value_parser = parse_lags, default_value = "1..5")]
    pub lags: LagSpec,
    #[arg(long, default_value_t = 40, value_parser = clap::value_parser!(u32).range(1..))]
    pub trees: u32,
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u32).range(1..))]
    pub runs: u32,
    #[arg(long, default_value_t = 2.0 / 3.0, value_parser = parse_fraction)]
    pub train_fraction: f64,
    #[arg(long, default_value_t = 12, value_parser = clap::value_parser!(u32).range(1..))]
    pub horizon: u32,
    /// Feedback rules to score; repeat or comma-separate.
    #[arg(long, value_delimiter = ',', default_values = ["mean", "median"], value_parser = parse_feedback)]
    pub feedback: Vec<Feedback>,
    /// Skip the AR baseline.
    #[arg(long)]
    pub no_ar: bool,
}

#[derive(Debug, Args)]
pub struct ForecastArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub sampler: Sampler,
    #[arg(long, value_enum, default_value_t = Model::Bart)]
    pub model: Model,
    #[arg(long, value_parser = parse_lags, default_value = "1..5")]
    pub lags: LagSpec,
    #[arg(long, default_value_t = 40, value_parser = clap::value_parser!(u32).range(1..))]
    pub trees: u32,
    #[arg(long, default_value_t = 12, value_parser = clap::value_parser!(u32).range(1..))]
    pub horizon: u32,
    /// Posterior-predictive trajectories for the quantile columns (0 disables them).
    #[arg(long, default_value_t = 1000)]
    pub trajectories: u32,
    #[arg(long, value_delimiter = ',', default_values = ["0.05", "0.25", "0.5", "0.75", "0.95"], value_parser = parse_quantile)]
    pub quantiles: Vec<f64>,
    #[arg(long, default_value = "mean", value_parser = parse_feedback)]
    pub feedback: Feedback,
    /// Refit on the extended series before each step (`--refit false` reuses the first fit).
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub refit: bool,
    /// Refit inside every trajectory as well (slow).
    #[arg(long)]
    pub refit_trajectories: bool,
    /// Months of history drawn in the fan chart.
    #[arg(long, default_value_t = 60)]
    pub plot_history: usize,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    #[command(flatten)]
    pub common: Common,
    /// Largest lag in the correlogram.
    #[arg(long, default_value_t = soibart::spectral::DEFAULT_MAX_LAG)]
    pub max_lag: usize,
}

fn parse_stamp(s: &str) -> Result<MonthStamp, String> {
    s.parse().map_err(|_| format!("`{s}` is not a YYYY-MM month"))
}

fn parse_lags(s: &str) -> Result<LagSpec, String> {
    s.parse().map_err(|e: soibart::DatasetError| e.to_string())
}

fn parse_fraction(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v > 0.0 && v < 1.0 => Ok(v),
        _ => Err(format!("`{s}` is not a fraction strictly between 0 and 1")),
    }
}

fn parse_quantile(s: &str) -> Result<f64, String> {
    parse_fraction(s)
}

fn parse_feedback(s: &str) -> Result<Feedback, String> {
    s.parse()
}
