//! Bayesian additive regression trees for monthly time-series forecasting.

pub mod bart;
pub mod baseline;
pub mod dataset;
pub mod forecast;
pub mod harness;
pub mod ingest;
mod linalg;
pub mod rng;
pub mod spectral;
pub mod tree;

pub use bart::{
    fit, fit_with_options, importance_from_posteriors, variable_importance, BartConfig, BartError, BartPosterior,
    FitOptions, ImportanceReport, MoveProbs, PosteriorDraw, TargetScaling,
};
pub use baseline::{fit_ar, forecast_ar, ArError, ArModel};
pub use dataset::{
    average_stats, build_lag_matrix, fit_stats, random_split, DatasetError, FitStats, LagSpec, Split, SplitMask,
    StatsError, SupervisedDataset,
};
pub use forecast::{
    backtest_horizons, backtest_suite, iterate_forecast, sample_trajectories, BacktestOptions, BacktestSuite, Feedback,
    ForecastConfig, ForecastError, ForecastResult, HorizonBacktest,
};
pub use harness::{
    find_preset, overfit_gap, presets, run_preset, ExperimentPreset, HarnessError, PresetReport, RunOptions,
};
pub use ingest::{parse_auto, parse_bom_plaintext, parse_csv, IngestError, MissingPolicy, MonthStamp, TimeSeries};
pub use spectral::{acf, correlogram, periodogram, white_noise_check, Correlogram, Periodogram, SpectralError};
pub use tree::{DecisionTree, TreeError, TreeNode, TreeStats};
