//! Named experiment presets and their multi-run reports.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bart::{fit, importance_from_posteriors, BartConfig, BartError, BartPosterior, ImportanceReport};
use crate::dataset::{
    average_stats, build_lag_matrix, fit_stats, random_split, DatasetError, FitStats, LagSpec, SplitMask, StatsError,
    SupervisedDataset,
};
use crate::forecast::{backtest_suite, BacktestOptions, BacktestSuite, Feedback, ForecastError};
use crate::ingest::TimeSeries;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HarnessError {
    #[error("unknown preset `{name}`; available: {}", preset_names().join(", "))]
    UnknownPreset { name: String },
    #[error(transparent)]
    Bart(#[from] BartError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Forecast(#[from] ForecastError),
    #[error("invalid run options: {0}")]
    InvalidOptions(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PresetKind {
    /// Train/test fit statistics over random splits, with variable importance.
    SplitFit,
    /// Iterated multi-horizon backtest with mean and median feedback plus AR.
    Backtest,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentPreset {
    pub name: &'static str,
    pub description: &'static str,
    pub spec: LagSpec,
    pub m: usize,
    pub train_fraction: f64,
    pub runs: usize,
    pub horizon: usize,
    pub kind: PresetKind,
}

fn preset(
    name: &'static str,
    description: &'static str,
    lags: &str,
    october: bool,
    m: usize,
    train_fraction: f64,
    kind: PresetKind,
) -> ExperimentPreset {
    let spec: LagSpec = lags.parse().expect("preset lags parse");
    let spec = spec.with_target_month(october.then_some(10)).expect("valid month");
    ExperimentPreset { name, description, spec, m, train_fraction, runs: 10, horizon: 12, kind }
}

pub fn presets() -> Vec<ExperimentPreset> {
    use PresetKind::*;
    vec![
        preset(
            "oct-full",
            "October SOI from the 12 prior months and lags 41, 73",
            "1..12,41,73",
            true,
            20,
            0.8,
            SplitFit,
        ),
        preset("oct-reduced", "October SOI from the five prior months", "1..5", true, 20, 0.8, SplitFit),
        preset("oct-no-sep", "October SOI from May to August (lags 2..6)", "2..6", true, 20, 0.8, SplitFit),
        preset("oct-far", "October SOI from the previous December and lag 41", "10,41", true, 20, 0.8, SplitFit),
        preset("oct-far-73", "oct-far with lag 73 added", "10,41,73", true, 20, 0.8, SplitFit),
        preset("ar-select", "All-month lag importance with few trees", "1..9,41,73", false, 20, 2.0 / 3.0, SplitFit),
        preset("ar5-backtest", "12-horizon backtest of the five-lag model", "1..5", false, 40, 2.0 / 3.0, Backtest),
    ]
}

pub fn preset_names() -> Vec<&'static str> {
    presets().iter().map(|p| p.name).collect()
}

pub fn find_preset(name: &str) -> Result<ExperimentPreset, HarnessError> {
    presets().into_iter().find(|p| p.name == name).ok_or_else(|| HarnessError::UnknownPreset { name: name.to_string() })
}

/// Overrides applied on top of a preset.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunOptions {
    /// Sampler settings; `m` is replaced by the preset's tree count unless `trees` is set.
    pub base_config: BartConfig,
    pub trees: Option<usize>,
    pub runs: Option<usize>,
    pub train_fraction: Option<f64>,
    pub horizon: Option<usize>,
    /// Also report the single run with the lowest test RMSE.
    pub best_of: bool,
}

impl ExperimentPreset {
    pub fn config(&self, options: &RunOptions) -> BartConfig {
        BartConfig { m: options.trees.unwrap_or(self.m), ..options.base_config.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub train: FitStats,
    pub test: FitStats,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub train: FitStats,
    pub test: FitStats,
    pub per_run: Vec<RunStats>,
    pub best_run: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PresetReport {
    pub name: String,
    pub lags: String,
    pub m: usize,
    pub runs: usize,
    pub train_fraction: f64,
    pub fits: Option<SplitSummary>,
    pub importance: Option<ImportanceReport>,
    pub backtest: Option<BacktestSuite>,
}

/// Out-of-sample RMSE minus in-sample RMSE; may be negative.
pub fn overfit_gap(train: &FitStats, test: &FitStats) -> f64 {
    test.rmse - train.rmse
}

impl PresetReport {
    pub fn overfit_gap(&self) -> Option<f64> {
        self.fits.as_ref().map(|f| overfit_gap(&f.train, &f.test))
    }

    /// `sample,corr,mae,rmse,n` rows for train and test (and the best run
    /// when selected), or the horizon table for backtests.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        if let Some(f) = &self.fits {
            out.push_str("sample,corr,mae,rmse,n\n");
            let mut row = |label: &str, s: &FitStats| {
                out.push_str(&format!("{label},{},{},{},{}\n", s.corr, s.mae, s.rmse, s.n));
            };
            row("train", &f.train);
            row("test", &f.test);
            if let Some(b) = f.best_run {
                row("best_train", &f.per_run[b].train);
                row("best_test", &f.per_run[b].test);
            }
        }
        if let Some(bt) = &self.backtest {
            out.push_str("model,feedback,horizon,corr,mae,rmse,n\n");
            let mut push = |model: &str, fb: &str, rows: &crate::forecast::HorizonBacktest| {
                for r in &rows.rows {
                    out.push_str(&format!(
                        "{model},{fb},{},{},{},{},{}\n",
                        r.horizon, r.stats.corr, r.stats.mae, r.stats.rmse, r.stats.n
                    ));
                }
            };
            for (fb, rows) in &bt.bart {
                push("bart", &fb.to_string(), rows);
            }
            if let Some(ar) = &bt.ar {
                push("ar", "plug-in", ar);
            }
        }
        out
    }

    /// Plain-text tables in the layout `Sample | CORR | MAE | RMSE`.
    pub fn to_text(&self) -> String {
        let mut out = format!("{} (lags {}, m = {}, {} runs)\n", self.name, self.lags, self.m, self.runs);
        if let Some(f) = &self.fits {
            out.push_str(&format!("{:<10} {:>6} {:>6} {:>6}\n", "Sample", "CORR", "MAE", "RMSE"));
            for (label, s) in [("Training", &f.train), ("Testing", &f.test)] {
                out.push_str(&format!("{label:<10} {:>6.2} {:>6.2} {:>6.2}\n", s.corr, s.mae, s.rmse));
            }
            out.push_str(&format!("Overfit gap (test - train RMSE): {:.2}\n", overfit_gap(&f.train, &f.test)));
        }
        if let Some(imp) = &self.importance {
            out.push_str("\nVariable   Importance\n");
            for (name, v) in imp.feature_names.iter().zip(&imp.importance) {
                out.push_str(&format!("{name:<10} {v:>10.2}\n"));
            }
        }
        if let Some(bt) = &self.backtest {
            for (fb, rows) in &bt.bart {
                out.push_str(&format!("\nBART, {fb} feedback\n"));
                push_horizon_table(&mut out, rows);
            }
            if let Some(ar) = &bt.ar {
                out.push_str("\nAR baseline\n");
                push_horizon_table(&mut out, ar);
            }
        }
        out
    }
}

fn push_horizon_table(out: &mut String, rows: &crate::forecast::HorizonBacktest) {
    out.push_str(&format!("{:<10} {:>6} {:>6} {:>6} {:>5}\n", "Horizon", "CORR", "MAE", "RMSE", "n"));
    for r in &rows.rows {
        let label = format!("{} Month{}", r.horizon, if r.horizon == 1 { "" } else { "s" });
        out.push_str(&format!(
            "{label:<10} {:>6.3} {:>6.3} {:>6.3} {:>5}\n",
            r.stats.corr, r.stats.mae, r.stats.rmse, r.stats.n
        ));
    }
}

fn split_stats(
    data: &SupervisedDataset,
    mask: &SplitMask,
    posterior: &BartPosterior,
) -> Result<RunStats, HarnessError> {
    let score = |idx: Vec<usize>| -> Result<FitStats, HarnessError> {
        let pred: Vec<f64> = idx.iter().map(|&i| posterior.predict_mean(data.row(i))).collect::<Result<_, _>>()?;
        let actual: Vec<f64> = idx.iter().map(|&i| data.targets()[i]).collect();
        Ok(fit_stats(&pred, &actual)?)
    };
    Ok(RunStats { train: score(mask.train_indices())?, test: score(mask.test_indices())? })
}

/// Run `r` uses seed `master_seed + r` for both its split and its chain.
pub fn run_preset(
    preset: &ExperimentPreset,
    series: &TimeSeries,
    master_seed: u64,
    options: &RunOptions,
) -> Result<PresetReport, HarnessError> {
    let runs = options.runs.unwrap_or(preset.runs);
    if runs == 0 {
        return Err(HarnessError::InvalidOptions("runs must be at least 1".into()));
    }
    let fraction = options.train_fraction.unwrap_or(preset.train_fraction);
    let config = preset.config(options);
    let mut report = PresetReport {
        name: preset.name.to_string(),
        lags: preset.spec.to_string(),
        m: config.m,
        runs,
        train_fraction: fraction,
        fits: None,
        importance: None,
        backtest: None,
    };
    match preset.kind {
        PresetKind::SplitFit => {
            let data = build_lag_matrix(series, &preset.spec)?;
            let results = (0..runs)
                .into_par_iter()
                .map(|r| -> Result<(RunStats, BartPosterior), HarnessError> {
                    let seed = master_seed.wrapping_add(r as u64);
                    let mask = random_split(data.n_rows(), fraction, seed)?;
                    let posterior = fit(&data, &mask, &config, seed)?;
                    Ok((split_stats(&data, &mask, &posterior)?, posterior))
                })
                .collect::<Result<Vec<_>, _>>()?;
            let per_run: Vec<RunStats> = results.iter().map(|(s, _)| *s).collect();
            let posteriors: Vec<BartPosterior> = results.into_iter().map(|(_, p)| p).collect();
            let train = average_stats(&per_run.iter().map(|s| s.train).collect::<Vec<_>>())?;
            let test = average_stats(&per_run.iter().map(|s| s.test).collect::<Vec<_>>())?;
            let best_run = options.best_of.then(|| {
                (0..per_run.len())
                    .min_by(|&a, &b| per_run[a].test.rmse.total_cmp(&per_run[b].test.rmse))
                    .expect("runs >= 1")
            });
            report.fits = Some(SplitSummary { train, test, per_run, best_run });
            report.importance = Some(importance_from_posteriors(&posteriors));
        }
        PresetKind::Backtest => {
            let backtest_options = BacktestOptions {
                horizon: options.horizon.unwrap_or(preset.horizon),
                train_fraction: fraction,
                runs,
                feedbacks: vec![Feedback::Mean, Feedback::Median],
                include_ar: true,
            };
            report.backtest = Some(backtest_suite(series, &preset.spec, &config, &backtest_options, master_seed)?);
        }
    }
    Ok(report)
}

/// The same preset at several tree counts.
pub fn tree_sweep(
    preset: &ExperimentPreset,
    series: &TimeSeries,
    master_seed: u64,
    options: &RunOptions,
    tree_counts: &[usize],
) -> Result<Vec<PresetReport>, HarnessError> {
    tree_counts
        .iter()
        .map(|&m| run_preset(preset, series, master_seed, &RunOptions { trees: Some(m), ..options.clone() }))
        .collect()
}
