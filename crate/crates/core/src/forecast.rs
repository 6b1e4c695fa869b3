//! Iterated multi-step forecasts, sampled predictive trajectories and the
//! per-horizon backtest.
//!
//! A horizon-`h` forecast from anchor month `t` is produced by predicting
//! `t+1`, appending that prediction to a copy of the history and repeating.
//! Only values at or before `t` and earlier predictions ever enter a window.

use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bart::cuts::quantile_sorted;
use crate::bart::{fit, BartConfig, BartError, BartPosterior};
use crate::baseline::{fit_ar, ArError, ArModel};
use crate::dataset::{
    average_stats, build_lag_matrix, fit_stats, random_split, DatasetError, FitStats, LagSpec, SplitMask, StatsError,
};
use crate::ingest::{MonthStamp, TimeSeries};
use crate::rng::{stream_rng, STREAM_TRAJECTORY_BASE};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ForecastError {
    #[error(transparent)]
    Bart(#[from] BartError),
    #[error(transparent)]
    Ar(#[from] ArError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("invalid forecast configuration: {0}")]
    InvalidConfig(String),
    #[error("history has {got} values; the lag spec needs {needed}")]
    ShortHistory { needed: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Feedback {
    Mean,
    Median,
}

impl FromStr for Feedback {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mean" => Ok(Self::Mean),
            "median" => Ok(Self::Median),
            other => Err(format!("unknown feedback `{other}` (expected mean or median)")),
        }
    }
}

impl fmt::Display for Feedback {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Mean => "mean",
            Self::Median => "median",
        })
    }
}

/// A fitted one-step-ahead model usable for point feedback.
pub trait PointModel {
    fn n_features(&self) -> usize;
    fn predict_point(&self, features: &[f64], feedback: Feedback) -> f64;
}

impl PointModel for BartPosterior {
    fn n_features(&self) -> usize {
        BartPosterior::n_features(self)
    }

    fn predict_point(&self, features: &[f64], feedback: Feedback) -> f64 {
        match feedback {
            Feedback::Mean => self.predict_mean(features),
            Feedback::Median => self.predict_median(features),
        }
        .expect("feature vector built from the model's lag spec")
    }
}

impl PointModel for ArModel {
    fn n_features(&self) -> usize {
        self.order()
    }

    fn predict_point(&self, features: &[f64], _feedback: Feedback) -> f64 {
        self.predict_features(features)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastConfig {
    pub horizon: usize,
    pub feedback: Feedback,
    /// Sampled trajectories for predictive quantiles; 0 for points only.
    pub n_trajectories: usize,
    pub quantiles: Vec<f64>,
    /// Refit the model on the extended series before every step after the first.
    pub refit_each_step: bool,
    /// Refit inside every trajectory step as well (one fit per trajectory per step).
    pub refit_trajectories: bool,
}

impl Default for ForecastConfig {
    fn default() -> Self {
        Self {
            horizon: 12,
            feedback: Feedback::Mean,
            n_trajectories: 0,
            quantiles: vec![0.05, 0.25, 0.5, 0.75, 0.95],
            refit_each_step: true,
            refit_trajectories: false,
        }
    }
}

impl ForecastConfig {
    pub fn validate(&self) -> Result<(), ForecastError> {
        let bad = |m: String| Err(ForecastError::InvalidConfig(m));
        if self.horizon == 0 {
            return bad("horizon must be at least 1".into());
        }
        if self.quantiles.iter().any(|q| !(*q > 0.0 && *q < 1.0)) {
            return bad(format!("quantiles {:?} must lie in (0, 1)", self.quantiles));
        }
        if self.quantiles.windows(2).any(|w| w[0] >= w[1]) {
            return bad(format!("quantiles {:?} must be strictly increasing", self.quantiles));
        }
        if self.n_trajectories == 1 {
            return bad("need at least 2 trajectories for quantiles".into());
        }
        Ok(())
    }
}

/// Column label for a quantile level: 0.05 -> `q05`, 0.5 -> `q50`, 0.025 -> `q2.5`.
pub fn quantile_label(q: f64) -> String {
    let pct = q * 100.0;
    if (pct - pct.round()).abs() < 1e-9 {
        format!("q{:02}", pct.round() as u32)
    } else {
        format!("q{pct}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastStep {
    pub stamp: MonthStamp,
    pub point: f64,
    /// One value per configured quantile level; empty without trajectories.
    pub quantiles: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastResult {
    pub feedback: Feedback,
    pub refit_each_step: bool,
    pub n_trajectories: usize,
    pub quantile_levels: Vec<f64>,
    pub steps: Vec<ForecastStep>,
}

impl ForecastResult {
    pub fn points(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.point).collect()
    }

    pub fn csv_header(&self) -> Vec<String> {
        let mut cols: Vec<String> = ["year", "month", "point"].iter().map(|s| s.to_string()).collect();
        if self.n_trajectories > 0 {
            cols.extend(self.quantile_levels.iter().map(|q| quantile_label(*q)));
        }
        cols
    }

    pub fn to_csv(&self) -> String {
        let mut out = self.csv_header().join(",");
        out.push('\n');
        for s in &self.steps {
            out.push_str(&format!("{},{},{}", s.stamp.year(), s.stamp.month(), s.point));
            for q in &s.quantiles {
                out.push_str(&format!(",{q}"));
            }
            out.push('\n');
        }
        out
    }
}

fn next_features(spec: &LagSpec, window: &[f64]) -> Result<Vec<f64>, ForecastError> {
    spec.features_after(window).ok_or(ForecastError::ShortHistory { needed: spec.max_lag(), got: window.len() })
}

/// Iterated point forecasts from a fixed model.
pub fn iterate_points<M: PointModel + ?Sized>(
    model: &M,
    spec: &LagSpec,
    history: &[f64],
    horizon: usize,
    feedback: Feedback,
) -> Result<Vec<f64>, ForecastError> {
    let mut window = history.to_vec();
    let mut out = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let x = next_features(spec, &window)?;
        let next = model.predict_point(&x, feedback);
        window.push(next);
        out.push(next);
    }
    Ok(out)
}

fn fit_all(
    series: &TimeSeries,
    spec: &LagSpec,
    config: &BartConfig,
    seed: u64,
) -> Result<BartPosterior, ForecastError> {
    let data = build_lag_matrix(series, spec)?;
    Ok(fit(&data, &SplitMask::all_train(data.n_rows()), config, seed)?)
}

/// Forecast the `horizon` months after the end of `series`.
///
/// The lag spec's month filter is ignored: the one-step model is trained on
/// every month. Step `h` refits (when configured) with seed `seed + h − 1`.
pub fn iterate_forecast(
    series: &TimeSeries,
    spec: &LagSpec,
    config: &BartConfig,
    fconfig: &ForecastConfig,
    seed: u64,
) -> Result<ForecastResult, ForecastError> {
    fconfig.validate()?;
    let spec = spec.clone().with_target_month(None)?;
    let posterior = fit_all(series, &spec, config, seed)?;

    let points = if fconfig.refit_each_step {
        let mut working = series.clone();
        let mut out = Vec::with_capacity(fconfig.horizon);
        for h in 0..fconfig.horizon {
            let model =
                if h == 0 { posterior.clone() } else { fit_all(&working, &spec, config, seed.wrapping_add(h as u64))? };
            let x = next_features(&spec, working.values())?;
            let next = model.predict_point(&x, fconfig.feedback);
            working = working.extended(&[next]).expect("finite prediction");
            out.push(next);
        }
        out
    } else {
        iterate_points(&posterior, &spec, series.values(), fconfig.horizon, fconfig.feedback)?
    };

    let quantiles = if fconfig.n_trajectories > 0 {
        let paths = if fconfig.refit_trajectories {
            sample_trajectories_refit(series, &spec, config, fconfig.horizon, fconfig.n_trajectories, seed)?
        } else {
            sample_trajectories(&posterior, &spec, series.values(), fconfig.horizon, fconfig.n_trajectories, seed)?
        };
        Some(paths.quantiles(&fconfig.quantiles))
    } else {
        None
    };

    let steps = points
        .iter()
        .enumerate()
        .map(|(h, &point)| ForecastStep {
            stamp: series.end().add_months(h as i64 + 1),
            point,
            quantiles: quantiles.as_ref().map_or_else(Vec::new, |q| q[h].clone()),
        })
        .collect();
    Ok(ForecastResult {
        feedback: fconfig.feedback,
        refit_each_step: fconfig.refit_each_step,
        n_trajectories: fconfig.n_trajectories,
        quantile_levels: fconfig.quantiles.clone(),
        steps,
    })
}

/// Simulated future paths, one row per trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectories {
    pub paths: Vec<Vec<f64>>,
}

impl Trajectories {
    pub fn horizon(&self) -> usize {
        self.paths.first().map_or(0, Vec::len)
    }

    /// Per horizon, the requested quantiles across trajectories.
    pub fn quantiles(&self, levels: &[f64]) -> Vec<Vec<f64>> {
        (0..self.horizon())
            .map(|h| {
                let mut col: Vec<f64> = self.paths.iter().map(|p| p[h]).collect();
                col.sort_by(f64::total_cmp);
                levels.iter().map(|&q| quantile_sorted(&col, q)).collect()
            })
            .collect()
    }

    pub fn mean(&self, h: usize) -> f64 {
        self.paths.iter().map(|p| p[h]).sum::<f64>() / self.paths.len() as f64
    }
}

/// One draw from the one-step predictive: a uniformly chosen posterior
/// draw's prediction plus Gaussian noise with that draw's sigma.
fn predictive_draw(posterior: &BartPosterior, x: &[f64], rng: &mut crate::rng::Rng) -> f64 {
    let draw = &posterior.draws()[rng.random_range(0..posterior.n_draws())];
    let z: f64 = rng.sample(StandardNormal);
    posterior.scaling().to_raw(draw.eval(x) + draw.sigma * z)
}

fn trajectory_rng(seed: u64, t: usize) -> crate::rng::Rng {
    stream_rng(seed, STREAM_TRAJECTORY_BASE + t as u64)
}

/// Trajectories that reuse one posterior for every step.
pub fn sample_trajectories(
    posterior: &BartPosterior,
    spec: &LagSpec,
    history: &[f64],
    horizon: usize,
    n_trajectories: usize,
    seed: u64,
) -> Result<Trajectories, ForecastError> {
    next_features(spec, history)?;
    let paths = (0..n_trajectories)
        .into_par_iter()
        .map(|t| {
            let mut rng = trajectory_rng(seed, t);
            let mut window = history.to_vec();
            let mut path = Vec::with_capacity(horizon);
            for _ in 0..horizon {
                let x = spec.features_after(&window).expect("history checked");
                let v = predictive_draw(posterior, &x, &mut rng);
                window.push(v);
                path.push(v);
            }
            path
        })
        .collect();
    Ok(Trajectories { paths })
}

/// Trajectories that refit on their own extended series before each step.
pub fn sample_trajectories_refit(
    series: &TimeSeries,
    spec: &LagSpec,
    config: &BartConfig,
    horizon: usize,
    n_trajectories: usize,
    seed: u64,
) -> Result<Trajectories, ForecastError> {
    let first = fit_all(series, spec, config, seed)?;
    let paths = (0..n_trajectories)
        .into_par_iter()
        .map(|t| -> Result<Vec<f64>, ForecastError> {
            let mut rng = trajectory_rng(seed, t);
            let mut working = series.clone();
            let mut path = Vec::with_capacity(horizon);
            for h in 0..horizon {
                let refit;
                let model = if h == 0 {
                    &first
                } else {
                    refit = fit_all(&working, spec, config, rng.random())?;
                    &refit
                };
                let x = next_features(spec, working.values())?;
                let v = predictive_draw(model, &x, &mut rng);
                working = working.extended(&[v]).expect("finite draw");
                path.push(v);
            }
            Ok(path)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Trajectories { paths })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HorizonRow {
    pub horizon: usize,
    pub stats: FitStats,
}

/// Out-of-sample statistics per forecast horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonBacktest {
    pub rows: Vec<HorizonRow>,
}

impl HorizonBacktest {
    pub fn corr(&self, horizon: usize) -> f64 {
        self.rows[horizon - 1].stats.corr
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("horizon,corr,mae,rmse,n\n");
        for r in &self.rows {
            out.push_str(&format!("{},{},{},{},{}\n", r.horizon, r.stats.corr, r.stats.mae, r.stats.rmse, r.stats.n));
        }
        out
    }

    fn average(runs: &[HorizonBacktest]) -> Result<Self, StatsError> {
        let horizon = runs[0].rows.len();
        let rows = (0..horizon)
            .map(|h| {
                let stats: Vec<FitStats> = runs.iter().map(|r| r.rows[h].stats).collect();
                Ok(HorizonRow { horizon: h + 1, stats: average_stats(&stats)? })
            })
            .collect::<Result<_, StatsError>>()?;
        Ok(Self { rows })
    }
}

/// Score iterated forecasts from every test anchor. Row `i` of the lag
/// matrix targets series index `t_i`; its anchor is `t_i − 1`, so horizon 1
/// scores exactly the test row.
pub fn score_horizons<M: PointModel + ?Sized>(
    model: &M,
    spec: &LagSpec,
    values: &[f64],
    target_indices: &[usize],
    horizon: usize,
    feedback: Feedback,
) -> Result<HorizonBacktest, ForecastError> {
    let mut predicted = vec![Vec::new(); horizon];
    let mut actual = vec![Vec::new(); horizon];
    for &t in target_indices {
        let points = iterate_points(model, spec, &values[..t], horizon, feedback)?;
        for (h, p) in points.into_iter().enumerate() {
            if t + h < values.len() {
                predicted[h].push(p);
                actual[h].push(values[t + h]);
            }
        }
    }
    let rows = (0..horizon)
        .map(|h| Ok(HorizonRow { horizon: h + 1, stats: fit_stats(&predicted[h], &actual[h])? }))
        .collect::<Result<_, StatsError>>()?;
    Ok(HorizonBacktest { rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestOptions {
    pub horizon: usize,
    pub train_fraction: f64,
    pub runs: usize,
    pub feedbacks: Vec<Feedback>,
    pub include_ar: bool,
}

impl Default for BacktestOptions {
    fn default() -> Self {
        Self { horizon: 12, train_fraction: 2.0 / 3.0, runs: 10, feedbacks: vec![Feedback::Mean], include_ar: false }
    }
}

/// Run-averaged backtests sharing one BART fit (and one AR fit) per run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestSuite {
    pub bart: Vec<(Feedback, HorizonBacktest)>,
    pub ar: Option<HorizonBacktest>,
    /// Test-set one-step residuals of run 0, in time order.
    pub one_step_residuals: Vec<f64>,
}

impl BacktestSuite {
    pub fn bart(&self, feedback: Feedback) -> Option<&HorizonBacktest> {
        self.bart.iter().find(|(f, _)| *f == feedback).map(|(_, b)| b)
    }
}

/// Run `r` splits with seed `seed + r` and fits BART with the same seed.
pub fn backtest_suite(
    series: &TimeSeries,
    spec: &LagSpec,
    config: &BartConfig,
    options: &BacktestOptions,
    seed: u64,
) -> Result<BacktestSuite, ForecastError> {
    if options.horizon == 0 || options.runs == 0 || options.feedbacks.is_empty() {
        return Err(ForecastError::InvalidConfig("horizon, runs and feedbacks must be non-empty".into()));
    }
    let spec = spec.clone().with_target_month(None)?;
    let data = build_lag_matrix(series, &spec)?;
    let values = series.values();

    struct RunOutput {
        bart: Vec<HorizonBacktest>,
        ar: Option<HorizonBacktest>,
        residuals: Vec<f64>,
    }
    let outputs = (0..options.runs)
        .into_par_iter()
        .map(|r| -> Result<RunOutput, ForecastError> {
            let run_seed = seed.wrapping_add(r as u64);
            let mask = random_split(data.n_rows(), options.train_fraction, run_seed)?;
            let posterior = fit(&data, &mask, config, run_seed)?;
            let test: Vec<usize> = mask.test_indices().iter().map(|&i| data.target_indices()[i]).collect();
            let bart = options
                .feedbacks
                .iter()
                .map(|&f| score_horizons(&posterior, &spec, values, &test, options.horizon, f))
                .collect::<Result<Vec<_>, _>>()?;
            let ar = if options.include_ar {
                let model = fit_ar(&data, &mask)?;
                Some(score_horizons(&model, &spec, values, &test, options.horizon, Feedback::Mean)?)
            } else {
                None
            };
            let residuals = if r == 0 {
                mask.test_indices()
                    .iter()
                    .map(|&i| data.targets()[i] - posterior.predict_point(data.row(i), Feedback::Mean))
                    .collect()
            } else {
                Vec::new()
            };
            Ok(RunOutput { bart, ar, residuals })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let bart = options
        .feedbacks
        .iter()
        .enumerate()
        .map(|(k, &f)| {
            let runs: Vec<HorizonBacktest> = outputs.iter().map(|o| o.bart[k].clone()).collect();
            Ok((f, HorizonBacktest::average(&runs)?))
        })
        .collect::<Result<Vec<_>, StatsError>>()?;
    let ar = if options.include_ar {
        let runs: Vec<HorizonBacktest> = outputs.iter().map(|o| o.ar.clone().expect("ar scored")).collect();
        Some(HorizonBacktest::average(&runs)?)
    } else {
        None
    };
    let one_step_residuals = outputs.into_iter().next().map(|o| o.residuals).unwrap_or_default();
    Ok(BacktestSuite { bart, ar, one_step_residuals })
}

/// Run-averaged BART backtest with one feedback rule.
#[allow(clippy::too_many_arguments)]
pub fn backtest_horizons(
    series: &TimeSeries,
    spec: &LagSpec,
    config: &BartConfig,
    train_fraction: f64,
    runs: usize,
    horizon: usize,
    feedback: Feedback,
    seed: u64,
) -> Result<HorizonBacktest, ForecastError> {
    let options = BacktestOptions { horizon, train_fraction, runs, feedbacks: vec![feedback], include_ar: false };
    let mut suite = backtest_suite(series, spec, config, &options, seed)?;
    Ok(suite.bart.remove(0).1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bart::{PosteriorDraw, PriorParams, TargetScaling};
    use crate::tree::DecisionTree;

    struct Zero;

    impl PointModel for Zero {
        fn n_features(&self) -> usize {
            3
        }

        fn predict_point(&self, _x: &[f64], _f: Feedback) -> f64 {
            0.0
        }
    }

    fn ar1_series(n: usize, seed: u64) -> TimeSeries {
        let mut rng = stream_rng(seed, 2);
        let mut y = vec![0.0];
        for t in 1..n {
            let e: f64 = rng.sample(StandardNormal);
            y.push(0.7 * y[t - 1] + e);
        }
        TimeSeries::new(MonthStamp::new(1950, 1).unwrap(), y).unwrap()
    }

    fn quick_config() -> BartConfig {
        BartConfig { m: 10, n_iter: 150, burn_in: 50, ..BartConfig::default() }
    }

    /// Posterior whose draws predict `2·x₀ + offset_d` with per-draw sigma.
    fn linearish_posterior() -> BartPosterior {
        let draws = (0..5)
            .map(|d| PosteriorDraw {
                trees: vec![DecisionTree::split(
                    0,
                    0.0,
                    DecisionTree::leaf(-1.0 + 0.1 * d as f64, 1),
                    DecisionTree::leaf(1.0 + 0.1 * d as f64, 1),
                )],
                sigma: 0.2 + 0.05 * d as f64,
            })
            .collect();
        BartPosterior::from_draws(
            draws,
            TargetScaling { offset: 0.5, scale: 3.0 },
            vec!["lag_1".into()],
            PriorParams { tau: 0.1, nu: 3.0, lambda: 0.1, sigma_hat: 0.1 },
        )
        .unwrap()
    }

    #[test]
    fn stub_model_forecasts_zero() {
        let spec = LagSpec::all_months(vec![1, 2, 3]).unwrap();
        let f = iterate_points(&Zero, &spec, &[4.0, 5.0, 6.0, 7.0], 9, Feedback::Mean).unwrap();
        assert_eq!(f, vec![0.0; 9]);
        assert!(matches!(
            iterate_points(&Zero, &spec, &[1.0, 2.0], 1, Feedback::Mean),
            Err(ForecastError::ShortHistory { needed: 3, got: 2 })
        ));
    }

    #[test]
    fn first_step_equals_one_step_prediction() {
        let series = ar1_series(200, 1);
        let spec = LagSpec::all_months(vec![1, 2]).unwrap();
        let cfg = quick_config();
        for feedback in [Feedback::Mean, Feedback::Median] {
            let fc = ForecastConfig { horizon: 1, feedback, refit_each_step: false, ..Default::default() };
            let res = iterate_forecast(&series, &spec, &cfg, &fc, 5).unwrap();
            let post = fit_all(&series, &spec, &cfg, 5).unwrap();
            let x = spec.features_after(series.values()).unwrap();
            assert_eq!(res.steps[0].point, post.predict_point(&x, feedback));
            assert_eq!(res.steps[0].stamp, series.end().add_months(1));
        }
    }

    #[test]
    fn refit_and_reuse_agree_on_step_one() {
        let series = ar1_series(150, 4);
        let spec = LagSpec::all_months(vec![1]).unwrap();
        let cfg = quick_config();
        let a =
            iterate_forecast(&series, &spec, &cfg, &ForecastConfig { horizon: 3, ..Default::default() }, 2).unwrap();
        let b = iterate_forecast(
            &series,
            &spec,
            &cfg,
            &ForecastConfig { horizon: 3, refit_each_step: false, ..Default::default() },
            2,
        )
        .unwrap();
        assert_eq!(a.steps[0].point, b.steps[0].point);
        assert!(a.refit_each_step && !b.refit_each_step);
    }

    #[test]
    fn trajectory_support_and_quantile_order() {
        let post = linearish_posterior();
        let spec = LagSpec::all_months(vec![1]).unwrap();
        let preds = post.predict_draws(&[2.0]).unwrap();
        let max_sigma = post.sigma_draws().into_iter().fold(0.0, f64::max);
        let lo = preds.iter().copied().fold(f64::INFINITY, f64::min) - 4.0 * max_sigma;
        let hi = preds.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 4.0 * max_sigma;
        let two = sample_trajectories(&post, &spec, &[2.0], 1, 2, 3).unwrap();
        assert_ne!(two.paths[0], two.paths[1]);
        assert!(two.paths.iter().all(|p| lo <= p[0] && p[0] <= hi));

        let many = sample_trajectories(&post, &spec, &[2.0], 6, 400, 3).unwrap();
        for row in many.quantiles(&[0.05, 0.25, 0.5, 0.75, 0.95]) {
            assert!(row.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn trajectory_mean_matches_predictive_mean() {
        let post = linearish_posterior();
        let spec = LagSpec::all_months(vec![1]).unwrap();
        let n = 20_000;
        let t = sample_trajectories(&post, &spec, &[-1.0], 1, n, 8).unwrap();
        let col: Vec<f64> = t.paths.iter().map(|p| p[0]).collect();
        let mean = col.iter().sum::<f64>() / n as f64;
        let sd = (col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        let target = post.predict_mean(&[-1.0]).unwrap();
        assert!((mean - target).abs() < 3.0 * sd / (n as f64).sqrt(), "{mean} vs {target}");
    }

    #[test]
    fn trajectories_are_independent_of_thread_count() {
        let post = linearish_posterior();
        let spec = LagSpec::all_months(vec![1]).unwrap();
        let a = sample_trajectories(&post, &spec, &[0.3], 5, 50, 1).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| sample_trajectories(&post, &spec, &[0.3], 5, 50, 1).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn horizon_one_is_plain_out_of_sample_fit() {
        let series = ar1_series(300, 6);
        let spec = LagSpec::all_months(vec![1, 2]).unwrap();
        let cfg = quick_config();
        let bt = backtest_horizons(&series, &spec, &cfg, 2.0 / 3.0, 1, 3, Feedback::Mean, 9).unwrap();

        let data = build_lag_matrix(&series, &spec).unwrap();
        let mask = random_split(data.n_rows(), 2.0 / 3.0, 9).unwrap();
        let post = fit(&data, &mask, &cfg, 9).unwrap();
        let test = mask.test_indices();
        let pred: Vec<f64> = test.iter().map(|&i| post.predict_mean(data.row(i)).unwrap()).collect();
        let actual: Vec<f64> = test.iter().map(|&i| data.targets()[i]).collect();
        assert_eq!(bt.rows[0].stats, fit_stats(&pred, &actual).unwrap());
        assert!(bt.rows.windows(2).all(|w| w[1].stats.n <= w[0].stats.n));
    }

    #[test]
    fn ar_scoring_matches_closed_form_forecasts() {
        let series = ar1_series(120, 3);
        let spec = LagSpec::all_months(vec![1]).unwrap();
        let model = ArModel { lags: vec![1], intercept: 0.0, coefficients: vec![0.5], residual_sd: 1.0 };
        let targets = [10usize, 50, 119];
        let bt = score_horizons(&model, &spec, series.values(), &targets, 2, Feedback::Mean).unwrap();
        assert_eq!(bt.rows[0].stats.n, 3);
        assert_eq!(bt.rows[1].stats.n, 2);
        let v = series.values();
        let pred: Vec<f64> = [10usize, 50].iter().map(|&t| 0.25 * v[t - 1]).collect();
        let act: Vec<f64> = [11usize, 51].iter().map(|&t| v[t]).collect();
        let expect = fit_stats(&pred, &act).unwrap();
        assert!((bt.rows[1].stats.rmse - expect.rmse).abs() < 1e-12);
    }

    #[test]
    fn csv_layouts() {
        let bt = HorizonBacktest {
            rows: vec![HorizonRow { horizon: 1, stats: FitStats { corr: 0.5, mae: 1.0, rmse: 2.0, n: 7 } }],
        };
        assert_eq!(bt.to_csv(), "horizon,corr,mae,rmse,n\n1,0.5,1,2,7\n");
        let res = ForecastResult {
            feedback: Feedback::Mean,
            refit_each_step: false,
            n_trajectories: 10,
            quantile_levels: vec![0.05, 0.5, 0.95],
            steps: vec![ForecastStep {
                stamp: MonthStamp::new(2009, 9).unwrap(),
                point: -1.5,
                quantiles: vec![-9.0, -1.0, 7.0],
            }],
        };
        assert_eq!(res.to_csv(), "year,month,point,q05,q50,q95\n2009,9,-1.5,-9,-1,7\n");
        assert_eq!(quantile_label(0.025), "q2.5");
    }

    #[test]
    fn config_validation() {
        assert!(ForecastConfig { horizon: 0, ..Default::default() }.validate().is_err());
        assert!(ForecastConfig { quantiles: vec![0.5, 0.25], ..Default::default() }.validate().is_err());
        assert!(ForecastConfig { quantiles: vec![0.0, 0.5], ..Default::default() }.validate().is_err());
        assert!(ForecastConfig::default().validate().is_ok());
    }
}
