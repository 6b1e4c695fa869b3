//! `soi-bart`: reproduce the SOI experiments from the command line.
//!
//! Exit status is 0 on success, 2 for usage errors and 1 for data or model
//! errors. Output files land in `--out` (default: the working directory).

mod args;
mod output;
mod svg;

use std::path::Path;
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::error::ErrorKind;
use clap::{CommandFactory, Parser};
use soibart::forecast::ForecastStep;
use soibart::harness::tree_sweep;
use soibart::spectral::{white_noise_check, DEFAULT_MAX_LAG};
use soibart::{
    backtest_suite, build_lag_matrix, correlogram, find_preset, fit_ar, forecast_ar, iterate_forecast, parse_auto,
    periodogram, random_split, run_preset, variable_importance, BacktestOptions, BartConfig, Feedback, ForecastConfig,
    ForecastResult, IngestError, LagSpec, MissingPolicy, MonthStamp, PresetReport, RunOptions, SplitMask, TimeSeries,
};

use args::{BacktestArgs, Cli, Command, Common, DiagnoseArgs, ForecastArgs, Model, PresetArgs, Sampler, SelectArgs};
use output::Output;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest { common } => ingest(&common),
        Command::Preset(a) => preset(&a),
        Command::Select(a) => select(&a),
        Command::Backtest(a) => backtest(&a),
        Command::Forecast(a) => forecast(&a),
        Command::Diagnose(a) => diagnose(&a),
    }
}

/// Reports a flag combination clap cannot check and exits with status 2.
fn usage_error(message: impl std::fmt::Display) -> ! {
    Cli::command().error(ErrorKind::ValueValidation, message).exit()
}

fn setup(common: &Common) -> Result<(TimeSeries, Output)> {
    if let Some(jobs) = common.jobs {
        rayon::ThreadPoolBuilder::new().num_threads(jobs as usize).build_global().ok();
    }
    if let (Some(s), Some(e)) = (common.start, common.end) {
        if s > e {
            usage_error(format!("--start {s} is after --end {e}"));
        }
    }
    let series = load_series(common)?;
    Ok((series, Output::new(&common.out, common.format)?))
}

fn missing_policy(common: &Common) -> MissingPolicy {
    let defaults = MissingPolicy::default();
    MissingPolicy {
        tokens: if common.missing_tokens.is_empty() { defaults.tokens } else { common.missing_tokens.clone() },
        values: if common.missing_values.is_empty() { defaults.values } else { common.missing_values.clone() },
        max_abs: (!common.no_max_abs).then_some(common.max_abs),
    }
}

fn load_series(common: &Common) -> Result<TimeSeries> {
    let path = &common.data;
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let full = parse_auto(&text, &missing_policy(common)).map_err(|e| data_error(path, &text, &e))?;
    let start = common.start.unwrap_or(full.start());
    let end = common.end.unwrap_or(full.end());
    full.slice(start, end).map_err(|e| anyhow!("{}: {e}", path.display()))
}

/// `file:line: message`, with the line recovered for interior gaps.
fn data_error(path: &Path, text: &str, err: &IngestError) -> anyhow::Error {
    let line = match err {
        IngestError::MalformedLine { line, .. }
        | IngestError::NonConsecutiveYears { line, .. }
        | IngestError::UnsortedRows { line } => Some(*line),
        IngestError::InteriorGap { stamp } => line_of(text, *stamp),
        _ => None,
    };
    let message = err.to_string();
    match line {
        Some(n) => {
            let message = message.strip_prefix(&format!("line {n}: ")).unwrap_or(&message);
            anyhow!("{}:{n}: {message}", path.display())
        }
        None => anyhow!("{}: {message}", path.display()),
    }
}

fn line_of(text: &str, stamp: MonthStamp) -> Option<usize> {
    let year = stamp.year().to_string();
    let csv_prefix = format!("{},{},", stamp.year(), stamp.month());
    text.lines()
        .position(|l| {
            let l = l.trim();
            l.starts_with(&csv_prefix) || l.split_whitespace().next() == Some(year.as_str())
        })
        .map(|i| i + 1)
}

fn bart_config(sampler: &Sampler, trees: Option<u32>) -> BartConfig {
    let base = BartConfig::default();
    let config = BartConfig {
        m: trees.map_or(base.m, |m| m as usize),
        n_iter: sampler.iters.map_or(base.n_iter, |n| n as usize),
        burn_in: sampler.burn_in.map_or(base.burn_in, |n| n as usize),
        ..base
    };
    if let Err(e) = config.validate() {
        usage_error(e);
    }
    config
}

fn announce(path: &Path) {
    println!("wrote {}", path.display());
}

fn ingest(common: &Common) -> Result<()> {
    let (series, out) = setup(common)?;
    println!(
        "{}: {} months, {}..{}, mean {:.3}, variance {:.3}",
        common.data.display(),
        series.len(),
        series.start(),
        series.end(),
        series.mean(),
        series.variance()
    );
    announce(&out.table("series", &series.to_csv())?);
    Ok(())
}

fn write_report(out: &Output, stem: &str, report: &PresetReport) -> Result<()> {
    let text = report.to_text();
    println!("{text}");
    announce(&out.table(stem, &report.to_csv())?);
    if let Some(imp) = &report.importance {
        announce(&out.table(&format!("{stem}-importance"), &imp.to_csv())?);
    }
    announce(&out.file(&format!("{stem}.txt"), &text)?);
    Ok(())
}

fn preset(a: &PresetArgs) -> Result<()> {
    let preset = find_preset(&a.name)?;
    let options = RunOptions {
        base_config: bart_config(&a.sampler, None),
        trees: a.trees.map(|m| m as usize),
        runs: a.runs.map(|r| r as usize),
        train_fraction: a.train_fraction,
        horizon: a.horizon.map(|h| h as usize),
        best_of: a.best_of,
    };
    let (series, out) = setup(&a.common)?;
    if a.sweep.is_empty() {
        let report = run_preset(&preset, &series, a.common.seed, &options)?;
        return write_report(&out, preset.name, &report);
    }
    let counts: Vec<usize> = a.sweep.iter().map(|&m| m as usize).collect();
    for report in tree_sweep(&preset, &series, a.common.seed, &options, &counts)? {
        write_report(&out, &format!("{}-m{}", preset.name, report.m), &report)?;
    }
    Ok(())
}

fn select(a: &SelectArgs) -> Result<()> {
    let config = bart_config(&a.sampler, Some(a.trees));
    let (series, out) = setup(&a.common)?;
    let spec = a.lags.clone().with_target_month(a.month)?;
    let data = build_lag_matrix(&series, &spec)?;
    let mask = match a.train_fraction {
        Some(f) => random_split(data.n_rows(), f, a.common.seed)?,
        None => SplitMask::all_train(data.n_rows()),
    };
    let report = variable_importance(&data, &mask, &config, a.runs as usize, a.common.seed)?;
    println!("lags {spec}, m = {}, {} runs, {} training rows", config.m, a.runs, mask.n_train());
    println!("{:<10} {:>10}", "Variable", "Importance");
    for (name, v) in report.feature_names.iter().zip(&report.importance) {
        println!("{name:<10} {v:>10.2}");
    }
    announce(&out.table("importance", &report.to_csv())?);
    Ok(())
}

fn backtest(a: &BacktestArgs) -> Result<()> {
    let config = bart_config(&a.sampler, Some(a.trees));
    let options = BacktestOptions {
        horizon: a.horizon as usize,
        train_fraction: a.train_fraction,
        runs: a.runs as usize,
        feedbacks: a.feedback.clone(),
        include_ar: !a.no_ar,
    };
    let (series, out) = setup(&a.common)?;
    let suite = backtest_suite(&series, &a.lags, &config, &options, a.common.seed)?;
    let residuals = suite.one_step_residuals.clone();
    let report = PresetReport {
        name: "backtest".into(),
        lags: a.lags.to_string(),
        m: config.m,
        runs: options.runs,
        train_fraction: options.train_fraction,
        fits: None,
        importance: None,
        backtest: Some(suite),
    };
    write_report(&out, "backtest", &report)?;

    let max_lag = DEFAULT_MAX_LAG.min(residuals.len().saturating_sub(1));
    let c = correlogram(&residuals, max_lag).context("one-step residual correlogram")?;
    let check = white_noise_check(&residuals, max_lag)?;
    println!(
        "one-step residuals (run 0, n = {}): {:.1}% of lags 1..{max_lag} inside ±1.96/√n, white noise: {}",
        residuals.len(),
        100.0 * check.fraction_within_bands,
        if check.pass { "yes" } else { "no" }
    );
    announce(&out.table("residual-correlogram", &c.to_csv())?);
    announce(&out.file("residual-correlogram.svg", &svg::correlogram(&c, "One-step BART residuals"))?);
    Ok(())
}

fn forecast(a: &ForecastArgs) -> Result<()> {
    let config = bart_config(&a.sampler, Some(a.trees));
    let mut quantiles = a.quantiles.clone();
    quantiles.sort_by(f64::total_cmp);
    quantiles.dedup();
    let fconfig = ForecastConfig {
        horizon: a.horizon as usize,
        feedback: a.feedback,
        n_trajectories: a.trajectories as usize,
        quantiles,
        refit_each_step: a.refit,
        refit_trajectories: a.refit_trajectories,
    };
    if let Err(e) = fconfig.validate() {
        usage_error(e);
    }
    let (series, out) = setup(&a.common)?;
    let (result, title) = match a.model {
        Model::Bart => (
            iterate_forecast(&series, &a.lags, &config, &fconfig, a.common.seed)?,
            format!("BART forecast from {} ({} feedback)", series.end(), a.feedback),
        ),
        Model::Ar => (ar_forecast(&series, &a.lags, fconfig.horizon)?, format!("AR forecast from {}", series.end())),
    };
    let csv = result.to_csv();
    print!("{csv}");
    announce(&out.table("forecast", &csv)?);
    announce(&out.file("forecast.svg", &svg::fan_chart(&series, &result, a.plot_history, &title))?);
    Ok(())
}

/// AR fitted on every row with the lag spec's month filter dropped, as for
/// BART forecasts; point forecasts only.
fn ar_forecast(series: &TimeSeries, lags: &LagSpec, horizon: usize) -> Result<ForecastResult> {
    let spec = lags.clone().with_target_month(None)?;
    let data = build_lag_matrix(series, &spec)?;
    let model = fit_ar(&data, &SplitMask::all_train(data.n_rows()))?;
    let points = forecast_ar(&model, series.values(), horizon)?;
    Ok(ForecastResult {
        feedback: Feedback::Mean,
        refit_each_step: false,
        n_trajectories: 0,
        quantile_levels: Vec::new(),
        steps: points
            .into_iter()
            .enumerate()
            .map(|(h, point)| ForecastStep {
                stamp: series.end().add_months(h as i64 + 1),
                point,
                quantiles: Vec::new(),
            })
            .collect(),
    })
}

fn diagnose(a: &DiagnoseArgs) -> Result<()> {
    let (series, out) = setup(&a.common)?;
    let values = series.values();
    let p = periodogram(values)?;
    let c = correlogram(values, a.max_lag)?;
    let span = format!("{}..{}", series.start(), series.end());
    println!(
        "{span}: {} months, peak period {:.1} months, {:.1}% of lags 1..{} inside ±1.96/√n",
        series.len(),
        1.0 / p.peak_frequency(),
        100.0 * white_noise_check(values, a.max_lag)?.fraction_within_bands,
        a.max_lag
    );
    announce(&out.table("periodogram", &p.to_csv())?);
    announce(&out.file("periodogram.svg", &svg::periodogram(&p, &format!("Periodogram, {span}")))?);
    announce(&out.table("correlogram", &c.to_csv())?);
    announce(&out.file("correlogram.svg", &svg::correlogram(&c, &format!("Correlogram, {span}")))?);
    Ok(())
}
