//! Lag-regression datasets, random train/test splits and fit statistics.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{MonthStamp, TimeSeries};
use crate::rng::{stream_rng, STREAM_SPLIT};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DatasetError {
    #[error("invalid lag specification: {0}")]
    InvalidLags(String),
    #[error("series of length {len} is too short for a maximum lag of {max_lag}")]
    SeriesTooShort { len: usize, max_lag: usize },
    #[error("no target month is eligible under the lag specification")]
    NoEligibleRows,
    #[error("train fraction {0} must lie strictly between 0 and 1")]
    InvalidFraction(f64),
    #[error("split of {n} rows at fraction {fraction} leaves one side empty")]
    DegenerateSplit { n: usize, fraction: f64 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("predicted and actual lengths differ ({predicted} vs {actual})")]
    LengthMismatch { predicted: usize, actual: usize },
    #[error("at least two observations are required, got {0}")]
    TooFew(usize),
    #[error("actual values are constant; correlation undefined (mae {mae}, rmse {rmse})")]
    ConstantActuals { mae: f64, rmse: f64 },
    #[error("no statistics to average")]
    EmptyInput,
}

/// Which months prior to each target enter as features.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LagSpec {
    lags: Vec<usize>,
    target_month: Option<u32>,
}

impl LagSpec {
    pub fn new(lags: Vec<usize>, target_month: Option<u32>) -> Result<Self, DatasetError> {
        if lags.is_empty() {
            return Err(DatasetError::InvalidLags("no lags".into()));
        }
        if lags[0] == 0 {
            return Err(DatasetError::InvalidLags("lags must be positive".into()));
        }
        if lags.windows(2).any(|w| w[0] >= w[1]) {
            return Err(DatasetError::InvalidLags("lags must be strictly increasing".into()));
        }
        if let Some(m) = target_month {
            if !(1..=12).contains(&m) {
                return Err(DatasetError::InvalidLags(format!("target month {m} not in 1..=12")));
            }
        }
        Ok(Self { lags, target_month })
    }

    /// Same lags, no calendar filter.
    pub fn all_months(lags: Vec<usize>) -> Result<Self, DatasetError> {
        Self::new(lags, None)
    }

    pub fn lags(&self) -> &[usize] {
        &self.lags
    }

    pub fn target_month(&self) -> Option<u32> {
        self.target_month
    }

    pub fn max_lag(&self) -> usize {
        *self.lags.last().expect("non-empty")
    }

    pub fn with_target_month(mut self, month: Option<u32>) -> Result<Self, DatasetError> {
        self.target_month = month;
        Self::new(self.lags, self.target_month)
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.lags.iter().map(|l| format!("lag_{l}")).collect()
    }

    /// Feature vector for the month following the end of `history`.
    pub fn features_after(&self, history: &[f64]) -> Option<Vec<f64>> {
        let n = history.len();
        (n >= self.max_lag()).then(|| self.lags.iter().map(|l| history[n - l]).collect())
    }
}

impl FromStr for LagSpec {
    type Err = DatasetError;

    /// Parses lag lists such as `1..12,41,73` (ranges are inclusive).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = |part: &str| DatasetError::InvalidLags(format!("cannot parse `{part}`"));
        let mut lags = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            if let Some((lo, hi)) = part.split_once("..") {
                let lo: usize = lo.trim().parse().map_err(|_| bad(part))?;
                let hi: usize = hi.trim().trim_start_matches('=').parse().map_err(|_| bad(part))?;
                if lo > hi {
                    return Err(bad(part));
                }
                lags.extend(lo..=hi);
            } else {
                lags.push(part.parse().map_err(|_| bad(part))?);
            }
        }
        LagSpec::new(lags, None)
    }
}

impl fmt::Display for LagSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        let mut i = 0;
        while i < self.lags.len() {
            let mut j = i;
            while j + 1 < self.lags.len() && self.lags[j + 1] == self.lags[j] + 1 {
                j += 1;
            }
            if j > i {
                parts.push(format!("{}..{}", self.lags[i], self.lags[j]));
            } else {
                parts.push(self.lags[i].to_string());
            }
            i = j + 1;
        }
        write!(f, "{}", parts.join(","))
    }
}

/// Row-major lag feature matrix with one target per row.
#[derive(Debug, Clone, PartialEq)]
pub struct SupervisedDataset {
    feature_names: Vec<String>,
    lags: Vec<usize>,
    features: Vec<f64>,
    targets: Vec<f64>,
    target_stamps: Vec<MonthStamp>,
    target_indices: Vec<usize>,
}

impl SupervisedDataset {
    /// Builds a dataset from explicit rows; used by tests and synthetic data.
    pub fn from_rows(feature_names: Vec<String>, rows: &[Vec<f64>], targets: Vec<f64>) -> Result<Self, DatasetError> {
        let p = feature_names.len();
        if rows.is_empty() || rows.len() != targets.len() || rows.iter().any(|r| r.len() != p) {
            return Err(DatasetError::NoEligibleRows);
        }
        let start = MonthStamp::new(2000, 1).expect("valid");
        Ok(Self {
            lags: (1..=p).collect(),
            feature_names,
            features: rows.concat(),
            target_stamps: (0..targets.len()).map(|i| start.add_months(i as i64)).collect(),
            target_indices: (0..targets.len()).collect(),
            targets,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.targets.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn lags(&self) -> &[usize] {
        &self.lags
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.n_features();
        &self.features[i * p..(i + 1) * p]
    }

    pub fn feature(&self, i: usize, j: usize) -> f64 {
        self.features[i * self.n_features() + j]
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn target_stamps(&self) -> &[MonthStamp] {
        &self.target_stamps
    }

    /// Position of each row's target within the source series.
    pub fn target_indices(&self) -> &[usize] {
        &self.target_indices
    }

    pub fn with_feature_names(mut self, names: Vec<String>) -> Self {
        assert_eq!(names.len(), self.n_features());
        self.feature_names = names;
        self
    }

    /// CSV with `lag_<k>` feature columns followed by `target,year,month`.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for l in &self.lags {
            out.push_str(&format!("lag_{l},"));
        }
        out.push_str("target,year,month\n");
        for i in 0..self.n_rows() {
            for v in self.row(i) {
                out.push_str(&format!("{v},"));
            }
            let s = self.target_stamps[i];
            out.push_str(&format!("{},{},{}\n", self.targets[i], s.year(), s.month()));
        }
        out
    }
}

/// One row per eligible target month; column `j` holds the value `lags[j]`
/// months before the target.
pub fn build_lag_matrix(series: &TimeSeries, spec: &LagSpec) -> Result<SupervisedDataset, DatasetError> {
    let values = series.values();
    let max_lag = spec.max_lag();
    if values.len() <= max_lag {
        return Err(DatasetError::SeriesTooShort { len: values.len(), max_lag });
    }
    let mut features = Vec::new();
    let mut targets = Vec::new();
    let mut target_stamps = Vec::new();
    let mut target_indices = Vec::new();
    for t in max_lag..values.len() {
        let stamp = series.stamp_at(t);
        if spec.target_month.is_some_and(|m| m != stamp.month()) {
            continue;
        }
        features.extend(spec.lags.iter().map(|l| values[t - l]));
        targets.push(values[t]);
        target_stamps.push(stamp);
        target_indices.push(t);
    }
    if targets.is_empty() {
        return Err(DatasetError::NoEligibleRows);
    }
    Ok(SupervisedDataset {
        feature_names: spec.feature_names(),
        lags: spec.lags.clone(),
        features,
        targets,
        target_stamps,
        target_indices,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitMask {
    assignment: Vec<Split>,
    seed: u64,
    train_fraction: f64,
}

impl SplitMask {
    /// Every row in training; used for final refits on all data.
    pub fn all_train(n: usize) -> Self {
        Self { assignment: vec![Split::Train; n], seed: 0, train_fraction: 1.0 }
    }

    pub fn from_assignment(assignment: Vec<Split>) -> Self {
        let n = assignment.len().max(1);
        let train = assignment.iter().filter(|s| **s == Split::Train).count();
        Self { assignment, seed: 0, train_fraction: train as f64 / n as f64 }
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    pub fn assignment(&self) -> &[Split] {
        &self.assignment
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn train_fraction(&self) -> f64 {
        self.train_fraction
    }

    pub fn is_train(&self, i: usize) -> bool {
        self.assignment[i] == Split::Train
    }

    pub fn train_indices(&self) -> Vec<usize> {
        self.indices(Split::Train)
    }

    pub fn test_indices(&self) -> Vec<usize> {
        self.indices(Split::Test)
    }

    pub fn n_train(&self) -> usize {
        self.assignment.iter().filter(|s| **s == Split::Train).count()
    }

    fn indices(&self, which: Split) -> Vec<usize> {
        (0..self.assignment.len()).filter(|&i| self.assignment[i] == which).collect()
    }
}

/// Number of training rows for `n` rows at `fraction`: floor(n·f + 0.5).
pub fn train_count(n: usize, fraction: f64) -> usize {
    (n as f64 * fraction + 0.5).floor() as usize
}

/// Uniform sample of `train_count(n, fraction)` rows without replacement.
pub fn random_split(n: usize, train_fraction: f64, seed: u64) -> Result<SplitMask, DatasetError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(DatasetError::InvalidFraction(train_fraction));
    }
    let n_train = train_count(n, train_fraction);
    if n < 2 || n_train == 0 || n_train >= n {
        return Err(DatasetError::DegenerateSplit { n, fraction: train_fraction });
    }
    let mut rng = stream_rng(seed, STREAM_SPLIT);
    let mut assignment = vec![Split::Test; n];
    for i in rand::seq::index::sample(&mut rng, n, n_train) {
        assignment[i] = Split::Train;
    }
    Ok(SplitMask { assignment, seed, train_fraction })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitStats {
    pub corr: f64,
    pub mae: f64,
    pub rmse: f64,
    pub n: usize,
}

/// Pearson correlation, mean absolute error and root mean square error.
///
/// A constant prediction vector has no linear association with the actuals
/// and is reported with `corr = 0`.
pub fn fit_stats(predicted: &[f64], actual: &[f64]) -> Result<FitStats, StatsError> {
    if predicted.len() != actual.len() {
        return Err(StatsError::LengthMismatch { predicted: predicted.len(), actual: actual.len() });
    }
    let n = actual.len();
    if n < 2 {
        return Err(StatsError::TooFew(n));
    }
    let nf = n as f64;
    let mae = predicted.iter().zip(actual).map(|(p, a)| (p - a).abs()).sum::<f64>() / nf;
    let rmse = (predicted.iter().zip(actual).map(|(p, a)| (p - a).powi(2)).sum::<f64>() / nf).sqrt();

    let mean_p = predicted.iter().sum::<f64>() / nf;
    let mean_a = actual.iter().sum::<f64>() / nf;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (p, a) in predicted.iter().zip(actual) {
        let (dp, da) = (p - mean_p, a - mean_a);
        sxy += dp * da;
        sxx += dp * dp;
        syy += da * da;
    }
    if syy == 0.0 {
        return Err(StatsError::ConstantActuals { mae, rmse });
    }
    let corr = if sxx == 0.0 { 0.0 } else { (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0) };
    Ok(FitStats { corr, mae, rmse, n })
}

/// Unweighted mean of each statistic across runs; `n` is the rounded mean count.
pub fn average_stats(stats: &[FitStats]) -> Result<FitStats, StatsError> {
    if stats.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    let k = stats.len() as f64;
    Ok(FitStats {
        corr: stats.iter().map(|s| s.corr).sum::<f64>() / k,
        mae: stats.iter().map(|s| s.mae).sum::<f64>() / k,
        rmse: stats.iter().map(|s| s.rmse).sum::<f64>() / k,
        n: (stats.iter().map(|s| s.n as f64).sum::<f64>() / k).round() as usize,
    })
}
