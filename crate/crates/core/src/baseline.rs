//! Linear autoregression fitted by least squares on a lag matrix.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{SplitMask, SupervisedDataset};
use crate::linalg::ols;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ArError {
    #[error("{n_train} training rows; more than {} required", .order + 1)]
    TooFewRows { n_train: usize, order: usize },
    #[error("design matrix is rank deficient")]
    RankDeficient,
    #[error("split mask covers {mask} rows but the dataset has {rows}")]
    MaskMismatch { mask: usize, rows: usize },
    #[error("history has {got} values, model needs {needed}")]
    ShortHistory { needed: usize, got: usize },
}

/// `y_t = intercept + Σ_i coefficients[i] · y_{t − lags[i]} + e_t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArModel {
    pub lags: Vec<usize>,
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub residual_sd: f64,
}

impl ArModel {
    pub fn order(&self) -> usize {
        self.coefficients.len()
    }

    fn max_lag(&self) -> usize {
        self.lags.iter().copied().max().unwrap_or(0)
    }

    /// One-step prediction from a history whose last value is the most recent.
    pub fn predict_next(&self, history: &[f64]) -> Result<f64, ArError> {
        if history.len() < self.max_lag() {
            return Err(ArError::ShortHistory { needed: self.max_lag(), got: history.len() });
        }
        let n = history.len();
        Ok(self.intercept + self.lags.iter().zip(&self.coefficients).map(|(&l, c)| c * history[n - l]).sum::<f64>())
    }

    /// Prediction from a lag feature vector ordered like `lags`.
    pub fn predict_features(&self, features: &[f64]) -> f64 {
        self.intercept + self.coefficients.iter().zip(features).map(|(c, x)| c * x).sum::<f64>()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }
}

/// Least squares with intercept on the Train rows.
pub fn fit_ar(dataset: &SupervisedDataset, mask: &SplitMask) -> Result<ArModel, ArError> {
    if mask.len() != dataset.n_rows() {
        return Err(ArError::MaskMismatch { mask: mask.len(), rows: dataset.n_rows() });
    }
    let train = mask.train_indices();
    let p = dataset.n_features();
    if train.len() <= p + 1 {
        return Err(ArError::TooFewRows { n_train: train.len(), order: p });
    }
    let rows: Vec<&[f64]> = train.iter().map(|&i| dataset.row(i)).collect();
    let y: Vec<f64> = train.iter().map(|&i| dataset.targets()[i]).collect();
    let fit = ols(&rows, &y).ok_or(ArError::RankDeficient)?;
    Ok(ArModel {
        lags: dataset.lags().to_vec(),
        intercept: fit.intercept,
        coefficients: fit.coefficients,
        residual_sd: (fit.rss / (train.len() - p - 1) as f64).sqrt(),
    })
}

/// Iterated plug-in forecasts; each point forecast becomes the newest lag.
pub fn forecast_ar(model: &ArModel, history: &[f64], horizon: usize) -> Result<Vec<f64>, ArError> {
    let mut window = history.to_vec();
    let mut out = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let next = model.predict_next(&window)?;
        window.push(next);
        out.push(next);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{build_lag_matrix, LagSpec};
    use crate::ingest::{MonthStamp, TimeSeries};
    use crate::rng::stream_rng;
    use rand::Rng as _;
    use rand_distr::StandardNormal;

    fn simulate(phi: &[f64], n: usize, seed: u64) -> TimeSeries {
        let mut rng = stream_rng(seed, 3);
        let mut y = vec![0.0; n + 200];
        for t in phi.len()..y.len() {
            let e: f64 = rng.sample(StandardNormal);
            y[t] = phi.iter().enumerate().map(|(i, p)| p * y[t - 1 - i]).sum::<f64>() + e;
        }
        TimeSeries::new(MonthStamp::new(1900, 1).unwrap(), y[200..].to_vec()).unwrap()
    }

    fn fit_series(series: &TimeSeries, lags: Vec<usize>) -> ArModel {
        let spec = LagSpec::all_months(lags).unwrap();
        let data = build_lag_matrix(series, &spec).unwrap();
        fit_ar(&data, &SplitMask::all_train(data.n_rows())).unwrap()
    }

    #[test]
    fn ar1_coefficient_is_recovered() {
        let model = fit_series(&simulate(&[0.5], 10_000, 1), vec![1]);
        assert!((0.45..=0.55).contains(&model.coefficients[0]), "{:?}", model);
        assert!((model.residual_sd - 1.0).abs() < 0.05);
    }

    #[test]
    fn white_noise_gives_small_coefficients() {
        let model = fit_series(&simulate(&[], 10_000, 2), (1..=5).collect());
        assert!(model.coefficients.iter().all(|c| c.abs() < 0.05), "{:?}", model);
    }

    #[test]
    fn period_two_series_is_rank_deficient() {
        // y_t = y_{t-2} forces lag_1 + lag_2 to be constant, so with an
        // intercept the design has no unique least-squares solution.
        let values: Vec<f64> = (0..60).map(|t| if t % 2 == 0 { 3.0 } else { -1.0 }).collect();
        let series = TimeSeries::new(MonthStamp::new(2000, 1).unwrap(), values).unwrap();
        let spec = LagSpec::all_months(vec![1, 2]).unwrap();
        let data = build_lag_matrix(&series, &spec).unwrap();
        assert_eq!(fit_ar(&data, &SplitMask::all_train(data.n_rows())), Err(ArError::RankDeficient));
    }

    #[test]
    fn too_few_rows() {
        let series = simulate(&[0.3], 7, 5);
        let spec = LagSpec::all_months(vec![1, 2, 3]).unwrap();
        let data = build_lag_matrix(&series, &spec).unwrap();
        assert!(matches!(
            fit_ar(&data, &SplitMask::all_train(data.n_rows())),
            Err(ArError::TooFewRows { n_train: 4, order: 3 })
        ));
    }

    #[test]
    fn forecast_closed_forms() {
        let flat = ArModel { lags: vec![1, 2], intercept: 2.5, coefficients: vec![0.0, 0.0], residual_sd: 1.0 };
        assert_eq!(forecast_ar(&flat, &[9.0, -3.0], 4).unwrap(), vec![2.5; 4]);

        let ar1 = ArModel { lags: vec![1], intercept: 0.0, coefficients: vec![0.7], residual_sd: 1.0 };
        let f = forecast_ar(&ar1, &[5.0, 2.0], 6).unwrap();
        for (h, v) in f.iter().enumerate() {
            assert!((v - 0.7f64.powi(h as i32 + 1) * 2.0).abs() < 1e-12);
        }

        let ar2 = ArModel { lags: vec![1, 2], intercept: 1.0, coefficients: vec![0.5, 0.2], residual_sd: 1.0 };
        let long = forecast_ar(&ar2, &[4.0, -6.0], 200).unwrap();
        assert!((long[199] - 1.0 / (1.0 - 0.7)).abs() < 1e-9);

        assert!(matches!(forecast_ar(&ar2, &[1.0], 1), Err(ArError::ShortHistory { .. })));
    }

    #[test]
    fn json_export_has_model_fields() {
        let m = ArModel { lags: vec![1, 2], intercept: 0.1, coefficients: vec![0.5, -0.2], residual_sd: 1.5 };
        let v: serde_json::Value = serde_json::from_str(&m.to_json()).unwrap();
        assert_eq!(v["coefficients"][1], -0.2);
        assert_eq!(serde_json::from_str::<ArModel>(&m.to_json()).unwrap(), m);
    }
}
