//! Shared fixtures for the benchmarks.

use rand::Rng as _;
use rand_distr::StandardNormal;
use soibart::rng::stream_rng;
use soibart::{build_lag_matrix, LagSpec, MonthStamp, SupervisedDataset, TimeSeries};

/// AR(p) series with unit-variance Gaussian innovations scaled to SOI-like
/// magnitudes, after a 200-step burn-in.
pub fn ar_series(n: usize, phi: &[f64], seed: u64) -> TimeSeries {
    let mut rng = stream_rng(seed, 0);
    let p = phi.len();
    let mut y = vec![0.0; n + 200 + p];
    for t in p..y.len() {
        let e: f64 = rng.sample(StandardNormal);
        y[t] = phi.iter().enumerate().map(|(i, c)| c * y[t - 1 - i]).sum::<f64>() + 7.0 * e;
    }
    TimeSeries::new(MonthStamp::new(1876, 1).expect("valid stamp"), y[200 + p..].to_vec()).expect("finite values")
}

/// SOI-length series (704 months) with the persistence of the real index.
pub fn soi_like() -> TimeSeries {
    ar_series(704, &[0.55, 0.15, 0.05], 7)
}

pub fn lag_dataset(series: &TimeSeries, lags: &str) -> (LagSpec, SupervisedDataset) {
    let spec: LagSpec = lags.parse().expect("valid lag list");
    let data = build_lag_matrix(series, &spec).expect("series long enough");
    (spec, data)
}
