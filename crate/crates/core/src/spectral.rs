//! Periodogram, correlograms and a band-count white-noise check.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_MAX_LAG: usize = 36;
const WHITE_NOISE_PASS_FRACTION: f64 = 0.90;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectralError {
    #[error("series has {len} values; at least {min} required")]
    TooShort { len: usize, min: usize },
    #[error("max lag {lag} must be below n/2 = {half}")]
    LagTooLarge { lag: usize, half: f64 },
    #[error("series is constant")]
    ConstantSeries,
}

/// Raw periodogram at the Fourier frequencies `k/n`, `k = 1..=n/2`.
///
/// With `I(f_k) = |Σ_t (y_t − ȳ) e^{−2πi k t / n}|² / n`, Parseval gives
/// `Σ_t (y_t − ȳ)² = 2·Σ_{k<n/2} I(f_k) + I(1/2)`, the Nyquist ordinate
/// (even `n` only) counted once.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Periodogram {
    pub n: usize,
    pub frequencies: Vec<f64>,
    pub power: Vec<f64>,
}

impl Periodogram {
    /// Biased sample variance reconstructed from the ordinates.
    pub fn parseval_variance(&self) -> f64 {
        let mut total = 0.0;
        for (k, p) in self.power.iter().enumerate() {
            let nyquist = self.n & 1 == 0 && k + 1 == self.n / 2;
            total += if nyquist { *p } else { 2.0 * p };
        }
        total / self.n as f64
    }

    pub fn peak_frequency(&self) -> f64 {
        let i = (0..self.power.len()).fold(0, |b, i| if self.power[i] > self.power[b] { i } else { b });
        self.frequencies[i]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("frequency,period,power\n");
        for (f, p) in self.frequencies.iter().zip(&self.power) {
            out.push_str(&format!("{f},{},{p}\n", 1.0 / f));
        }
        out
    }
}

pub fn periodogram(values: &[f64]) -> Result<Periodogram, SpectralError> {
    let n = values.len();
    if n < 4 {
        return Err(SpectralError::TooShort { len: n, min: 4 });
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex<f64>> = values.iter().map(|v| Complex::new(v - mean, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let half = n / 2;
    Ok(Periodogram {
        n,
        frequencies: (1..=half).map(|k| k as f64 / n as f64).collect(),
        power: (1..=half).map(|k| buf[k].norm_sqr() / n as f64).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Correlogram {
    pub n: usize,
    /// Values at lags `1..=L`.
    pub acf: Vec<f64>,
    pub pacf: Vec<f64>,
    pub band: f64,
}

impl Correlogram {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("lag,acf,pacf,band\n");
        for (k, (a, p)) in self.acf.iter().zip(&self.pacf).enumerate() {
            out.push_str(&format!("{},{a},{p},{}\n", k + 1, self.band));
        }
        out
    }
}

/// Sample autocorrelations at lags `1..=max_lag` with the biased `1/n`
/// autocovariance.
pub fn acf(values: &[f64], max_lag: usize) -> Result<Vec<f64>, SpectralError> {
    let n = values.len();
    if n < 2 {
        return Err(SpectralError::TooShort { len: n, min: 2 });
    }
    if max_lag as f64 >= n as f64 / 2.0 {
        return Err(SpectralError::LagTooLarge { lag: max_lag, half: n as f64 / 2.0 });
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let d: Vec<f64> = values.iter().map(|v| v - mean).collect();
    let c0: f64 = d.iter().map(|x| x * x).sum();
    if c0 <= 0.0 {
        return Err(SpectralError::ConstantSeries);
    }
    Ok((1..=max_lag).map(|k| d[..n - k].iter().zip(&d[k..]).map(|(a, b)| a * b).sum::<f64>() / c0).collect())
}

/// Partial autocorrelations from autocorrelations at lags `1..=L` by the
/// Durbin–Levinson recursion.
pub fn pacf_from_acf(rho: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(rho.len());
    let mut phi: Vec<f64> = Vec::new();
    for k in 1..=rho.len() {
        let num = rho[k - 1] - (1..k).map(|j| phi[j - 1] * rho[k - j - 1]).sum::<f64>();
        let den = 1.0 - (1..k).map(|j| phi[j - 1] * rho[j - 1]).sum::<f64>();
        let a = if den.abs() > 0.0 { num / den } else { 0.0 };
        let mut next = vec![0.0; k];
        for j in 1..k {
            next[j - 1] = phi[j - 1] - a * phi[k - j - 1];
        }
        next[k - 1] = a;
        phi = next;
        out.push(a);
    }
    out
}

pub fn correlogram(values: &[f64], max_lag: usize) -> Result<Correlogram, SpectralError> {
    let a = acf(values, max_lag)?;
    let p = pacf_from_acf(&a);
    Ok(Correlogram { n: values.len(), acf: a, pacf: p, band: 1.96 / (values.len() as f64).sqrt() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WhiteNoiseCheck {
    pub fraction_within_bands: f64,
    pub pass: bool,
}

/// Fraction of residual autocorrelations at lags `1..=max_lag` inside
/// `±1.96/√n`; passes at 90%.
pub fn white_noise_check(residuals: &[f64], max_lag: usize) -> Result<WhiteNoiseCheck, SpectralError> {
    if residuals.len() < 30 {
        return Err(SpectralError::TooShort { len: residuals.len(), min: 30 });
    }
    let c = correlogram(residuals, max_lag)?;
    let inside = c.acf.iter().filter(|r| r.abs() <= c.band).count();
    let fraction = inside as f64 / max_lag as f64;
    Ok(WhiteNoiseCheck { fraction_within_bands: fraction, pass: fraction >= WHITE_NOISE_PASS_FRACTION })
}
