//! Bayesian additive regression trees: a sum of `m` small trees with
//! shrinkage priors, sampled by backfitting MCMC.

mod config;
pub(crate) mod cuts;
mod importance;
mod posterior;
mod sampler;

use statrs::distribution::{ChiSquared, ContinuousCDF};
use thiserror::Error;

pub use config::{BartConfig, MoveProbs};
pub use importance::{importance_from_posteriors, variable_importance, ImportanceReport};
pub use posterior::{BartPosterior, PosteriorDraw, PriorParams, TargetScaling};
pub use sampler::MoveCounts;

use crate::dataset::{SplitMask, SupervisedDataset};
use crate::linalg::ols;
use crate::rng::{stream_rng, STREAM_FIT};
use cuts::{BinnedFeatures, CutGrid};
use sampler::{Chain, ChainParams};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BartError {
    #[error("invalid BART configuration: {0}")]
    InvalidConfig(String),
    #[error("{n_train} training rows; at least {needed} required")]
    TooFewRows { n_train: usize, needed: usize },
    #[error("split mask covers {mask} rows but the dataset has {rows}")]
    MaskMismatch { mask: usize, rows: usize },
    #[error("feature vector has {got} entries, model expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("quantile {0} not in (0, 1)")]
    InvalidQuantile(f64),
    #[error("invalid posterior snapshot: {0}")]
    Snapshot(String),
    #[error("unsupported posterior snapshot version {0:?}")]
    UnsupportedVersion(Option<u64>),
}

/// Switches for test harnesses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FitOptions {
    /// When false the sampler ignores the data and draws from the prior.
    pub likelihood: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { likelihood: true }
    }
}

impl FitOptions {
    pub fn prior_only() -> Self {
        Self { likelihood: false }
    }
}

const SIGMA_FLOOR: f64 = 1e-3;

/// Fit on the Train rows of `mask`. Deterministic given `seed`.
pub fn fit(
    dataset: &SupervisedDataset,
    mask: &SplitMask,
    config: &BartConfig,
    seed: u64,
) -> Result<BartPosterior, BartError> {
    fit_with_options(dataset, mask, config, seed, FitOptions::default())
}

pub fn fit_with_options(
    dataset: &SupervisedDataset,
    mask: &SplitMask,
    config: &BartConfig,
    seed: u64,
    options: FitOptions,
) -> Result<BartPosterior, BartError> {
    config.validate()?;
    if mask.len() != dataset.n_rows() {
        return Err(BartError::MaskMismatch { mask: mask.len(), rows: dataset.n_rows() });
    }
    let train = mask.train_indices();
    let needed = 2 * config.min_leaf_size;
    if train.len() < needed {
        return Err(BartError::TooFewRows { n_train: train.len(), needed });
    }

    let p = dataset.n_features();
    let columns: Vec<Vec<f64>> = (0..p).map(|j| train.iter().map(|&i| dataset.feature(i, j)).collect()).collect();
    let raw_y: Vec<f64> = train.iter().map(|&i| dataset.targets()[i]).collect();
    let scaling = TargetScaling::from_targets(&raw_y);
    let y: Vec<f64> = raw_y.iter().map(|&v| scaling.to_standard(v)).collect();

    let grid = CutGrid::from_columns(&columns, config.cut_grid);
    let bins = BinnedFeatures::new(&columns, &grid);

    let rows: Vec<&[f64]> = train.iter().map(|&i| dataset.row(i)).collect();
    let sigma_hat = noise_estimate(&rows, &y).max(SIGMA_FLOOR);
    let chi = ChiSquared::new(config.nu).expect("nu validated positive");
    let lambda = sigma_hat * sigma_hat * chi.inverse_cdf(1.0 - config.q) / config.nu;
    let prior = PriorParams { tau: config.leaf_sd(), nu: config.nu, lambda, sigma_hat };

    let params =
        ChainParams { tau: prior.tau, nu: prior.nu, lambda, sigma_init: sigma_hat, use_likelihood: options.likelihood };
    let mut chain = Chain::new(config, &grid, &bins, p, &y, params, stream_rng(seed, STREAM_FIT));
    let mut draws = Vec::with_capacity(config.draws());
    for iter in 0..config.n_iter {
        chain.step();
        if iter >= config.burn_in {
            draws.push(PosteriorDraw { trees: chain.snapshot(), sigma: chain.sigma() });
        }
    }
    Ok(BartPosterior {
        draws,
        scaling,
        feature_names: dataset.feature_names().to_vec(),
        prior,
        move_counts: chain.counts(),
    })
}

/// Residual sd of a least-squares fit, or the sample sd of `y` when the
/// regression is not identifiable.
fn noise_estimate(rows: &[&[f64]], y: &[f64]) -> f64 {
    let n = y.len();
    let p = rows.first().map_or(0, |r| r.len());
    if n > p + 1 {
        if let Some(fit) = ols(rows, y) {
            return (fit.rss / (n - p - 1) as f64).sqrt();
        }
    }
    let mean = y.iter().sum::<f64>() / n as f64;
    (y.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n.max(2) - 1) as f64).sqrt()
}
