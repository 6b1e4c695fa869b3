use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fit, BartConfig, BartError, BartPosterior};
use crate::dataset::{SplitMask, SupervisedDataset};

/// Relative variable importance from split counts, scaled to mean 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub feature_names: Vec<String>,
    pub importance: Vec<f64>,
    /// Splits per draw before normalization, averaged over runs.
    pub mean_usage: Vec<f64>,
    pub runs: usize,
}

impl ImportanceReport {
    /// Index of the most important feature (first on ties).
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, v) in self.importance.iter().enumerate() {
            if *v > self.importance[best] {
                best = i;
            }
        }
        best
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.feature_names.iter().position(|n| n == name).map(|i| self.importance[i])
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("feature,importance,mean_usage\n");
        for ((name, imp), usage) in self.feature_names.iter().zip(&self.importance).zip(&self.mean_usage) {
            out.push_str(&format!("{name},{imp},{usage}\n"));
        }
        out
    }
}

/// Average usage over the given fits and normalize to mean 1. When no
/// variable was ever used every feature gets importance 1.
pub fn importance_from_posteriors(posteriors: &[BartPosterior]) -> ImportanceReport {
    assert!(!posteriors.is_empty(), "need at least one posterior");
    let p = posteriors[0].n_features();
    let mut usage = vec![0.0; p];
    for post in posteriors {
        for (u, v) in usage.iter_mut().zip(post.mean_variable_usage()) {
            *u += v;
        }
    }
    for u in &mut usage {
        *u /= posteriors.len() as f64;
    }
    let mean = usage.iter().sum::<f64>() / p as f64;
    let importance = if mean > 0.0 { usage.iter().map(|u| u / mean).collect() } else { vec![1.0; p] };
    ImportanceReport {
        feature_names: posteriors[0].feature_names().to_vec(),
        importance,
        mean_usage: usage,
        runs: posteriors.len(),
    }
}

/// Fit `runs` independent chains (seeds `seed, seed+1, ...`) with a
/// tree-starved config and pool their split counts.
pub fn variable_importance(
    dataset: &SupervisedDataset,
    mask: &SplitMask,
    config: &BartConfig,
    runs: usize,
    seed: u64,
) -> Result<ImportanceReport, BartError> {
    if runs == 0 {
        return Err(BartError::InvalidConfig("runs must be at least 1".into()));
    }
    let posteriors = (0..runs)
        .into_par_iter()
        .map(|r| fit(dataset, mask, config, seed.wrapping_add(r as u64)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(importance_from_posteriors(&posteriors))
}
