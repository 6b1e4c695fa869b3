use serde::{Deserialize, Serialize};

use super::cuts::quantile_sorted;
use super::sampler::MoveCounts;
use super::BartError;
use crate::tree::DecisionTree;

const SNAPSHOT_VERSION: u32 = 1;

/// Affine map between raw targets and the standardized `[−0.5, 0.5]` scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetScaling {
    pub offset: f64,
    pub scale: f64,
}

impl TargetScaling {
    /// Centre at the midrange and divide by the range. A constant target
    /// keeps unit scale.
    pub fn from_targets(y: &[f64]) -> Self {
        let min = y.iter().copied().fold(f64::INFINITY, f64::min);
        let max = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let range = max - min;
        Self { offset: 0.5 * (max + min), scale: if range > 0.0 { range } else { 1.0 } }
    }

    pub fn to_standard(&self, y: f64) -> f64 {
        (y - self.offset) / self.scale
    }

    pub fn to_raw(&self, z: f64) -> f64 {
        self.offset + self.scale * z
    }
}

/// Prior constants used by the fit, in standardized units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriorParams {
    pub tau: f64,
    pub nu: f64,
    pub lambda: f64,
    pub sigma_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorDraw {
    pub trees: Vec<DecisionTree>,
    /// Noise sd in standardized units.
    pub sigma: f64,
}

impl PosteriorDraw {
    /// Sum of the tree outputs, standardized units.
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.eval(x)).sum()
    }
}

/// Post-burn-in draws of a fitted sum-of-trees model.
#[derive(Debug, Clone, PartialEq)]
pub struct BartPosterior {
    pub(crate) draws: Vec<PosteriorDraw>,
    pub(crate) scaling: TargetScaling,
    pub(crate) feature_names: Vec<String>,
    pub(crate) prior: PriorParams,
    pub(crate) move_counts: MoveCounts,
}

#[derive(Serialize, Deserialize)]
struct Snapshot {
    version: u32,
    feature_names: Vec<String>,
    scaling: TargetScaling,
    prior: PriorParams,
    #[serde(default)]
    move_counts: MoveCounts,
    draws: Vec<PosteriorDraw>,
}

impl BartPosterior {
    /// Assemble a posterior from explicit draws, e.g. hand-built snapshots.
    pub fn from_draws(
        draws: Vec<PosteriorDraw>,
        scaling: TargetScaling,
        feature_names: Vec<String>,
        prior: PriorParams,
    ) -> Result<Self, BartError> {
        let post = Self { draws, scaling, feature_names, prior, move_counts: MoveCounts::default() };
        post.check()?;
        Ok(post)
    }

    fn check(&self) -> Result<(), BartError> {
        let bad = |m: String| Err(BartError::Snapshot(m));
        if self.draws.is_empty() {
            return bad("posterior has no draws".into());
        }
        if self.scaling.scale.is_nan() || self.scaling.scale <= 0.0 || !self.scaling.offset.is_finite() {
            return bad(format!("invalid scaling {:?}", self.scaling));
        }
        let p = self.feature_names.len();
        let m = self.draws[0].trees.len();
        for (d, draw) in self.draws.iter().enumerate() {
            if draw.sigma.is_nan() || draw.sigma <= 0.0 {
                return bad(format!("draw {d} has non-positive sigma {}", draw.sigma));
            }
            if draw.trees.len() != m || m == 0 {
                return bad(format!("draw {d} has {} trees, expected {m}", draw.trees.len()));
            }
            if draw.trees.iter().any(|t| t.n_features() != p) {
                return bad(format!("draw {d} has a tree over the wrong number of features"));
            }
        }
        Ok(())
    }

    pub fn draws(&self) -> &[PosteriorDraw] {
        &self.draws
    }

    pub fn n_draws(&self) -> usize {
        self.draws.len()
    }

    pub fn n_trees(&self) -> usize {
        self.draws[0].trees.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn scaling(&self) -> TargetScaling {
        self.scaling
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn prior(&self) -> PriorParams {
        self.prior
    }

    pub fn move_counts(&self) -> MoveCounts {
        self.move_counts
    }

    /// Noise sd per draw in raw target units.
    pub fn sigma_draws(&self) -> Vec<f64> {
        self.draws.iter().map(|d| d.sigma * self.scaling.scale).collect()
    }

    fn check_dim(&self, x: &[f64]) -> Result<(), BartError> {
        if x.len() != self.n_features() {
            return Err(BartError::DimensionMismatch { expected: self.n_features(), got: x.len() });
        }
        Ok(())
    }

    /// One prediction per draw, raw units.
    pub fn predict_draws(&self, x: &[f64]) -> Result<Vec<f64>, BartError> {
        self.check_dim(x)?;
        Ok(self.draws.iter().map(|d| self.scaling.to_raw(d.eval(x))).collect())
    }

    pub fn predict_mean(&self, x: &[f64]) -> Result<f64, BartError> {
        let draws = self.predict_draws(x)?;
        Ok(draws.iter().sum::<f64>() / draws.len() as f64)
    }

    pub fn predict_median(&self, x: &[f64]) -> Result<f64, BartError> {
        self.predict_quantile(x, 0.5)
    }

    pub fn predict_quantile(&self, x: &[f64], q: f64) -> Result<f64, BartError> {
        if !(q > 0.0 && q < 1.0) {
            return Err(BartError::InvalidQuantile(q));
        }
        let mut draws = self.predict_draws(x)?;
        draws.sort_by(f64::total_cmp);
        Ok(quantile_sorted(&draws, q))
    }

    /// Per-feature split counts summed over the trees, averaged over draws.
    pub fn mean_variable_usage(&self) -> Vec<f64> {
        let mut counts = vec![0usize; self.n_features()];
        for draw in &self.draws {
            for tree in &draw.trees {
                tree.add_variable_usage(&mut counts);
            }
        }
        counts.iter().map(|&c| c as f64 / self.draws.len() as f64).collect()
    }

    pub fn to_json(&self) -> String {
        let snap = Snapshot {
            version: SNAPSHOT_VERSION,
            feature_names: self.feature_names.clone(),
            scaling: self.scaling,
            prior: self.prior,
            move_counts: self.move_counts,
            draws: self.draws.clone(),
        };
        serde_json::to_string(&snap).expect("posterior serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, BartError> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| BartError::Snapshot(e.to_string()))?;
        let version = value.get("version").and_then(|v| v.as_u64());
        if version != Some(SNAPSHOT_VERSION as u64) {
            return Err(BartError::UnsupportedVersion(version));
        }
        let snap: Snapshot = serde_json::from_value(value).map_err(|e| BartError::Snapshot(e.to_string()))?;
        let post = Self {
            draws: snap.draws,
            scaling: snap.scaling,
            feature_names: snap.feature_names,
            prior: snap.prior,
            move_counts: snap.move_counts,
        };
        post.check()?;
        Ok(post)
    }
}
