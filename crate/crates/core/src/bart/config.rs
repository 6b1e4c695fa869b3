use serde::{Deserialize, Serialize};

use super::BartError;

/// Proposal probabilities for the four structural moves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MoveProbs {
    pub grow: f64,
    pub prune: f64,
    pub change: f64,
    pub swap: f64,
}

impl Default for MoveProbs {
    fn default() -> Self {
        Self { grow: 0.25, prune: 0.25, change: 0.40, swap: 0.10 }
    }
}

impl MoveProbs {
    fn as_array(&self) -> [f64; 4] {
        [self.grow, self.prune, self.change, self.swap]
    }
}

/// Sampler and prior settings.
///
/// `alpha` and `beta` set the probability `alpha·(1+d)^(−beta)` that a node
/// at depth `d` splits. Leaf values have prior sd `0.5/(k·√m)` on targets
/// scaled to `[−0.5, 0.5]`. The noise variance prior is `ν·λ/χ²_ν` with `λ`
/// placed so a least-squares noise estimate sits at its `q` quantile.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BartConfig {
    pub m: usize,
    pub alpha: f64,
    pub beta: f64,
    pub k: f64,
    pub nu: f64,
    pub q: f64,
    pub n_iter: usize,
    pub burn_in: usize,
    pub cut_grid: usize,
    pub min_leaf_size: usize,
    pub move_probs: MoveProbs,
}

impl Default for BartConfig {
    fn default() -> Self {
        Self {
            m: 40,
            alpha: 0.95,
            beta: 2.0,
            k: 2.0,
            nu: 3.0,
            q: 0.90,
            n_iter: 1200,
            burn_in: 200,
            cut_grid: 100,
            min_leaf_size: 5,
            move_probs: MoveProbs::default(),
        }
    }
}

impl BartConfig {
    pub fn with_trees(m: usize) -> Self {
        Self { m, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), BartError> {
        let bad = |msg: String| Err(BartError::InvalidConfig(msg));
        if self.m < 1 {
            return bad("m must be at least 1".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha {} not in (0, 1)", self.alpha));
        }
        if self.beta.is_nan() || self.beta < 0.0 {
            return bad(format!("beta {} must be non-negative", self.beta));
        }
        if !(self.k > 0.0 && self.nu > 0.0) {
            return bad("k and nu must be positive".into());
        }
        if !(self.q > 0.0 && self.q < 1.0) {
            return bad(format!("q {} not in (0, 1)", self.q));
        }
        if self.burn_in >= self.n_iter {
            return bad(format!("burn_in {} must be below n_iter {}", self.burn_in, self.n_iter));
        }
        if self.cut_grid < 2 || self.cut_grid > u16::MAX as usize {
            return bad(format!("cut_grid {} not in [2, {}]", self.cut_grid, u16::MAX));
        }
        if self.min_leaf_size < 1 {
            return bad("min_leaf_size must be at least 1".into());
        }
        let probs = self.move_probs.as_array();
        if probs.iter().any(|p| p.is_nan() || *p < 0.0) || (probs.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return bad(format!("move probabilities {probs:?} must be non-negative and sum to 1"));
        }
        Ok(())
    }

    /// Prior probability that a node at `depth` is internal.
    pub fn split_probability(&self, depth: usize) -> f64 {
        self.alpha * (1.0 + depth as f64).powf(-self.beta)
    }

    /// Prior sd of a leaf value in standardized units.
    pub fn leaf_sd(&self) -> f64 {
        0.5 / (self.k * (self.m as f64).sqrt())
    }

    pub fn draws(&self) -> usize {
        self.n_iter - self.burn_in
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        let cfg = BartConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.draws(), 1000);
        assert!((cfg.split_probability(0) - 0.95).abs() < 1e-15);
        assert!((cfg.split_probability(1) - 0.2375).abs() < 1e-15);
    }

    #[test]
    fn invalid_configs() {
        let cases = [
            BartConfig { m: 0, ..Default::default() },
            BartConfig { alpha: 1.0, ..Default::default() },
            BartConfig { burn_in: 1200, ..Default::default() },
            BartConfig { cut_grid: 1, ..Default::default() },
            BartConfig { min_leaf_size: 0, ..Default::default() },
            BartConfig {
                move_probs: MoveProbs { grow: 0.5, prune: 0.5, change: 0.5, swap: 0.0 },
                ..Default::default()
            },
        ];
        for cfg in cases {
            assert!(matches!(cfg.validate(), Err(BartError::InvalidConfig(_))), "{cfg:?}");
        }
    }
}
