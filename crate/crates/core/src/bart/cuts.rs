//! Candidate split thresholds and the binned view of the training features.

/// Per-feature ascending cut values. A cut equal to or above a feature's
/// training maximum is never kept since it cannot separate any rows.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct CutGrid {
    cuts: Vec<Vec<f64>>,
}

impl CutGrid {
    /// `grid` equally spaced quantiles (levels i/(grid+1)) of each column,
    /// linearly interpolated, de-duplicated.
    pub fn from_columns(columns: &[Vec<f64>], grid: usize) -> Self {
        let cuts = columns
            .iter()
            .map(|col| {
                let mut sorted = col.clone();
                sorted.sort_by(f64::total_cmp);
                let max = *sorted.last().expect("non-empty column");
                let mut cuts: Vec<f64> = (1..=grid)
                    .map(|i| quantile_sorted(&sorted, i as f64 / (grid + 1) as f64))
                    .filter(|c| *c < max)
                    .collect();
                cuts.dedup();
                cuts
            })
            .collect();
        Self { cuts }
    }

    #[cfg(test)]
    pub fn n_cuts(&self, var: usize) -> usize {
        self.cuts[var].len()
    }

    pub fn value(&self, var: usize, cut: usize) -> f64 {
        self.cuts[var][cut]
    }

    /// Number of cuts strictly below `x`, so that `x <= cuts[c]` iff `bin <= c`.
    pub fn bin(&self, var: usize, x: f64) -> u16 {
        self.cuts[var].partition_point(|c| *c < x) as u16
    }
}

/// Type-7 (linear interpolation) quantile of an ascending slice.
pub(crate) fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q.clamp(0.0, 1.0) * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Column-major bin indices of the training rows.
#[derive(Debug, Clone)]
pub(crate) struct BinnedFeatures {
    n: usize,
    bins: Vec<u16>,
}

impl BinnedFeatures {
    pub fn new(columns: &[Vec<f64>], grid: &CutGrid) -> Self {
        let n = columns.first().map_or(0, Vec::len);
        let mut bins = Vec::with_capacity(n * columns.len());
        for (var, col) in columns.iter().enumerate() {
            bins.extend(col.iter().map(|x| grid.bin(var, *x)));
        }
        Self { n, bins }
    }

    #[inline]
    pub fn column(&self, var: usize) -> &[u16] {
        &self.bins[var * self.n..(var + 1) * self.n]
    }

    #[inline]
    pub fn get(&self, var: usize, row: usize) -> u16 {
        self.bins[var * self.n + row]
    }
}
