use nalgebra::{DMatrix, DVector};

/// Least-squares fit with intercept.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct OlsFit {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub rss: f64,
}

/// Ordinary least squares of `y` on the rows of `x` plus an intercept.
/// Returns `None` when the design matrix is numerically rank deficient.
pub(crate) fn ols(rows: &[&[f64]], y: &[f64]) -> Option<OlsFit> {
    let n = rows.len();
    let p = rows.first().map_or(0, |r| r.len());
    let design = DMatrix::from_fn(n, p + 1, |i, j| if j == 0 { 1.0 } else { rows[i][j - 1] });
    let target = DVector::from_column_slice(y);

    let svd = design.clone().svd(true, true);
    let max_sv = svd.singular_values.max();
    let tol = max_sv * (n.max(p + 1) as f64) * f64::EPSILON * 16.0;
    if n < p + 1 || svd.singular_values.iter().any(|s| *s <= tol) {
        return None;
    }
    let beta = svd.solve(&target, tol).ok()?;
    let resid = &target - &design * &beta;
    Some(OlsFit { intercept: beta[0], coefficients: beta.iter().skip(1).copied().collect(), rss: resid.norm_squared() })
}
