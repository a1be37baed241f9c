//! Numerical check of `P(X_t^x ≥ y) = P(Y_t^y ≤ x)` between a monotone chain
//! and its dual.

use serde::Serialize;

use super::{dual_qmatrix, transition_matrix, QMatrixError, RateMatrix};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualityReport {
    pub holds: bool,
    pub t: f64,
    pub tol: f64,
    pub margin: i64,
    /// `max |P(X_t^x ≥ y) − P(Y_t^y ≤ x)|` over the interior pairs
    pub max_discrepancy: f64,
    /// `(x, y)` attaining the maximum
    pub worst_pair: (i64, i64),
    pub checked_pairs: usize,
}

/// Default margin: a quarter of the window width, rounded up.
pub fn default_margin(q: &RateMatrix) -> i64 {
    (q.hi() - q.lo() + 3) / 4
}

/// [`verify_duality_with_margin`] with the default margin.
pub fn verify_duality(q: &RateMatrix, t: f64, tol: f64) -> Result<DualityReport, QMatrixError> {
    verify_duality_with_margin(q, t, tol, default_margin(q))
}

/// Builds the dual of `q`, evolves both chains to time `t`, and compares the
/// two tail probabilities for all `x, y ∈ [lo + margin, hi − margin]`.
pub fn verify_duality_with_margin(
    q: &RateMatrix,
    t: f64,
    tol: f64,
    margin: i64,
) -> Result<DualityReport, QMatrixError> {
    if !(tol > 0.0) {
        return Err(QMatrixError::InvalidTolerance(tol));
    }
    let dual = dual_qmatrix(q)?;
    let expm_tol = (tol * 1e-3).min(1e-12);
    let p = transition_matrix(q, t, expm_tol)?;
    let pd = transition_matrix(&dual, t, expm_tol)?;

    let (a, b) = (q.lo() + margin.max(0), q.hi() - margin.max(0));
    let mut worst = 0.0;
    let mut worst_pair = (a, a);
    let mut checked = 0;
    for x in a..=b {
        for y in a..=b {
            let d = (p.upper_tail(x, y) - pd.lower_tail(y, x)).abs();
            checked += 1;
            if d > worst {
                worst = d;
                worst_pair = (x, y);
            }
        }
    }
    Ok(DualityReport {
        holds: worst <= tol,
        t,
        tol,
        margin,
        max_discrepancy: worst,
        worst_pair,
        checked_pairs: checked,
    })
}
