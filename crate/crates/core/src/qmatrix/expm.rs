//! Transition matrices `P(t) = exp(tA)` of the effective generator by
//! uniformization, and the row-wise tail dominance check.

use ndarray::Array2;
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use super::{QMatrixError, RateMatrix};

// Poisson mean per uniformization step; larger horizons are reached by squaring.
const STEP_MEAN: f64 = 2.0;

/// Row-substochastic transition matrix on the window of a [`RateMatrix`].
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    pub lo: i64,
    pub hi: i64,
    pub t: f64,
    pub p: Array2<f64>,
    /// killed mass per row, `1 − Σ_j P(i, j)`
    pub defect: Vec<f64>,
}

impl Serialize for TransitionMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = self.p.rows().into_iter().map(|r| r.to_vec()).collect();
        let mut st = s.serialize_struct("TransitionMatrix", 5)?;
        st.serialize_field("lo", &self.lo)?;
        st.serialize_field("hi", &self.hi)?;
        st.serialize_field("t", &self.t)?;
        st.serialize_field("p", &rows)?;
        st.serialize_field("defect", &self.defect)?;
        st.end()
    }
}

impl TransitionMatrix {
    /// Wraps an explicit matrix, checking that it is row-substochastic.
    pub fn new(lo: i64, t: f64, p: Array2<f64>) -> Result<Self, QMatrixError> {
        let n = p.nrows();
        assert_eq!(n, p.ncols(), "transition matrix must be square");
        let mut defect = Vec::with_capacity(n);
        for (i, row) in p.rows().into_iter().enumerate() {
            let sum: f64 = row.sum();
            if row.iter().any(|&v| !(-1e-12..=1.0 + 1e-12).contains(&v)) || sum > 1.0 + 1e-9 {
                return Err(QMatrixError::NotSubstochastic { row: lo + i as i64 });
            }
            defect.push((1.0 - sum).max(0.0));
        }
        Ok(TransitionMatrix {
            lo,
            hi: lo + n as i64 - 1,
            t,
            p,
            defect,
        })
    }

    pub fn identity(lo: i64, hi: i64) -> Self {
        let n = (hi - lo + 1) as usize;
        TransitionMatrix {
            lo,
            hi,
            t: 0.0,
            p: Array2::eye(n),
            defect: vec![0.0; n],
        }
    }

    /// `P(x, j)` for window states.
    pub fn get(&self, x: i64, j: i64) -> f64 {
        self.p[[(x - self.lo) as usize, (j - self.lo) as usize]]
    }

    /// `P(X_t^x ≥ y)` counting only surviving mass.
    pub fn upper_tail(&self, x: i64, y: i64) -> f64 {
        let row = self.p.row((x - self.lo) as usize);
        let start = (y - self.lo).clamp(0, row.len() as i64) as usize;
        row.iter().skip(start).sum()
    }

    /// `P(X_t^x ≤ y)` counting only surviving mass.
    pub fn lower_tail(&self, x: i64, y: i64) -> f64 {
        let row = self.p.row((x - self.lo) as usize);
        let end = (y - self.lo + 1).clamp(0, row.len() as i64) as usize;
        row.iter().take(end).sum()
    }
}

/// `exp(tA)` for the effective generator of `q`, with truncation error below
/// `tol` in the max row-sum norm.
pub fn transition_matrix(q: &RateMatrix, t: f64, tol: f64) -> Result<TransitionMatrix, QMatrixError> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(QMatrixError::InvalidTime(t));
    }
    if !(tol > 0.0) {
        return Err(QMatrixError::InvalidTolerance(tol));
    }
    let eff = q.effective();
    let n = eff.len();
    let rate = (0..n).map(|i| eff.exit_rate(i)).fold(0.0, f64::max);
    if t == 0.0 || rate == 0.0 {
        let mut id = TransitionMatrix::identity(q.lo(), q.hi());
        id.t = t;
        return Ok(id);
    }

    // split t into 2^s steps of Poisson mean ≤ STEP_MEAN
    let total_mean = rate * t;
    let squarings = (total_mean / STEP_MEAN).log2().ceil().max(0.0) as u32;
    let steps = 2f64.powi(squarings as i32);
    let mean = total_mean / steps;
    let step_tol = tol / steps;

    // uniformized jump matrix I + A / rate: nonnegative, substochastic
    let mut jump = eff.dense() / rate;
    for i in 0..n {
        jump[[i, i]] += 1.0;
    }

    let mut weight = (-mean).exp();
    let mut power = Array2::<f64>::eye(n);
    let mut p = power.clone() * weight;
    let mut k = 0u32;
    loop {
        // Poisson tail beyond k is at most w_{k+1} / (1 − mean/(k+2))
        let next = weight * mean / f64::from(k + 1);
        let ratio = mean / f64::from(k + 2);
        if ratio < 1.0 && next / (1.0 - ratio) <= step_tol {
            break;
        }
        power = power.dot(&jump);
        k += 1;
        weight = next;
        p.scaled_add(weight, &power);
    }
    for _ in 0..squarings {
        p = p.dot(&p);
    }
    p.mapv_inplace(|v| v.clamp(0.0, 1.0));

    let defect = p.rows().into_iter().map(|r| (1.0 - r.sum()).max(0.0)).collect();
    Ok(TransitionMatrix {
        lo: q.lo(),
        hi: q.hi(),
        t,
        p,
        defect,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DominanceViolation {
    pub n: i64,
    pub l: i64,
    /// `Σ_{j≥l} P(n, j)`
    pub lower_row_tail: f64,
    /// `Σ_{j≥l} P(n+1, j)`
    pub upper_row_tail: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominanceReport {
    pub dominant: bool,
    pub violations: Vec<DominanceViolation>,
    /// smallest `Σ_{j≥l} P(n+1, j) − Σ_{j≥l} P(n, j)` over all `n` and `l`
    pub min_margin: f64,
    /// per threshold `l`, the smallest margin over `n`
    pub margin_by_threshold: Vec<(i64, f64)>,
}

/// Checks `Σ_{j≥l} P(n+1, j) ≥ Σ_{j≥l} P(n, j) − tol` for adjacent rows.
pub fn check_stochastic_dominance(p: &TransitionMatrix, tol: f64) -> DominanceReport {
    let size = p.p.nrows();
    let mut violations = Vec::new();
    let mut min_margin = f64::INFINITY;
    let mut by_l = vec![f64::INFINITY; size];
    let tails: Vec<Vec<f64>> = p
        .p
        .rows()
        .into_iter()
        .map(|row| {
            let mut t = vec![0.0; size + 1];
            for j in (0..size).rev() {
                t[j] = t[j + 1] + row[j];
            }
            t
        })
        .collect();
    for i in 0..size.saturating_sub(1) {
        for l in 1..size {
            let margin = tails[i + 1][l] - tails[i][l];
            min_margin = min_margin.min(margin);
            by_l[l] = by_l[l].min(margin);
            if margin < -tol {
                violations.push(DominanceViolation {
                    n: p.lo + i as i64,
                    l: p.lo + l as i64,
                    lower_row_tail: tails[i][l],
                    upper_row_tail: tails[i + 1][l],
                });
            }
        }
    }
    DominanceReport {
        dominant: violations.is_empty(),
        violations,
        min_margin: if min_margin.is_finite() { min_margin } else { 0.0 },
        margin_by_threshold: (1..size).map(|l| (p.lo + l as i64, by_l[l])).collect(),
    }
}
