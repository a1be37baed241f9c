//! Finite-window Q-matrices.
//!
//! A [`RateMatrix`] stores the off-diagonal rates `ω(n, m) = Q(n, n + m)` of
//! the rows `n ∈ [lo, hi]`; the diagonal is always implied as minus the row
//! sum. Offsets may point outside the window. What happens to such jumps is
//! decided by the matrix's [`Boundary`] policy, which is applied when the
//! effective in-window generator is built (see [`RateMatrix::effective`]).
//!
//! The monotonicity criteria read the raw rates, i.e. the chain on the full
//! integer lattice restricted to the window rows. Everything that evolves the
//! chain (transition matrices, the dual construction, path sampling) uses the
//! effective generator.

mod dual;
mod duality;
mod expm;
mod monotone;

pub use dual::{dual_qmatrix, dual_qmatrix_with, DualOptions};
pub use duality::{default_margin, verify_duality, verify_duality_with_margin, DualityReport};
pub use expm::{
    check_stochastic_dominance, transition_matrix, DominanceReport, DominanceViolation,
    TransitionMatrix,
};
pub use monotone::{
    check_monotone, check_monotone_omega, check_monotone_omega_with_tol, check_monotone_with_tol,
    MonotonicityReport, Violation,
    TOL_MONO,
};

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QMatrixError {
    #[error("negative rate {rate} at state {n}, offset {m}")]
    NegativeRate { n: i64, m: i64, rate: f64 },
    #[error("non-finite rate at state {n}, offset {m}")]
    NonFiniteRate { n: i64, m: i64 },
    #[error("state {n} lies outside the window [{lo}, {hi}]")]
    StateOutsideWindow { n: i64, lo: i64, hi: i64 },
    #[error("offset 0 at state {n}: the diagonal is implied and cannot be given")]
    DiagonalEntry { n: i64 },
    #[error("empty window [{lo}, {hi}]")]
    EmptyWindow { lo: i64, hi: i64 },
    #[error("Q-matrix is not stochastically monotone ({} violation(s))", .0.violations.len())]
    NotMonotone(Box<MonotonicityReport>),
    #[error("dual rate from {n} to {j} is negative ({rate:e}); window-edge killing cannot be dualised")]
    DualRateNegative { n: i64, j: i64, rate: f64 },
    #[error("invalid time {0}")]
    InvalidTime(f64),
    #[error("invalid tolerance {0}")]
    InvalidTolerance(f64),
    #[error("transition matrix is not row-substochastic at row {row}")]
    NotSubstochastic { row: i64 },
    #[error("unknown boundary policy `{0}`")]
    UnknownBoundary(String),
}

/// What happens to a jump whose target lies outside the window.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// The jump lands on the nearest edge state; edge states are absorbing
    /// (the process is stopped there).
    Absorb,
    /// The jump is folded back onto the nearest edge state; edge states keep
    /// their own rates.
    Reflect,
    /// The jump removes the mass from the chain (killing).
    Kill,
}

impl fmt::Display for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Boundary::Absorb => "absorb",
            Boundary::Reflect => "reflect",
            Boundary::Kill => "kill",
        })
    }
}

impl FromStr for Boundary {
    type Err = QMatrixError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "absorb" => Ok(Boundary::Absorb),
            "reflect" => Ok(Boundary::Reflect),
            "kill" => Ok(Boundary::Kill),
            _ => Err(QMatrixError::UnknownBoundary(s.to_string())),
        }
    }
}

/// One `(n, m, rate)` triple of the JSON form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateEntry {
    pub n: i64,
    pub m: i64,
    pub rate: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct RateMatrixWire {
    lo: i64,
    hi: i64,
    boundary: Boundary,
    #[serde(default)]
    rates: Vec<RateEntry>,
}

/// Banded Q-matrix on the integer window `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RateMatrixWire", into = "RateMatrixWire")]
pub struct RateMatrix {
    lo: i64,
    hi: i64,
    boundary: Boundary,
    // rows[n - lo]: (offset, rate), sorted by offset, offsets distinct and non-zero
    rows: Vec<Vec<(i64, f64)>>,
}

impl TryFrom<RateMatrixWire> for RateMatrix {
    type Error = QMatrixError;

    fn try_from(w: RateMatrixWire) -> Result<Self, Self::Error> {
        let mut q = RateMatrix::new(w.lo, w.hi, w.boundary)?;
        for e in w.rates {
            q.add_rate(e.n, e.m, e.rate)?;
        }
        Ok(q)
    }
}

impl From<RateMatrix> for RateMatrixWire {
    fn from(q: RateMatrix) -> Self {
        RateMatrixWire {
            lo: q.lo,
            hi: q.hi,
            boundary: q.boundary,
            rates: q.entries().collect(),
        }
    }
}

impl RateMatrix {
    /// An all-zero generator on `[lo, hi]`.
    pub fn new(lo: i64, hi: i64, boundary: Boundary) -> Result<Self, QMatrixError> {
        if hi < lo {
            return Err(QMatrixError::EmptyWindow { lo, hi });
        }
        Ok(RateMatrix {
            lo,
            hi,
            boundary,
            rows: vec![Vec::new(); (hi - lo + 1) as usize],
        })
    }

    /// Builds a matrix whose row `n` has rates `rates(n)`, given as
    /// `(offset, rate)` pairs. Zero rates are skipped.
    pub fn from_fn<F, I>(lo: i64, hi: i64, boundary: Boundary, mut rates: F) -> Result<Self, QMatrixError>
    where
        F: FnMut(i64) -> I,
        I: IntoIterator<Item = (i64, f64)>,
    {
        let mut q = RateMatrix::new(lo, hi, boundary)?;
        for n in lo..=hi {
            for (m, r) in rates(n) {
                if r != 0.0 {
                    q.add_rate(n, m, r)?;
                }
            }
        }
        Ok(q)
    }

    /// Parses the JSON form `{"lo","hi","boundary","rates":[{"n","m","rate"}]}`.
    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("rate matrix serialises")
    }

    pub fn lo(&self) -> i64 {
        self.lo
    }

    pub fn hi(&self) -> i64 {
        self.hi
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn with_boundary(mut self, boundary: Boundary) -> Self {
        self.boundary = boundary;
        self
    }

    /// Number of states in the window.
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn contains(&self, n: i64) -> bool {
        n >= self.lo && n <= self.hi
    }

    fn index(&self, n: i64) -> Result<usize, QMatrixError> {
        if self.contains(n) {
            Ok((n - self.lo) as usize)
        } else {
            Err(QMatrixError::StateOutsideWindow {
                n,
                lo: self.lo,
                hi: self.hi,
            })
        }
    }

    /// Adds `rate` to `ω(n, m)`. Negative values are stored as given and are
    /// reported by [`validate_qmatrix`].
    pub fn add_rate(&mut self, n: i64, m: i64, rate: f64) -> Result<(), QMatrixError> {
        if m == 0 {
            return Err(QMatrixError::DiagonalEntry { n });
        }
        let i = self.index(n)?;
        let row = &mut self.rows[i];
        match row.binary_search_by_key(&m, |&(off, _)| off) {
            Ok(k) => row[k].1 += rate,
            Err(k) => row.insert(k, (m, rate)),
        }
        Ok(())
    }

    /// Overwrites `ω(n, m)`.
    pub fn set_rate(&mut self, n: i64, m: i64, rate: f64) -> Result<(), QMatrixError> {
        if m == 0 {
            return Err(QMatrixError::DiagonalEntry { n });
        }
        let i = self.index(n)?;
        let row = &mut self.rows[i];
        match row.binary_search_by_key(&m, |&(off, _)| off) {
            Ok(k) => row[k].1 = rate,
            Err(k) => row.insert(k, (m, rate)),
        }
        Ok(())
    }

    /// `ω(n, m)`; zero for rows outside the window.
    pub fn rate(&self, n: i64, m: i64) -> f64 {
        if !self.contains(n) {
            return 0.0;
        }
        let row = &self.rows[(n - self.lo) as usize];
        row.binary_search_by_key(&m, |&(off, _)| off)
            .map(|k| row[k].1)
            .unwrap_or(0.0)
    }

    /// `(offset, rate)` pairs of row `n`, sorted by offset.
    pub fn row(&self, n: i64) -> &[(i64, f64)] {
        if self.contains(n) {
            &self.rows[(n - self.lo) as usize]
        } else {
            &[]
        }
    }

    /// Raw matrix entry `Q(n, j)` with the implied diagonal.
    pub fn q(&self, n: i64, j: i64) -> f64 {
        if n == j {
            -self.exit_rate(n)
        } else {
            self.rate(n, j - n)
        }
    }

    /// Total jump intensity `|Q(n, n)|` of row `n`.
    pub fn exit_rate(&self, n: i64) -> f64 {
        self.row(n).iter().map(|&(_, r)| r).sum()
    }

    /// Largest `|offset|` with a non-zero rate.
    pub fn bandwidth(&self) -> i64 {
        self.rows
            .iter()
            .flat_map(|r| r.iter())
            .filter(|&&(_, r)| r != 0.0)
            .map(|&(m, _)| m.abs())
            .max()
            .unwrap_or(0)
    }

    /// All stored entries in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = RateEntry> + '_ {
        self.rows.iter().enumerate().flat_map(move |(i, row)| {
            let n = self.lo + i as i64;
            row.iter().map(move |&(m, rate)| RateEntry { n, m, rate })
        })
    }

    /// Largest single off-diagonal rate in row `n`.
    pub fn max_rate(&self, n: i64) -> f64 {
        self.row(n).iter().map(|&(_, r)| r.abs()).fold(0.0, f64::max)
    }

    /// For a killed chain, the equivalent chain on `[lo − 1, hi + 1]` whose
    /// two new edge states are absorbing cemeteries for mass killed below and
    /// above the window; other chains are returned unchanged. Tail
    /// probabilities `P(X_t ≥ l)` of a killed chain count the mass killed
    /// above, so they are read off this extension.
    pub fn with_cemeteries(&self) -> RateMatrix {
        if self.boundary != Boundary::Kill {
            return self.clone();
        }
        let mut rows = Vec::with_capacity(self.rows.len() + 2);
        rows.push(Vec::new());
        rows.extend(self.rows.iter().cloned());
        rows.push(Vec::new());
        RateMatrix {
            lo: self.lo - 1,
            hi: self.hi + 1,
            boundary: Boundary::Absorb,
            rows,
        }
    }

    /// The in-window generator after applying the boundary policy.
    pub fn effective(&self) -> EffectiveGenerator {
        let size = self.len();
        let mut rows = Vec::with_capacity(size);
        let mut kill = vec![0.0; size];
        for (i, row) in self.rows.iter().enumerate() {
            let n = self.lo + i as i64;
            let mut merged: BTreeMap<usize, f64> = BTreeMap::new();
            let absorbing = self.boundary == Boundary::Absorb && (n == self.lo || n == self.hi);
            if !absorbing {
                for &(m, r) in row {
                    if r == 0.0 {
                        continue;
                    }
                    let target = n + m;
                    let landed = if self.contains(target) {
                        Some(target)
                    } else {
                        match self.boundary {
                            Boundary::Kill => None,
                            Boundary::Absorb | Boundary::Reflect => Some(target.clamp(self.lo, self.hi)),
                        }
                    };
                    match landed {
                        // folded onto itself: no transition
                        Some(j) if j == n => {}
                        Some(j) => *merged.entry((j - self.lo) as usize).or_insert(0.0) += r,
                        None => kill[i] += r,
                    }
                }
            }
            rows.push(merged.into_iter().collect::<Vec<_>>());
        }
        EffectiveGenerator {
            lo: self.lo,
            hi: self.hi,
            rows,
            kill,
        }
    }
}

/// The in-window generator actually evolved by the chain: off-diagonal rates
/// between window states plus a per-row killing rate.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveGenerator {
    pub lo: i64,
    pub hi: i64,
    /// rows[i]: (target index, rate), sorted by target index, no diagonal
    pub rows: Vec<Vec<(usize, f64)>>,
    /// killing rate per row
    pub kill: Vec<f64>,
}

impl EffectiveGenerator {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Total exit rate (jumps plus killing) of row index `i`.
    pub fn exit_rate(&self, i: usize) -> f64 {
        self.rows[i].iter().map(|&(_, r)| r).sum::<f64>() + self.kill[i]
    }

    /// Dense generator with the diagonal filled in.
    pub fn dense(&self) -> Array2<f64> {
        let n = self.len();
        let mut a = Array2::zeros((n, n));
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, r) in row {
                a[[i, j]] = r;
            }
            a[[i, i]] = -self.exit_rate(i);
        }
        a
    }
}

/// Outcome of [`validate_qmatrix`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub valid: bool,
    pub lo: i64,
    pub hi: i64,
    pub boundary: Boundary,
    /// `sup_n |Q(n, n)|` over the window rows
    pub max_intensity: f64,
    /// implied diagonal `Q(n, n)`, indexed from `lo`
    pub diagonal: Vec<f64>,
    /// rows with killed mass under the boundary policy, as `(n, rate)`
    pub killing: Vec<(i64, f64)>,
}

/// Checks the Q-matrix conditions: off-diagonal rates nonnegative (and
/// finite), diagonal implied by the zero-row-sum condition.
pub fn validate_qmatrix(q: &RateMatrix) -> Result<ValidationReport, QMatrixError> {
    for e in q.entries() {
        if !e.rate.is_finite() {
            return Err(QMatrixError::NonFiniteRate { n: e.n, m: e.m });
        }
        if e.rate < 0.0 {
            return Err(QMatrixError::NegativeRate {
                n: e.n,
                m: e.m,
                rate: e.rate,
            });
        }
    }
    let diagonal: Vec<f64> = (q.lo..=q.hi).map(|n| -q.exit_rate(n)).collect();
    let max_intensity = diagonal.iter().map(|d| d.abs()).fold(0.0, f64::max);
    let eff = q.effective();
    let killing = eff
        .kill
        .iter()
        .enumerate()
        .filter(|(_, &k)| k > 0.0)
        .map(|(i, &k)| (q.lo + i as i64, k))
        .collect();
    Ok(ValidationReport {
        valid: true,
        lo: q.lo,
        hi: q.hi,
        boundary: q.boundary,
        max_intensity,
        diagonal,
        killing,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn birth_death(lo: i64, hi: i64, up: f64, down: f64, boundary: Boundary) -> RateMatrix {
        RateMatrix::from_fn(lo, hi, boundary, |_| [(1, up), (-1, down)]).unwrap()
    }

    #[test]
    fn birth_death_is_valid() {
        let q = birth_death(0, 10, 2.0, 3.0, Boundary::Reflect);
        let report = validate_qmatrix(&q).unwrap();
        assert!(report.valid);
        assert_eq!(report.max_intensity, 5.0);
        assert!(report.diagonal.iter().all(|&d| d == -5.0));
        assert!(report.killing.is_empty());
    }

    #[test]
    fn negative_rate_is_rejected() {
        let mut q = RateMatrix::new(0, 3, Boundary::Reflect).unwrap();
        q.set_rate(0, 1, -1.0).unwrap();
        assert_eq!(
            validate_qmatrix(&q),
            Err(QMatrixError::NegativeRate { n: 0, m: 1, rate: -1.0 })
        );
    }

    #[test]
    fn empty_rates_are_a_zero_generator() {
        let q = RateMatrix::from_json(r#"{"lo":0,"hi":4,"boundary":"kill","rates":[]}"#).unwrap();
        let report = validate_qmatrix(&q).unwrap();
        assert!(report.valid);
        assert_eq!(report.max_intensity, 0.0);
        assert!(q.effective().dense().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn diagonal_entries_are_rejected() {
        let mut q = RateMatrix::new(0, 3, Boundary::Reflect).unwrap();
        assert_eq!(q.add_rate(1, 0, 1.0), Err(QMatrixError::DiagonalEntry { n: 1 }));
        assert!(RateMatrix::from_json(r#"{"lo":0,"hi":1,"boundary":"kill","rates":[{"n":0,"m":0,"rate":1}]}"#).is_err());
    }

    #[test]
    fn json_round_trip() {
        let q = birth_death(-2, 2, 1.5, 0.25, Boundary::Absorb);
        let back = RateMatrix::from_json(&q.to_json()).unwrap();
        assert_eq!(q, back);
    }

    #[test]
    fn boundary_policies_route_out_of_window_jumps() {
        let bd = |b| birth_death(0, 3, 2.0, 3.0, b);

        let kill = bd(Boundary::Kill).effective();
        assert_eq!(kill.kill, vec![3.0, 0.0, 0.0, 2.0]);
        assert_eq!(kill.exit_rate(0), 5.0);

        let reflect = bd(Boundary::Reflect).effective();
        assert_eq!(reflect.kill, vec![0.0; 4]);
        // the fold of 0 -> -1 lands on 0 itself and disappears
        assert_eq!(reflect.rows[0], vec![(1, 2.0)]);
        assert_eq!(reflect.rows[3], vec![(2, 3.0)]);

        let absorb = bd(Boundary::Absorb).effective();
        assert!(absorb.rows[0].is_empty() && absorb.rows[3].is_empty());
        assert_eq!(absorb.rows[1], vec![(0, 3.0), (2, 2.0)]);

        // long jumps fold onto the edge under reflect and absorb
        let mut q = RateMatrix::new(0, 5, Boundary::Reflect).unwrap();
        q.add_rate(2, 7, 1.0).unwrap();
        assert_eq!(q.effective().rows[2], vec![(5, 1.0)]);
    }

    #[test]
    fn duplicate_entries_accumulate() {
        let q = RateMatrix::from_json(
            r#"{"lo":0,"hi":2,"boundary":"reflect","rates":[{"n":1,"m":1,"rate":1.0},{"n":1,"m":1,"rate":0.5}]}"#,
        )
        .unwrap();
        assert_eq!(q.rate(1, 1), 1.5);
        assert_eq!(q.q(1, 1), -1.5);
    }
}
