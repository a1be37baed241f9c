//! Stochastic monotonicity of a Q-matrix.
//!
//! Two independent evaluations are provided:
//!
//! * [`check_monotone`] evaluates the tail-sum criterion
//!   `Σ_{j≥l} Q(n, j) ≤ Σ_{j≥l} Q(n+1, j)` for every `l ≠ n + 1`, diagonal
//!   included;
//! * [`check_monotone_omega`] evaluates the split right-jump / left-jump
//!   conditions on the rates `ω(n, m)` for every `k ≥ 2`, which never touch
//!   the diagonal.
//!
//! The right-jump condition at `k` is the tail criterion at `l = n + k`; the
//! left-jump condition at `k` is the tail criterion at `l = n − k + 2`
//! (rewritten through the zero row sum). Violations of both are reported
//! against `l`, so the two reports can be compared instance by instance.

use serde::{Deserialize, Serialize};

use super::RateMatrix;

/// Default relative slack of the `≤` comparisons, scaled by the largest
/// rate in the two rows being compared.
pub const TOL_MONO: f64 = 1e-12;

/// A failed instance of the monotonicity criterion: `lhs ≤ rhs` should hold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub n: i64,
    pub l: i64,
    pub lhs: f64,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub monotone: bool,
    pub violations: Vec<Violation>,
    pub checked_pairs: usize,
}

impl MonotonicityReport {
    fn from_violations(violations: Vec<Violation>, checked_pairs: usize) -> Self {
        MonotonicityReport {
            monotone: violations.is_empty(),
            violations,
            checked_pairs,
        }
    }

    /// Violated `(n, l)` instances, sorted.
    pub fn violated_instances(&self) -> Vec<(i64, i64)> {
        let mut v: Vec<_> = self.violations.iter().map(|v| (v.n, v.l)).collect();
        v.sort_unstable();
        v.dedup();
        v
    }
}

fn pair_scale(q: &RateMatrix, n: i64) -> f64 {
    q.max_rate(n).max(q.max_rate(n + 1))
}

/// Tail-sum criterion with the default tolerance [`TOL_MONO`].
pub fn check_monotone(q: &RateMatrix) -> MonotonicityReport {
    check_monotone_with_tol(q, TOL_MONO)
}

/// Tail-sum criterion with relative tolerance `tol`.
///
/// `l` runs over every integer at which either tail can change, including
/// targets outside the window: a long jump leaving the window still counts.
pub fn check_monotone_with_tol(q: &RateMatrix, tol: f64) -> MonotonicityReport {
    let mut violations = Vec::new();
    let mut checked = 0usize;
    for n in q.lo()..q.hi() {
        let entries = |row_state: i64| {
            let mut e: Vec<(i64, f64)> = q
                .row(row_state)
                .iter()
                .map(|&(m, r)| (row_state + m, r))
                .collect();
            e.push((row_state, -q.exit_rate(row_state)));
            e.sort_unstable_by_key(|&(j, _)| std::cmp::Reverse(j));
            e
        };
        let lower = entries(n);
        let upper = entries(n + 1);
        let l_max = lower[0].0.max(upper[0].0);
        let l_min = lower[lower.len() - 1].0.min(upper[upper.len() - 1].0);
        let slack = tol * pair_scale(q, n);

        let (mut p0, mut p1) = (0, 0);
        let (mut lhs, mut rhs) = (0.0, 0.0);
        // for l ≤ l_min both tails are full row sums, i.e. zero
        for l in ((l_min + 1)..=l_max).rev() {
            while p0 < lower.len() && lower[p0].0 >= l {
                lhs += lower[p0].1;
                p0 += 1;
            }
            while p1 < upper.len() && upper[p1].0 >= l {
                rhs += upper[p1].1;
                p1 += 1;
            }
            if l == n + 1 {
                continue;
            }
            checked += 1;
            if lhs > rhs + slack {
                violations.push(Violation { n, l, lhs, rhs });
            }
        }
    }
    violations.sort_by_key(|v| (v.n, v.l));
    MonotonicityReport::from_violations(violations, checked)
}

/// Split right-jump / left-jump conditions in terms of `ω(n, m)`.
pub fn check_monotone_omega(q: &RateMatrix) -> MonotonicityReport {
    check_monotone_omega_with_tol(q, TOL_MONO)
}

pub fn check_monotone_omega_with_tol(q: &RateMatrix, tol: f64) -> MonotonicityReport {
    let mut violations = Vec::new();
    let mut checked = 0usize;
    for n in q.lo()..q.hi() {
        let band = q
            .row(n)
            .iter()
            .chain(q.row(n + 1))
            .map(|&(m, _)| m.abs())
            .max()
            .unwrap_or(0);
        let slack = tol * pair_scale(q, n);
        let w = |state: i64, m: i64| q.rate(state, m);
        // right tails Σ_{m≥k} ω(state, m) and left tails Σ_{m≥k} ω(state, −m)
        let right_tail = |state: i64, k: i64| -> f64 {
            q.row(state).iter().filter(|&&(m, _)| m >= k).map(|&(_, r)| r).sum()
        };
        let left_tail = |state: i64, k: i64| -> f64 {
            q.row(state).iter().filter(|&&(m, _)| m <= -k).map(|&(_, r)| r).sum()
        };
        for k in 2..=band + 1 {
            // right jumps: Σ_{m≥k} ω(n,m) ≤ ω(n+1,k−1) + Σ_{m≥k} ω(n+1,m)
            let lhs = right_tail(n, k);
            let rhs = w(n + 1, k - 1) + right_tail(n + 1, k);
            checked += 1;
            if lhs > rhs + slack {
                violations.push(Violation { n, l: n + k, lhs, rhs });
            }
            // left jumps: Σ_{m≥k} ω(n+1,−m) ≤ ω(n,−k+1) + Σ_{m≥k} ω(n,−m)
            let lhs = left_tail(n + 1, k);
            let rhs = w(n, -k + 1) + left_tail(n, k);
            checked += 1;
            if lhs > rhs + slack {
                violations.push(Violation {
                    n,
                    l: n - k + 2,
                    lhs,
                    rhs,
                });
            }
        }
    }
    violations.sort_by_key(|v| (v.n, v.l));
    MonotonicityReport::from_violations(violations, checked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmatrix::Boundary;

    /// Brute force over the full tail sums on a padded range of `l`.
    fn brute_force(q: &RateMatrix) -> Vec<(i64, i64)> {
        let band = q.bandwidth() + 2;
        let mut out = Vec::new();
        for n in q.lo()..q.hi() {
            for l in (q.lo() - band)..=(q.hi() + band) {
                if l == n + 1 {
                    continue;
                }
                let tail = |s: i64| -> f64 { (l..=q.hi() + band).map(|j| q.q(s, j)).sum() };
                if tail(n) > tail(n + 1) + 1e-12 {
                    out.push((n, l));
                }
            }
        }
        out
    }

    #[test]
    fn constant_birth_death_is_monotone() {
        let q = RateMatrix::from_fn(0, 10, Boundary::Reflect, |_| [(1, 2.0), (-1, 3.0)]).unwrap();
        assert!(check_monotone(&q).monotone);
        assert!(check_monotone_omega(&q).monotone);
    }

    #[test]
    fn nearest_neighbour_rates_are_unconstrained() {
        // wildly varying ω(n, ±1) never violate the criterion
        let q = RateMatrix::from_fn(0, 8, Boundary::Reflect, |n| {
            [(1, ((n * 7) % 5) as f64), (-1, ((n * 3) % 4) as f64 + 0.5)]
        })
        .unwrap();
        assert!(check_monotone(&q).monotone);
    }

    #[test]
    fn lone_long_jump_violates() {
        let mut q = RateMatrix::new(0, 1, Boundary::Reflect).unwrap();
        q.set_rate(0, 2, 1.0).unwrap();
        let report = check_monotone(&q);
        assert!(!report.monotone);
        assert_eq!(report.violated_instances(), brute_force(&q));
        // the right-jump condition at k = 2, l = n + 2: 1 ≤ 0
        let omega = check_monotone_omega(&q);
        assert_eq!(
            omega.violations,
            vec![Violation { n: 0, l: 2, lhs: 1.0, rhs: 0.0 }]
        );
        assert_eq!(report.violated_instances(), omega.violated_instances());
    }

    #[test]
    fn translation_invariant_long_jumps_hold_with_equality() {
        let q = RateMatrix::from_fn(0, 9, Boundary::Reflect, |_| [(2, 0.7)]).unwrap();
        let report = check_monotone_omega(&q);
        assert!(report.monotone);
        assert!(check_monotone(&q).monotone);
    }

    #[test]
    fn decreasing_right_tail_is_caught_by_both_paths() {
        let q = RateMatrix::from_fn(0, 5, Boundary::Kill, |n| [(3, 5.0 - n as f64), (-2, 1.0)]).unwrap();
        let a = check_monotone(&q);
        let b = check_monotone_omega(&q);
        assert!(!a.monotone && !b.monotone);
        assert_eq!(a.violated_instances(), b.violated_instances());
        assert_eq!(a.violated_instances(), brute_force(&q));
    }

    #[test]
    fn increasing_left_tail_is_caught() {
        // left tails must be non-increasing in n
        let q = RateMatrix::from_fn(0, 5, Boundary::Reflect, |n| [(-3, n as f64)]).unwrap();
        let a = check_monotone(&q);
        assert!(!a.monotone);
        assert_eq!(a.violated_instances(), check_monotone_omega(&q).violated_instances());
        assert_eq!(a.violated_instances(), brute_force(&q));
    }
}
