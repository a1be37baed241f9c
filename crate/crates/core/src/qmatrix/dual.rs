//! Dual chain of a stochastically monotone Q-matrix.
//!
//! The dual rates are `Q̃(n, j) = Σ_{l≥n} (A(j, l) − A(j−1, l))`, evaluated on
//! the effective in-window generator `A` with the rows just outside the
//! window taken as zero. Targets `j ∈ [lo, hi]` stay in the window; the one
//! remaining target, `hi + 1`, collects the mass of "the dual is above every
//! window state" and is emitted as an out-of-window jump, so the dual carries
//! the `Kill` policy. With this routing the finite chains satisfy
//! `P(X_t^x ≥ y) = P(Y_t^y ≤ x)` for all window states `x, y`.
//!
//! Killing in `A` at the upper edge is not monotone-compatible and surfaces
//! as a negative dual rate.

use rayon::prelude::*;

use super::{check_monotone, Boundary, EffectiveGenerator, QMatrixError, RateMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualOptions {
    /// Negative dual rates down to `-neg_tol * max_exit_rate` are treated as
    /// roundoff and dropped; anything below is an error.
    pub neg_tol: f64,
    /// Run the monotonicity check first.
    pub require_monotone: bool,
}

impl Default for DualOptions {
    fn default() -> Self {
        DualOptions {
            neg_tol: 1e-11,
            require_monotone: true,
        }
    }
}

/// Dual Q-matrix with default options.
pub fn dual_qmatrix(q: &RateMatrix) -> Result<RateMatrix, QMatrixError> {
    dual_qmatrix_with(q, DualOptions::default())
}

pub fn dual_qmatrix_with(q: &RateMatrix, opts: DualOptions) -> Result<RateMatrix, QMatrixError> {
    if opts.require_monotone {
        let report = check_monotone(q);
        if !report.monotone {
            return Err(QMatrixError::NotMonotone(Box::new(report)));
        }
    }
    let eff = q.effective();
    let tails = RowTails::new(&eff);
    let size = eff.len();
    let max_exit = (0..size).map(|i| eff.exit_rate(i)).fold(0.0, f64::max);
    let threshold = opts.neg_tol * max_exit;

    let band = eff
        .rows
        .iter()
        .enumerate()
        .flat_map(|(i, row)| row.iter().map(move |&(j, _)| i.abs_diff(j)))
        .max()
        .unwrap_or(0);
    let killed: Vec<usize> = eff
        .kill
        .iter()
        .enumerate()
        .filter(|(_, &k)| k != 0.0)
        .map(|(i, _)| i)
        .collect();

    let rows: Vec<Vec<(i64, f64)>> = (0..size)
        .into_par_iter()
        .map(|y| {
            let mut targets: Vec<usize> = (y.saturating_sub(band + 1)..=(y + band + 1).min(size)).collect();
            for &k in &killed {
                targets.push(k);
                if k < size {
                    targets.push(k + 1);
                }
            }
            targets.sort_unstable();
            targets.dedup();
            let mut row = Vec::new();
            for j in targets {
                if j == y {
                    continue;
                }
                let below = if j == 0 { 0.0 } else { tails.g(j - 1, y) };
                let value = tails.g(j, y) - below;
                if value < -threshold {
                    return Err(QMatrixError::DualRateNegative {
                        n: eff.lo + y as i64,
                        j: eff.lo + j as i64,
                        rate: value,
                    });
                }
                if value > 0.0 {
                    row.push((j as i64 - y as i64, value));
                }
            }
            Ok(row)
        })
        .collect::<Result<_, _>>()?;

    Ok(RateMatrix {
        lo: q.lo(),
        hi: q.hi(),
        boundary: Boundary::Kill,
        rows,
    })
}

/// Prefix and suffix sums of each effective row, for `G(x, y) = Σ_{l≥y} A(x, l)`.
struct RowTails<'a> {
    eff: &'a EffectiveGenerator,
    prefix: Vec<Vec<f64>>,
    suffix: Vec<Vec<f64>>,
}

impl<'a> RowTails<'a> {
    fn new(eff: &'a EffectiveGenerator) -> Self {
        let mut prefix = Vec::with_capacity(eff.len());
        let mut suffix = Vec::with_capacity(eff.len());
        for row in &eff.rows {
            let mut p = Vec::with_capacity(row.len() + 1);
            let mut acc = 0.0;
            p.push(0.0);
            for &(_, r) in row {
                acc += r;
                p.push(acc);
            }
            let mut s = vec![0.0; row.len() + 1];
            let mut acc = 0.0;
            for (k, &(_, r)) in row.iter().enumerate().rev() {
                acc += r;
                s[k] = acc;
            }
            prefix.push(p);
            suffix.push(s);
        }
        RowTails { eff, prefix, suffix }
    }

    /// `G(x, y)` for window indices; `x == len` is the zero row above the window.
    ///
    /// Written through off-diagonal entries only, so that structurally zero
    /// values come out exactly zero.
    fn g(&self, x: usize, y: usize) -> f64 {
        if x >= self.eff.len() {
            return 0.0;
        }
        let row = &self.eff.rows[x];
        let pos = row.partition_point(|&(j, _)| j < y);
        if y > x {
            self.suffix[x][pos]
        } else {
            -self.eff.kill[x] - self.prefix[x][pos]
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qmatrix::validate_qmatrix;

    fn eq4_direct(q: &RateMatrix, n: i64, j: i64) -> f64 {
        // Σ_{l≥n} (A(j,l) − A(j−1,l)) on the dense effective generator,
        // with the rows outside the window equal to zero
        let a = q.effective().dense();
        let row = |s: i64| -> Vec<f64> {
            if q.contains(s) {
                a.row((s - q.lo()) as usize).to_vec()
            } else {
                vec![0.0; q.len()]
            }
        };
        let (rj, rj1) = (row(j), row(j - 1));
        (n..=q.hi())
            .map(|l| {
                let k = (l - q.lo()) as usize;
                rj[k] - rj1[k]
            })
            .sum()
    }

    #[test]
    fn nearest_neighbour_swap() {
        let q = RateMatrix::from_fn(0, 12, Boundary::Reflect, |n| {
            [(1, 1.0 + 0.25 * n as f64), (-1, 2.0 + 0.5 * (n % 3) as f64)]
        })
        .unwrap();
        let d = dual_qmatrix(&q).unwrap();
        for n in 1..12 {
            assert_eq!(d.rate(n, 1), q.rate(n, -1), "up rate at {n}");
            assert_eq!(d.rate(n, -1), q.rate(n - 1, 1), "down rate at {n}");
            assert_eq!(d.row(n).len(), 2);
        }
        // the top row's up-jump leaves the window and is killed
        assert_eq!(d.rate(12, 1), q.rate(12, -1));
        assert_eq!(d.boundary(), Boundary::Kill);
    }

    #[test]
    fn two_scale_chain_matches_direct_sum() {
        let q = RateMatrix::from_fn(0, 6, Boundary::Reflect, |n| [(1, 1.0), (2, n as f64)]).unwrap();
        assert!(check_monotone(&q).monotone);
        let d = dual_qmatrix(&q).unwrap();
        for n in 0..=6 {
            for j in 0..=6 {
                if j == n {
                    continue;
                }
                let direct = eq4_direct(&q, n, j);
                assert!((d.q(n, j) - direct).abs() < 1e-12, "({n},{j}): {} vs {direct}", d.q(n, j));
            }
        }
        // right jumps turn into left jumps
        for e in d.entries() {
            assert!(e.m < 0 || e.n + e.m > 6, "unexpected right jump {e:?}");
        }
    }

    #[test]
    fn non_monotone_input_is_rejected() {
        let mut q = RateMatrix::new(0, 3, Boundary::Reflect).unwrap();
        q.set_rate(0, 2, 1.0).unwrap();
        assert!(matches!(dual_qmatrix(&q), Err(QMatrixError::NotMonotone(_))));
    }

    #[test]
    fn upper_edge_killing_is_reported() {
        let q = RateMatrix::from_fn(0, 6, Boundary::Kill, |_| [(1, 2.0), (-1, 3.0)]).unwrap();
        assert!(matches!(
            dual_qmatrix(&q),
            Err(QMatrixError::DualRateNegative { .. })
        ));
    }

    #[test]
    fn dual_is_a_valid_killed_chain() {
        let q = RateMatrix::from_fn(-3, 9, Boundary::Reflect, |n| {
            [(1, 1.0), (3, 0.5 + 0.1 * n as f64), (-1, 2.0), (-2, 0.2)]
        })
        .unwrap();
        let d = dual_qmatrix(&q).unwrap();
        let report = validate_qmatrix(&d).unwrap();
        let band = q.bandwidth();
        for (n, _) in report.killing {
            assert!(n > q.hi() - band - 1, "killing away from the edge at {n}");
        }
        // absorbed at the bottom
        assert!(d.row(-3).is_empty());
    }
}
