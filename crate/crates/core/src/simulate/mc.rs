//! Monte Carlo estimators on finite chains.

use rayon::prelude::*;
use serde::Serialize;

use super::path::JumpTable;
use super::SimError;
use crate::generator::{discretize, validate_model, Lattice, LevyModel};
use crate::qmatrix::{dual_qmatrix, RateMatrix};

/// Fraction of paths allowed to touch the window edge before a growth
/// estimate is rejected.
pub const ESCAPE_THRESHOLD: f64 = 1e-3;

const Z95: f64 = 1.959963984540054;

/// Point estimate with a 95% confidence half-width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MCEstimate {
    pub value: f64,
    pub half_width: f64,
    pub reps: u64,
    pub seed: u64,
}

impl MCEstimate {
    /// Binomial proportion `hits / reps`. Uses the normal interval unless
    /// `p̂(1 − p̂)·reps < 10`, where the half-width is widened to cover the
    /// Wilson interval.
    pub fn proportion(hits: u64, reps: u64, seed: u64) -> Self {
        let n = reps as f64;
        let p = hits as f64 / n;
        let var = p * (1.0 - p);
        let half_width = if var * n >= 10.0 {
            Z95 * (var / n).sqrt()
        } else {
            let z2 = Z95 * Z95;
            let denom = 1.0 + z2 / n;
            let centre = (p + z2 / (2.0 * n)) / denom;
            let spread = Z95 / denom * (var / n + z2 / (4.0 * n * n)).sqrt();
            ((centre + spread) - p).max(p - (centre - spread))
        };
        MCEstimate {
            value: p,
            half_width,
            reps,
            seed,
        }
    }

    /// Sample mean of `scale·k` from the integer sums `Σ k` and `Σ k²`, with
    /// the normal interval.
    fn scaled_mean(sum: u128, sum_sq: u128, scale: f64, reps: u64, seed: u64) -> Self {
        let n = reps as f64;
        // n·Σk² − (Σk)² is exact in integers when it fits
        let spread = (reps as u128)
            .checked_mul(sum_sq)
            .zip(sum.checked_mul(sum))
            .map(|(a, b)| (a - b) as f64)
            .unwrap_or_else(|| (n * sum_sq as f64 - (sum as f64).powi(2)).max(0.0));
        let var = if reps > 1 { spread / (n * (n - 1.0)) } else { 0.0 };
        MCEstimate {
            value: scale * sum as f64 / n,
            half_width: Z95 * scale * (var / n).sqrt(),
            reps,
            seed,
        }
    }

    pub fn lower(&self) -> f64 {
        self.value - self.half_width
    }

    pub fn upper(&self) -> f64 {
        self.value + self.half_width
    }
}

fn check_run(t: f64, reps: u64) -> Result<(), SimError> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(SimError::InvalidTime(t));
    }
    if reps == 0 {
        return Err(SimError::NoReplicates);
    }
    Ok(())
}

/// Number of replicates in `lane` whose endpoint satisfies `hit`.
fn count_hits(
    table: &JumpTable,
    x0: i64,
    t: f64,
    reps: u64,
    seed: u64,
    lane: u64,
    hit: impl Fn(i64) -> bool + Sync,
) -> u64 {
    (0..reps)
        .into_par_iter()
        .filter(|&r| {
            let e = table.endpoint(x0, t, seed, lane, r);
            !e.killed && hit(e.state)
        })
        .count() as u64
}

/// Estimates `P(X_t ≥ y)` for the chain started at `x0`; killed paths count
/// as misses.
pub fn mc_survival(q: &RateMatrix, x0: i64, y: i64, t: f64, reps: u64, seed: u64) -> Result<MCEstimate, SimError> {
    check_run(t, reps)?;
    let table = JumpTable::new(q);
    table.check_start(x0)?;
    let hits = count_hits(&table, x0, t, reps, seed, 0, |n| n >= y);
    Ok(MCEstimate::proportion(hits, reps, seed))
}

/// Both sides of the duality identity at one `(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairCheck {
    pub x: i64,
    pub y: i64,
    /// `P(X_t^x ≥ y)`
    pub forward: MCEstimate,
    /// `P(Y_t^y ≤ x)`
    pub dual: MCEstimate,
    /// pooled two-sample z-score of the difference
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualityMcReport {
    pub t: f64,
    pub reps: u64,
    pub seed: u64,
    pub pairs: Vec<PairCheck>,
    pub max_abs_z: f64,
    /// every `|z| < 3`
    pub consistent: bool,
}

fn pooled_z(a: u64, b: u64, reps: u64) -> f64 {
    if a == b {
        return 0.0;
    }
    let n = reps as f64;
    let (pa, pb) = (a as f64 / n, b as f64 / n);
    let p = (pa + pb) / 2.0;
    (pa - pb) / (p * (1.0 - p) * 2.0 / n).sqrt()
}

/// Simulates `X` under `q` and `Y` under its dual independently and compares
/// `P(X_t^x ≥ y)` with `P(Y_t^y ≤ x)` for every pair. Pair `i` uses lanes
/// `2i` and `2i + 1`.
pub fn mc_duality_check(
    q: &RateMatrix,
    pairs: &[(i64, i64)],
    t: f64,
    reps: u64,
    seed: u64,
) -> Result<DualityMcReport, SimError> {
    check_run(t, reps)?;
    let dual = dual_qmatrix(q)?;
    let fwd = JumpTable::new(q);
    let bwd = JumpTable::new(&dual);
    let mut out = Vec::with_capacity(pairs.len());
    for (i, &(x, y)) in pairs.iter().enumerate() {
        fwd.check_start(x)?;
        bwd.check_start(y)?;
        let lane = 2 * i as u64;
        let a = count_hits(&fwd, x, t, reps, seed, lane, |n| n >= y);
        let b = count_hits(&bwd, y, t, reps, seed, lane + 1, |n| n <= x);
        out.push(PairCheck {
            x,
            y,
            forward: MCEstimate::proportion(a, reps, seed),
            dual: MCEstimate::proportion(b, reps, seed),
            z: pooled_z(a, b, reps),
        });
    }
    let max_abs_z = out.iter().map(|p| p.z.abs()).fold(0.0, f64::max);
    Ok(DualityMcReport {
        t,
        reps,
        seed,
        pairs: out,
        max_abs_z,
        consistent: max_abs_z < 3.0,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthMcReport {
    pub x0: f64,
    pub t: f64,
    pub c: f64,
    pub h: f64,
    /// `E|X_t|` on the lattice chain
    pub estimate: MCEstimate,
    /// `e^{ct}(|x0| + c)`
    pub bound: f64,
    /// fraction of paths that touched a window edge or were killed
    pub escape_fraction: f64,
    /// `estimate − 3·half_width ≤ bound`
    pub holds: bool,
}

/// Number of grid points used to validate the model before simulation.
const VALIDATION_POINTS: i64 = 201;

/// Validates `m` with growth constant `c` on the lattice, discretises it, and
/// estimates `E|X_t|` from `x0` against `e^{ct}(|x0| + c)`.
pub fn mc_growth_bound(
    m: &LevyModel,
    lat: &Lattice,
    x0: f64,
    t: f64,
    c: f64,
    reps: u64,
    seed: u64,
) -> Result<GrowthMcReport, SimError> {
    check_run(t, reps)?;
    let stride = ((lat.hi - lat.lo) / (VALIDATION_POINTS - 1)).max(1);
    let grid: Vec<f64> = (lat.lo..=lat.hi).step_by(stride as usize).map(|n| lat.x(n)).collect();
    validate_model(&m.clone().with_growth_c(c), &grid)?;
    let q = discretize(m, lat)?;
    let table = JumpTable::new(&q);
    let n0 = lat.state(x0);
    table.check_start(n0)?;

    let ends: Vec<_> = (0..reps).into_par_iter().map(|r| table.endpoint(n0, t, seed, 0, r)).collect();
    let escaped = ends.iter().filter(|e| e.touched_edge).count();
    let escape_fraction = escaped as f64 / reps as f64;
    if escape_fraction > ESCAPE_THRESHOLD {
        return Err(SimError::WindowEscape {
            fraction: escape_fraction,
            threshold: ESCAPE_THRESHOLD,
        });
    }
    let s1: u128 = ends.iter().map(|e| e.state.unsigned_abs() as u128).sum();
    let s2: u128 = ends.iter().map(|e| (e.state.unsigned_abs() as u128).pow(2)).sum();
    let h = lat.h;
    let estimate = MCEstimate::scaled_mean(s1, s2, h, reps, seed);
    let bound = (c * t).exp() * (x0.abs() + c);
    Ok(GrowthMcReport {
        x0,
        t,
        c,
        h,
        estimate,
        bound,
        escape_fraction,
        holds: estimate.value - 3.0 * estimate.half_width <= bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::LevyKernel;
    use crate::qmatrix::{transition_matrix, Boundary};

    fn birth_death(lo: i64, hi: i64) -> RateMatrix {
        RateMatrix::from_fn(lo, hi, Boundary::Reflect, |_| [(1, 1.0), (-1, 1.2)]).unwrap()
    }

    #[test]
    fn wilson_fallback_covers_degenerate_proportions() {
        let e = MCEstimate::proportion(100, 100, 0);
        assert_eq!(e.value, 1.0);
        assert!(e.half_width > 0.0 && e.lower() < 1.0);
        let e = MCEstimate::proportion(0, 100, 0);
        assert!(e.half_width > 0.0);
        let normal = MCEstimate::proportion(500, 1000, 0);
        assert!((normal.half_width - Z95 * (0.25f64 / 1000.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn survival_at_time_zero_is_the_indicator() {
        let q = birth_death(0, 20);
        assert_eq!(mc_survival(&q, 10, 10, 0.0, 500, 1).unwrap().value, 1.0);
        assert_eq!(mc_survival(&q, 10, 11, 0.0, 500, 1).unwrap().value, 0.0);
        assert_eq!(mc_survival(&q, 10, -5, 2.0, 500, 1).unwrap().value, 1.0);
    }

    #[test]
    fn survival_agrees_with_uniformization() {
        let q = birth_death(0, 20);
        let p = transition_matrix(&q, 1.0, 1e-13).unwrap();
        let e = mc_survival(&q, 10, 11, 1.0, 40_000, 5).unwrap();
        let exact = p.upper_tail(10, 11);
        assert!((e.value - exact).abs() < 3.0 * e.half_width, "{e:?} vs {exact}");
    }

    #[test]
    fn duality_at_time_zero() {
        let q = birth_death(0, 40);
        let r = mc_duality_check(&q, &[(20, 18), (18, 20)], 0.0, 200, 3).unwrap();
        assert!(r.pairs.iter().all(|p| p.z == 0.0));
        assert_eq!(r.pairs[0].forward.value, 1.0);
        assert_eq!(r.pairs[1].dual.value, 0.0);
    }

    #[test]
    fn duality_of_birth_death() {
        let q = birth_death(0, 40);
        let r = mc_duality_check(&q, &[(20, 18)], 0.5, 20_000, 9).unwrap();
        assert!(r.consistent, "{r:?}");
    }

    #[test]
    fn non_monotone_chain_is_rejected() {
        let q = RateMatrix::from_fn(0, 6, Boundary::Reflect, |n| if n == 3 { vec![(2, 1.0)] } else { vec![] }).unwrap();
        assert!(matches!(
            mc_duality_check(&q, &[(3, 3)], 1.0, 10, 0),
            Err(SimError::QMatrix(crate::qmatrix::QMatrixError::NotMonotone(_)))
        ));
    }

    #[test]
    fn zero_model_growth_is_flat() {
        let lat = Lattice::new(0.1, -100, 100, Boundary::Reflect).unwrap();
        let r = mc_growth_bound(&LevyModel::zero(), &lat, 2.0, 1.0, 1.0, 1000, 0).unwrap();
        assert!((r.estimate.value - 2.0).abs() < 1e-12);
        // all endpoints coincide
        assert_eq!(r.estimate.half_width, 0.0);
        assert!(r.holds);
    }

    #[test]
    fn poisson_drift_mean() {
        let m = LevyModel::zero().with_mu(LevyKernel::atoms(|_| 1.0, vec![(1.0, 1.0)]));
        let lat = Lattice::new(0.5, -10, 60, Boundary::Reflect).unwrap();
        let r = mc_growth_bound(&m, &lat, 5.0, 1.0, 1.0, 20_000, 4).unwrap();
        assert!((r.estimate.value - 6.0).abs() < 3.0 * r.estimate.half_width, "{r:?}");
        assert!(r.holds);
    }

    #[test]
    fn narrow_window_escapes() {
        let m = LevyModel::zero().with_mu(LevyKernel::atoms(|_| 1.0, vec![(1.0, 1.0)]));
        let lat = Lattice::new(0.5, -10, 12, Boundary::Reflect).unwrap();
        assert!(matches!(
            mc_growth_bound(&m, &lat, 5.0, 1.0, 1.0, 2000, 4),
            Err(SimError::WindowEscape { .. })
        ));
    }
}
