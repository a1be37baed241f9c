//! Lattice discretisation `L_h` of a Lévy–Khintchine generator.
//!
//! Row `n` (state `x = nh`) gets
//!
//! * `G(x) / 2h²` on both neighbours,
//! * `|b(x)| / h` on the neighbour in the direction of `b(x)`,
//! * `ν(x, [mh, mh + h))` on `+m` and `ν(x, −(mh − h, mh])` on `−m` for
//!   `m ≥ 1`, with the compensation `m · mass` of every bin with `mh ≤ 1`
//!   moved onto the opposite neighbour,
//! * the same bins of `μ`, without compensation.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::kernel::{KernelCase, LevyKernel, Side};
use super::{GeneratorError, LevyModel};
use crate::qmatrix::{Boundary, RateMatrix};

/// Mass left beyond the last bin, relative to the kernel's mass beyond `h`.
pub const TAIL_EPS: f64 = 1e-12;
const MAX_BINS: usize = 1 << 20;

/// Lattice `hℤ ∩ [lo·h, hi·h]` with a boundary policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub h: f64,
    pub lo: i64,
    pub hi: i64,
    pub boundary: Boundary,
}

impl Lattice {
    pub fn new(h: f64, lo: i64, hi: i64, boundary: Boundary) -> Result<Self, GeneratorError> {
        if !(h > 0.0) || !h.is_finite() {
            return Err(GeneratorError::InvalidLattice(format!("mesh must be positive, got {h}")));
        }
        if hi <= lo {
            return Err(GeneratorError::InvalidLattice(format!("empty window [{lo}, {hi}]")));
        }
        Ok(Lattice { h, lo, hi, boundary })
    }

    /// Smallest lattice window containing `[x_lo, x_hi]`.
    pub fn covering(h: f64, x_lo: f64, x_hi: f64, boundary: Boundary) -> Result<Self, GeneratorError> {
        if !(h > 0.0) {
            return Err(GeneratorError::InvalidLattice(format!("mesh must be positive, got {h}")));
        }
        Lattice::new(h, (x_lo / h).floor() as i64, (x_hi / h).ceil() as i64, boundary)
    }

    pub fn x(&self, n: i64) -> f64 {
        n as f64 * self.h
    }

    /// Nearest lattice state to `x`.
    pub fn state(&self, x: f64) -> i64 {
        (x / self.h).round() as i64
    }

    pub fn len(&self) -> usize {
        (self.hi - self.lo + 1) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Bins of one kernel side.
struct SideBins<'a> {
    kernel: &'a LevyKernel,
    side: Side,
    count: usize,
    /// x-independent bin masses of a decomposable kernel
    base: Option<Vec<f64>>,
}

fn bin_edges(side: Side, m: usize, h: f64) -> (f64, f64) {
    match side {
        Side::Right => (m as f64 * h, (m + 1) as f64 * h),
        Side::Left => ((m - 1) as f64 * h, m as f64 * h),
    }
}

fn unresolved(x: f64) -> impl Fn(GeneratorError) -> GeneratorError {
    move |e| match e {
        GeneratorError::Quadrature { source, .. } => GeneratorError::TailMassUnresolved {
            x,
            reason: source.to_string(),
        },
        other => other,
    }
}

/// Number of bins after which the remaining tail is negligible.
fn bins_needed<F>(side: Side, h: f64, x: f64, tail: F) -> Result<usize, GeneratorError>
where
    F: Fn(f64) -> Result<f64, GeneratorError>,
{
    // mass left after bin `m`
    let beyond = |m: usize| match side {
        Side::Right => tail((m + 1) as f64 * h),
        Side::Left => tail(m as f64 * h),
    };
    let eps = TAIL_EPS * tail(h)?.max(1.0);
    let mut hi = 16usize;
    while beyond(hi)? > eps {
        hi *= 2;
        if hi > MAX_BINS {
            return Err(GeneratorError::TailMassUnresolved {
                x,
                reason: format!("tail still above {eps:e} after {MAX_BINS} bins"),
            });
        }
    }
    if hi == 16 {
        return Ok(hi);
    }
    // beyond(hi / 2) > eps from the doubling loop
    let mut lo = hi / 2;
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if beyond(mid)? <= eps {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

impl<'a> SideBins<'a> {
    fn plan(kernel: &'a LevyKernel, side: Side, lat: &Lattice) -> Result<Self, GeneratorError> {
        let h = lat.h;
        let mut bins = SideBins {
            kernel,
            side,
            count: 0,
            base: None,
        };
        if !kernel.has_side(side) {
            return Ok(bins);
        }
        bins.count = if let Some(bound) = kernel.support_bound() {
            let r = bound / h;
            match side {
                Side::Right => (r + 1e-9).floor() as usize,
                Side::Left => (r - 1e-9).ceil().max(0.0) as usize,
            }
        } else if matches!(kernel.case, KernelCase::Decomposable { .. }) {
            bins_needed(side, h, 0.0, |a| {
                kernel
                    .base_weighted(side, a, f64::INFINITY, super::Weight::One)
                    .map_err(|source| GeneratorError::Quadrature { x: 0.0, source })
            })
            .map_err(unresolved(0.0))?
        } else {
            (lat.lo..=lat.hi)
                .into_par_iter()
                .map(|n| {
                    let x = lat.x(n);
                    bins_needed(side, h, x, |a| kernel.tail(x, side, a)).map_err(unresolved(x))
                })
                .collect::<Result<Vec<_>, _>>()?
                .into_iter()
                .max()
                .unwrap_or(0)
        };
        if bins.count > MAX_BINS {
            return Err(GeneratorError::TailMassUnresolved {
                x: 0.0,
                reason: format!("{} bins requested", bins.count),
            });
        }
        if matches!(kernel.case, KernelCase::Decomposable { .. }) {
            let base = (1..=bins.count)
                .map(|m| {
                    let (lo, hi) = bin_edges(side, m, h);
                    kernel
                        .base_weighted(side, lo, hi, super::Weight::One)
                        .map_err(|source| GeneratorError::TailMassUnresolved {
                            x: 0.0,
                            reason: source.to_string(),
                        })
                })
                .collect::<Result<Vec<_>, _>>()?;
            bins.base = Some(base);
        }
        Ok(bins)
    }

    /// Bin masses at `x`, index `m − 1`.
    fn masses(&self, x: f64, h: f64) -> Result<Vec<f64>, GeneratorError> {
        let raw: Vec<f64> = match (&self.base, &self.kernel.case) {
            (Some(base), KernelCase::Decomposable { a, .. }) => {
                let ax = a(x);
                base.iter().map(|&p| ax * p).collect()
            }
            _ => (1..=self.count)
                .map(|m| {
                    let (lo, hi) = bin_edges(self.side, m, h);
                    self.kernel.mass(x, self.side, lo, hi).map_err(unresolved(x))
                })
                .collect::<Result<_, _>>()?,
        };
        let scale = raw.iter().fold(0.0f64, |s, &p| s.max(p.abs()));
        raw.into_iter()
            .map(|p| {
                if !p.is_finite() {
                    Err(GeneratorError::TailMassUnresolved {
                        x,
                        reason: "non-finite bin mass".into(),
                    })
                } else if p < -1e-13 * scale.max(1.0) {
                    Err(GeneratorError::NegativeKernelMass { x, value: p })
                } else {
                    Ok(p.max(0.0))
                }
            })
            .collect()
    }
}

/// Discretises `m` on `lat`; rows are computed in parallel.
pub fn discretize(m: &LevyModel, lat: &Lattice) -> Result<RateMatrix, GeneratorError> {
    let h = lat.h;
    if h > 1.0 {
        return Err(GeneratorError::InvalidLattice(format!("mesh {h} exceeds 1")));
    }
    let mut plans = Vec::new();
    for (tag, kernel) in m.kernels() {
        let compensated = tag == "nu";
        for side in [Side::Right, Side::Left] {
            plans.push((compensated, SideBins::plan(kernel, side, lat)?));
        }
    }

    let rows: Vec<Vec<(i64, f64)>> = (lat.lo..=lat.hi)
        .into_par_iter()
        .map(|n| {
            let x = lat.x(n);
            let mut rates: BTreeMap<i64, f64> = BTreeMap::new();
            let mut add = |off: i64, r: f64| {
                if r != 0.0 {
                    *rates.entry(off).or_insert(0.0) += r;
                }
            };
            let g = (m.g)(x);
            let b = (m.b)(x);
            if !g.is_finite() || !b.is_finite() {
                return Err(GeneratorError::MomentUnbounded {
                    x,
                    moment: "G + |b|".into(),
                });
            }
            if g < 0.0 {
                return Err(GeneratorError::NegativeDiffusion { x, value: g });
            }
            add(1, g / (2.0 * h * h));
            add(-1, g / (2.0 * h * h));
            if b > 0.0 {
                add(1, b / h);
            } else if b < 0.0 {
                add(-1, -b / h);
            }
            for (compensated, bins) in &plans {
                let sign = match bins.side {
                    Side::Right => 1,
                    Side::Left => -1,
                };
                let mut comp = 0.0;
                for (k, p) in bins.masses(x, h)?.into_iter().enumerate() {
                    let mm = k + 1;
                    add(sign * mm as i64, p);
                    if *compensated && mm as f64 * h <= 1.0 + 1e-12 {
                        comp += mm as f64 * p;
                    }
                }
                add(-sign, comp);
            }
            Ok(rates.into_iter().collect())
        })
        .collect::<Result<_, GeneratorError>>()?;

    Ok(RateMatrix::from_fn(lat.lo, lat.hi, lat.boundary, |n| {
        rows[(n - lat.lo) as usize].clone()
    })?)
}
