//! Jump kernels `ν(x, dy)` and the integrals the rest of the crate needs
//! from them: bin masses, tails and weighted moments.
//!
//! All quantities are expressed per side in terms of the jump length
//! `u = |y|`. Right-side intervals are `[lo, hi)` and left-side intervals are
//! `(lo, hi]` in `u`, matching the lattice bins `[mh, mh + h)` and
//! `(mh − h, mh]`. Callbacks must be reentrant: rows are evaluated in
//! parallel.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::GeneratorError;
use crate::quad::{self, QuadError};

pub type Fn1 = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type Fn2 = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Support {
    Both,
    #[serde(alias = "positive_only")]
    Positive,
    #[serde(alias = "negative_only")]
    Negative,
}

/// Which half-line of jumps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Right,
    Left,
}

impl Side {
    fn sign(self) -> f64 {
        match self {
            Side::Right => 1.0,
            Side::Left => -1.0,
        }
    }
}

/// The x-independent factor of a decomposable kernel.
#[derive(Clone)]
pub enum BaseMeasure {
    /// density in `y`
    Density(Fn1),
    /// `(position, weight)` atoms
    Atoms(Vec<(f64, f64)>),
}

#[derive(Clone)]
pub enum KernelCase {
    /// `ν(x, y) dy`, with optional x-derivatives of the density.
    DensityInX {
        density: Fn2,
        dx_density: Option<Fn2>,
        dxx_density: Option<Fn2>,
    },
    /// `a(x) ν(dy)`.
    Decomposable {
        a: Fn1,
        da: Option<Fn1>,
        base: BaseMeasure,
    },
    /// Tail functions `(x, a) ↦ ν(x, [a, ∞))` and `(x, a) ↦ ν(x, (−∞, −a])`
    /// for `a > 0`; a missing side carries no mass.
    Tabulated {
        right_tail: Option<Fn2>,
        left_tail: Option<Fn2>,
    },
}

impl KernelCase {
    pub fn name(&self) -> &'static str {
        match self {
            KernelCase::DensityInX { .. } => "density",
            KernelCase::Decomposable { .. } => "decomposable",
            KernelCase::Tabulated { .. } => "tabulated",
        }
    }
}

/// Weight `w(u)` of a moment integral `∫ w(|y|) ν(x, dy)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Weight {
    One,
    Abs,
    Square,
    /// `u ∧ u²`
    SmallMoment,
    /// `1 ∧ u²`
    UnitSquare,
    /// `(u − a)⁺`
    Excess(f64),
}

impl Weight {
    pub fn eval(self, u: f64) -> f64 {
        match self {
            Weight::One => 1.0,
            Weight::Abs => u,
            Weight::Square => u * u,
            Weight::SmallMoment => u.min(u * u),
            Weight::UnitSquare => (u * u).min(1.0),
            Weight::Excess(a) => (u - a).max(0.0),
        }
    }

    fn derivative(self, u: f64) -> f64 {
        match self {
            Weight::One => 0.0,
            Weight::Abs => 1.0,
            Weight::Square => 2.0 * u,
            Weight::SmallMoment => {
                if u < 1.0 {
                    2.0 * u
                } else {
                    1.0
                }
            }
            Weight::UnitSquare => {
                if u < 1.0 {
                    2.0 * u
                } else {
                    0.0
                }
            }
            Weight::Excess(a) => {
                if u > a {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Points where the weight has a kink.
    fn breaks(self) -> Vec<f64> {
        match self {
            Weight::SmallMoment | Weight::UnitSquare => vec![1.0],
            Weight::Excess(a) => vec![a],
            _ => Vec::new(),
        }
    }
}

/// A jump kernel with its support restrictions.
#[derive(Clone)]
pub struct LevyKernel {
    pub case: KernelCase,
    pub support: Support,
    /// jumps with `|y| ≤ min_jump` are removed
    pub min_jump: f64,
    /// jumps with `|y| > horizon` are removed; also bounds the integration range
    pub horizon: Option<f64>,
}

impl fmt::Debug for LevyKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LevyKernel")
            .field("case", &self.case.name())
            .field("support", &self.support)
            .field("min_jump", &self.min_jump)
            .field("horizon", &self.horizon)
            .finish()
    }
}

fn quad_err(x: f64) -> impl Fn(QuadError) -> GeneratorError {
    move |source| GeneratorError::Quadrature { x, source }
}

impl LevyKernel {
    fn with_case(case: KernelCase) -> Self {
        LevyKernel {
            case,
            support: Support::Both,
            min_jump: 0.0,
            horizon: None,
        }
    }

    pub fn density(density: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::with_case(KernelCase::DensityInX {
            density: Arc::new(density),
            dx_density: None,
            dxx_density: None,
        })
    }

    pub fn decomposable(
        a: impl Fn(f64) -> f64 + Send + Sync + 'static,
        base: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        Self::with_case(KernelCase::Decomposable {
            a: Arc::new(a),
            da: None,
            base: BaseMeasure::Density(Arc::new(base)),
        })
    }

    pub fn atoms(a: impl Fn(f64) -> f64 + Send + Sync + 'static, atoms: Vec<(f64, f64)>) -> Self {
        Self::with_case(KernelCase::Decomposable {
            a: Arc::new(a),
            da: None,
            base: BaseMeasure::Atoms(atoms),
        })
    }

    pub fn tabulated(right_tail: Option<Fn2>, left_tail: Option<Fn2>) -> Self {
        Self::with_case(KernelCase::Tabulated { right_tail, left_tail })
    }

    pub fn with_support(mut self, support: Support) -> Self {
        self.support = support;
        self
    }

    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = Some(horizon);
        self
    }

    pub fn with_min_jump(mut self, min_jump: f64) -> Self {
        self.min_jump = min_jump;
        self
    }

    /// Attaches `∂ν/∂x` to a density kernel.
    pub fn with_dx_density(mut self, d: Fn2) -> Self {
        if let KernelCase::DensityInX { dx_density, .. } = &mut self.case {
            *dx_density = Some(d);
        }
        self
    }

    /// Attaches `a′` to a decomposable kernel.
    pub fn with_da(mut self, d: Fn1) -> Self {
        if let KernelCase::Decomposable { da, .. } = &mut self.case {
            *da = Some(d);
        }
        self
    }

    pub fn has_side(&self, side: Side) -> bool {
        let by_support = matches!(
            (self.support, side),
            (Support::Both, _) | (Support::Positive, Side::Right) | (Support::Negative, Side::Left)
        );
        by_support
            && match &self.case {
                KernelCase::Tabulated { right_tail, left_tail } => match side {
                    Side::Right => right_tail.is_some(),
                    Side::Left => left_tail.is_some(),
                },
                _ => true,
            }
    }

    /// `[lo, hi]` clipped to `(min_jump, horizon]`; `None` if empty.
    fn clip(&self, lo: f64, hi: f64) -> Option<(f64, f64)> {
        let lo = lo.max(self.min_jump).max(0.0);
        let hi = match self.horizon {
            Some(h) => hi.min(h),
            None => hi,
        };
        (lo < hi).then_some((lo, hi))
    }

    fn atom_in(&self, side: Side, u: f64, lo: f64, hi: f64) -> bool {
        let inside = match side {
            Side::Right => u >= lo && u < hi,
            Side::Left => u > lo && u <= hi,
        };
        inside && u > self.min_jump && self.horizon.is_none_or(|h| u <= h)
    }

    /// `∫ w(|y|) ν(x, dy)` over the jumps on `side` with `|y|` in the
    /// side's interval between `lo` and `hi` (`hi` may be `∞`).
    pub fn weighted(&self, x: f64, side: Side, lo: f64, hi: f64, w: Weight) -> Result<f64, GeneratorError> {
        if !self.has_side(side) {
            return Ok(0.0);
        }
        let Some((lo_c, hi_c)) = self.clip(lo, hi) else {
            return Ok(0.0);
        };
        let s = side.sign();
        let value = match &self.case {
            KernelCase::DensityInX { density, .. } => {
                let f = |u: f64| w.eval(u) * density(x, s * u);
                integrate_split(f, lo_c, hi_c, &w.breaks()).map_err(quad_err(x))?
            }
            KernelCase::Decomposable { a, .. } => {
                let ax = a(x);
                if ax == 0.0 {
                    0.0
                } else {
                    ax * self.base_weighted(side, lo, hi, w).map_err(quad_err(x))?
                }
            }
            KernelCase::Tabulated { right_tail, left_tail } => {
                let tail = match side {
                    Side::Right => right_tail,
                    Side::Left => left_tail,
                }
                .as_ref()
                .expect("side checked above");
                let t_hi = if hi_c.is_finite() { tail(x, hi_c) } else { 0.0 };
                // restricted tail R(u) = ν(x, [u, hi_c)); by parts
                // ∫ w dν = w(lo) R(lo) + ∫ w'(u) R(u) du
                let r = |u: f64| tail(x, u) - t_hi;
                let w_lo = w.eval(lo_c);
                let boundary = if w_lo == 0.0 { 0.0 } else { w_lo * r(lo_c) };
                let inner = if matches!(w, Weight::One) {
                    0.0
                } else {
                    integrate_split(|u| w.derivative(u) * r(u), lo_c, hi_c, &w.breaks()).map_err(quad_err(x))?
                };
                boundary + inner
            }
        };
        if value.is_finite() {
            Ok(value)
        } else {
            Err(GeneratorError::TailMassUnresolved {
                x,
                reason: format!("non-finite integral on |y| in [{lo_c}, {hi_c}]"),
            })
        }
    }

    /// The x-independent factor of a decomposable kernel, integrated.
    pub(crate) fn base_weighted(&self, side: Side, lo: f64, hi: f64, w: Weight) -> Result<f64, QuadError> {
        let KernelCase::Decomposable { base, .. } = &self.case else {
            panic!("base_weighted on a non-decomposable kernel");
        };
        if !self.has_side(side) {
            return Ok(0.0);
        }
        let Some((lo_c, hi_c)) = self.clip(lo, hi) else {
            return Ok(0.0);
        };
        let s = side.sign();
        match base {
            BaseMeasure::Density(d) => integrate_split(|u| w.eval(u) * d(s * u), lo_c, hi_c, &w.breaks()),
            BaseMeasure::Atoms(atoms) => Ok(atoms
                .iter()
                .filter(|&&(p, _)| p * s > 0.0 && self.atom_in(side, p.abs(), lo, hi))
                .map(|&(p, wt)| w.eval(p.abs()) * wt)
                .sum()),
        }
    }

    /// Mass of the bin: `[lo, hi)` on the right, `(lo, hi]` on the left.
    pub fn mass(&self, x: f64, side: Side, lo: f64, hi: f64) -> Result<f64, GeneratorError> {
        self.weighted(x, side, lo, hi, Weight::One)
    }

    /// `ν(x, [a, ∞))` on the right, `ν(x, (−∞, −a])` on the left.
    pub fn tail(&self, x: f64, side: Side, a: f64) -> Result<f64, GeneratorError> {
        match side {
            // the left bin convention is open at `lo`; nudge so `a` itself counts
            Side::Right => self.mass(x, side, a, f64::INFINITY),
            Side::Left => self.mass(x, side, a * (1.0 - f64::EPSILON), f64::INFINITY),
        }
    }

    /// Total mass on both sides beyond `a`.
    pub fn intensity_beyond(&self, x: f64, a: f64) -> Result<f64, GeneratorError> {
        Ok(self.tail(x, Side::Right, a)? + self.tail(x, Side::Left, a)?)
    }

    /// Atoms make bin masses discontinuous in the bin edges.
    pub fn has_atoms(&self) -> bool {
        matches!(
            self.case,
            KernelCase::Decomposable {
                base: BaseMeasure::Atoms(_),
                ..
            }
        )
    }

    /// Largest relevant jump length, if the kernel is known to vanish beyond it.
    pub fn support_bound(&self) -> Option<f64> {
        let atoms_bound = match &self.case {
            KernelCase::Decomposable {
                base: BaseMeasure::Atoms(atoms),
                ..
            } => Some(atoms.iter().map(|&(p, _)| p.abs()).fold(0.0, f64::max)),
            _ => None,
        };
        match (self.horizon, atoms_bound) {
            (Some(h), Some(b)) => Some(h.min(b)),
            (h, b) => h.or(b),
        }
    }
}

/// Integrates over `[lo, hi]` (`hi` may be infinite), splitting at `breaks`.
fn integrate_split<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, breaks: &[f64]) -> Result<f64, QuadError> {
    let mut points = vec![lo];
    points.extend(breaks.iter().copied().filter(|&b| b > lo && b < hi));
    points.push(hi);
    let mut total = 0.0;
    for pair in points.windows(2) {
        total += quad::integrate_range(&f, pair[0], pair[1], quad::ABS_TOL, quad::REL_TOL)?;
    }
    Ok(total)
}
