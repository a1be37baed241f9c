//! Model checks on a sample grid: moment bounds, the growth condition, and
//! monotonicity of the jump tails in `x`.

use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;

use super::kernel::{KernelCase, LevyKernel, Side, Weight};
use super::{GeneratorError, LevyModel};

/// Default slack of the tail comparisons, absolute and relative.
pub const LEVY_MONO_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthReport {
    pub c: f64,
    pub checked_points: usize,
    /// smallest `rhs − lhs` over the checked points
    pub worst_margin: f64,
    pub worst_x: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelReport {
    pub valid: bool,
    pub grid_points: usize,
    pub min_diffusion: f64,
    /// `sup_x ∫ (|y| ∧ |y|²) ν(x, dy)`
    pub sup_small_moment: f64,
    /// `sup_x ∫ |y| μ(x, dy)`
    pub sup_mu_first_moment: f64,
    /// `sup_x (G + |b| + ∫ (1 ∧ y²) ν)`, reported for bounded models
    pub sup_bounded_norm: Option<f64>,
    /// `"checked"` when x-derivatives of every kernel are available,
    /// `"unchecked"` otherwise, `"none"` without kernels
    pub derivative_moments: String,
    pub sup_dx_moment: Option<f64>,
    pub sup_dxx_moment: Option<f64>,
    pub growth: Option<GrowthReport>,
}

/// `(kernel with the first x-derivative as density, with the second)` when
/// the kernel supplies them.
fn derivative_kernels(k: &LevyKernel) -> (Option<LevyKernel>, Option<LevyKernel>) {
    let wrap = |d: Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>| LevyKernel {
        case: KernelCase::DensityInX {
            density: Arc::new(move |x, y| d(x, y).abs()),
            dx_density: None,
            dxx_density: None,
        },
        ..k.clone()
    };
    match &k.case {
        KernelCase::DensityInX {
            dx_density,
            dxx_density,
            ..
        } => (dx_density.clone().map(wrap), dxx_density.clone().map(wrap)),
        KernelCase::Decomposable { da: Some(da), .. } => {
            let da = da.clone();
            let mut first = k.clone();
            if let KernelCase::Decomposable { a, .. } = &mut first.case {
                *a = Arc::new(move |x| da(x).abs());
            }
            (Some(first), None)
        }
        _ => (None, None),
    }
}

fn both_sides(k: &LevyKernel, x: f64, w: Weight) -> Result<f64, GeneratorError> {
    Ok(k.weighted(x, Side::Right, 0.0, f64::INFINITY, w)? + k.weighted(x, Side::Left, 0.0, f64::INFINITY, w)?)
}

fn moment(k: &LevyKernel, x: f64, w: Weight, name: &str) -> Result<f64, GeneratorError> {
    match both_sides(k, x, w) {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(_) | Err(GeneratorError::Quadrature { .. }) | Err(GeneratorError::TailMassUnresolved { .. }) => {
            Err(GeneratorError::MomentUnbounded {
                x,
                moment: name.to_string(),
            })
        }
        Err(e) => Err(e),
    }
}

struct PointValues {
    g: f64,
    small: f64,
    mu_first: f64,
    bounded_norm: f64,
    dx: Option<f64>,
    dxx: Option<f64>,
}

/// Checks the model's coefficients on `grid`: `G ≥ 0`, finite small-jump
/// moments of `ν`, finite first moment of `μ`, derivative moments when the
/// kernels provide derivatives, and the growth condition when `growth_c` is set.
pub fn validate_model(m: &LevyModel, grid: &[f64]) -> Result<ModelReport, GeneratorError> {
    if grid.is_empty() {
        return Err(GeneratorError::EmptyGrid);
    }
    let nu_derivs = m.nu.as_ref().map(derivative_kernels);
    let mu_derivs = m.mu.as_ref().map(derivative_kernels);
    let derivs: Vec<_> = nu_derivs.iter().chain(mu_derivs.iter()).collect();
    let have_first = !derivs.is_empty() && derivs.iter().all(|d| d.0.is_some());
    let have_second = !derivs.is_empty() && derivs.iter().all(|d| d.1.is_some());

    let points: Vec<PointValues> = grid
        .par_iter()
        .map(|&x| {
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
            let small = match &m.nu {
                Some(k) => moment(k, x, Weight::SmallMoment, "int (|y| ^ y^2) nu(x, dy)")?,
                None => 0.0,
            };
            let unit = match &m.nu {
                Some(k) => moment(k, x, Weight::UnitSquare, "int (1 ^ y^2) nu(x, dy)")?,
                None => 0.0,
            };
            let mu_first = match &m.mu {
                Some(k) => moment(k, x, Weight::Abs, "int |y| mu(x, dy)")?,
                None => 0.0,
            };
            let mut dx = None;
            let mut dxx = None;
            if have_first {
                let mut s = 0.0;
                for (d, w, name) in [
                    (&nu_derivs, Weight::SmallMoment, "int (|y| ^ y^2) |nu'(x, dy)|"),
                    (&mu_derivs, Weight::Abs, "int |y| |mu'(x, dy)|"),
                ] {
                    if let Some((Some(k), _)) = d {
                        s += moment(k, x, w, name)?;
                    }
                }
                dx = Some(s);
            }
            if have_second {
                let mut s = 0.0;
                for (d, w, name) in [
                    (&nu_derivs, Weight::SmallMoment, "int (|y| ^ y^2) |nu''(x, dy)|"),
                    (&mu_derivs, Weight::Abs, "int |y| |mu''(x, dy)|"),
                ] {
                    if let Some((_, Some(k))) = d {
                        s += moment(k, x, w, name)?;
                    }
                }
                dxx = Some(s);
            }
            Ok(PointValues {
                g,
                small,
                mu_first,
                bounded_norm: g + b.abs() + unit,
                dx,
                dxx,
            })
        })
        .collect::<Result<_, _>>()?;

    let sup = |f: &dyn Fn(&PointValues) -> f64| points.iter().map(f).fold(0.0, f64::max);
    let sup_opt = |f: &dyn Fn(&PointValues) -> Option<f64>| -> Option<f64> {
        points.iter().map(f).try_fold(0.0, |acc: f64, v| v.map(|v| acc.max(v)))
    };

    let growth = match m.growth_c {
        Some(c) => Some(check_growth(m, grid, c)?),
        None => None,
    };

    Ok(ModelReport {
        valid: true,
        grid_points: grid.len(),
        min_diffusion: points.iter().map(|p| p.g).fold(f64::INFINITY, f64::min),
        sup_small_moment: sup(&|p| p.small),
        sup_mu_first_moment: sup(&|p| p.mu_first),
        sup_bounded_norm: m.bounded.then(|| sup(&|p| p.bounded_norm)),
        derivative_moments: if derivs.is_empty() {
            "none".into()
        } else if have_first && have_second {
            "checked".into()
        } else {
            "unchecked".into()
        },
        sup_dx_moment: if have_first { sup_opt(&|p| p.dx) } else { None },
        sup_dxx_moment: if have_second { sup_opt(&|p| p.dxx) } else { None },
        growth,
    })
}

/// Left- and right-hand sides of the growth condition at `x` (`|x| > 1`).
pub(crate) fn growth_sides(m: &LevyModel, x: f64, c: f64) -> Result<(f64, f64), GeneratorError> {
    let b = (m.b)(x);
    let mu_first = match &m.mu {
        Some(k) => moment(k, x, Weight::Abs, "int |y| mu(x, dy)")?,
        None => 0.0,
    };
    // jumps of ν overshooting the origin: ∫_{y ≤ −x} |y + x| ν for x > 1,
    // ∫_{y ≥ −x} |y + x| ν for x < −1
    let (side, drift) = if x > 0.0 { (Side::Left, b) } else { (Side::Right, -b) };
    let overshoot = match &m.nu {
        Some(k) => k
            .weighted(x, side, x.abs(), f64::INFINITY, Weight::Excess(x.abs()))
            .map_err(|_| GeneratorError::MomentUnbounded {
                x,
                moment: "int |y + x| nu(x, dy) beyond the origin".into(),
            })?,
        None => 0.0,
    };
    Ok((drift + mu_first + overshoot, c * (1.0 + x.abs())))
}

fn check_growth(m: &LevyModel, grid: &[f64], c: f64) -> Result<GrowthReport, GeneratorError> {
    let mut report = GrowthReport {
        c,
        checked_points: 0,
        worst_margin: f64::INFINITY,
        worst_x: f64::NAN,
    };
    for &x in grid.iter().filter(|x| x.abs() > 1.0) {
        let (lhs, rhs) = growth_sides(m, x, c)?;
        report.checked_points += 1;
        if lhs > rhs + 1e-12 * rhs.abs().max(1.0) {
            return Err(GeneratorError::GrowthViolated { x, lhs, rhs });
        }
        if rhs - lhs < report.worst_margin {
            report.worst_margin = rhs - lhs;
            report.worst_x = x;
        }
    }
    Ok(report)
}

/// A failed tail comparison between adjacent grid points `x < x_next`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevyViolation {
    pub kernel: &'static str,
    pub side: Side,
    pub x: f64,
    pub x_next: f64,
    pub a: f64,
    /// tail at `x`
    pub lhs: f64,
    /// tail at `x_next`
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevyMonotonicityReport {
    pub monotone: bool,
    pub violations: Vec<LevyViolation>,
    pub checked_pairs: usize,
}

/// Checks that `x ↦ ν(x, [a, ∞))` is non-decreasing and
/// `x ↦ ν(x, (−∞, −a])` non-increasing on `grid` for every threshold `a`,
/// and the same for `μ`. Comparisons allow `tol · max(1, |tail|)` of slack.
pub fn check_levy_monotone(
    m: &LevyModel,
    grid: &[f64],
    thresholds: &[f64],
    tol: f64,
) -> Result<LevyMonotonicityReport, GeneratorError> {
    let mut grid = grid.to_vec();
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let mut violations = Vec::new();
    let mut checked = 0;
    for (tag, kernel) in m.kernels() {
        for side in [Side::Right, Side::Left] {
            if !kernel.has_side(side) {
                continue;
            }
            for &a in thresholds {
                let tails: Vec<f64> = grid
                    .par_iter()
                    .map(|&x| kernel.tail(x, side, a))
                    .collect::<Result<_, _>>()?;
                for i in 0..grid.len().saturating_sub(1) {
                    let (lhs, rhs) = (tails[i], tails[i + 1]);
                    let slack = tol * lhs.abs().max(rhs.abs()).max(1.0);
                    checked += 1;
                    let bad = match side {
                        Side::Right => lhs > rhs + slack,
                        Side::Left => lhs < rhs - slack,
                    };
                    if bad {
                        violations.push(LevyViolation {
                            kernel: tag,
                            side,
                            x: grid[i],
                            x_next: grid[i + 1],
                            a,
                            lhs,
                            rhs,
                        });
                    }
                }
            }
        }
    }
    Ok(LevyMonotonicityReport {
        monotone: violations.is_empty(),
        violations,
        checked_pairs: checked,
    })
}

/// The model with all jumps of size `|y| ≤ h` removed from both kernels.
pub fn cutoff_model(m: &LevyModel, h: f64) -> LevyModel {
    let mut out = m.clone();
    for k in out.nu.iter_mut().chain(out.mu.iter_mut()) {
        k.min_jump = k.min_jump.max(h);
    }
    out
}

/// Total jump intensity `ν(x, ℝ) + μ(x, ℝ)`; infinite for infinite activity.
pub fn jump_intensity(m: &LevyModel, x: f64) -> Result<f64, GeneratorError> {
    let mut total = 0.0;
    for (_, k) in m.kernels() {
        total += k.intensity_beyond(x, 0.0)?;
    }
    Ok(total)
}
