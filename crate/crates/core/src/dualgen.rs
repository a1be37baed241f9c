//! Explicit generator of the dual process for kernels supported on positive
//! jumps, and its comparison with the dual of the lattice chain.
//!
//! The dual generator is
//!
//! ```text
//! L̃f(x) = ½ G f″ − (½ G′ + b) f′ + ∫_0^∞ [f(x − y) − f(x) + f′(x) c(y)] ν̃(x, y) dy
//!          + f′(x) ∫_0^1 y (ν − ν̃)(x, dy)
//! ```
//!
//! with `ν̃(x, y) = ν(x − y, y) + ∂_u T(u, y)|_{u = x−y}`, `T(u, y) = ∫_y^∞ ν(u, z) dz`
//! (density case) or `ν̃(x, y) = a(x − y) ν(y) + a′(x − y) ∫_y^∞ ν(z) dz`
//! (decomposable case). The compensator `c(y)` is `y 1_{y≤1}`
//! ([`CompensatorConvention::JumpSize`]) or `1_{y≤1}`
//! ([`CompensatorConvention::Indicator`]).

use std::cell::RefCell;
use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::generator::{
    discretize, BaseMeasure, Fn1, Fn2, GeneratorError, KernelCase, Lattice, LevyKernel, LevyModel, Side, Support,
    Weight, TAIL_EPS,
};
use crate::qmatrix::{dual_qmatrix, Boundary, QMatrixError};
use crate::quad::{self, QuadError};

/// Density values of `ν̃` below this abort; values in `[NEG_DENSITY_TOL, 0)`
/// are clamped to zero.
pub const NEG_DENSITY_TOL: f64 = -1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DualGenError {
    #[error("unsupported kernel: {0}")]
    UnsupportedKernelCase(String),
    #[error("dual density is negative at x = {x}, y = {y}: {value:e}")]
    NegativeDualDensity { x: f64, y: f64, value: f64 },
    #[error("quadrature failed at x = {x}: {source}")]
    QuadratureFailure { x: f64, source: QuadError },
    #[error("x = {x} is not a lattice point for h = {h}")]
    NotOnLattice { x: f64, h: f64 },
    #[error("the discretisation-based dual needs a model flagged as bounded")]
    UnboundedModel,
    #[error("output: {0}")]
    Output(String),
    #[error(transparent)]
    Generator(#[from] GeneratorError),
    #[error(transparent)]
    QMatrix(#[from] QMatrixError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CompensatorConvention {
    /// `f′(x) y 1_{y≤1}`
    #[default]
    JumpSize,
    /// `f′(x) 1_{y≤1}`
    Indicator,
}

impl std::str::FromStr for CompensatorConvention {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "jump_size" | "jump-size" | "y" => Ok(CompensatorConvention::JumpSize),
            "indicator" => Ok(CompensatorConvention::Indicator),
            _ => Err(format!("unknown compensator convention `{s}`")),
        }
    }
}

fn fd_step(x: f64) -> f64 {
    1e-5 * (1.0 + x.abs())
}

fn central_difference(f: impl Fn(f64) -> f64, x: f64) -> f64 {
    let d = fd_step(x);
    (f(x + d) - f(x - d)) / (2.0 * d)
}

/// How `ν̃(x, y)` is assembled.
#[derive(Clone)]
enum DualDensity {
    Density {
        density: Fn2,
        dx_density: Option<Fn2>,
    },
    Decomposable {
        a: Fn1,
        da: Option<Fn1>,
        base: Fn1,
    },
}

/// Coefficients of the dual generator.
#[derive(Clone)]
pub struct DualGeneratorCoeffs {
    g: Fn1,
    dg: Option<Fn1>,
    b: Fn1,
    nu: Option<LevyKernel>,
    dual: Option<DualDensity>,
}

impl std::fmt::Debug for DualGeneratorCoeffs {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DualGeneratorCoeffs")
            .field("nu", &self.nu)
            .finish_non_exhaustive()
    }
}

fn require_positive(k: &LevyKernel) -> Result<(), DualGenError> {
    if k.support != Support::Positive {
        return Err(DualGenError::UnsupportedKernelCase(
            "the kernel must be declared as supported on positive jumps".into(),
        ));
    }
    Ok(())
}

fn base_coeffs(m: &LevyModel) -> DualGeneratorCoeffs {
    DualGeneratorCoeffs {
        g: m.g.clone(),
        dg: m.dg.clone(),
        b: m.b.clone(),
        nu: None,
        dual: None,
    }
}

/// Dual coefficients for a kernel with a density `ν(x, y)` differentiable in `x`.
pub fn dual_levy_case_i(m: &LevyModel) -> Result<DualGeneratorCoeffs, DualGenError> {
    let mut c = base_coeffs(m);
    if let Some(k) = &m.nu {
        require_positive(k)?;
        let KernelCase::DensityInX {
            density, dx_density, ..
        } = &k.case
        else {
            return Err(DualGenError::UnsupportedKernelCase(format!(
                "density case requires a density kernel, got `{}`",
                k.case.name()
            )));
        };
        c.nu = Some(k.clone());
        c.dual = Some(DualDensity::Density {
            density: density.clone(),
            dx_density: dx_density.clone(),
        });
    }
    Ok(c)
}

/// Dual coefficients for a decomposable kernel `a(x) ν(dy)` with a base density.
pub fn dual_levy_case_ii(m: &LevyModel) -> Result<DualGeneratorCoeffs, DualGenError> {
    let mut c = base_coeffs(m);
    if let Some(k) = &m.nu {
        require_positive(k)?;
        let KernelCase::Decomposable { a, da, base } = &k.case else {
            return Err(DualGenError::UnsupportedKernelCase(format!(
                "decomposable case requires a decomposable kernel, got `{}`",
                k.case.name()
            )));
        };
        let BaseMeasure::Density(base) = base else {
            return Err(DualGenError::UnsupportedKernelCase(
                "decomposable case needs a base density, not atoms".into(),
            ));
        };
        c.nu = Some(k.clone());
        c.dual = Some(DualDensity::Decomposable {
            a: a.clone(),
            da: da.clone(),
            base: base.clone(),
        });
    }
    Ok(c)
}

/// Picks the case from the kernel of `m`.
pub fn dual_generator_coeffs(m: &LevyModel) -> Result<DualGeneratorCoeffs, DualGenError> {
    match m.nu.as_ref().map(|k| &k.case) {
        Some(KernelCase::Decomposable { .. }) => dual_levy_case_ii(m),
        _ => dual_levy_case_i(m),
    }
}

/// A `C²` test function with its derivatives.
#[derive(Clone)]
pub struct TestFunction {
    pub f: Fn1,
    pub df: Fn1,
    pub d2f: Fn1,
}

impl TestFunction {
    /// `exp(−x²)`.
    pub fn gaussian_bump() -> Self {
        TestFunction {
            f: Arc::new(|x| (-x * x).exp()),
            df: Arc::new(|x| -2.0 * x * (-x * x).exp()),
            d2f: Arc::new(|x| (4.0 * x * x - 2.0) * (-x * x).exp()),
        }
    }

    pub fn constant(c: f64) -> Self {
        TestFunction {
            f: Arc::new(move |_| c),
            df: Arc::new(|_| 0.0),
            d2f: Arc::new(|_| 0.0),
        }
    }

    pub fn square() -> Self {
        TestFunction {
            f: Arc::new(|x| x * x),
            df: Arc::new(|x| 2.0 * x),
            d2f: Arc::new(|_| 2.0),
        }
    }
}

impl DualGeneratorCoeffs {
    pub fn g_dual(&self, x: f64) -> f64 {
        (self.g)(x)
    }

    pub fn dg(&self, x: f64) -> f64 {
        match &self.dg {
            Some(d) => d(x),
            None => central_difference(|u| (self.g)(u), x),
        }
    }

    /// `−(G′(x)/2 + b(x))`
    pub fn drift_dual(&self, x: f64) -> f64 {
        -(0.5 * self.dg(x) + (self.b)(x))
    }

    fn in_support(&self, y: f64) -> bool {
        let k = self.nu.as_ref().expect("dual density without kernel");
        y > k.min_jump && k.horizon.is_none_or(|h| y <= h)
    }

    /// Unchecked `ν̃(x, y)` for `y > 0`.
    pub fn nu_tilde_raw(&self, x: f64, y: f64) -> Result<f64, DualGenError> {
        let (Some(dual), Some(k)) = (&self.dual, &self.nu) else {
            return Ok(0.0);
        };
        if y <= 0.0 || !self.in_support(y) {
            return Ok(0.0);
        }
        let u = x - y;
        let quad_err = |source| DualGenError::QuadratureFailure { x, source };
        let value = match dual {
            DualDensity::Density { density, dx_density } => {
                let dtail = match dx_density {
                    Some(d) => {
                        let hi = k.horizon.unwrap_or(f64::INFINITY);
                        quad::integrate_range(|z| d(u, z), y, hi, quad::ABS_TOL, quad::REL_TOL).map_err(quad_err)?
                    }
                    None => {
                        let d = fd_step(u);
                        let t = |v: f64| k.tail(v, Side::Right, y);
                        (t(u + d)? - t(u - d)?) / (2.0 * d)
                    }
                };
                density(u, y) + dtail
            }
            DualDensity::Decomposable { a, da, base } => {
                let da_u = match da {
                    Some(d) => d(u),
                    None => central_difference(|v| a(v), u),
                };
                let tail = k
                    .base_weighted(Side::Right, y, f64::INFINITY, Weight::One)
                    .map_err(quad_err)?;
                a(u) * base(y) + da_u * tail
            }
        };
        Ok(value)
    }

    /// `ν̃(x, y)`, with roundoff-level negatives clamped.
    pub fn nu_tilde(&self, x: f64, y: f64) -> Result<f64, DualGenError> {
        let v = self.nu_tilde_raw(x, y)?;
        if v < NEG_DENSITY_TOL {
            return Err(DualGenError::NegativeDualDensity { x, y, value: v });
        }
        if v < 0.0 {
            log::debug!("clamping dual density {v:e} at x = {x}, y = {y}");
            return Ok(0.0);
        }
        Ok(v)
    }

    /// Original density `ν(x, y)` for `y > 0` within the kernel's support.
    fn nu_density(&self, x: f64, y: f64) -> f64 {
        match &self.dual {
            Some(DualDensity::Density { density, .. }) if self.in_support(y) => density(x, y),
            Some(DualDensity::Decomposable { a, base, .. }) if self.in_support(y) => a(x) * base(y),
            _ => 0.0,
        }
    }

    fn upper_limit(&self) -> f64 {
        self.nu.as_ref().and_then(|k| k.horizon).unwrap_or(f64::INFINITY)
    }

    /// Runs `quad` on an integrand that may fail, returning the first failure.
    fn integrate_fallible<F>(&self, x: f64, lo: f64, hi: f64, f: F) -> Result<f64, DualGenError>
    where
        F: Fn(f64) -> Result<f64, DualGenError>,
    {
        if !(lo < hi) {
            return Ok(0.0);
        }
        let failure = RefCell::new(None);
        let v = quad::integrate_range(
            |y| match f(y) {
                Ok(v) => v,
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                    0.0
                }
            },
            lo,
            hi,
            quad::ABS_TOL,
            quad::REL_TOL,
        );
        if let Some(e) = failure.into_inner() {
            return Err(e);
        }
        v.map_err(|source| DualGenError::QuadratureFailure { x, source })
    }

    /// `∫_0^1 y (ν − ν̃)(x, dy)`
    pub fn drift_correction(&self, x: f64) -> Result<f64, DualGenError> {
        if self.dual.is_none() {
            return Ok(0.0);
        }
        let hi = self.upper_limit().min(1.0);
        self.integrate_fallible(x, 0.0, hi, |y| Ok(y * (self.nu_density(x, y) - self.nu_tilde(x, y)?)))
    }

    /// `(L̃f)(x)`.
    pub fn apply(&self, f: &TestFunction, x: f64, convention: CompensatorConvention) -> Result<f64, DualGenError> {
        let fx = (f.f)(x);
        let dfx = (f.df)(x);
        let mut total = 0.5 * self.g_dual(x) * (f.d2f)(x) + self.drift_dual(x) * dfx;
        if self.dual.is_none() {
            return Ok(total);
        }
        let comp = |y: f64| -> f64 {
            if y > 1.0 {
                0.0
            } else {
                match convention {
                    CompensatorConvention::JumpSize => y,
                    CompensatorConvention::Indicator => 1.0,
                }
            }
        };
        let integrand = |y: f64| -> Result<f64, DualGenError> {
            let nt = self.nu_tilde(x, y)?;
            Ok(((f.f)(x - y) - fx + dfx * comp(y)) * nt)
        };
        let hi = self.upper_limit();
        total += self.integrate_fallible(x, 0.0, hi.min(1.0), integrand)?;
        total += self.integrate_fallible(x, 1.0, hi, integrand)?;
        total += dfx * self.drift_correction(x)?;
        Ok(total)
    }

    /// `ν̃` as a kernel on negative jumps: density `ν̃(x, −y)` for `y < 0`.
    /// Negative values are clamped by the callback.
    pub fn nu_tilde_kernel(&self) -> Option<LevyKernel> {
        let k = self.nu.as_ref()?;
        let me = self.clone();
        let kernel = LevyKernel::density(move |x, y| if y < 0.0 { me.nu_tilde(x, -y).unwrap_or(0.0) } else { 0.0 })
            .with_support(Support::Negative)
            .with_min_jump(k.min_jump);
        Some(match k.horizon {
            Some(h) => kernel.with_horizon(h),
            None => kernel,
        })
    }

    /// Samples the coefficients on `xs` and the dual density on `xs × ys`.
    pub fn tabulate(&self, xs: &[f64], ys: &[f64]) -> Result<DualTable, DualGenError> {
        let rows = xs
            .par_iter()
            .map(|&x| {
                Ok(DualRow {
                    x,
                    g_dual: self.g_dual(x),
                    drift_dual: self.drift_dual(x),
                    correction: self.drift_correction(x)?,
                    nu_tilde: ys.iter().map(|&y| self.nu_tilde(x, y)).collect::<Result<_, _>>()?,
                })
            })
            .collect::<Result<_, DualGenError>>()?;
        Ok(DualTable { ys: ys.to_vec(), rows })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualRow {
    pub x: f64,
    pub g_dual: f64,
    pub drift_dual: f64,
    pub correction: f64,
    pub nu_tilde: Vec<f64>,
}

/// Tabulated dual coefficients; `rows[i].nu_tilde[j] = ν̃(x_i, ys[j])`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualTable {
    pub ys: Vec<f64>,
    pub rows: Vec<DualRow>,
}

impl DualTable {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), DualGenError> {
        let err = |e: csv::Error| DualGenError::Output(e.to_string());
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["x".to_string(), "G_dual".into(), "drift_dual".into(), "correction".into()];
        header.extend(self.ys.iter().map(|y| format!("nu_tilde(y={y})")));
        w.write_record(&header).map_err(err)?;
        for r in &self.rows {
            let mut rec = vec![r.x, r.g_dual, r.drift_dual, r.correction];
            rec.extend(&r.nu_tilde);
            w.write_record(rec.iter().map(|v| v.to_string())).map_err(err)?;
        }
        w.flush().map_err(|e| DualGenError::Output(e.to_string()))
    }
}

/// Jump length beyond which the kernels carry negligible mass near `xs`.
fn kernel_reach(m: &LevyModel, xs: &[f64]) -> Result<f64, DualGenError> {
    let mut reach: f64 = 1.0;
    for (_, k) in m.kernels() {
        if let Some(b) = k.support_bound() {
            reach = reach.max(b);
            continue;
        }
        let mut a: f64 = 1.0;
        loop {
            let mut worst: f64 = 0.0;
            for &x in xs {
                worst = worst.max(k.intensity_beyond(x, a)?);
            }
            if worst <= TAIL_EPS {
                break;
            }
            a *= 2.0;
            if a > 1e6 {
                return Err(GeneratorError::TailMassUnresolved {
                    x: xs[0],
                    reason: "kernel tail does not decay".into(),
                }
                .into());
            }
        }
        reach = reach.max(a);
    }
    Ok(reach)
}

/// `(L̃_h f)(x)` for the dual of the lattice chain `discretize(m, h)`, at each
/// of `xs` (which must be lattice points).
pub fn discrete_dual_apply(m: &LevyModel, h: f64, f: &TestFunction, xs: &[f64]) -> Result<Vec<f64>, DualGenError> {
    if !m.bounded {
        return Err(DualGenError::UnboundedModel);
    }
    let states = xs
        .iter()
        .map(|&x| {
            let n = (x / h).round();
            if (n * h - x).abs() > 1e-9 * (1.0 + x.abs()) {
                Err(DualGenError::NotOnLattice { x, h })
            } else {
                Ok(n as i64)
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    let reach = kernel_reach(m, xs)?;
    let (x_min, x_max) = xs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let pad = reach + 4.0 * h;
    let lat = Lattice::covering(h, x_min - pad, x_max + pad, Boundary::Reflect)?;
    let q = discretize(m, &lat)?;
    let dual = dual_qmatrix(&q)?;
    Ok(states
        .iter()
        .map(|&n| {
            let fx = (f.f)(lat.x(n));
            dual.row(n)
                .iter()
                .map(|&(off, r)| r * ((f.f)(lat.x(n + off)) - fx))
                .sum()
        })
        .collect())
}

/// Errors of the lattice dual against the continuum dual generator.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub convention: CompensatorConvention,
    pub xs: Vec<f64>,
    pub hs: Vec<f64>,
    /// continuum `(L̃f)(x)`
    pub continuum: Vec<f64>,
    /// `discrete[i][j] = (L̃_{h_i} f)(x_j)`
    pub discrete: Vec<Vec<f64>>,
    /// max over `xs` of the absolute difference, per `h`
    pub errors: Vec<f64>,
    /// `log(e_i / e_{i+1}) / log(h_i / h_{i+1})`
    pub observed_orders: Vec<f64>,
    pub strictly_decreasing: bool,
}

impl ConvergenceReport {
    /// Errors strictly decrease and the last observed order is above 1/2.
    pub fn converges(&self) -> bool {
        self.strictly_decreasing && self.observed_orders.last().is_some_and(|&p| p > 0.5)
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), DualGenError> {
        let err = |e: csv::Error| DualGenError::Output(e.to_string());
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["h", "max_error"]).map_err(err)?;
        for (h, e) in self.hs.iter().zip(&self.errors) {
            w.write_record([h.to_string(), e.to_string()]).map_err(err)?;
        }
        w.flush().map_err(|e| DualGenError::Output(e.to_string()))
    }
}

/// Compares the lattice dual with the continuum dual generator over `hs`.
pub fn dual_convergence(
    m: &LevyModel,
    f: &TestFunction,
    xs: &[f64],
    hs: &[f64],
    convention: CompensatorConvention,
) -> Result<ConvergenceReport, DualGenError> {
    let coeffs = dual_generator_coeffs(m)?;
    let continuum = xs
        .iter()
        .map(|&x| coeffs.apply(f, x, convention))
        .collect::<Result<Vec<_>, _>>()?;
    let discrete = hs
        .iter()
        .map(|&h| discrete_dual_apply(m, h, f, xs))
        .collect::<Result<Vec<_>, _>>()?;
    let errors: Vec<f64> = discrete
        .iter()
        .map(|d| {
            d.iter()
                .zip(&continuum)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        })
        .collect();
    let observed_orders = errors
        .windows(2)
        .zip(hs.windows(2))
        .map(|(e, h)| (e[0] / e[1]).ln() / (h[0] / h[1]).ln())
        .collect();
    Ok(ConvergenceReport {
        convention,
        xs: xs.to_vec(),
        hs: hs.to_vec(),
        continuum,
        discrete,
        strictly_decreasing: errors.windows(2).all(|e| e[1] < e[0]),
        errors,
        observed_orders,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn exp_kernel() -> LevyKernel {
        LevyKernel::density(|_, y| (-y).exp()).with_support(Support::Positive)
    }

    #[test]
    fn x_independent_kernel_is_self_dual() {
        let m = LevyModel::zero().with_nu(exp_kernel());
        let d = dual_levy_case_i(&m).unwrap();
        for &x in &[-2.0, 0.0, 1.5] {
            for &y in &[0.1, 0.5, 2.0, 7.0] {
                assert_abs_diff_eq!(d.nu_tilde(x, y).unwrap(), (-y).exp(), epsilon = 1e-8);
            }
            assert_abs_diff_eq!(d.drift_correction(x).unwrap(), 0.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn pure_diffusion_dual() {
        let m = LevyModel::zero().with_g(|_| 1.0);
        let d = dual_levy_case_i(&m).unwrap();
        assert_abs_diff_eq!(d.drift_dual(0.3), 0.0, epsilon = 1e-9);
        for &x in &[-1.0, 0.0, 2.0] {
            let v = d.apply(&TestFunction::square(), x, CompensatorConvention::JumpSize).unwrap();
            assert_abs_diff_eq!(v, 1.0, epsilon = 1e-9);
        }
    }

    #[test]
    fn constants_are_annihilated() {
        let m = LevyModel::zero()
            .with_g(|x: f64| 1.0 + 0.5 * x.tanh())
            .with_b(|x: f64| x.sin())
            .with_nu(LevyKernel::decomposable(|x: f64| 1.0 + x.tanh(), |y: f64| (-y).exp()).with_support(Support::Positive));
        let d = dual_generator_coeffs(&m).unwrap();
        for conv in [CompensatorConvention::JumpSize, CompensatorConvention::Indicator] {
            let v = d.apply(&TestFunction::constant(3.0), 0.7, conv).unwrap();
            assert_abs_diff_eq!(v, 0.0, epsilon = 1e-10);
        }
    }

    #[test]
    fn linear_factor_closed_form() {
        // a(x) = x on x ≥ 1 with ν = e^{-y}: ν̃ = (x − y) e^{-y} + e^{-y}
        let m = LevyModel::zero().with_nu(LevyKernel::decomposable(|x| x, |y: f64| (-y).exp()).with_support(Support::Positive));
        let d = dual_levy_case_ii(&m).unwrap();
        for &(x, y) in &[(5.0f64, 0.5f64), (5.0, 2.0), (3.0, 1.0)] {
            let expect = (x - y) * (-y).exp() + (-y).exp();
            assert_abs_diff_eq!(d.nu_tilde(x, y).unwrap(), expect, epsilon = 1e-8);
        }
    }

    #[test]
    fn density_and_decomposable_forms_agree() {
        let a = |x: f64| 1.0 + x.tanh();
        let da = |x: f64| 1.0 - x.tanh().powi(2);
        let dens = LevyModel::zero().with_nu(
            LevyKernel::density(move |x, y: f64| a(x) * (-y).exp())
                .with_support(Support::Positive)
                .with_dx_density(Arc::new(move |x, y: f64| da(x) * (-y).exp())),
        );
        let deco = LevyModel::zero().with_nu(
            LevyKernel::decomposable(a, |y: f64| (-y).exp())
                .with_support(Support::Positive)
                .with_da(Arc::new(da)),
        );
        let (di, dii) = (dual_levy_case_i(&dens).unwrap(), dual_levy_case_ii(&deco).unwrap());
        for i in -8..=8 {
            let x = i as f64 * 0.25;
            for &y in &[0.05, 0.3, 1.0, 2.5, 6.0] {
                assert_abs_diff_eq!(di.nu_tilde(x, y).unwrap(), dii.nu_tilde(x, y).unwrap(), epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn decreasing_factor_gives_negative_density() {
        let m = LevyModel::zero()
            .with_nu(LevyKernel::decomposable(|x: f64| 1.0 - x.tanh(), |y: f64| (-y).exp()).with_support(Support::Positive));
        let d = dual_levy_case_ii(&m).unwrap();
        assert!(matches!(d.nu_tilde(3.0, 0.5), Err(DualGenError::NegativeDualDensity { .. })));
    }

    #[test]
    fn unsupported_cases() {
        let atoms = LevyModel::zero().with_nu(LevyKernel::atoms(|_| 1.0, vec![(1.0, 1.0)]).with_support(Support::Positive));
        assert!(matches!(dual_levy_case_ii(&atoms), Err(DualGenError::UnsupportedKernelCase(_))));
        let two_sided = LevyModel::zero().with_nu(LevyKernel::density(|_, y: f64| (-y.abs()).exp()));
        assert!(matches!(dual_levy_case_i(&two_sided), Err(DualGenError::UnsupportedKernelCase(_))));
        let deco = LevyModel::zero().with_nu(LevyKernel::decomposable(|_| 1.0, |y: f64| (-y).exp()).with_support(Support::Positive));
        assert!(dual_levy_case_i(&deco).is_err());
    }

    #[test]
    fn csv_export_has_one_row_per_point() {
        let m = LevyModel::zero().with_g(|_| 1.0).with_nu(exp_kernel());
        let t = dual_generator_coeffs(&m).unwrap().tabulate(&[0.0, 1.0], &[0.5, 1.0]).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.starts_with("x,G_dual,drift_dual,correction,nu_tilde(y=0.5)"));
    }
}
