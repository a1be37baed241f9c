//! Lévy–Khintchine models: validation, monotonicity of the jump tails,
//! lattice discretisation, cutoff approximation and boundary classification.

mod boundary;
mod discretize;
pub mod kernel;
mod model;
mod validate;

pub use boundary::{classify_boundary, BoundaryClass, BoundaryLabel};
pub use discretize::{discretize, Lattice, TAIL_EPS};
pub use kernel::{BaseMeasure, Fn1, Fn2, KernelCase, LevyKernel, Side, Support, Weight};
pub use model::{Asymptotics, Domain, KernelSpec, LevyModel, ModelSpec};
pub use validate::{
    check_levy_monotone, cutoff_model, jump_intensity, validate_model, GrowthReport, LevyMonotonicityReport,
    LevyViolation, ModelReport, LEVY_MONO_TOL,
};

use thiserror::Error;

use crate::expr::ExprError;
use crate::qmatrix::QMatrixError;
use crate::quad::QuadError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeneratorError {
    #[error("moment `{moment}` is not finite at x = {x}")]
    MomentUnbounded { x: f64, moment: String },
    #[error("growth condition violated at x = {x}: {lhs} > {rhs}")]
    GrowthViolated { x: f64, lhs: f64, rhs: f64 },
    #[error("kernel cannot resolve bin masses at x = {x}: {reason}")]
    TailMassUnresolved { x: f64, reason: String },
    #[error("diffusion coefficient is negative at x = {x}: {value}")]
    NegativeDiffusion { x: f64, value: f64 },
    #[error("kernel mass is negative at x = {x}: {value}")]
    NegativeKernelMass { x: f64, value: f64 },
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),
    #[error("empty sample grid")]
    EmptyGrid,
    #[error("quadrature failed at x = {x}: {source}")]
    Quadrature { x: f64, source: QuadError },
    #[error("model spec: {0}")]
    Spec(String),
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    QMatrix(#[from] QMatrixError),
}
