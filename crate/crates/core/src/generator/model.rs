//! Lévy–Khintchine models and their JSON spec form.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize};

use super::kernel::{BaseMeasure, Fn1, KernelCase, LevyKernel, Support};
use super::GeneratorError;
use crate::expr::Expr;

/// State space of the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Domain {
    #[default]
    Line,
    #[serde(alias = "half-line", alias = "half_line")]
    Halfline,
}

/// Declared behaviour of the coefficients as `x → 0+`, as exponents `p` in
/// `O(x^p)`; `"inf"` marks a quantity that vanishes identically near 0.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Asymptotics {
    /// `G(x) = O(x^p)`
    #[serde(rename = "G_order", default, deserialize_with = "order")]
    pub g_order: Option<f64>,
    /// `∫_0^1 z² ν(x, dz) = O(x^p)`
    #[serde(default, deserialize_with = "order")]
    pub nu_order: Option<f64>,
    /// `|b(x) ∧ 0| = O(x^p)`
    #[serde(default, deserialize_with = "order")]
    pub b_neg_order: Option<f64>,
    /// `G(x) = α x (1 + o(1))`
    #[serde(default)]
    pub alpha: Option<f64>,
    /// `lim_{x→0} b(x)`
    #[serde(default)]
    pub b0: Option<f64>,
}

fn order<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Text(String),
    }
    match Option::<Raw>::deserialize(d)? {
        None => Ok(None),
        Some(Raw::Num(v)) => Ok(Some(v)),
        Some(Raw::Text(s)) => match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "+inf" => Ok(Some(f64::INFINITY)),
            other => other
                .parse()
                .map(Some)
                .map_err(|_| serde::de::Error::custom(format!("invalid order `{s}`"))),
        },
    }
}

/// `½ G f″ + b f′ + ∫ (f(x+y) − f(x) − f′(x) y 1_{|y|≤1}) ν(x, dy) + ∫ (f(x+y) − f(x)) μ(x, dy)`.
#[derive(Clone)]
pub struct LevyModel {
    pub g: Fn1,
    pub b: Fn1,
    /// `G′`, if known in closed form
    pub dg: Option<Fn1>,
    /// compensated kernel
    pub nu: Option<LevyKernel>,
    /// uncompensated kernel
    pub mu: Option<LevyKernel>,
    pub growth_c: Option<f64>,
    pub domain: Domain,
    /// coefficients are bounded (required by the discretisation-based checks)
    pub bounded: bool,
    pub asymptotics: Option<Asymptotics>,
}

impl fmt::Debug for LevyModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LevyModel")
            .field("nu", &self.nu)
            .field("mu", &self.mu)
            .field("growth_c", &self.growth_c)
            .field("domain", &self.domain)
            .field("bounded", &self.bounded)
            .field("asymptotics", &self.asymptotics)
            .finish_non_exhaustive()
    }
}

impl Default for LevyModel {
    fn default() -> Self {
        LevyModel::zero()
    }
}

impl LevyModel {
    /// The zero generator.
    pub fn zero() -> Self {
        let zero: Fn1 = Arc::new(|_| 0.0);
        LevyModel {
            g: zero.clone(),
            b: zero.clone(),
            dg: Some(zero),
            nu: None,
            mu: None,
            growth_c: None,
            domain: Domain::Line,
            bounded: true,
            asymptotics: None,
        }
    }

    pub fn with_g(mut self, g: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.g = Arc::new(g);
        self.dg = None;
        self
    }

    pub fn with_dg(mut self, dg: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.dg = Some(Arc::new(dg));
        self
    }

    pub fn with_b(mut self, b: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.b = Arc::new(b);
        self
    }

    pub fn with_nu(mut self, nu: LevyKernel) -> Self {
        self.nu = Some(nu);
        self
    }

    pub fn with_mu(mut self, mu: LevyKernel) -> Self {
        self.mu = Some(mu);
        self
    }

    pub fn with_growth_c(mut self, c: f64) -> Self {
        self.growth_c = Some(c);
        self
    }

    pub fn with_domain(mut self, domain: Domain) -> Self {
        self.domain = domain;
        self
    }

    pub fn with_bounded(mut self, bounded: bool) -> Self {
        self.bounded = bounded;
        self
    }

    pub fn with_asymptotics(mut self, a: Asymptotics) -> Self {
        self.asymptotics = Some(a);
        self
    }

    /// Both kernels, tagged.
    pub fn kernels(&self) -> impl Iterator<Item = (&'static str, &LevyKernel)> {
        self.nu
            .iter()
            .map(|k| ("nu", k))
            .chain(self.mu.iter().map(|k| ("mu", k)))
    }

    pub fn from_json(s: &str) -> Result<Self, GeneratorError> {
        let spec: ModelSpec = serde_json::from_str(s).map_err(|e| GeneratorError::Spec(e.to_string()))?;
        spec.build()
    }
}

/// JSON form of a [`LevyModel`]; coefficients are expressions in `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    #[serde(rename = "G", default = "zero_expr")]
    pub g: String,
    #[serde(default = "zero_expr")]
    pub b: String,
    #[serde(rename = "dG", default, skip_serializing_if = "Option::is_none")]
    pub dg: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<KernelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<KernelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub growth_c: Option<f64>,
    #[serde(default)]
    pub support: Domain,
    #[serde(default = "yes")]
    pub bounded: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub asymptotics: Option<Asymptotics>,
}

fn zero_expr() -> String {
    "0".into()
}

fn yes() -> bool {
    true
}

fn both() -> Support {
    Support::Both
}

/// JSON form of a [`LevyKernel`]. Densities are expressions in `x, y`, the
/// decomposable factor `a` in `x`, its base density in `y`, and tabulated
/// tails in `x, a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "case", rename_all = "lowercase")]
pub enum KernelSpec {
    Density {
        density: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dx_density: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        dxx_density: Option<String>,
        #[serde(default = "both")]
        support: Support,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        horizon: Option<f64>,
        #[serde(default)]
        min_jump: f64,
    },
    Decomposable {
        a: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        da: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        base: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        atoms: Option<Vec<(f64, f64)>>,
        #[serde(default = "both")]
        support: Support,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        horizon: Option<f64>,
        #[serde(default)]
        min_jump: f64,
    },
    Tabulated {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        right_tail: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        left_tail: Option<String>,
        #[serde(default = "both")]
        support: Support,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        horizon: Option<f64>,
        #[serde(default)]
        min_jump: f64,
    },
}

fn f1(src: &str, var: &str) -> Result<Fn1, GeneratorError> {
    Ok(Expr::parse(src, &[var])?.into_fn1())
}

fn f2(src: &str, a: &str, b: &str) -> Result<super::kernel::Fn2, GeneratorError> {
    Ok(Expr::parse(src, &[a, b])?.into_fn2())
}

impl KernelSpec {
    pub fn build(&self) -> Result<LevyKernel, GeneratorError> {
        let (case, support, horizon, min_jump) = match self {
            KernelSpec::Density {
                density,
                dx_density,
                dxx_density,
                support,
                horizon,
                min_jump,
            } => (
                KernelCase::DensityInX {
                    density: f2(density, "x", "y")?,
                    dx_density: dx_density.as_deref().map(|s| f2(s, "x", "y")).transpose()?,
                    dxx_density: dxx_density.as_deref().map(|s| f2(s, "x", "y")).transpose()?,
                },
                *support,
                *horizon,
                *min_jump,
            ),
            KernelSpec::Decomposable {
                a,
                da,
                base,
                atoms,
                support,
                horizon,
                min_jump,
            } => {
                let base = match (base, atoms) {
                    (Some(d), None) => BaseMeasure::Density(f1(d, "y")?),
                    (None, Some(at)) => BaseMeasure::Atoms(at.clone()),
                    _ => {
                        return Err(GeneratorError::Spec(
                            "decomposable kernel needs exactly one of `base` and `atoms`".into(),
                        ))
                    }
                };
                (
                    KernelCase::Decomposable {
                        a: f1(a, "x")?,
                        da: da.as_deref().map(|s| f1(s, "x")).transpose()?,
                        base,
                    },
                    *support,
                    *horizon,
                    *min_jump,
                )
            }
            KernelSpec::Tabulated {
                right_tail,
                left_tail,
                support,
                horizon,
                min_jump,
            } => (
                KernelCase::Tabulated {
                    right_tail: right_tail.as_deref().map(|s| f2(s, "x", "a")).transpose()?,
                    left_tail: left_tail.as_deref().map(|s| f2(s, "x", "a")).transpose()?,
                },
                *support,
                *horizon,
                *min_jump,
            ),
        };
        if let Some(h) = horizon {
            if !(h > 0.0) {
                return Err(GeneratorError::Spec(format!("horizon must be positive, got {h}")));
            }
        }
        Ok(LevyKernel {
            case,
            support,
            min_jump,
            horizon,
        })
    }
}

impl ModelSpec {
    pub fn build(&self) -> Result<LevyModel, GeneratorError> {
        Ok(LevyModel {
            g: f1(&self.g, "x")?,
            b: f1(&self.b, "x")?,
            dg: self.dg.as_deref().map(|s| f1(s, "x")).transpose()?,
            nu: self.nu.as_ref().map(KernelSpec::build).transpose()?,
            mu: self.mu.as_ref().map(KernelSpec::build).transpose()?,
            growth_c: self.growth_c,
            domain: self.support,
            bounded: self.bounded,
            asymptotics: self.asymptotics,
        })
    }
}
