//! Classification of the boundary point 0 of a half-line model from declared
//! asymptotics of its coefficients.

use serde::Serialize;

use super::{Asymptotics, Domain, LevyModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BoundaryLabel {
    Inaccessible,
    TRegular,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundaryClass {
    pub label: BoundaryLabel,
    /// which rule decided the label
    pub rule: String,
}

impl BoundaryClass {
    fn new(label: BoundaryLabel, rule: &str) -> Self {
        BoundaryClass {
            label,
            rule: rule.to_string(),
        }
    }
}

/// Applies, in order:
///
/// 1. `G = O(x²)`, `∫_0^1 z² ν(x, dz) = O(x²)` and `|b ∧ 0| = O(x)` as
///    `x → 0` ⇒ inaccessible;
/// 2. `G = α x (1 + o(1))` with `α > 0` and `b(0) = lim b(x)`: `α < b(0)` ⇒
///    inaccessible, `α > b(0)` ⇒ t-regular, `α = b(0)` undecided.
///
/// `asymptotics` overrides the model's own declaration.
pub fn classify_boundary(m: &LevyModel, asymptotics: Option<&Asymptotics>) -> BoundaryClass {
    if m.domain != Domain::Halfline {
        return BoundaryClass::new(BoundaryLabel::Unknown, "model is not on the half-line");
    }
    let Some(a) = asymptotics.or(m.asymptotics.as_ref()) else {
        return BoundaryClass::new(BoundaryLabel::Unknown, "no asymptotics declared");
    };
    let at_least = |order: Option<f64>, p: f64| order.is_some_and(|o| o >= p);
    if at_least(a.g_order, 2.0) && at_least(a.nu_order, 2.0) && at_least(a.b_neg_order, 1.0) {
        return BoundaryClass::new(
            BoundaryLabel::Inaccessible,
            "(i): G = O(x^2), small-jump second moment O(x^2), negative drift O(x)",
        );
    }
    match (a.alpha, a.b0) {
        (Some(alpha), Some(b0)) if alpha > 0.0 => {
            if alpha < b0 {
                BoundaryClass::new(BoundaryLabel::Inaccessible, "(ii): alpha < b(0)")
            } else if alpha > b0 {
                BoundaryClass::new(BoundaryLabel::TRegular, "(ii): alpha > b(0)")
            } else {
                BoundaryClass::new(BoundaryLabel::Unknown, "(ii): alpha = b(0) is not covered")
            }
        }
        _ => BoundaryClass::new(BoundaryLabel::Unknown, "no rule applies"),
    }
}
