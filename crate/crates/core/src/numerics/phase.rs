use serde::{Deserialize, Serialize};

use crate::wpoly::{PolyEval, WPoly};

/// A real phase `S(x, y)` with its gradient.
pub trait Phase: Send + Sync {
    fn value(&self, x: f64, y: f64) -> f64;
    fn grad(&self, x: f64, y: f64) -> (f64, f64);
}

impl Phase for PolyEval {
    fn value(&self, x: f64, y: f64) -> f64 {
        PolyEval::value(self, x, y)
    }

    fn grad(&self, x: f64, y: f64) -> (f64, f64) {
        PolyEval::grad(self, x, y)
    }
}

/// `sum_i c_i |x|^{a_i} |y|^{b_i}` with real exponents. Meant for the first
/// quadrant, where it is smooth away from the axes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FracPhase {
    /// `(coefficient, x exponent, y exponent)`.
    pub terms: Vec<(f64, f64, f64)>,
}

impl FracPhase {
    pub fn new(terms: Vec<(f64, f64, f64)>) -> Self {
        Self { terms }
    }

    /// `S(x^{eta1}, y^{eta2})` for a polynomial `S`.
    pub fn scaled(poly: &WPoly, eta1: f64, eta2: f64) -> Self {
        let e = poly.to_eval();
        Self::new(
            e.terms()
                .iter()
                .map(|&(k, l, a)| (a, f64::from(k) * eta1, f64::from(l) * eta2))
                .collect(),
        )
    }
}

fn pow_abs(t: f64, e: f64) -> f64 {
    if e == 0.0 {
        1.0
    } else {
        t.abs().powf(e)
    }
}

/// `d/dt |t|^e`, taken as 0 at `t = 0` when `e >= 1`.
fn dpow_abs(t: f64, e: f64) -> f64 {
    if e == 0.0 || t == 0.0 {
        return 0.0;
    }
    e * t.abs().powf(e - 1.0) * t.signum()
}

impl Phase for FracPhase {
    fn value(&self, x: f64, y: f64) -> f64 {
        self.terms
            .iter()
            .map(|&(c, a, b)| c * pow_abs(x, a) * pow_abs(y, b))
            .sum()
    }

    fn grad(&self, x: f64, y: f64) -> (f64, f64) {
        self.terms.iter().fold((0.0, 0.0), |(gx, gy), &(c, a, b)| {
            (
                gx + c * dpow_abs(x, a) * pow_abs(y, b),
                gy + c * pow_abs(x, a) * dpow_abs(y, b),
            )
        })
    }
}
