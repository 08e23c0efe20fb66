use serde::{Deserialize, Serialize};

use super::UPoly;

const SAMPLES: usize = 1024;

/// `sup_J |F^(order)| / inf_J |F^(order)|`, or `Unbounded` when the
/// infimum vanishes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum PolyTypeConstant {
    Finite(f64),
    Unbounded,
}

impl PolyTypeConstant {
    pub fn value(&self) -> f64 {
        match self {
            PolyTypeConstant::Finite(v) => *v,
            PolyTypeConstant::Unbounded => f64::INFINITY,
        }
    }
}

/// Evaluates the ratio on a uniform sample of `J = [a, b]` refined by the
/// endpoints and the real critical points of `|F^(order)|` inside `J`.
pub fn poly_type_constant(f: &UPoly, a: f64, b: f64, order: usize) -> PolyTypeConstant {
    let (a, b) = if a <= b { (a, b) } else { (b, a) };
    let g = f.nth_derivative(order);
    if g.degree().is_none() {
        return PolyTypeConstant::Unbounded;
    }
    let mut pts: Vec<f64> = (0..=SAMPLES)
        .map(|i| a + (b - a) * i as f64 / SAMPLES as f64)
        .collect();
    // Zeros of g and of g' are where |g| attains its inf and interior sup.
    for h in [g.clone(), g.derivative()] {
        if h.degree().unwrap_or(0) == 0 {
            continue;
        }
        if let Ok(roots) = h.roots() {
            pts.extend(
                roots
                    .iter()
                    .filter(|z| z.im.abs() <= 1e-9 * (1.0 + z.re.abs()))
                    .map(|z| z.re)
                    .filter(|&x| x >= a && x <= b),
            );
        }
    }
    let mut sup = 0.0_f64;
    let mut inf = f64::INFINITY;
    let mut sign_change = false;
    let mut prev: Option<f64> = None;
    pts.sort_by(f64::total_cmp);
    for &x in &pts {
        let v = g.eval(x);
        sup = sup.max(v.abs());
        inf = inf.min(v.abs());
        if let Some(p) = prev {
            if p * v < 0.0 {
                sign_change = true;
            }
        }
        prev = Some(v);
    }
    let scale = g.max_abs_coeff() * (1.0 + a.abs().max(b.abs())).powi(g.degree().unwrap_or(0) as i32);
    if sign_change || inf <= 1e-13 * scale {
        PolyTypeConstant::Unbounded
    } else {
        PolyTypeConstant::Finite(sup / inf)
    }
}
