use serde::{Deserialize, Serialize};

use super::partition::{phi, smooth_step};
use super::NumericsError;
use crate::wpoly::UPoly;

/// Axis-aligned rectangle `[x0, x1] x [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxRegion {
    pub x: [f64; 2],
    pub y: [f64; 2],
}

impl BoxRegion {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Self {
        Self { x: [x0, x1], y: [y0, y1] }
    }

    pub fn square(r: f64) -> Self {
        Self::new(-r, r, -r, r)
    }

    pub fn width(&self) -> f64 {
        self.x[1] - self.x[0]
    }

    pub fn height(&self) -> f64 {
        self.y[1] - self.y[0]
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x[0] && x <= self.x[1] && y >= self.y[0] && y <= self.y[1]
    }

    pub fn intersect(&self, other: &BoxRegion) -> Option<BoxRegion> {
        let b = BoxRegion::new(
            self.x[0].max(other.x[0]),
            self.x[1].min(other.x[1]),
            self.y[0].max(other.y[0]),
            self.y[1].min(other.y[1]),
        );
        (b.x[0] < b.x[1] && b.y[0] < b.y[1]).then_some(b)
    }

    /// The closed sign quadrant `1..=4` (counter-clockwise from `x, y >= 0`).
    pub fn quadrant(q: u8) -> Option<BoxRegion> {
        let inf = f64::INFINITY;
        match q {
            1 => Some(BoxRegion::new(0.0, inf, 0.0, inf)),
            2 => Some(BoxRegion::new(-inf, 0.0, 0.0, inf)),
            3 => Some(BoxRegion::new(-inf, 0.0, -inf, 0.0)),
            4 => Some(BoxRegion::new(0.0, inf, -inf, 0.0)),
            _ => None,
        }
    }

    fn is_valid(&self) -> bool {
        self.x.iter().chain(self.y.iter()).all(|v| v.is_finite())
            && self.x[0] < self.x[1]
            && self.y[0] < self.y[1]
    }
}

/// Serializable description of a cutoff `phi(x, y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CutoffSpec {
    /// Product of 1-D plateau bumps; equal to 1 on the inner half box.
    TensorBump { support: BoxRegion },
    /// Plateau bump in the distance to `center`; 1 for `r <= radius/2`.
    RadialBump { center: [f64; 2], radius: f64 },
    /// Indicator of `{x0 <= x <= x1, g(x) <= y <= h(x)}` with monotone
    /// polynomial boundaries (ascending coefficients).
    CurvedTrapezoid {
        x_range: [f64; 2],
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
    /// `Phi(x/2^j) Phi(y/2^k)`, optionally times an inner cutoff.
    DyadicCell {
        j: i32,
        k: i32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        inner: Option<Box<CutoffSpec>>,
    },
    IndicatorBox { support: BoxRegion },
}

impl CutoffSpec {
    pub fn tensor_bump(support: BoxRegion) -> Self {
        CutoffSpec::TensorBump { support }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            CutoffSpec::TensorBump { .. } => "tensor_bump",
            CutoffSpec::RadialBump { .. } => "radial_bump",
            CutoffSpec::CurvedTrapezoid { .. } => "curved_trapezoid",
            CutoffSpec::DyadicCell { .. } => "dyadic_cell",
            CutoffSpec::IndicatorBox { .. } => "indicator_box",
        }
    }

    /// Parses a JSON cutoff, reporting an unknown `kind` distinctly from
    /// other shape errors.
    pub fn from_json(v: &serde_json::Value) -> Result<Self, NumericsError> {
        const KINDS: [&str; 5] = [
            "tensor_bump",
            "radial_bump",
            "curved_trapezoid",
            "dyadic_cell",
            "indicator_box",
        ];
        let kind = v
            .get("kind")
            .and_then(|k| k.as_str())
            .ok_or_else(|| NumericsError::InvalidCutoff("missing \"kind\"".into()))?;
        if !KINDS.contains(&kind) {
            return Err(NumericsError::UnsupportedKind(kind.to_string()));
        }
        serde_json::from_value(v.clone()).map_err(|e| NumericsError::InvalidCutoff(e.to_string()))
    }
}

/// A validated, evaluable cutoff.
#[derive(Debug, Clone)]
pub struct Cutoff {
    spec: CutoffSpec,
    support: BoxRegion,
    inner: Option<Box<Cutoff>>,
    lower: Option<UPoly>,
    upper: Option<UPoly>,
}

/// 1-D plateau bump on `[a, b]`: 1 on the middle half, smooth to 0.
fn plateau(t: f64, a: f64, b: f64) -> f64 {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let u = (t - c).abs() / h;
    if u <= 0.5 {
        1.0
    } else if u >= 1.0 {
        0.0
    } else {
        1.0 - smooth_step(2.0 * u - 1.0)
    }
}

fn monotone_on(p: &UPoly, a: f64, b: f64) -> bool {
    const N: usize = 512;
    let vals: Vec<f64> = (0..=N).map(|i| p.eval(a + (b - a) * i as f64 / N as f64)).collect();
    vals.windows(2).all(|w| w[1] >= w[0]) || vals.windows(2).all(|w| w[1] <= w[0])
}

pub fn build_cutoff(spec: &CutoffSpec) -> Result<Cutoff, NumericsError> {
    let invalid = |m: &str| Err(NumericsError::InvalidCutoff(m.to_string()));
    match spec {
        CutoffSpec::TensorBump { support } | CutoffSpec::IndicatorBox { support } => {
            if !support.is_valid() {
                return invalid("support box must be finite and nonempty");
            }
            Ok(Cutoff { spec: spec.clone(), support: *support, inner: None, lower: None, upper: None })
        }
        CutoffSpec::RadialBump { center, radius } => {
            if !(*radius > 0.0 && radius.is_finite()) || !center.iter().all(|c| c.is_finite()) {
                return invalid("radius must be positive and finite");
            }
            let support = BoxRegion::new(
                center[0] - radius,
                center[0] + radius,
                center[1] - radius,
                center[1] + radius,
            );
            Ok(Cutoff { spec: spec.clone(), support, inner: None, lower: None, upper: None })
        }
        CutoffSpec::CurvedTrapezoid { x_range, lower, upper } => {
            let [a, b] = *x_range;
            if !(a < b && a.is_finite() && b.is_finite()) {
                return invalid("x_range must be a finite nonempty interval");
            }
            let g = UPoly::new(lower.clone());
            let h = UPoly::new(upper.clone());
            if !monotone_on(&g, a, b) || !monotone_on(&h, a, b) {
                return invalid("trapezoid boundaries must be monotone");
            }
            const N: usize = 512;
            let mut y0 = f64::INFINITY;
            let mut y1 = f64::NEG_INFINITY;
            for i in 0..=N {
                let x = a + (b - a) * i as f64 / N as f64;
                let (gl, hu) = (g.eval(x), h.eval(x));
                if gl > hu {
                    return invalid("lower boundary exceeds upper boundary");
                }
                y0 = y0.min(gl);
                y1 = y1.max(hu);
            }
            if !(y0 < y1) {
                return invalid("trapezoid has empty interior");
            }
            Ok(Cutoff {
                spec: spec.clone(),
                support: BoxRegion::new(a, b, y0, y1),
                inner: None,
                lower: Some(g),
                upper: Some(h),
            })
        }
        CutoffSpec::DyadicCell { j, k, inner } => {
            let cell = BoxRegion::new(
                2f64.powi(j - 1),
                2f64.powi(j + 1),
                2f64.powi(k - 1),
                2f64.powi(k + 1),
            );
            let (support, inner) = match inner {
                Some(spec) => {
                    let c = build_cutoff(spec)?;
                    let s = cell
                        .intersect(&c.support)
                        .ok_or_else(|| NumericsError::InvalidCutoff("dyadic cell misses inner support".into()))?;
                    (s, Some(Box::new(c)))
                }
                None => (cell, None),
            };
            Ok(Cutoff { spec: spec.clone(), support, inner, lower: None, upper: None })
        }
    }
}

impl Cutoff {
    pub fn spec(&self) -> &CutoffSpec {
        &self.spec
    }

    /// A box containing the support.
    pub fn support(&self) -> BoxRegion {
        self.support
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match &self.spec {
            CutoffSpec::TensorBump { support } => {
                plateau(x, support.x[0], support.x[1]) * plateau(y, support.y[0], support.y[1])
            }
            CutoffSpec::IndicatorBox { support } => {
                if support.contains(x, y) {
                    1.0
                } else {
                    0.0
                }
            }
            CutoffSpec::RadialBump { center, radius } => {
                let r = (x - center[0]).hypot(y - center[1]);
                plateau(r, -radius, *radius)
            }
            CutoffSpec::CurvedTrapezoid { x_range, .. } => {
                let (g, h) = (self.lower.as_ref().unwrap(), self.upper.as_ref().unwrap());
                if x >= x_range[0] && x <= x_range[1] && g.eval(x) <= y && y <= h.eval(x) {
                    1.0
                } else {
                    0.0
                }
            }
            CutoffSpec::DyadicCell { j, k, .. } => {
                let base = phi(x * 2f64.powi(-j)) * phi(y * 2f64.powi(-k));
                match &self.inner {
                    Some(c) if base != 0.0 => base * c.eval(x, y),
                    _ => base,
                }
            }
        }
    }
}
