use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, One, Signed, ToPrimitive, Zero};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::WPolyError;

/// A single monomial `a * x^k * y^l`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Term {
    pub k: u32,
    pub l: u32,
    pub coeff: BigRational,
}

/// Sparse bivariate polynomial with exact rational coefficients.
///
/// Terms are kept sorted by `(k, l)`, with no duplicate exponent pairs and no
/// zero coefficients. Floating-point inputs are converted exactly (every
/// finite `f64` is a dyadic rational).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct WPoly {
    terms: Vec<Term>,
}

impl WPoly {
    pub fn zero() -> Self {
        Self::default()
    }

    /// Builds a polynomial from raw terms, summing repeated exponent pairs
    /// and dropping zero coefficients.
    pub fn from_terms<I>(terms: I) -> Self
    where
        I: IntoIterator<Item = (u32, u32, BigRational)>,
    {
        let mut acc: BTreeMap<(u32, u32), BigRational> = BTreeMap::new();
        for (k, l, a) in terms {
            *acc.entry((k, l)).or_insert_with(BigRational::zero) += a;
        }
        let terms = acc
            .into_iter()
            .filter(|(_, a)| !a.is_zero())
            .map(|((k, l), coeff)| Term { k, l, coeff })
            .collect();
        Self { terms }
    }

    /// Convenience constructor from `f64` coefficients (converted exactly).
    pub fn from_f64_terms(terms: &[(u32, u32, f64)]) -> Result<Self, WPolyError> {
        let mut out = Vec::with_capacity(terms.len());
        for &(k, l, a) in terms {
            out.push((k, l, rational_from_f64(a)?));
        }
        Ok(Self::from_terms(out))
    }

    /// Convenience constructor from integer ratios `num/den`.
    pub fn from_ratio_terms(terms: &[(u32, u32, i64, i64)]) -> Self {
        Self::from_terms(terms.iter().map(|&(k, l, n, d)| {
            (k, l, BigRational::new(BigInt::from(n), BigInt::from(d)))
        }))
    }

    pub fn monomial(k: u32, l: u32, coeff: BigRational) -> Self {
        Self::from_terms([(k, l, coeff)])
    }

    pub fn terms(&self) -> &[Term] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Total degree; `-1` for the zero polynomial.
    pub fn degree(&self) -> i64 {
        self.terms
            .iter()
            .map(|t| i64::from(t.k) + i64::from(t.l))
            .max()
            .unwrap_or(-1)
    }

    pub fn coeff(&self, k: u32, l: u32) -> Option<&BigRational> {
        self.terms
            .binary_search_by(|t| (t.k, t.l).cmp(&(k, l)))
            .ok()
            .map(|i| &self.terms[i].coeff)
    }

    pub fn add(&self, other: &WPoly) -> WPoly {
        Self::from_terms(
            self.terms
                .iter()
                .chain(other.terms.iter())
                .map(|t| (t.k, t.l, t.coeff.clone())),
        )
    }

    pub fn scale(&self, c: &BigRational) -> WPoly {
        Self::from_terms(self.terms.iter().map(|t| (t.k, t.l, &t.coeff * c)))
    }

    /// Mixed second partial derivative `d^2 S / dx dy`.
    pub fn hessian_xy(&self) -> WPoly {
        Self::from_terms(self.terms.iter().filter(|t| t.k > 0 && t.l > 0).map(|t| {
            let factor = BigRational::from_integer(BigInt::from(u64::from(t.k) * u64::from(t.l)));
            (t.k - 1, t.l - 1, &t.coeff * factor)
        }))
    }

    /// Partial derivative in `x`.
    pub fn diff_x(&self) -> WPoly {
        Self::from_terms(self.terms.iter().filter(|t| t.k > 0).map(|t| {
            (t.k - 1, t.l, &t.coeff * BigRational::from_integer(BigInt::from(t.k)))
        }))
    }

    /// Partial derivative in `y`.
    pub fn diff_y(&self) -> WPoly {
        Self::from_terms(self.terms.iter().filter(|t| t.l > 0).map(|t| {
            (t.k, t.l - 1, &t.coeff * BigRational::from_integer(BigInt::from(t.l)))
        }))
    }

    /// Double-precision projection used by all numeric layers.
    pub fn to_eval(&self) -> PolyEval {
        PolyEval::new(self)
    }

    pub fn eval_f64(&self, x: f64, y: f64) -> f64 {
        self.to_eval().value(x, y)
    }

    /// Maximum absolute coefficient as `f64`.
    pub fn max_abs_coeff(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| t.coeff.to_f64().unwrap_or(f64::INFINITY).abs())
            .fold(0.0, f64::max)
    }

    /// Largest coefficient difference relative to the largest coefficient of
    /// `self`. Both polynomials are compared on the union of their supports.
    pub fn rel_coeff_error(&self, other: &WPoly) -> f64 {
        let scale = self.max_abs_coeff().max(other.max_abs_coeff());
        if scale == 0.0 {
            return 0.0;
        }
        let diff = self.add(&other.scale(&-BigRational::one()));
        diff.max_abs_coeff() / scale
    }
}

impl fmt::Display for WPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        for (i, t) in self.terms.iter().enumerate() {
            let neg = t.coeff.is_negative();
            let mag = t.coeff.abs();
            if i == 0 {
                if neg {
                    write!(f, "-")?;
                }
            } else {
                write!(f, " {} ", if neg { '-' } else { '+' })?;
            }
            let unit = mag.is_one();
            if !unit || (t.k == 0 && t.l == 0) {
                write!(f, "{}", mag)?;
            }
            let mut first_var = unit;
            for (var, e) in [("x", t.k), ("y", t.l)] {
                if e == 0 {
                    continue;
                }
                if !first_var {
                    write!(f, "*")?;
                }
                first_var = false;
                if e == 1 {
                    write!(f, "{}", var)?;
                } else {
                    write!(f, "{}^{}", var, e)?;
                }
            }
        }
        Ok(())
    }
}

pub(crate) fn rational_from_f64(a: f64) -> Result<BigRational, WPolyError> {
    BigRational::from_f64(a)
        .ok_or_else(|| WPolyError::InvalidArgument(format!("non-finite coefficient {a}")))
}

/// Compiled `f64` evaluator for a polynomial phase.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyEval {
    terms: Vec<(i32, i32, f64)>,
}

impl PolyEval {
    pub fn new(poly: &WPoly) -> Self {
        let terms = poly
            .terms()
            .iter()
            .map(|t| (t.k as i32, t.l as i32, t.coeff.to_f64().unwrap_or(f64::NAN)))
            .collect();
        Self { terms }
    }

    pub fn from_raw(terms: Vec<(i32, i32, f64)>) -> Self {
        Self { terms }
    }

    pub fn terms(&self) -> &[(i32, i32, f64)] {
        &self.terms
    }

    pub fn value(&self, x: f64, y: f64) -> f64 {
        self.terms
            .iter()
            .map(|&(k, l, a)| a * x.powi(k) * y.powi(l))
            .sum()
    }

    pub fn grad(&self, x: f64, y: f64) -> (f64, f64) {
        let mut gx = 0.0;
        let mut gy = 0.0;
        for &(k, l, a) in &self.terms {
            if k > 0 {
                gx += a * f64::from(k) * x.powi(k - 1) * y.powi(l);
            }
            if l > 0 {
                gy += a * f64::from(l) * x.powi(k) * y.powi(l - 1);
            }
        }
        (gx, gy)
    }
}

// JSON: {"terms":[{"k":int,"l":int,"a":number|["num","den"]}]}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TermJson {
    k: u32,
    l: u32,
    a: CoeffJson,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WPolyJson {
    terms: Vec<TermJson>,
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum CoeffJson {
    Number(serde_json::Number),
    Ratio([String; 2]),
}

impl CoeffJson {
    fn from_rational(r: &BigRational) -> Self {
        if r.is_integer() {
            if let Some(v) = r.to_integer().to_i64() {
                return CoeffJson::Number(v.into());
            }
        }
        CoeffJson::Ratio([r.numer().to_string(), r.denom().to_string()])
    }

    fn to_rational(&self) -> Result<BigRational, String> {
        match self {
            CoeffJson::Number(n) => {
                if let Some(i) = n.as_i64() {
                    Ok(BigRational::from_integer(BigInt::from(i)))
                } else if let Some(u) = n.as_u64() {
                    Ok(BigRational::from_integer(BigInt::from(u)))
                } else {
                    let f = n.as_f64().ok_or("coefficient is not a finite number")?;
                    BigRational::from_f64(f).ok_or_else(|| "non-finite coefficient".to_string())
                }
            }
            CoeffJson::Ratio([num, den]) => {
                let n: BigInt = num
                    .trim()
                    .parse()
                    .map_err(|_| format!("bad numerator {num:?}"))?;
                let d: BigInt = den
                    .trim()
                    .parse()
                    .map_err(|_| format!("bad denominator {den:?}"))?;
                if d.is_zero() {
                    return Err("zero denominator".into());
                }
                Ok(BigRational::new(n, d))
            }
        }
    }
}

impl Serialize for WPoly {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        WPolyJson {
            terms: self
                .terms
                .iter()
                .map(|t| TermJson {
                    k: t.k,
                    l: t.l,
                    a: CoeffJson::from_rational(&t.coeff),
                })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for WPoly {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let raw = WPolyJson::deserialize(d)?;
        let mut seen = std::collections::HashSet::new();
        let mut terms = Vec::with_capacity(raw.terms.len());
        for t in raw.terms {
            if !seen.insert((t.k, t.l)) {
                return Err(D::Error::custom(format!(
                    "duplicate monomial x^{} y^{}",
                    t.k, t.l
                )));
            }
            let a = t.a.to_rational().map_err(D::Error::custom)?;
            terms.push((t.k, t.l, a));
        }
        Ok(WPoly::from_terms(terms))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn hessian_of_x3y3() {
        let p = WPoly::from_ratio_terms(&[(3, 3, 1, 1)]);
        assert_eq!(p.hessian_xy(), WPoly::from_ratio_terms(&[(2, 2, 9, 1)]));
    }

    #[test]
    fn hessian_of_half_difference() {
        let p = WPoly::from_ratio_terms(&[(2, 1, 1, 2), (1, 2, -1, 2)]);
        assert_eq!(
            p.hessian_xy(),
            WPoly::from_ratio_terms(&[(1, 0, 1, 1), (0, 1, -1, 1)])
        );
    }

    #[test]
    fn pure_terms_have_zero_hessian() {
        let p = WPoly::from_ratio_terms(&[(1, 0, 1, 1), (0, 5, 1, 1)]);
        let h = p.hessian_xy();
        assert!(h.is_zero());
        assert_eq!(h.degree(), -1);
    }

    #[test]
    fn duplicates_merge_and_zeros_vanish() {
        let p = WPoly::from_terms([(1, 1, r(1, 2)), (1, 1, r(-1, 2)), (2, 0, r(3, 1))]);
        assert_eq!(p.len(), 1);
        assert_eq!(p.degree(), 2);
    }

    #[test]
    fn json_accepts_numbers_and_ratios() {
        let p: WPoly =
            serde_json::from_str(r#"{"terms":[{"k":2,"l":1,"a":["1","2"]},{"k":1,"l":2,"a":-0.5}]}"#)
                .unwrap();
        assert_eq!(p.coeff(2, 1), Some(&r(1, 2)));
        assert_eq!(p.coeff(1, 2), Some(&r(-1, 2)));
        let back: WPoly = serde_json::from_str(&serde_json::to_string(&p).unwrap()).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn json_rejects_duplicates_and_unknown_keys() {
        assert!(serde_json::from_str::<WPoly>(
            r#"{"terms":[{"k":1,"l":1,"a":1},{"k":1,"l":1,"a":2}]}"#
        )
        .is_err());
        assert!(serde_json::from_str::<WPoly>(r#"{"terms":[],"extra":1}"#).is_err());
        assert!(serde_json::from_str::<WPoly>(r#"{"terms":[{"k":1,"l":1,"a":["1","0"]}]}"#).is_err());
    }

    #[test]
    fn eval_and_grad() {
        let p = WPoly::from_ratio_terms(&[(2, 1, 1, 1), (0, 3, -2, 1)]);
        let e = p.to_eval();
        assert_eq!(e.value(2.0, 3.0), 12.0 - 54.0);
        assert_eq!(e.grad(2.0, 3.0), (12.0, 4.0 - 54.0));
    }

    #[test]
    fn display_is_readable() {
        let p = WPoly::from_ratio_terms(&[(2, 1, 1, 2), (1, 2, -1, 2)]);
        assert_eq!(p.to_string(), "-1/2*x*y^2 + 1/2*x^2*y");
        assert_eq!(WPoly::from_ratio_terms(&[(1, 1, 1, 1)]).to_string(), "x*y");
    }
}
