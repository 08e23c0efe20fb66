use num_integer::Integer;
use num_rational::Rational64;
use serde::{Deserialize, Serialize};

use super::{WPoly, WPolyError};

/// Coprime weights `(p, q)` with `p*k + q*l = D` over the support.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeightSignature {
    pub p: u32,
    pub q: u32,
    /// Weighted degree `p*k + q*l`.
    #[serde(rename = "D")]
    pub weighted_degree: u64,
}

impl WeightSignature {
    pub fn new(p: u32, q: u32, weighted_degree: u64) -> Result<Self, WPolyError> {
        if p == 0 || q == 0 || p.gcd(&q) != 1 {
            return Err(WPolyError::InvalidArgument(format!(
                "weights ({p},{q}) must be coprime positive integers"
            )));
        }
        Ok(Self { p, q, weighted_degree })
    }

    /// `eta = p/q`, in lowest terms.
    pub fn eta(&self) -> Rational64 {
        Rational64::new(i64::from(self.p), i64::from(self.q))
    }

    /// `d = D/q`, so that `k*eta + l = d` on the support.
    pub fn d(&self) -> Rational64 {
        Rational64::new(self.weighted_degree as i64, i64::from(self.q))
    }

    pub fn weight_of(&self, k: u32, l: u32) -> u64 {
        u64::from(self.p) * u64::from(k) + u64::from(self.q) * u64::from(l)
    }

    /// True when every term of `poly` has weighted degree `D`.
    pub fn admits(&self, poly: &WPoly) -> bool {
        poly.terms()
            .iter()
            .all(|t| self.weight_of(t.k, t.l) == self.weighted_degree)
    }
}

/// Finds the unique coprime `(p, q)` making `poly` weighted homogeneous.
///
/// A single monomial is homogeneous for every weight; it gets `(1, 1)`.
pub fn detect_weights(poly: &WPoly) -> Result<WeightSignature, WPolyError> {
    let terms = poly.terms();
    let first = terms.first().ok_or(WPolyError::EmptyPolynomial)?;
    let (k0, l0) = (i64::from(first.k), i64::from(first.l));

    // Any two distinct support points fix the ratio p/q = -dl/dk.
    let mut pq: Option<(i64, i64)> = None;
    for t in &terms[1..] {
        let dk = i64::from(t.k) - k0;
        let dl = i64::from(t.l) - l0;
        // dk and dl can't both vanish because exponent pairs are distinct.
        if dk == 0 || dl == 0 || dk.signum() == dl.signum() {
            return Err(WPolyError::NotWeightedHomogeneous);
        }
        let g = dk.gcd(&dl);
        let cand = (dl.abs() / g, dk.abs() / g);
        match pq {
            None => pq = Some(cand),
            Some(prev) if prev != cand => return Err(WPolyError::NotWeightedHomogeneous),
            Some(_) => {}
        }
    }
    let (p, q) = pq.unwrap_or((1, 1));
    let sig = WeightSignature::new(p as u32, q as u32, (p * k0 + q * l0) as u64)?;
    debug_assert!(sig.admits(poly));
    Ok(sig)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_quartic_has_unit_weights() {
        let p = WPoly::from_ratio_terms(&[(3, 1, 1, 1), (1, 3, 1, 1)]);
        let w = detect_weights(&p).unwrap();
        assert_eq!((w.p, w.q, w.weighted_degree), (1, 1, 4));
        assert_eq!(w.eta(), Rational64::from_integer(1));
        assert_eq!(w.d(), Rational64::from_integer(4));
    }

    #[test]
    fn x2y_plus_y4_has_weights_3_2() {
        let p = WPoly::from_ratio_terms(&[(2, 1, 1, 1), (0, 4, 1, 1)]);
        let w = detect_weights(&p).unwrap();
        assert_eq!((w.p, w.q, w.weighted_degree), (3, 2, 8));
        assert_eq!(w.eta(), Rational64::new(3, 2));
        assert_eq!(w.d(), Rational64::from_integer(4));
    }

    #[test]
    fn monomial_uses_canonical_weights() {
        let p = WPoly::from_ratio_terms(&[(1, 1, 1, 1)]);
        let w = detect_weights(&p).unwrap();
        assert_eq!((w.p, w.q, w.weighted_degree), (1, 1, 2));
    }

    #[test]
    fn errors() {
        assert_eq!(detect_weights(&WPoly::zero()), Err(WPolyError::EmptyPolynomial));
        let bad = WPoly::from_ratio_terms(&[(1, 0, 1, 1), (2, 1, 1, 1)]);
        assert_eq!(detect_weights(&bad), Err(WPolyError::NotWeightedHomogeneous));
        // x^2 + x y^3 is homogeneous for (3, 1).
        let ok = WPoly::from_ratio_terms(&[(2, 0, 1, 1), (1, 3, 1, 1)]);
        assert_eq!(detect_weights(&ok).map(|w| (w.p, w.q)), Ok((3, 1)));
        let collinear = WPoly::from_ratio_terms(&[(3, 0, 1, 1), (1, 0, 1, 1)]);
        assert_eq!(detect_weights(&collinear), Err(WPolyError::NotWeightedHomogeneous));
        let three = WPoly::from_ratio_terms(&[(2, 0, 1, 1), (1, 1, 1, 1), (0, 3, 1, 1)]);
        assert_eq!(detect_weights(&three), Err(WPolyError::NotWeightedHomogeneous));
    }
}
