use num_rational::Rational64;
use serde::{Deserialize, Serialize};

use super::sweep::{LambdaRange, PhaseSpec, SweepConfig};
use super::ExperimentError;
use crate::numerics::{CutoffSpec, FracPhase};
use crate::predict::{higher_dim_prediction, PredictError};

/// One product `P(x) Q(y)` with `P` homogeneous of degree `k m` on `R^{nX}`
/// and `Q` homogeneous of degree `l n` on `R^{nY}`, given through its values
/// at fixed unit-sphere points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadialTerm {
    pub coeff: f64,
    pub k: u32,
    pub m: u32,
    pub l: u32,
    pub n: u32,
    pub p_sphere: f64,
    pub q_sphere: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadialPhase {
    pub terms: Vec<RadialTerm>,
    pub nx: u32,
    pub ny: u32,
}

/// One-dimensional sweep for `S(rho^{1/nX} x', r^{1/nY} y')`, predicted by
/// the first term.
pub fn radial_reduce(
    phase: &RadialPhase,
    cutoff: CutoffSpec,
    lambda: LambdaRange,
) -> Result<SweepConfig, ExperimentError> {
    let first = phase
        .terms
        .first()
        .ok_or_else(|| ExperimentError::InvalidConfig("radial phase has no terms".into()))?;
    let mut terms = Vec::with_capacity(phase.terms.len());
    for (i, t) in phase.terms.iter().enumerate() {
        if t.p_sphere == 0.0 || t.q_sphere == 0.0 {
            return Err(ExperimentError::NonIntegrableSphereFactor(i));
        }
        terms.push((
            t.coeff * t.p_sphere * t.q_sphere,
            f64::from(t.k * t.m) / f64::from(phase.nx),
            f64::from(t.l * t.n) / f64::from(phase.ny),
        ));
    }
    let (p, decay) = higher_dim_prediction(first.k, first.l, first.m, first.n, phase.nx, phase.ny)
        .map_err(|e| match e {
            PredictError::HypothesisViolated(m) => ExperimentError::HypothesisViolated(m),
            other => other.into(),
        })?;
    phase.common_line().map_err(ExperimentError::HypothesisViolated)?;
    let mut cfg = SweepConfig::new(PhaseSpec::Frac { phase: FracPhase::new(terms) }, cutoff, p, lambda);
    cfg.expected_decay = Some(decay);
    cfg.quadrant = Some(1);
    Ok(cfg)
}

impl RadialPhase {
    /// Reduced exponents `(k m / nX, l n / nY)` of each term, exactly.
    pub fn reduced_exponents(&self) -> Vec<(Rational64, Rational64)> {
        self.terms
            .iter()
            .map(|t| {
                (
                    Rational64::new(i64::from(t.k * t.m), i64::from(self.nx)),
                    Rational64::new(i64::from(t.l * t.n), i64::from(self.ny)),
                )
            })
            .collect()
    }

    /// The reduced exponents must satisfy `a_i + c b_i = d` for one `c > 0`;
    /// returns that `c` when at least two distinct exponent pairs fix it.
    pub fn common_line(&self) -> Result<Option<Rational64>, String> {
        let mut pts = self.reduced_exponents();
        pts.dedup();
        let mut slope: Option<Rational64> = None;
        for w in pts.windows(2).map(|w| (w[0], w[1])).chain(pts.first().copied().zip(pts.last().copied())) {
            let ((a0, b0), (a1, b1)) = w;
            if (a0, b0) == (a1, b1) {
                continue;
            }
            let c = if b0 == b1 { None } else { Some((a0 - a1) / (b1 - b0)) };
            match (c, slope) {
                (Some(c), _) if c <= Rational64::from_integer(0) => {
                    return Err(format!("terms ({a0}, {b0}) and ({a1}, {b1}) need c = {c}, not positive"));
                }
                (None, _) => return Err(format!("terms ({a0}, {b0}) and ({a1}, {b1}) share b with different a")),
                (Some(c), Some(s)) if c != s => {
                    return Err(format!("terms need c = {c} and c = {s}"));
                }
                (Some(c), _) => slope = Some(c),
            }
        }
        Ok(slope)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::BoxRegion;

    fn range() -> LambdaRange {
        LambdaRange { min: 16.0, max: 128.0, count: 4 }
    }

    fn bump() -> CutoffSpec {
        CutoffSpec::tensor_bump(BoxRegion::new(0.25, 1.75, 0.25, 1.75))
    }

    #[test]
    fn squared_norm_times_y() {
        // |x|^2 y on R^2 x R: P = |x|^2 (k = 1, m = 2), Q = y (l = 1, n = 1).
        let ph = RadialPhase {
            terms: vec![RadialTerm { coeff: 1.0, k: 1, m: 2, l: 1, n: 1, p_sphere: 1.0, q_sphere: 1.0 }],
            nx: 2,
            ny: 1,
        };
        let one = Rational64::from_integer(1);
        assert_eq!(ph.reduced_exponents(), vec![(one, one)]);
        let cfg = radial_reduce(&ph, bump(), range()).unwrap();
        assert_eq!(cfg.expected_decay, Some(Rational64::new(1, 2)));
        assert_eq!(cfg.p, Rational64::from_integer(2));
        match cfg.phase {
            PhaseSpec::Frac { phase } => assert_eq!(phase.terms, vec![(1.0, 1.0, 1.0)]),
            other => panic!("unexpected phase {other:?}"),
        }
    }

    #[test]
    fn identity_in_one_dimension() {
        let ph = RadialPhase {
            terms: vec![RadialTerm { coeff: 2.0, k: 2, m: 1, l: 1, n: 1, p_sphere: 1.0, q_sphere: 1.0 }],
            nx: 1,
            ny: 1,
        };
        let cfg = radial_reduce(&ph, bump(), range()).unwrap();
        match cfg.phase {
            PhaseSpec::Frac { phase } => assert_eq!(phase.terms, vec![(2.0, 2.0, 1.0)]),
            other => panic!("unexpected phase {other:?}"),
        }
    }

    #[test]
    fn error_paths() {
        let mut ph = RadialPhase {
            terms: vec![RadialTerm { coeff: 1.0, k: 1, m: 2, l: 1, n: 1, p_sphere: 0.0, q_sphere: 1.0 }],
            nx: 2,
            ny: 1,
        };
        assert_eq!(radial_reduce(&ph, bump(), range()), Err(ExperimentError::NonIntegrableSphereFactor(0)));
        ph.terms[0].p_sphere = 1.0;
        ph.nx = 3;
        assert!(matches!(radial_reduce(&ph, bump(), range()), Err(ExperimentError::HypothesisViolated(_))));
    }

    fn term(k: u32, l: u32) -> RadialTerm {
        RadialTerm { coeff: 1.0, k, m: 1, l, n: 1, p_sphere: 1.0, q_sphere: 1.0 }
    }

    #[test]
    fn terms_share_one_weight_line() {
        let r = Rational64::from_integer;
        // x^2 y + x y^2: 2 + c = 1 + 2c at c = 1.
        let ph = RadialPhase { terms: vec![term(2, 1), term(1, 2)], nx: 1, ny: 1 };
        assert_eq!(ph.common_line(), Ok(Some(r(1))));
        // x^3 y, x y^2 and x^2 y^3 lie on no common weight line.
        let ph = RadialPhase { terms: vec![term(3, 1), term(1, 2), term(2, 3)], nx: 1, ny: 1 };
        assert!(ph.common_line().is_err());
        // x^2 y^2 + x y: c = -1.
        let ph = RadialPhase { terms: vec![term(2, 2), term(1, 1)], nx: 1, ny: 1 };
        assert!(matches!(radial_reduce(&ph, bump(), range()), Err(ExperimentError::HypothesisViolated(_))));
        let single = RadialPhase { terms: vec![term(2, 1)], nx: 1, ny: 1 };
        assert_eq!(single.common_line(), Ok(None));
    }
}
