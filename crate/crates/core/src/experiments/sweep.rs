use std::sync::Arc;
use std::time::Instant;

use num_complex::Complex64;
use num_rational::Rational64;
use num_traits::ToPrimitive;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fit::{fit_slope, LinearFit};
use super::ExperimentError;
use crate::numerics::{
    build_cutoff, build_kernel, grid_from_probe, probe_derivatives, opnorm_l2_vector, opnorm_lp_lower_from,
    opnorm_lp_upper_with, BoxRegion, CutoffSpec, Damping, DampingFactor, FracPhase, GridCaps,
    L2Options, LpUpperOptions, NormBracket, Phase,
};
use crate::predict::{exact, lp_from_damping, scaled_lp_eta, sharp_lp};
use crate::wpoly::{detect_weights, factorize, WPoly};

/// The phase being swept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PhaseSpec {
    Poly { poly: WPoly },
    /// `S(|x|^eta1, |y|^eta2)`.
    Scaled {
        poly: WPoly,
        #[serde(with = "exact")]
        eta1: Rational64,
        #[serde(with = "exact")]
        eta2: Rational64,
    },
    /// Generalized monomial sum, e.g. from a radial reduction.
    Frac { phase: FracPhase },
}

impl PhaseSpec {
    pub fn evaluator(&self) -> Arc<dyn Phase> {
        match self {
            PhaseSpec::Poly { poly } => Arc::new(poly.to_eval()),
            PhaseSpec::Scaled { poly, eta1, eta2 } => Arc::new(FracPhase::scaled(
                poly,
                eta1.to_f64().unwrap_or(1.0),
                eta2.to_f64().unwrap_or(1.0),
            )),
            PhaseSpec::Frac { phase } => Arc::new(phase.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DampingFactorSpec {
    /// `|S''_xy|` of a polynomial phase.
    Hessian,
    Poly { poly: WPoly },
    /// Cell-dependent factor built from the Hessian factorization.
    Modified { theta: Vec<usize>, n0: u32, j: i32, k: i32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DampingConfig {
    pub factor: DampingFactorSpec,
    pub re_z: f64,
    #[serde(default)]
    pub im_z: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub floor: Option<f64>,
}

impl DampingConfig {
    pub fn build(&self, phase: &PhaseSpec, lambda: f64) -> Result<Damping, ExperimentError> {
        let poly = match phase {
            PhaseSpec::Poly { poly } => Some(poly),
            _ => None,
        };
        let need_poly = || {
            poly.ok_or_else(|| {
                ExperimentError::InvalidConfig("this damping factor needs a polynomial phase".into())
            })
        };
        let factor = match &self.factor {
            DampingFactorSpec::Hessian => DampingFactor::Poly(need_poly()?.hessian_xy().to_eval()),
            DampingFactorSpec::Poly { poly } => DampingFactor::Poly(poly.to_eval()),
            DampingFactorSpec::Modified { theta, n0, j, k } => {
                let h = need_poly()?.hessian_xy();
                let f = factorize(&h, &detect_weights(&h)?)?;
                DampingFactor::modified(&f, theta, *n0, *j, *k, lambda)?
            }
        };
        let d = Damping::new(factor, Complex64::new(self.re_z, self.im_z));
        Ok(match self.floor {
            Some(f) => d.with_floor(f),
            None => d,
        })
    }
}

/// Geometric `lambda` grid; powers of two stay exact.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambdaRange {
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl LambdaRange {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::InvalidConfig(m));
        if !(self.min >= 1.0) || !self.max.is_finite() {
            return bad(format!("lambda min {} must be at least 1", self.min));
        }
        if self.count < 4 {
            return bad(format!("lambda count {} must be at least 4", self.count));
        }
        if !(self.max > self.min) {
            return bad(format!("lambda max {} must exceed min {}", self.max, self.min));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        let (a, b) = (self.min.log2(), self.max.log2());
        let n = (self.count - 1) as f64;
        (0..self.count)
            .map(|i| (a + (b - a) * i as f64 / n).exp2())
            .collect()
    }
}

fn default_restarts() -> usize {
    8
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub phase: PhaseSpec,
    pub cutoff: CutoffSpec,
    #[serde(with = "exact")]
    pub p: Rational64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub damping: Option<DampingConfig>,
    pub lambda: LambdaRange,
    #[serde(default)]
    pub caps: GridCaps,
    #[serde(default)]
    pub seed: u64,
    /// Restrict to one sign quadrant (1..=4) of the cutoff support.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quadrant: Option<u8>,
    /// Slope tolerance; 0.05 at `p = 2` and 0.07 otherwise when unset.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    /// Overrides the computed prediction.
    #[serde(default, with = "exact::option", skip_serializing_if = "Option::is_none")]
    pub expected_decay: Option<Rational64>,
    /// Fit even when a grid hit the sample cap.
    #[serde(default)]
    pub allow_under_resolved: bool,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    /// Search weighted interpolation chains for the upper bound.
    #[serde(default = "yes")]
    pub weighted_upper: bool,
    /// Record wall-clock time per point; off gives bitwise-stable output.
    #[serde(default = "yes")]
    pub record_timing: bool,
}

impl SweepConfig {
    pub fn new(phase: PhaseSpec, cutoff: CutoffSpec, p: Rational64, lambda: LambdaRange) -> Self {
        Self {
            phase,
            cutoff,
            p,
            damping: None,
            lambda,
            caps: GridCaps::default(),
            seed: 0,
            quadrant: None,
            tolerance: None,
            expected_decay: None,
            allow_under_resolved: false,
            restarts: default_restarts(),
            weighted_upper: true,
            record_timing: true,
        }
    }

    pub fn tolerance(&self) -> f64 {
        self.tolerance
            .unwrap_or(if self.p == Rational64::from_integer(2) { 0.05 } else { 0.07 })
    }

    pub fn region(&self) -> Result<BoxRegion, ExperimentError> {
        let support = build_cutoff(&self.cutoff)?.support();
        match self.quadrant {
            None => Ok(support),
            Some(q) => {
                let quad = BoxRegion::quadrant(q)
                    .ok_or_else(|| ExperimentError::InvalidConfig(format!("quadrant {q} not in 1..=4")))?;
                support.intersect(&quad).ok_or_else(|| {
                    ExperimentError::InvalidConfig(format!("cutoff support misses quadrant {q}"))
                })
            }
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        self.lambda.validate()?;
        if self.p < Rational64::from_integer(1) {
            return Err(ExperimentError::InvalidConfig(format!("p = {} is below 1", self.p)));
        }
        if self.tolerance().is_nan() || self.tolerance() < 0.0 {
            return Err(ExperimentError::InvalidConfig("tolerance must be nonnegative".into()));
        }
        self.region()?;
        Ok(())
    }
}

/// Decay exponent predicted for the configured phase at `p`.
pub fn predicted_decay(config: &SweepConfig) -> Result<Rational64, ExperimentError> {
    if let Some(d) = config.expected_decay {
        return Ok(d);
    }
    let p = config.p;
    let two = Rational64::from_integer(2);
    if let Some(d) = &config.damping {
        // Damping by the full Hessian at Re z = 1/2 gives the nondegenerate rate.
        if d.factor == DampingFactorSpec::Hessian && d.re_z == 0.5 && p == two {
            return Ok(Rational64::new(1, 2));
        }
        return Err(ExperimentError::NoPrediction(
            "damped sweeps other than |S''_xy|^(1/2) at p = 2 need expected_decay".into(),
        ));
    }
    let poly = match &config.phase {
        PhaseSpec::Poly { poly } => poly,
        PhaseSpec::Scaled { poly, eta1, eta2 } => {
            for t in poly.terms() {
                if t.k > 0 && t.l > 0 {
                    let (tp, delta) = scaled_lp_eta(t.k, t.l, *eta1, *eta2)?;
                    if tp == p {
                        return Ok(delta);
                    }
                }
            }
            return Err(ExperimentError::NoPrediction(format!("no term matches p = {p}")));
        }
        PhaseSpec::Frac { .. } => {
            return Err(ExperimentError::NoPrediction("generalized phases need expected_decay".into()))
        }
    };
    for t in poly.terms() {
        if t.k > 0 && t.l > 0 {
            let s = sharp_lp(t.k, t.l)?;
            if s.p == p {
                return Ok(s.decay);
            }
        }
    }
    // Fall back to the damping-interpolation exponents of the Hessian.
    let h = poly.hessian_xy();
    if h.is_zero() {
        return Err(ExperimentError::NoPrediction("phase has no mixed terms".into()));
    }
    let f = factorize(&h, &detect_weights(&h)?)?;
    let big_n = f.linear_count() as u32;
    for s in 0..=big_n {
        let (tp, delta) = lp_from_damping(f.m, f.n, big_n, s, f.eta())?;
        if tp == p {
            return Ok(delta);
        }
    }
    Err(ExperimentError::NoPrediction(format!("no exponent formula matches p = {p}")))
}

/// One `lambda` point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub lambda: f64,
    pub bracket: NormBracket,
    pub grid_mx: usize,
    pub grid_my: usize,
    pub under_resolved: bool,
    pub at_floor: bool,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Consistent,
    UpperViolated,
    SharperThanPredicted,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFitResult {
    pub points: Vec<SweepPoint>,
    /// Index of the first point used in the fit.
    pub fit_from: usize,
    pub lower: LinearFit,
    pub upper: LinearFit,
    #[serde(with = "exact")]
    pub predicted_decay: Rational64,
    pub tolerance: f64,
    /// Lower-sequence slope is at least `-predicted - tol`.
    pub lower_within: bool,
    /// Upper-sequence slope is at most `-predicted + tol`.
    pub upper_within: bool,
    pub under_resolved: bool,
    pub verdict: Verdict,
}

impl DecayFitResult {
    pub fn slope_lower(&self) -> f64 {
        self.lower.slope
    }

    pub fn slope_upper(&self) -> f64 {
        self.upper.slope
    }

    pub fn require_resolved(self) -> Result<Self, ExperimentError> {
        match self.points.iter().find(|p| p.under_resolved) {
            Some(p) => Err(ExperimentError::UnderResolvedGrid(p.lambda)),
            None => Ok(self),
        }
    }
}

/// Fits measured points and assigns the verdict. The first point is left
/// out of the fit when its grid sat at the sample floor.
pub fn summarize(
    points: Vec<SweepPoint>,
    predicted: Rational64,
    tol: f64,
    allow_under_resolved: bool,
) -> Result<DecayFitResult, ExperimentError> {
    let fit_from = usize::from(points.first().is_some_and(|p| p.at_floor) && points.len() > 3);
    let used = &points[fit_from..];
    let series = |f: fn(&NormBracket) -> f64| -> Vec<(f64, f64)> {
        used.iter().map(|p| (p.lambda.log2(), f(&p.bracket).log2())).collect()
    };
    let lower = fit_slope(&series(|b| b.lower))?;
    let upper = fit_slope(&series(|b| b.upper))?;
    let d = predicted.to_f64().unwrap_or(f64::NAN);
    let lo = lower.slope.min(upper.slope);
    let hi = lower.slope.max(upper.slope);
    let under = points.iter().any(|p| p.under_resolved);
    let verdict = if (under && !allow_under_resolved) || !lo.is_finite() || !hi.is_finite() {
        Verdict::Inconclusive
    } else if lo > -d + tol {
        Verdict::UpperViolated
    } else if hi < -d - tol {
        Verdict::SharperThanPredicted
    } else {
        Verdict::Consistent
    };
    Ok(DecayFitResult {
        fit_from,
        lower_within: lower.slope >= -d - tol,
        upper_within: upper.slope <= -d + tol,
        lower,
        upper,
        predicted_decay: predicted,
        tolerance: tol,
        under_resolved: under,
        verdict,
        points,
    })
}

fn measure(
    config: &SweepConfig,
    lambda: f64,
    index: usize,
    probe: (f64, f64),
) -> Result<SweepPoint, ExperimentError> {
    let start = Instant::now();
    let phase = config.phase.evaluator();
    let region = config.region()?;
    let grid = grid_from_probe(lambda, probe, region, &config.caps)?;
    let cutoff = build_cutoff(&config.cutoff)?;
    let damping = config
        .damping
        .as_ref()
        .map(|d| d.build(&config.phase, lambda))
        .transpose()?;
    let k = build_kernel(phase, lambda, &cutoff, damping, &grid)?;
    let seed = config.seed.wrapping_add(index as u64);
    let l2 = L2Options { seed, ..L2Options::default() };
    let (b2, right) = opnorm_l2_vector(&k, &l2);
    let p = config.p.to_f64().unwrap_or(2.0);
    let bracket = if config.p == Rational64::from_integer(2) {
        b2
    } else {
        let lower = if p.is_finite() && p > 1.0 {
            opnorm_lp_lower_from(&k, p, config.restarts, seed, &[right])
        } else {
            0.0
        };
        let opts = LpUpperOptions {
            weighted: config.weighted_upper,
            l2,
            l2_upper: Some(b2.upper),
            ..LpUpperOptions::default()
        };
        let (upper, tag) = opnorm_lp_upper_with(&k, p, &opts);
        // For p = 1 the upper bound is exact.
        let lower = if p == 1.0 { upper } else { lower };
        NormBracket {
            lower,
            upper,
            p: config.p,
            method: format!("dual_power+{tag}"),
            iterations: b2.iterations,
            converged: b2.converged,
        }
    };
    let wall_ms = if config.record_timing {
        start.elapsed().as_secs_f64() * 1e3
    } else {
        0.0
    };
    Ok(SweepPoint {
        lambda,
        bracket,
        grid_mx: grid.mx,
        grid_my: grid.my,
        under_resolved: grid.under_resolved,
        at_floor: grid.mx == config.caps.floor || grid.my == config.caps.floor,
        wall_ms,
    })
}

/// Norm brackets over the `lambda` grid with slope fits and a verdict.
pub fn decay_sweep(config: &SweepConfig) -> Result<DecayFitResult, ExperimentError> {
    decay_sweep_with(config, None)
}

/// Derivative sups of the phase over the sweep region, as used for grids.
pub fn sweep_probe(config: &SweepConfig) -> Result<(f64, f64), ExperimentError> {
    Ok(probe_derivatives(config.phase.evaluator().as_ref(), &config.region()?))
}

/// As [`decay_sweep`], reusing a previously computed [`sweep_probe`].
pub fn decay_sweep_with(
    config: &SweepConfig,
    probe: Option<(f64, f64)>,
) -> Result<DecayFitResult, ExperimentError> {
    config.validate()?;
    let predicted = predicted_decay(config)?;
    let probe = match probe {
        Some(p) => p,
        None => sweep_probe(config)?,
    };
    let lambdas = config.lambda.values();
    let points = lambdas
        .par_iter()
        .enumerate()
        .map(|(i, &l)| measure(config, l, i, probe))
        .collect::<Result<Vec<_>, _>>()?;
    summarize(points, predicted, config.tolerance(), config.allow_under_resolved)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(c: f64, exponent: f64, lambdas: &[f64]) -> Vec<SweepPoint> {
        lambdas
            .iter()
            .map(|&l| {
                let v = c * l.powf(exponent);
                SweepPoint {
                    lambda: l,
                    bracket: NormBracket {
                        lower: v,
                        upper: v,
                        p: Rational64::from_integer(2),
                        method: "synthetic".into(),
                        iterations: 0,
                        converged: true,
                    },
                    grid_mx: 1000,
                    grid_my: 1000,
                    under_resolved: false,
                    at_floor: false,
                    wall_ms: 0.0,
                }
            })
            .collect()
    }

    #[test]
    fn synthetic_sequence_fits_exactly() {
        let ls: Vec<f64> = (4..=10).map(|e| 2f64.powi(e)).collect();
        let r = summarize(synthetic(3.0, -0.5, &ls), Rational64::new(1, 2), 0.05, false).unwrap();
        assert!((r.lower.slope + 0.5).abs() < 1e-14);
        assert!((r.upper.r2 - 1.0).abs() < 1e-14);
        assert_eq!(r.verdict, Verdict::Consistent);
    }

    #[test]
    fn verdict_directions() {
        let ls: Vec<f64> = (4..=10).map(|e| 2f64.powi(e)).collect();
        let slow = summarize(synthetic(1.0, -0.2, &ls), Rational64::new(1, 2), 0.05, false).unwrap();
        assert_eq!(slow.verdict, Verdict::UpperViolated);
        let fast = summarize(synthetic(1.0, -0.9, &ls), Rational64::new(1, 2), 0.05, false).unwrap();
        assert_eq!(fast.verdict, Verdict::SharperThanPredicted);
        let mut pts = synthetic(1.0, -0.5, &ls);
        pts[6].under_resolved = true;
        let r = summarize(pts.clone(), Rational64::new(1, 2), 0.05, false).unwrap();
        assert_eq!(r.verdict, Verdict::Inconclusive);
        assert!(r.require_resolved().is_err());
        let r = summarize(pts, Rational64::new(1, 2), 0.05, true).unwrap();
        assert_eq!(r.verdict, Verdict::Consistent);
    }

    #[test]
    fn drops_floor_point() {
        let ls: Vec<f64> = (4..=10).map(|e| 2f64.powi(e)).collect();
        let mut pts = synthetic(1.0, -0.5, &ls);
        pts[0].at_floor = true;
        pts[0].bracket.lower = 100.0;
        pts[0].bracket.upper = 100.0;
        let r = summarize(pts, Rational64::new(1, 2), 0.05, false).unwrap();
        assert_eq!(r.fit_from, 1);
        assert!((r.lower.slope + 0.5).abs() < 1e-14);
    }

    #[test]
    fn lambda_values_are_exact_powers() {
        let r = LambdaRange { min: 16.0, max: 1024.0, count: 7 };
        assert_eq!(r.values(), vec![16.0, 32.0, 64.0, 128.0, 256.0, 512.0, 1024.0]);
        assert!(LambdaRange { min: 0.5, max: 4.0, count: 4 }.validate().is_err());
        assert!(LambdaRange { min: 1.0, max: 4.0, count: 3 }.validate().is_err());
    }

    #[test]
    fn predictions() {
        let bump = CutoffSpec::tensor_bump(BoxRegion::square(1.0));
        let range = LambdaRange { min: 16.0, max: 1024.0, count: 7 };
        let cfg = |terms: &[(u32, u32, i64, i64)], p: Rational64| {
            SweepConfig::new(PhaseSpec::Poly { poly: WPoly::from_ratio_terms(terms) }, bump.clone(), p, range)
        };
        assert_eq!(predicted_decay(&cfg(&[(1, 1, 1, 1)], 2.into())).unwrap(), Rational64::new(1, 2));
        assert_eq!(predicted_decay(&cfg(&[(2, 2, 1, 4)], 2.into())).unwrap(), Rational64::new(1, 4));
        assert_eq!(
            predicted_decay(&cfg(&[(2, 1, 1, 1)], Rational64::new(3, 2))).unwrap(),
            Rational64::new(1, 3)
        );
        let mut damped = cfg(&[(3, 1, 1, 1)], 2.into());
        damped.damping = Some(DampingConfig {
            factor: DampingFactorSpec::Hessian,
            re_z: 0.5,
            im_z: 0.0,
            floor: None,
        });
        assert_eq!(predicted_decay(&damped).unwrap(), Rational64::new(1, 2));
    }

    #[test]
    fn config_round_trip() {
        let c = SweepConfig::new(
            PhaseSpec::Poly { poly: WPoly::from_ratio_terms(&[(1, 1, 1, 1)]) },
            CutoffSpec::tensor_bump(BoxRegion::square(1.0)),
            Rational64::new(3, 2),
            LambdaRange { min: 16.0, max: 64.0, count: 4 },
        );
        let s = serde_json::to_string(&c).unwrap();
        let back: SweepConfig = serde_json::from_str(&s).unwrap();
        assert_eq!(back, c);
        let bad = s.replacen('{', "{\"bogus\":1,", 1);
        assert!(serde_json::from_str::<SweepConfig>(&bad).is_err());
    }
}
