use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::numerics::{
    build_cutoff, probe_derivatives, BoxRegion, CutoffSpec, Damping, DampingFactor,
};
use crate::wpoly::{detect_weights, factorize, Factorization, PolyEval, WPoly};

/// An atom on a subinterval of the dyadic interval `[2^{k-1}, 2^{k+1}]`,
/// twisted by the phase at `x0 = Re(beta_u) c^eta` (`c` the midpoint).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomSpec {
    pub k: i32,
    pub interval: [f64; 2],
    /// 1-based index into the Hessian's linear roots.
    pub u: usize,
    pub lambda: f64,
    pub phase: WPoly,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BaseProfile {
    /// `|I|^{-1}` on the left half, `-|I|^{-1}` on the right half.
    #[default]
    Haar,
    /// `|I|^{-1} sin(2 pi (y - a) / |I|)`.
    Sine,
    /// `|I|^{-1}` on `I`; has no vanishing moment.
    Bump,
}

impl BaseProfile {
    fn eval(self, y: f64, a: f64, b: f64) -> f64 {
        if y < a || y > b {
            return 0.0;
        }
        let len = b - a;
        let h = 1.0 / len;
        match self {
            BaseProfile::Haar => {
                if y < 0.5 * (a + b) {
                    h
                } else {
                    -h
                }
            }
            BaseProfile::Sine => h * (2.0 * PI * (y - a) / len).sin(),
            BaseProfile::Bump => h,
        }
    }
}

/// Atom samples on a midpoint grid of its interval.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledAtom {
    pub ys: Vec<f64>,
    pub values: Vec<Complex64>,
    pub h: f64,
    pub x0: f64,
}

fn hessian_factorization(phase: &WPoly) -> Result<Factorization, ExperimentError> {
    let h = phase.hessian_xy();
    if h.is_zero() {
        return Err(ExperimentError::HypothesisViolated("phase has zero mixed Hessian".into()));
    }
    Ok(factorize(&h, &detect_weights(&h)?)?)
}

fn dyadic_range(k: i32) -> (f64, f64) {
    (f64::from(k - 1).exp2(), f64::from(k + 1).exp2())
}

fn twist_point(spec: &AtomSpec, f: &Factorization) -> Result<f64, ExperimentError> {
    let (lo, hi) = dyadic_range(spec.k);
    let [a, b] = spec.interval;
    if !(a < b) || a < lo || b > hi {
        return Err(ExperimentError::IntervalOutOfRange { interval: spec.interval, lo, hi });
    }
    let lin = f.linear_roots();
    if spec.u == 0 || spec.u > lin.len() {
        return Err(ExperimentError::InvalidConfig(format!(
            "root index {} not in 1..={}",
            spec.u,
            lin.len()
        )));
    }
    let eta = f.weights.p as f64 / f.weights.q as f64;
    Ok(lin[spec.u - 1].beta.re * (0.5 * (a + b)).powf(eta))
}

/// `a(y) = e^{-i lambda S(x0, y)} b(y)` sampled at `samples` midpoints of `I`.
pub fn make_atom(spec: &AtomSpec, base: BaseProfile, samples: usize) -> Result<SampledAtom, ExperimentError> {
    let f = hessian_factorization(&spec.phase)?;
    let x0 = twist_point(spec, &f)?;
    if samples < 2 || samples % 2 == 1 {
        return Err(ExperimentError::InvalidConfig("atom sample count must be even and at least 2".into()));
    }
    let s = spec.phase.to_eval();
    let [a, b] = spec.interval;
    let h = (b - a) / samples as f64;
    let ys: Vec<f64> = (0..samples).map(|i| a + (i as f64 + 0.5) * h).collect();
    let values = ys
        .iter()
        .map(|&y| Complex64::from_polar(1.0, -spec.lambda * s.value(x0, y)) * base.eval(y, a, b))
        .collect();
    Ok(SampledAtom { ys, values, h, x0 })
}

/// Quadrature of `int e^{i lambda S(x0, y)} a(y) dy`.
pub fn oscillatory_moment(spec: &AtomSpec, atom: &SampledAtom) -> Complex64 {
    let s = spec.phase.to_eval();
    atom.ys
        .iter()
        .zip(&atom.values)
        .map(|(&y, &v)| Complex64::from_polar(1.0, spec.lambda * s.value(atom.x0, y)) * v)
        .sum::<Complex64>()
        * atom.h
}

fn default_n0() -> u32 {
    2
}

fn default_lengths() -> Vec<f64> {
    (2..=8).map(|e| f64::from(-e).exp2()).collect()
}

fn default_y_samples() -> usize {
    256
}

/// Shrinking atoms pushed through one dyadic piece of the damped operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AtomSeriesConfig {
    pub phase: WPoly,
    pub lambda: f64,
    pub j: i32,
    pub k: i32,
    /// 1-based linear-root indices of the damped cluster.
    pub theta: Vec<usize>,
    #[serde(default = "default_n0")]
    pub n0: u32,
    /// Twist root; defaults to the last index of `theta`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u: Option<usize>,
    /// Atom midpoint; defaults to `2^k`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<f64>,
    /// Interval lengths as multiples of `2^k`.
    #[serde(default = "default_lengths")]
    pub lengths: Vec<f64>,
    #[serde(default)]
    pub base: BaseProfile,
    /// Output samples on `[2^{j-1}, 2^{j+1}]`; 0 picks a resolving count.
    #[serde(default)]
    pub x_samples: usize,
    #[serde(default = "default_y_samples")]
    pub y_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AtomSeriesReport {
    pub lengths: Vec<f64>,
    pub l1: Vec<f64>,
    pub ratio: f64,
    /// Images grow at every halving.
    pub monotone_growth: bool,
    pub modified_damping: bool,
    pub re_z: f64,
    pub x_samples: usize,
}

/// Damping for the cell `(j, k)`: the modified factor when `m = 0` and the
/// cluster is tight, the plain product otherwise. `Re z = -1/(m + s)`.
fn cell_damping(
    f: &Factorization,
    theta: &[usize],
    n0: u32,
    j: i32,
    k: i32,
    lambda: f64,
) -> Result<(Damping, bool, f64), ExperimentError> {
    let lin = f.linear_roots();
    if theta.is_empty() || theta.iter().any(|&t| t == 0 || t > lin.len()) {
        return Err(ExperimentError::InvalidConfig(format!(
            "theta {theta:?} must be nonempty indices in 1..={}",
            lin.len()
        )));
    }
    let eta = f.weights.p as f64 / f.weights.q as f64;
    let top = lin[*theta.last().unwrap() - 1];
    let (kf, two_j) = (f64::from(k), f64::from(j).exp2());
    let lo = top.modulus * ((kf - 1.0) * eta - 2.0).exp2();
    let hi = top.modulus * ((kf + 1.0) * eta + 2.0).exp2();
    if two_j < lo || two_j > hi {
        return Err(ExperimentError::RegimeViolation(format!(
            "need {lo} <= 2^j = {two_j} <= {hi}"
        )));
    }
    let s = theta.len() as f64;
    let re_z = -1.0 / (f64::from(f.m) + s);
    let spread = theta
        .iter()
        .map(|&t| (lin[t - 1].beta - top.beta).norm())
        .fold(0.0_f64, f64::max);
    let tight = f.m == 0 && spread < top.modulus / 4.0;
    let factor = if tight {
        if lambda == 0.0 {
            return Err(ExperimentError::InvalidConfig(
                "lambda = 0 makes the modified damping constant infinite".into(),
            ));
        }
        DampingFactor::modified(f, theta, n0, j, k, lambda)?
    } else {
        DampingFactor::Linear {
            m: f.m,
            roots: theta.iter().map(|&t| lin[t - 1].beta).collect(),
            eta,
        }
    };
    Ok((Damping::new(factor, Complex64::new(re_z, 0.0)), tight, re_z))
}

fn image_l1(
    phase: &PolyEval,
    lambda: f64,
    damping: &Damping,
    cell: &crate::numerics::Cutoff,
    xs: &[f64],
    hx: f64,
    atom: &SampledAtom,
) -> Result<f64, ExperimentError> {
    let mut total = 0.0;
    for &x in xs {
        let mut acc = Complex64::new(0.0, 0.0);
        for (&y, &a) in atom.ys.iter().zip(&atom.values) {
            let c = cell.eval(x, y);
            if c == 0.0 {
                continue;
            }
            let w = damping.weight(x, y)?;
            acc += Complex64::from_polar(c, lambda * phase.value(x, y)) * w * a;
        }
        total += acc.norm() * atom.h;
    }
    Ok(total * hx)
}

/// L^1 norms of one dyadic piece applied to a series of shrinking atoms,
/// with their max/min ratio.
pub fn atom_image_l1(config: &AtomSeriesConfig) -> Result<AtomSeriesReport, ExperimentError> {
    let f = hessian_factorization(&config.phase)?;
    let (damping, modified, re_z) =
        cell_damping(&f, &config.theta, config.n0, config.j, config.k, config.lambda)?;
    if config.lengths.is_empty() {
        return Err(ExperimentError::InvalidConfig("no interval lengths".into()));
    }
    let scale = f64::from(config.k).exp2();
    let center = config.center.unwrap_or(scale);
    let u = config.u.unwrap_or(*config.theta.last().unwrap());
    let cell = build_cutoff(&CutoffSpec::DyadicCell { j: config.j, k: config.k, inner: None })?;
    let (xlo, xhi) = dyadic_range(config.j);
    let (ylo, yhi) = dyadic_range(config.k);
    let phase = config.phase.to_eval();
    let (lx, ly) = probe_derivatives(&phase, &BoxRegion::new(xlo, xhi, ylo, yhi));
    let min_len = config.lengths.iter().fold(f64::INFINITY, |m, &l| m.min(l)) * scale;
    let x_samples = if config.x_samples > 0 {
        config.x_samples
    } else {
        let osc = 8.0 * config.lambda.abs() * lx * (xhi - xlo) / (2.0 * PI);
        let fine = 16.0 * (xhi - xlo) / min_len;
        osc.max(fine).max(4096.0).ceil() as usize
    };
    let hx = (xhi - xlo) / x_samples as f64;
    let xs: Vec<f64> = (0..x_samples).map(|i| xlo + (i as f64 + 0.5) * hx).collect();
    let mut l1 = Vec::with_capacity(config.lengths.len());
    for &rel in &config.lengths {
        let len = rel * scale;
        let spec = AtomSpec {
            k: config.k,
            interval: [center - 0.5 * len, center + 0.5 * len],
            u,
            lambda: config.lambda,
            phase: config.phase.clone(),
        };
        let want = 8.0 * config.lambda.abs() * ly * len / (2.0 * PI);
        let ny = (want.ceil() as usize).max(config.y_samples).next_multiple_of(2);
        let atom = make_atom(&spec, config.base, ny)?;
        l1.push(image_l1(&phase, config.lambda, &damping, &cell, &xs, hx, &atom)?);
    }
    let max = l1.iter().copied().fold(0.0_f64, f64::max);
    let min = l1.iter().copied().fold(f64::INFINITY, f64::min);
    let monotone_growth = l1.windows(2).all(|w| w[1] > w[0]);
    Ok(AtomSeriesReport {
        lengths: config.lengths.clone(),
        l1,
        ratio: max / min,
        monotone_growth,
        modified_damping: modified,
        re_z,
        x_samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    // S''_xy = x - y.
    fn phase() -> WPoly {
        WPoly::from_ratio_terms(&[(2, 1, 1, 2), (1, 2, -1, 2)])
    }

    fn spec(lambda: f64) -> AtomSpec {
        AtomSpec { k: 0, interval: [0.8, 1.1], u: 1, lambda, phase: phase() }
    }

    #[test]
    fn moment_vanishes_and_height_bounded() {
        for base in [BaseProfile::Haar, BaseProfile::Sine] {
            let s = spec(64.0);
            let a = make_atom(&s, base, 512).unwrap();
            assert!(oscillatory_moment(&s, &a).norm() < 1e-12);
            let h = 1.0 / 0.3;
            assert!(a.values.iter().all(|v| v.norm() <= h * (1.0 + 1e-15)));
        }
    }

    #[test]
    fn lambda_zero_is_classical() {
        let a = make_atom(&spec(0.0), BaseProfile::Haar, 4).unwrap();
        let h = 1.0 / 0.30000000000000004;
        let re: Vec<f64> = a.values.iter().map(|v| v.re).collect();
        assert_eq!(re, vec![h, h, -h, -h]);
        assert!(a.values.iter().all(|v| v.im == 0.0));
    }

    #[test]
    fn interval_must_fit() {
        let mut s = spec(1.0);
        s.interval = [0.4, 1.0];
        assert!(matches!(make_atom(&s, BaseProfile::Haar, 8), Err(ExperimentError::IntervalOutOfRange { .. })));
    }

    #[test]
    fn regime_check() {
        let cfg = AtomSeriesConfig {
            phase: phase(),
            lambda: 64.0,
            j: 5,
            k: 0,
            theta: vec![1],
            n0: 2,
            u: None,
            center: None,
            lengths: default_lengths(),
            base: BaseProfile::Haar,
            x_samples: 64,
            y_samples: 8,
        };
        assert!(matches!(atom_image_l1(&cfg), Err(ExperimentError::RegimeViolation(_))));
    }
}
