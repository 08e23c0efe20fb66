use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fit::{fit_slope, LinearFit};
use super::ExperimentError;

/// Test of the radial counterexample: `g` is the indicator of
/// `[K, K + eps0 K^{1-b}]` and the phase is `(rho^a - r^b)^N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CounterexampleConfig {
    pub a: f64,
    pub b: f64,
    pub n: u32,
    pub eps0: f64,
    pub ks: Vec<f64>,
    /// Skip the `a <= 1, b < 1` check, for negative-control runs.
    #[serde(default)]
    pub control: bool,
    /// Sample count for `rho`.
    #[serde(default = "default_rho_samples")]
    pub rho_samples: usize,
}

fn default_rho_samples() -> usize {
    64
}

impl CounterexampleConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::InvalidConfig(m));
        if !(self.a > 0.0 && self.b > 0.0) || self.n == 0 {
            return bad("a, b and N must be positive".into());
        }
        if !self.control && !(self.a <= 1.0 && self.b < 1.0) {
            return Err(ExperimentError::RegimeViolation(format!(
                "need a <= 1 and b < 1, got a = {}, b = {}",
                self.a, self.b
            )));
        }
        if !(0.0..1.0).contains(&self.eps0) {
            return bad(format!("eps0 = {} not in [0, 1)", self.eps0));
        }
        if self.ks.is_empty() || self.ks.iter().any(|k| *k < 16.0) || self.ks.windows(2).any(|w| w[1] <= w[0]) {
            return bad("K values must be increasing and at least 16".into());
        }
        if self.rho_samples < 2 {
            return bad("need at least 2 rho samples".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleResult {
    pub ks: Vec<f64>,
    pub values: Vec<f64>,
    /// Log-log growth fit; absent when some value is 0.
    pub fit: Option<LinearFit>,
}

impl CounterexampleResult {
    pub fn exponent(&self) -> Option<f64> {
        self.fit.map(|f| f.slope)
    }
}

/// `|int e^{i (rho^a - r^b)^N} g(r) dr|` by the midpoint rule.
fn integral(cfg: &CounterexampleConfig, rho: f64, lo: f64, hi: f64) -> f64 {
    let len = hi - lo;
    if len <= 0.0 {
        return 0.0;
    }
    let ra = rho.powf(cfg.a);
    let n = f64::from(cfg.n);
    // Bound on the phase derivative over the interval.
    let dphase = |r: f64| {
        let u = (ra - r.powf(cfg.b)).abs();
        n * u.powf(n - 1.0) * cfg.b * r.powf(cfg.b - 1.0)
    };
    let slope = dphase(lo).max(dphase(hi));
    let samples = ((16.0 * slope * len).ceil() as usize).max(1024);
    let h = len / samples as f64;
    let sum: Complex64 = (0..samples)
        .map(|i| {
            let r = lo + (i as f64 + 0.5) * h;
            Complex64::from_polar(1.0, (ra - r.powf(cfg.b)).powi(cfg.n as i32))
        })
        .sum();
    sum.norm() * h
}

/// Sup over `rho` in `[K^{b/a}, K^{b/a} + eps0]` per `K`, with a log-log fit.
pub fn counterexample_growth(cfg: &CounterexampleConfig) -> Result<CounterexampleResult, ExperimentError> {
    cfg.validate()?;
    let values: Vec<f64> = cfg
        .ks
        .par_iter()
        .map(|&k| {
            let lo = k;
            let hi = k + cfg.eps0 * k.powf(1.0 - cfg.b);
            let r0 = k.powf(cfg.b / cfg.a);
            (0..cfg.rho_samples)
                .map(|i| {
                    let rho = r0 + cfg.eps0 * i as f64 / (cfg.rho_samples - 1) as f64;
                    integral(cfg, rho, lo, hi)
                })
                .fold(0.0_f64, f64::max)
        })
        .collect();
    let fit = if cfg.ks.len() >= 3 && values.iter().all(|v| *v > 0.0) {
        let pts: Vec<(f64, f64)> = cfg.ks.iter().zip(&values).map(|(k, v)| (k.log2(), v.log2())).collect();
        Some(fit_slope(&pts)?)
    } else {
        None
    };
    Ok(CounterexampleResult { ks: cfg.ks.clone(), values, fit })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(eps0: f64) -> CounterexampleConfig {
        CounterexampleConfig {
            a: 1.0,
            b: 0.5,
            n: 1,
            eps0,
            ks: vec![16.0, 64.0, 256.0, 1024.0],
            control: false,
            rho_samples: 8,
        }
    }

    #[test]
    fn empty_interval_gives_zero() {
        let r = counterexample_growth(&cfg(0.0)).unwrap();
        assert!(r.values.iter().all(|v| *v == 0.0));
        assert!(r.fit.is_none());
    }

    #[test]
    fn failure_regime_is_enforced() {
        let mut c = cfg(0.1);
        c.a = 2.0;
        assert!(counterexample_growth(&c).is_err());
        c.control = true;
        assert!(counterexample_growth(&c).is_ok());
    }

    #[test]
    fn nearly_constant_phase_gives_interval_length() {
        // The phase moves by at most eps0/2 over the interval, so the
        // integral is close to its length eps0 K^{1/2}.
        let r = counterexample_growth(&cfg(0.1)).unwrap();
        for (k, v) in r.ks.iter().zip(&r.values) {
            let len = 0.1 * k.sqrt();
            assert!(*v <= len * (1.0 + 1e-12) && *v >= 0.99 * len);
        }
        assert!((r.exponent().unwrap() - 0.5).abs() < 0.01);
    }
}
