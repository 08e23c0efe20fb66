use num_rational::Rational64;
use num_traits::ToPrimitive;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::numerics::{
    auto_grid, build_cutoff, build_kernel, opnorm_l2_with, opnorm_lp_upper_with, task_rng,
    CutoffSpec, GridCaps, L2Options, LpUpperOptions,
};
use crate::predict::exact;
use crate::wpoly::{detect_weights, WPoly};

/// Random-coefficient family `sum_i c_i x^{k_i} y^{l_i}` with each `c_i`
/// uniform in `[-1, 1] \ {0}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UniformityConfig {
    /// Monomial exponents `(k, l)` of the family.
    pub monomials: Vec<(u32, u32)>,
    /// Index in `monomials` of the term whose coefficient normalizes.
    pub normalizing: usize,
    pub draws: usize,
    /// Extra coefficient vectors run in addition to the random draws.
    #[serde(default)]
    pub forced: Vec<Vec<f64>>,
    pub lambda: f64,
    #[serde(with = "exact")]
    pub p: Rational64,
    pub cutoff: CutoffSpec,
    #[serde(default)]
    pub caps: GridCaps,
    #[serde(default)]
    pub seed: u64,
    /// Search weighted interpolation chains for the upper bound.
    #[serde(default)]
    pub weighted_upper: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformityDraw {
    pub coeffs: Vec<f64>,
    pub norm_upper: f64,
    pub normalized: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniformityReport {
    pub draws: Vec<UniformityDraw>,
    pub max: f64,
    pub median: f64,
    pub ratio: f64,
}

fn sample_coeff<R: Rng>(rng: &mut R) -> f64 {
    loop {
        let c: f64 = rng.random_range(-1.0..=1.0);
        if c != 0.0 {
            return c;
        }
    }
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Normalized constants `norm_upper |a_{k,l}|^{1/(k+l)} lambda^{1/(k+l)}`
/// across the family and their spread.
pub fn uniformity_sweep(config: &UniformityConfig) -> Result<UniformityReport, ExperimentError> {
    let bad = |m: String| Err(ExperimentError::InvalidConfig(m));
    let nt = config.monomials.len();
    if config.normalizing >= nt {
        return bad(format!("normalizing index {} out of range", config.normalizing));
    }
    if config.draws + config.forced.len() == 0 {
        return bad("no draws".into());
    }
    if config.forced.iter().any(|c| c.len() != nt || c.iter().any(|v| *v == 0.0 || !v.is_finite())) {
        return bad("forced coefficient vectors must be nonzero and match the family".into());
    }
    if !(config.lambda > 0.0) {
        return bad("lambda must be positive".into());
    }
    let (nk, nl) = config.monomials[config.normalizing];
    let power = 1.0 / f64::from(nk + nl);
    let p = config.p.to_f64().unwrap_or(2.0);
    let cutoff = build_cutoff(&config.cutoff)?;
    let mut coeff_sets: Vec<Vec<f64>> = (0..config.draws)
        .map(|i| {
            let mut rng = task_rng(config.seed, i as u64);
            (0..nt).map(|_| sample_coeff(&mut rng)).collect()
        })
        .collect();
    coeff_sets.extend(config.forced.iter().cloned());
    let build = |coeffs: &[f64]| -> Result<WPoly, ExperimentError> {
        let terms: Vec<(u32, u32, f64)> =
            config.monomials.iter().zip(coeffs).map(|(&(k, l), &c)| (k, l, c)).collect();
        let poly = WPoly::from_f64_terms(&terms)?;
        detect_weights(&poly).map_err(|_| {
            ExperimentError::HypothesisViolated(format!("draw {coeffs:?} is not weighted homogeneous"))
        })?;
        Ok(poly)
    };
    let draws = coeff_sets
        .par_iter()
        .enumerate()
        .map(|(i, coeffs)| {
            let poly = build(coeffs)?;
            let phase = std::sync::Arc::new(poly.to_eval());
            let grid = auto_grid(phase.as_ref(), config.lambda, cutoff.support(), &config.caps)?;
            let k = build_kernel(phase, config.lambda, &cutoff, None, &grid)?;
            let l2 = L2Options { seed: config.seed.wrapping_add(i as u64), ..L2Options::default() };
            let opts = LpUpperOptions {
                weighted: config.weighted_upper,
                l2,
                l2_upper: Some(opnorm_l2_with(&k, &l2).upper),
                ..LpUpperOptions::default()
            };
            let norm_upper = opnorm_lp_upper_with(&k, p, &opts).0;
            let a = coeffs[config.normalizing].abs();
            Ok(UniformityDraw {
                coeffs: coeffs.clone(),
                norm_upper,
                normalized: norm_upper * (a * config.lambda).powf(power),
            })
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;
    let mut vals: Vec<f64> = draws.iter().map(|d| d.normalized).collect();
    vals.sort_by(f64::total_cmp);
    let max = *vals.last().unwrap();
    let med = median(&vals);
    Ok(UniformityReport { draws, max, median: med, ratio: max / med })
}
