use serde::{Deserialize, Serialize};

use super::ExperimentError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

/// Ordinary least squares through the closed-form normal equations.
pub fn fit_slope(points: &[(f64, f64)]) -> Result<LinearFit, ExperimentError> {
    let n = points.len() as f64;
    if points.len() < 3 {
        return Err(ExperimentError::DegenerateAbscissae);
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx <= 0.0 || !sxx.is_finite() {
        return Err(ExperimentError::DegenerateAbscissae);
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    // A flat series is fit exactly.
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(LinearFit { slope, intercept, r2 })
}
