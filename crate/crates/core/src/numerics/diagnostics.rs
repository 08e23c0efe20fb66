use serde::{Deserialize, Serialize};

use super::cutoff::Cutoff;
use super::grid::GridSpec;
use crate::wpoly::PolyEval;

/// Measured size constants for a mixed Hessian on a cutoff support.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VdcDiagnostics {
    /// Grid inf of `|S''_xy|` over nodes where the cutoff is positive.
    pub mu: f64,
    /// Grid sup over grid inf of `|S''_xy|`.
    pub a1: f64,
    /// Max over both axes and orders 1, 2 of
    /// `(cross-section length)^k |d^k cutoff|`, by finite differences.
    pub a2: f64,
    /// The Hessian changes sign on the support.
    pub sign_change: bool,
}

/// `nodes` positive samples spaced `h` apart; returns `len * count` as the
/// cross-section length estimate.
fn section_len(vals: &[f64], h: f64) -> f64 {
    vals.iter().filter(|v| **v > 0.0).count() as f64 * h
}

fn derivative_bound(vals: &[f64], h: f64) -> f64 {
    let len = section_len(vals, h);
    if len == 0.0 || vals.len() < 3 {
        return 0.0;
    }
    let mut best = 0.0_f64;
    for i in 1..vals.len() - 1 {
        let d1 = (vals[i + 1] - vals[i - 1]) / (2.0 * h);
        let d2 = (vals[i + 1] - 2.0 * vals[i] + vals[i - 1]) / (h * h);
        best = best.max(len * d1.abs()).max(len * len * d2.abs());
    }
    best
}

pub fn vdc_diagnostics(hessian: &PolyEval, cutoff: &Cutoff, grid: &GridSpec) -> VdcDiagnostics {
    let xs = grid.xs();
    let ys = grid.ys();
    let mut lo = f64::INFINITY;
    let mut hi = 0.0_f64;
    let mut pos = false;
    let mut neg = false;
    let mut table = vec![0.0; xs.len() * ys.len()];
    for (i, &x) in xs.iter().enumerate() {
        for (j, &y) in ys.iter().enumerate() {
            let c = cutoff.eval(x, y);
            table[i * ys.len() + j] = c;
            if c > 0.0 {
                let h = hessian.value(x, y);
                lo = lo.min(h.abs());
                hi = hi.max(h.abs());
                pos |= h > 0.0;
                neg |= h < 0.0;
            }
        }
    }
    let mut a2 = 0.0_f64;
    for i in 0..xs.len() {
        a2 = a2.max(derivative_bound(&table[i * ys.len()..(i + 1) * ys.len()], grid.dy()));
    }
    for j in 0..ys.len() {
        let col: Vec<f64> = (0..xs.len()).map(|i| table[i * ys.len() + j]).collect();
        a2 = a2.max(derivative_bound(&col, grid.dx()));
    }
    if lo.is_infinite() {
        lo = 0.0;
    }
    VdcDiagnostics {
        mu: lo,
        a1: if lo > 0.0 { hi / lo } else { f64::INFINITY },
        a2,
        sign_change: pos && neg,
    }
}
