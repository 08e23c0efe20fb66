use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::cutoff::BoxRegion;
use super::phase::Phase;
use super::NumericsError;

/// Uniform midpoint grid on a box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub region: BoxRegion,
    pub mx: usize,
    pub my: usize,
    /// Set when a sample count was clamped at the cap.
    #[serde(default)]
    pub under_resolved: bool,
}

impl GridSpec {
    pub fn new(region: BoxRegion, mx: usize, my: usize) -> Result<Self, NumericsError> {
        if mx == 0 || my == 0 {
            return Err(NumericsError::InvalidGrid("sample counts must be positive".into()));
        }
        if !(region.width() > 0.0 && region.height() > 0.0)
            || !region.width().is_finite()
            || !region.height().is_finite()
        {
            return Err(NumericsError::InvalidGrid("region must be finite and nonempty".into()));
        }
        Ok(Self { region, mx, my, under_resolved: false })
    }

    pub fn dx(&self) -> f64 {
        self.region.width() / self.mx as f64
    }

    pub fn dy(&self) -> f64 {
        self.region.height() / self.my as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.region.x[0] + (i as f64 + 0.5) * self.dx()
    }

    pub fn y(&self, j: usize) -> f64 {
        self.region.y[0] + (j as f64 + 0.5) * self.dy()
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.mx).map(|i| self.x(i)).collect()
    }

    pub fn ys(&self) -> Vec<f64> {
        (0..self.my).map(|j| self.y(j)).collect()
    }

    /// Same region, `factor` times as many samples per axis.
    pub fn refined(&self, factor: usize) -> Self {
        Self { mx: self.mx * factor, my: self.my * factor, ..*self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridCaps {
    pub floor: usize,
    pub cap: usize,
    pub samples_per_period: f64,
}

impl Default for GridCaps {
    fn default() -> Self {
        Self { floor: 256, cap: 8192, samples_per_period: 8.0 }
    }
}

const PROBE: usize = 64;

/// Sup of `|dS/dx|` and `|dS/dy|` on a 64 x 64 probe grid that includes the
/// box corners.
pub fn probe_derivatives(phase: &dyn Phase, region: &BoxRegion) -> (f64, f64) {
    let mut lx = 0.0_f64;
    let mut ly = 0.0_f64;
    for i in 0..PROBE {
        let x = region.x[0] + region.width() * i as f64 / (PROBE - 1) as f64;
        for j in 0..PROBE {
            let y = region.y[0] + region.height() * j as f64 / (PROBE - 1) as f64;
            let (gx, gy) = phase.grad(x, y);
            lx = lx.max(gx.abs());
            ly = ly.max(gy.abs());
        }
    }
    (lx, ly)
}

fn samples(lambda: f64, sup: f64, width: f64, caps: &GridCaps) -> (usize, bool) {
    let want = (caps.samples_per_period * lambda.abs() * sup * width / (2.0 * PI)).ceil();
    if !want.is_finite() || want > caps.cap as f64 {
        (caps.cap, true)
    } else {
        ((want as usize).max(caps.floor), false)
    }
}

/// Grid from precomputed derivative sups, so callers can memoize the probe.
pub fn grid_from_probe(
    lambda: f64,
    (lx, ly): (f64, f64),
    region: BoxRegion,
    caps: &GridCaps,
) -> Result<GridSpec, NumericsError> {
    let (mx, ux) = samples(lambda, lx, region.width(), caps);
    let (my, uy) = samples(lambda, ly, region.height(), caps);
    let mut g = GridSpec::new(region, mx, my)?;
    g.under_resolved = ux || uy;
    Ok(g)
}

/// Per-axis sample counts `clamp(floor, ceil(spp |lambda| L w / 2 pi), cap)`,
/// with `L` the sup of the matching partial derivative over the region.
pub fn auto_grid(
    phase: &dyn Phase,
    lambda: f64,
    region: BoxRegion,
    caps: &GridCaps,
) -> Result<GridSpec, NumericsError> {
    grid_from_probe(lambda, probe_derivatives(phase, &region), region, caps)
}
