/// `exp(-1/t)` for `t > 0`, zero otherwise.
fn flat(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / t).exp()
    } else {
        0.0
    }
}

/// C-infinity step: 0 for `s <= 0`, 1 for `s >= 1`, increasing in between.
pub fn smooth_step(s: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else if s >= 1.0 {
        1.0
    } else {
        let a = flat(s);
        a / (a + flat(1.0 - s))
    }
}

/// `H(x)`: 0 for `x <= 1/2`, 1 for `x >= 1`.
fn ramp(x: f64) -> f64 {
    smooth_step(2.0 * x - 1.0)
}

/// `Phi(x) = H(x) - H(x/2)`, supported in `[1/2, 2]`. Consecutive dilates
/// telescope, so `sum_j Phi(x/2^j) = 1` for every `x > 0`.
pub fn phi(x: f64) -> f64 {
    if x <= 0.5 || x >= 2.0 {
        return 0.0;
    }
    ramp(x) - ramp(0.5 * x)
}

/// Truncated family `Phi(x/2^j)`, `j_min <= j <= j_max`, with the two tail
/// sums in closed form.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DyadicPartition {
    pub j_min: i32,
    pub j_max: i32,
}

pub fn dyadic_partition(j_min: i32, j_max: i32) -> DyadicPartition {
    assert!(j_min <= j_max, "j_min must not exceed j_max");
    DyadicPartition { j_min, j_max }
}

impl DyadicPartition {
    pub fn term(&self, j: i32, x: f64) -> f64 {
        phi(x * 2f64.powi(-j))
    }

    pub fn sum(&self, x: f64) -> f64 {
        (self.j_min..=self.j_max).map(|j| self.term(j, x)).sum()
    }

    /// `sum_{j < j_min} Phi(x/2^j) = 1 - H(x/2^{j_min})`.
    pub fn lower_completion(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        1.0 - ramp(x * 2f64.powi(-self.j_min))
    }

    /// `sum_{j > j_max} Phi(x/2^j) = H(x/2^{j_max+1})`.
    pub fn upper_completion(&self, x: f64) -> f64 {
        ramp(x * 2f64.powi(-(self.j_max + 1)))
    }

    /// Range of `x` on which the truncated sum is exactly 1.
    pub fn safe_range(&self) -> (f64, f64) {
        (2f64.powi(self.j_min), 2f64.powi(self.j_max))
    }
}
