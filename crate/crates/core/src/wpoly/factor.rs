use std::f64::consts::PI;

use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::{rational_from_f64, UPoly, WPoly, WPolyError, WeightSignature};

/// Default cluster separation parameter for [`Factorization::gap_indices`].
pub const DEFAULT_N0: u32 = 2;

const PAIR_TOL: f64 = 1e-8;
const MERGE_TOL: f64 = 1e-5;
const RESIDUAL_TOL: f64 = 1e-10;
const NON_REAL_TOL: f64 = 1e-8;

/// A root `alpha` of `prod (x^q - alpha y^p)` with multiplicity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Root {
    pub re: f64,
    pub im: f64,
    pub mult: u32,
}

impl Root {
    pub fn new(alpha: Complex64, mult: u32) -> Self {
        Self { re: alpha.re, im: alpha.im, mult }
    }

    pub fn alpha(&self) -> Complex64 {
        Complex64::new(self.re, self.im)
    }
}

/// A root of the linear form `x - beta y^eta`, one entry per multiplicity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearRoot {
    pub beta: Complex64,
    /// `|beta|`, stored once so that equal-modulus roots compare equal.
    pub modulus: f64,
}

/// `Q = c x^m y^n prod_i (x^q - alpha_i y^p)^{mult_i}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Factorization {
    pub c: f64,
    pub m: u32,
    pub n: u32,
    pub weights: WeightSignature,
    /// Sorted by modulus ascending.
    pub roots: Vec<Root>,
}

/// 1-based gap positions `i` with `|beta_{i+1}| / |beta_i| >= 2^{4 N0}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GapIndexSet {
    pub n0: u32,
    pub indices: Vec<usize>,
}

/// 1-based indices of the selected linear roots.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DampingSelection {
    pub requested: usize,
    pub indices: Vec<usize>,
    /// Set when the prefix had to be extended to close a conjugate pair.
    pub adjusted: bool,
}

impl Factorization {
    /// Validates and canonicalizes a hand-built factorization.
    pub fn new(
        c: f64,
        m: u32,
        n: u32,
        weights: WeightSignature,
        roots: Vec<Root>,
    ) -> Result<Self, WPolyError> {
        if c == 0.0 || !c.is_finite() {
            return Err(WPolyError::InvalidArgument("c must be finite and nonzero".into()));
        }
        for r in &roots {
            if r.mult == 0 || r.alpha().norm() == 0.0 || !r.alpha().is_finite() {
                return Err(WPolyError::InvalidArgument(format!(
                    "invalid root {}+{}i (mult {})",
                    r.re, r.im, r.mult
                )));
            }
        }
        let mut roots = roots;
        sort_roots(&mut roots);
        Ok(Self { c, m, n, weights, roots })
    }

    pub fn eta(&self) -> num_rational::Rational64 {
        self.weights.eta()
    }

    /// Number of roots of `prod (x^q - alpha y^p)`, with multiplicity.
    pub fn root_count(&self) -> usize {
        self.roots.iter().map(|r| r.mult as usize).sum()
    }

    /// Number of linear factors `x - beta y^eta`, i.e. `q * root_count()`.
    pub fn linear_count(&self) -> usize {
        self.root_count() * self.weights.q as usize
    }

    /// Each root expanded to `x - beta y^eta` form with `beta^q = alpha`,
    /// repeated by multiplicity, sorted by modulus then `|arg|` so that
    /// conjugates are adjacent.
    pub fn linear_roots(&self) -> Vec<LinearRoot> {
        let q = self.weights.q;
        let mut out = Vec::with_capacity(self.linear_count());
        for r in &self.roots {
            let a = r.alpha();
            let modulus = a.norm().powf(1.0 / f64::from(q));
            let arg = a.arg();
            let mut betas = Vec::with_capacity(q as usize);
            for k in 0..q {
                let theta = (arg + 2.0 * PI * f64::from(k)) / f64::from(q);
                betas.push(Complex64::from_polar(modulus, theta));
            }
            // Snap so conjugates of the set are represented exactly.
            let betas = conjugate_close(betas);
            for _ in 0..r.mult {
                out.extend(betas.iter().map(|&beta| LinearRoot { beta, modulus }));
            }
        }
        out.sort_by(|a, b| {
            a.modulus
                .total_cmp(&b.modulus)
                .then(a.beta.im.abs().total_cmp(&b.beta.im.abs()))
                .then(a.beta.re.total_cmp(&b.beta.re).reverse())
                .then(b.beta.im.total_cmp(&a.beta.im))
        });
        out
    }

    /// Multiplies out the factorization. Fails when the product has
    /// imaginary coefficients above `1e-8` relative.
    pub fn expand(&self) -> Result<WPoly, WPolyError> {
        let alphas: Vec<Complex64> = self
            .roots
            .iter()
            .flat_map(|r| std::iter::repeat_n(r.alpha(), r.mult as usize))
            .collect();
        let coeffs = poly_from_roots(&alphas);
        let scale = coeffs.iter().fold(0.0_f64, |m, z| m.max(z.norm()));
        let imag = coeffs.iter().fold(0.0_f64, |m, z| m.max(z.im.abs()));
        if imag > NON_REAL_TOL * scale {
            return Err(WPolyError::NonRealExpansion(imag / scale));
        }
        let (p, q) = (self.weights.p, self.weights.q);
        let big_n = alphas.len() as u32;
        let mut terms = Vec::with_capacity(coeffs.len());
        for (i, z) in coeffs.iter().enumerate() {
            let i = i as u32;
            let a = rational_from_f64(self.c * z.re)?;
            terms.push((self.m + q * i, self.n + p * (big_n - i), a));
        }
        Ok(WPoly::from_terms(terms))
    }

    /// Positions where consecutive linear-root moduli jump by `2^{4 N0}`.
    pub fn gap_indices(&self, n0: u32) -> GapIndexSet {
        let lin = self.linear_roots();
        let thresh = 2f64.powi(4 * n0 as i32);
        let indices = lin
            .windows(2)
            .enumerate()
            .filter(|(_, w)| w[1].modulus >= thresh * w[0].modulus)
            .map(|(i, _)| i + 1)
            .collect();
        GapIndexSet { n0, indices }
    }

    /// The `s` smallest linear roots, extended to the shortest prefix whose
    /// product has real coefficients.
    pub fn select_damping_indices(&self, s: usize) -> Result<DampingSelection, WPolyError> {
        let lin = self.linear_roots();
        if s > lin.len() {
            return Err(WPolyError::InvalidArgument(format!(
                "s = {s} exceeds root count {}",
                lin.len()
            )));
        }
        for len in s..=lin.len() {
            let prefix: Vec<Complex64> = lin[..len].iter().map(|r| r.beta).collect();
            if is_conjugate_closed(&prefix) {
                return Ok(DampingSelection {
                    requested: s,
                    indices: (1..=len).collect(),
                    adjusted: len != s,
                });
            }
        }
        Err(WPolyError::NoConjugateInvariantSelection(s))
    }

    /// Conjugate closure of the stored roots, exact on stored values.
    pub fn is_conjugate_invariant(&self) -> bool {
        self.roots.iter().all(|r| {
            self.roots
                .iter()
                .any(|o| o.re == r.re && o.im == -r.im && o.mult == r.mult)
        })
    }
}

/// Factorizes a weighted homogeneous polynomial.
pub fn factorize(poly: &WPoly, weights: &WeightSignature) -> Result<Factorization, WPolyError> {
    if poly.is_zero() {
        return Err(WPolyError::EmptyPolynomial);
    }
    if !weights.admits(poly) {
        return Err(WPolyError::NotWeightedHomogeneous);
    }
    let (p, q) = (weights.p, weights.q);
    let m = poly.terms().iter().map(|t| t.k).min().unwrap_or(0);
    let n = poly.terms().iter().map(|t| t.l).min().unwrap_or(0);

    // After removing x^m y^n every exponent pair is (q i, p (N - i)).
    let kmax = poly.terms().iter().map(|t| t.k - m).max().unwrap_or(0);
    if kmax % q != 0 {
        return Err(WPolyError::NotWeightedHomogeneous);
    }
    let big_n = (kmax / q) as usize;
    let mut exact = vec![BigRational::zero(); big_n + 1];
    for t in poly.terms() {
        let (k, l) = (t.k - m, t.l - n);
        if k % q != 0 || l % p != 0 || (k / q) as usize + (l / p) as usize != big_n {
            return Err(WPolyError::NotWeightedHomogeneous);
        }
        exact[(k / q) as usize] = t.coeff.clone();
    }
    let lead = exact[big_n].to_f64().unwrap_or(f64::NAN);
    if big_n == 0 {
        return Factorization::new(lead, m, n, *weights, Vec::new());
    }
    // Normalize by the leading coefficient exactly before projecting.
    let coeffs: Vec<f64> = exact
        .iter()
        .map(|a| (a / &exact[big_n]).to_f64().unwrap_or(f64::NAN))
        .collect();
    let upoly = UPoly::new(coeffs);
    let raw = upoly.roots()?;
    let paired = pair_conjugates(raw)?;
    let merged = merge_clusters(&upoly, paired);

    for r in &merged {
        if !upoly.residual_ok(r.alpha(), RESIDUAL_TOL) {
            return Err(WPolyError::RootFindingFailed(format!(
                "residual too large at {}{:+}i",
                r.re, r.im
            )));
        }
    }
    let f = Factorization::new(lead, m, n, *weights, merged)?;
    debug_assert!(f.is_conjugate_invariant());
    Ok(f)
}

fn sort_roots(roots: &mut [Root]) {
    roots.sort_by(|a, b| {
        a.alpha()
            .norm()
            .total_cmp(&b.alpha().norm())
            .then(a.im.abs().total_cmp(&b.im.abs()))
            .then(b.re.total_cmp(&a.re))
            .then(b.im.total_cmp(&a.im))
    });
}

/// Coefficients (ascending) of `prod (t - a_i)`.
fn poly_from_roots(roots: &[Complex64]) -> Vec<Complex64> {
    let mut c = vec![Complex64::new(1.0, 0.0)];
    for &a in roots {
        let mut next = vec![Complex64::new(0.0, 0.0); c.len() + 1];
        for (i, &ci) in c.iter().enumerate() {
            next[i + 1] += ci;
            next[i] -= a * ci;
        }
        c = next;
    }
    c
}

/// Greedy conjugate pairing; near-real leftovers are snapped to the axis.
fn pair_conjugates(raw: Vec<Complex64>) -> Result<Vec<Complex64>, WPolyError> {
    let mut used = vec![false; raw.len()];
    let mut out = Vec::with_capacity(raw.len());
    for i in 0..raw.len() {
        if used[i] || raw[i].im <= 0.0 {
            continue;
        }
        let target = raw[i].conj();
        let tol = PAIR_TOL * (1.0 + raw[i].norm());
        let best = (0..raw.len())
            .filter(|&j| j != i && !used[j] && raw[j].im < 0.0)
            .min_by(|&a, &b| (raw[a] - target).norm().total_cmp(&(raw[b] - target).norm()));
        if let Some(j) = best {
            if (raw[j] - target).norm() <= tol {
                used[i] = true;
                used[j] = true;
                let avg = (raw[i] + raw[j].conj()) * 0.5;
                out.push(avg);
                out.push(avg.conj());
            }
        }
    }
    for i in 0..raw.len() {
        if used[i] {
            continue;
        }
        let z = raw[i];
        if z.im.abs() <= PAIR_TOL * (1.0 + z.norm()) {
            out.push(Complex64::new(z.re, 0.0));
        } else {
            return Err(WPolyError::RootFindingFailed(format!(
                "root {}{:+}i has no conjugate partner",
                z.re, z.im
            )));
        }
    }
    Ok(out)
}

/// Replaces a set of roots by exact conjugates when they are conjugate
/// closed up to rounding.
fn conjugate_close(roots: Vec<Complex64>) -> Vec<Complex64> {
    pair_conjugates(roots.clone()).unwrap_or(roots)
}

fn is_conjugate_closed(roots: &[Complex64]) -> bool {
    let mut used = vec![false; roots.len()];
    for i in 0..roots.len() {
        if used[i] {
            continue;
        }
        let z = roots[i];
        if z.im == 0.0 {
            used[i] = true;
            continue;
        }
        match (0..roots.len()).find(|&j| !used[j] && j != i && roots[j] == z.conj()) {
            Some(j) => {
                used[i] = true;
                used[j] = true;
            }
            None => return false,
        }
    }
    true
}

/// Groups near-coincident roots into multiplicities. A cluster is merged
/// into its mean only when the merged product fits the polynomial at least
/// as well as the separate roots.
fn merge_clusters(upoly: &UPoly, roots: Vec<Complex64>) -> Vec<Root> {
    let mut sorted = roots;
    sorted.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    let mut taken = vec![false; sorted.len()];
    let mut clusters: Vec<Vec<Complex64>> = Vec::new();
    for i in 0..sorted.len() {
        if taken[i] {
            continue;
        }
        taken[i] = true;
        let mut cl = vec![sorted[i]];
        for j in i + 1..sorted.len() {
            if !taken[j] && (sorted[j] - sorted[i]).norm() <= MERGE_TOL * (1.0 + sorted[i].norm()) {
                taken[j] = true;
                cl.push(sorted[j]);
            }
        }
        clusters.push(cl);
    }

    let fit = |rs: &[Complex64]| -> f64 {
        let c = poly_from_roots(rs);
        let scale = upoly.max_abs_coeff();
        c.iter()
            .zip(upoly.coeffs())
            .map(|(a, &b)| (a - b).norm())
            .fold(0.0, f64::max)
            / scale
    };
    let separate: Vec<Complex64> = clusters.iter().flatten().copied().collect();
    let base_err = fit(&separate);

    let mut out: Vec<Root> = Vec::new();
    for (ci, cl) in clusters.iter().enumerate() {
        if cl.len() == 1 {
            out.push(Root::new(cl[0], 1));
            continue;
        }
        let mean = cl.iter().sum::<Complex64>() / cl.len() as f64;
        let mean = if mean.im.abs() <= PAIR_TOL * (1.0 + mean.norm()) {
            Complex64::new(mean.re, 0.0)
        } else {
            mean
        };
        let trial: Vec<Complex64> = clusters
            .iter()
            .enumerate()
            .flat_map(|(k, other)| {
                if k == ci {
                    vec![mean; cl.len()]
                } else {
                    other.clone()
                }
            })
            .collect();
        if fit(&trial) <= (10.0 * base_err).max(1e-11) {
            out.push(Root::new(mean, cl.len() as u32));
        } else {
            out.extend(cl.iter().map(|&z| Root::new(z, 1)));
        }
    }
    // Merging conjugate clusters independently keeps exact conjugacy only
    // if both means are computed from mirrored data; enforce it.
    enforce_conjugate_roots(out)
}

fn enforce_conjugate_roots(roots: Vec<Root>) -> Vec<Root> {
    let mut out: Vec<Root> = Vec::with_capacity(roots.len());
    let mut used = vec![false; roots.len()];
    for i in 0..roots.len() {
        if used[i] {
            continue;
        }
        used[i] = true;
        let r = roots[i];
        if r.im == 0.0 {
            out.push(r);
            continue;
        }
        let partner = (0..roots.len()).find(|&j| {
            !used[j]
                && roots[j].mult == r.mult
                && (roots[j].alpha() - r.alpha().conj()).norm() <= PAIR_TOL * (1.0 + r.alpha().norm())
        });
        match partner {
            Some(j) => {
                used[j] = true;
                let a = if r.im > 0.0 { r.alpha() } else { r.alpha().conj() };
                let avg = (a + if roots[j].im > 0.0 { roots[j].alpha() } else { roots[j].alpha().conj() }) * 0.5;
                out.push(Root::new(avg, r.mult));
                out.push(Root::new(avg.conj(), r.mult));
            }
            None => out.push(r),
        }
    }
    out
}
