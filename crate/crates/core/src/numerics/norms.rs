use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use num_rational::Rational64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::kernel::KernelMatrix;
use super::rng::task_rng;
use super::NumericsError;
use crate::predict::exact;

/// Certified-direction bracket on a discrete operator norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormBracket {
    pub lower: f64,
    pub upper: f64,
    #[serde(with = "exact")]
    pub p: Rational64,
    pub method: String,
    pub iterations: usize,
    pub converged: bool,
}

impl NormBracket {
    pub fn relative_gap(&self) -> f64 {
        if self.upper == 0.0 {
            0.0
        } else {
            (self.upper - self.lower) / self.upper
        }
    }

    pub fn require_converged(self) -> Result<Self, NumericsError> {
        if self.converged {
            Ok(self)
        } else {
            Err(NumericsError::NoConvergence {
                iterations: self.iterations,
                lower: self.lower,
                upper: self.upper,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct L2Options {
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    /// Dense SVD is used when `min(rows, cols)` is at most this.
    pub svd_threshold: usize,
}

impl Default for L2Options {
    fn default() -> Self {
        Self { tol: 1e-6, max_iter: 2000, seed: 0, svd_threshold: 512 }
    }
}

fn zero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).fold(zero(), |acc, (x, y)| acc + x.conj() * y)
}

fn norm2(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn random_unit(n: usize, seed: u64, stream: u64) -> Vec<Complex64> {
    let mut rng = task_rng(seed, stream);
    let mut v: Vec<Complex64> = (0..n)
        .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
        .collect();
    let s = norm2(&v);
    v.iter_mut().for_each(|z| *z /= s);
    v
}

/// `diag(w) K` with its adjoint.
struct Scaled<'a> {
    k: &'a KernelMatrix,
    w: Option<&'a [f64]>,
}

impl Scaled<'_> {
    fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        let mut y = self.k.apply(v);
        if let Some(w) = self.w {
            y.iter_mut().zip(w).for_each(|(a, b)| *a *= b);
        }
        y
    }

    fn apply_adjoint(&self, u: &[Complex64]) -> Vec<Complex64> {
        match self.w {
            Some(w) => {
                let uw: Vec<Complex64> = u.iter().zip(w).map(|(a, b)| a * b).collect();
                self.k.apply_adjoint(&uw)
            }
            None => self.k.apply_adjoint(u),
        }
    }
}

struct Spectral {
    lower: f64,
    upper: f64,
    iterations: usize,
    converged: bool,
    method: &'static str,
    /// Top right singular vector, unit length.
    right: Vec<Complex64>,
}

/// Largest singular value of `diag(w) K` (plain Euclidean norms).
fn spectral(op: &Scaled<'_>, opts: &L2Options) -> Spectral {
    let (rows, cols) = (op.k.rows(), op.k.cols());
    if rows.min(cols) <= opts.svd_threshold {
        return spectral_svd(op);
    }
    // Lanczos on the smaller Gram matrix.
    let on_cols = cols <= rows;
    let n = if on_cols { cols } else { rows };
    let gram = |v: &[Complex64]| -> Vec<Complex64> {
        if on_cols {
            op.apply_adjoint(&op.apply(v))
        } else {
            op.apply(&op.apply_adjoint(v))
        }
    };
    let mut basis: Vec<Vec<Complex64>> = vec![random_unit(n, opts.seed, 0x6c61_6e63)];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let kmax = opts.max_iter.min(n).max(1);
    let mut best = (0.0_f64, f64::INFINITY, Vec::new());
    let mut converged = false;
    let mut steps = 0;
    for it in 0..kmax {
        steps = it + 1;
        let v = &basis[it];
        let mut w = gram(v);
        let a = dot(v, &w).re;
        alpha.push(a);
        for (c, q) in w.iter_mut().zip(v) {
            *c -= q * a;
        }
        if it > 0 {
            let b = beta[it - 1];
            for (c, q) in w.iter_mut().zip(&basis[it - 1]) {
                *c -= q * b;
            }
        }
        // Full reorthogonalization, twice.
        for _ in 0..2 {
            for q in &basis {
                let h = dot(q, &w);
                for (c, qq) in w.iter_mut().zip(q) {
                    *c -= qq * h;
                }
            }
        }
        let b = norm2(&w);
        let check = it < 10 || it % 5 == 4 || it + 1 == kmax;
        let breakdown = b <= 1e-14 * alpha.iter().fold(0.0_f64, |m, x| m.max(x.abs())).max(f64::MIN_POSITIVE);
        if check || breakdown {
            let k = alpha.len();
            let mut t = DMatrix::<f64>::zeros(k, k);
            for i in 0..k {
                t[(i, i)] = alpha[i];
                if i + 1 < k {
                    t[(i, i + 1)] = beta[i];
                    t[(i + 1, i)] = beta[i];
                }
            }
            let eig = SymmetricEigen::new(t);
            let (imax, &theta) = eig
                .eigenvalues
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .unwrap();
            let s = eig.eigenvectors.column(imax);
            let res = if breakdown || k == n { 0.0 } else { b * s[k - 1].abs() };
            let theta = theta.max(0.0);
            if theta.sqrt() >= best.0 {
                best = (theta.sqrt(), (theta + res).sqrt(), s.iter().copied().collect());
            }
            if res <= 2.0 * opts.tol * theta || breakdown || k == n {
                converged = true;
                break;
            }
        }
        beta.push(b);
        basis.push(w.into_iter().map(|z| z / b).collect());
    }
    let (lower, upper, coeffs) = best;
    let mut ritz = vec![zero(); n];
    for (c, q) in coeffs.iter().zip(&basis) {
        for (r, v) in ritz.iter_mut().zip(q) {
            *r += v * c;
        }
    }
    let right = if on_cols {
        ritz
    } else {
        // Right singular vector from the left one.
        let mut r = op.apply_adjoint(&ritz);
        let s = norm2(&r).max(f64::MIN_POSITIVE);
        r.iter_mut().for_each(|z| *z /= s);
        r
    };
    Spectral { lower, upper: upper.max(lower), iterations: steps, converged, method: "lanczos", right }
}

fn spectral_svd(op: &Scaled<'_>) -> Spectral {
    // Eigenvectors of the smaller Gram matrix; the vector-computing SVD
    // returned wrong singular values on some tall rank-deficient inputs.
    let m = op.k.to_dmatrix(op.w);
    let tall = m.nrows() >= m.ncols();
    let gram = if tall { m.adjoint() * &m } else { &m * m.adjoint() };
    let eig = gram.symmetric_eigen();
    let imax = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map_or(0, |(i, _)| i);
    let top = eig.eigenvectors.column(imax).into_owned();
    let mut right = if tall { top } else { m.adjoint() * top };
    let norm = right.norm();
    if norm > 0.0 {
        right /= Complex64::new(norm, 0.0);
    }
    let s = (&m * &right).norm();
    Spectral { lower: s, upper: s, iterations: 0, converged: true, method: "dense_svd", right: right.iter().copied().collect() }
}

/// Discrete `L^2 -> L^2` norm bracket.
pub fn opnorm_l2(k: &KernelMatrix) -> NormBracket {
    opnorm_l2_with(k, &L2Options::default())
}

pub fn opnorm_l2_with(k: &KernelMatrix, opts: &L2Options) -> NormBracket {
    opnorm_l2_vector(k, opts).0
}

/// As [`opnorm_l2_with`], also returning the top right singular vector.
pub fn opnorm_l2_vector(k: &KernelMatrix, opts: &L2Options) -> (NormBracket, Vec<Complex64>) {
    let sp = spectral(&Scaled { k, w: None }, opts);
    let (wx, wy) = k.weights();
    let scale = (wx / wy).sqrt();
    (
        NormBracket {
            lower: sp.lower * scale,
            upper: sp.upper * scale,
            p: Rational64::from_integer(2),
            method: sp.method.to_string(),
            iterations: sp.iterations,
            converged: sp.converged,
        },
        sp.right,
    )
}

fn norm_p(v: &[Complex64], p: f64) -> f64 {
    v.iter().map(|z| z.norm().powf(p)).sum::<f64>().powf(1.0 / p)
}

/// `|v|^{p-1} sgn(v)`, componentwise.
fn dual_map(v: &[Complex64], p: f64) -> Vec<Complex64> {
    v.iter()
        .map(|z| {
            let a = z.norm();
            if a == 0.0 {
                zero()
            } else {
                z * (a.powf(p - 2.0))
            }
        })
        .collect()
}

/// One run of the dual-signing power method from `x0`; returns the best
/// plain `l^p` ratio seen, which is a lower bound on the norm.
fn boyd_run(k: &KernelMatrix, p: f64, x0: &[Complex64], max_iter: usize, tol: f64) -> f64 {
    let q = p / (p - 1.0);
    let nx = norm_p(x0, p);
    if nx == 0.0 {
        return 0.0;
    }
    let mut x: Vec<Complex64> = x0.iter().map(|z| z / nx).collect();
    let mut best = 0.0_f64;
    let mut prev = 0.0_f64;
    for it in 0..max_iter {
        let y = k.apply(&x);
        let est = norm_p(&y, p);
        best = best.max(est);
        if it > 0 && est <= prev * (1.0 + tol) {
            break;
        }
        prev = est;
        let z = k.apply_adjoint(&dual_map(&y, p));
        let next = dual_map(&z, q);
        let n = norm_p(&next, p);
        if n == 0.0 || !n.is_finite() {
            break;
        }
        x = next.into_iter().map(|v| v / n).collect();
    }
    best
}

/// Lower bound on the discrete `L^p -> L^p` norm: best of `restarts`
/// dual-signing power iterations from seeded random starts (the first start
/// is the constant vector).
pub fn opnorm_lp_lower(k: &KernelMatrix, p: f64, restarts: usize, seed: u64) -> f64 {
    opnorm_lp_lower_from(k, p, restarts, seed, &[])
}

/// As [`opnorm_lp_lower`], with extra caller-supplied starting vectors.
pub fn opnorm_lp_lower_from(
    k: &KernelMatrix,
    p: f64,
    restarts: usize,
    seed: u64,
    starts: &[Vec<Complex64>],
) -> f64 {
    assert!(p > 1.0 && p.is_finite(), "p must lie in (1, inf)");
    const MAX_ITER: usize = 300;
    const TOL: f64 = 1e-10;
    let n = k.cols();
    let mut best = 0.0_f64;
    for s in starts {
        best = best.max(boyd_run(k, p, s, MAX_ITER, TOL));
    }
    for r in 0..restarts {
        let x0 = if r == 0 {
            vec![Complex64::new(1.0, 0.0); n]
        } else {
            random_unit(n, seed, r as u64)
        };
        best = best.max(boyd_run(k, p, &x0, MAX_ITER, TOL));
    }
    let (wx, wy) = k.weights();
    best * (wx / wy).powf(1.0 / p)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpUpperOptions {
    /// Search Stein-Weiss chains with output weights `|x|^c`.
    pub weighted: bool,
    /// Coarse grid for the weight exponent at the `L^2` end.
    pub exponents: Vec<f64>,
    /// Bisection-style refinement steps around the best coarse exponent.
    pub refine: usize,
    pub l2: L2Options,
    /// Reuse a known plain-`L^2` upper bound (already scaled).
    pub l2_upper: Option<f64>,
}

impl Default for LpUpperOptions {
    fn default() -> Self {
        Self {
            weighted: true,
            exponents: vec![0.25, 0.5, 0.75, 1.0],
            refine: 2,
            l2: L2Options::default(),
            l2_upper: None,
        }
    }
}

fn max_of(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |m, &x| m.max(x))
}

/// Upper bound on the discrete `L^p -> L^p` norm for `1 <= p <= inf`, the
/// minimum over interpolation chains between exact endpoint norms.
pub fn opnorm_lp_upper(k: &KernelMatrix, p: f64) -> f64 {
    opnorm_lp_upper_with(k, p, &LpUpperOptions::default()).0
}

/// Returns the bound and a tag naming the chain that achieved it.
pub fn opnorm_lp_upper_with(k: &KernelMatrix, p: f64, opts: &LpUpperOptions) -> (f64, String) {
    assert!(p >= 1.0, "p must be at least 1");
    let (wx, wy) = k.weights();
    let ratio = wx / wy;
    let (rows, cols) = k.abs_sums(None);
    let n1 = max_of(&cols);
    let ninf = max_of(&rows);
    if p == 1.0 {
        return (ratio * n1, "exact_l1".into());
    }
    if p.is_infinite() {
        return (ninf, "exact_linf".into());
    }
    let inv_p = 1.0 / p;
    let scale = ratio.powf(inv_p);
    let mut best = (scale * n1.powf(inv_p) * ninf.powf(1.0 - inv_p), "riesz_thorin".to_string());

    // Plain-matrix spectral norm of diag(w) K.
    let n2_plain = |w: Option<&[f64]>| -> f64 {
        spectral(&Scaled { k, w }, &opts.l2).upper
    };
    let n2 = match opts.l2_upper {
        Some(u) => u / ratio.sqrt(),
        None => n2_plain(None),
    };
    if p == 2.0 {
        let v = n2 * scale;
        if v < best.0 {
            best = (v, "spectral".into());
        }
        return best;
    }
    let below = p < 2.0;
    // Interpolation parameter along 1 -> 2 or 2 -> inf.
    let theta = if below { 2.0 * (1.0 - inv_p) } else { 1.0 - 2.0 * inv_p };
    let chain = |n2v: f64, other: f64| -> f64 {
        if below {
            other.powf(1.0 - theta) * n2v.powf(theta)
        } else {
            n2v.powf(1.0 - theta) * other.powf(theta)
        }
    };
    let v = scale * chain(n2, if below { n1 } else { ninf });
    if v < best.0 {
        best = (v, "through_l2".into());
    }

    let nodes = match (opts.weighted, k.output_nodes()) {
        (true, Some(x)) => x,
        _ => return best,
    };
    // With output weights |x|^{c2} at the L^2 end and |x|^{c_e} at the
    // other end, (1-t) c_first + t c_second = 0 makes the interpolated
    // operator K itself.
    let eval = |c2: f64| -> f64 {
        let (t2, te) = if below { (theta, 1.0 - theta) } else { (1.0 - theta, theta) };
        let ce = -t2 * c2 / te;
        let w2: Vec<f64> = nodes.iter().map(|x| x.abs().powf(c2)).collect();
        let we: Vec<f64> = nodes.iter().map(|x| x.abs().powf(ce)).collect();
        if w2.iter().chain(&we).any(|v| !v.is_finite()) {
            return f64::INFINITY;
        }
        let (r, c) = k.abs_sums(Some(&we));
        let other = if below { max_of(&c) } else { max_of(&r) };
        scale * chain(n2_plain(Some(&w2)), other)
    };
    let mut bc = 0.0;
    let mut bv = f64::INFINITY;
    for &c in &opts.exponents {
        let v = eval(c);
        if v < bv {
            bv = v;
            bc = c;
        }
    }
    let mut step = opts.exponents.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.25, f64::min) / 2.0;
    for _ in 0..opts.refine {
        for c in [bc - step, bc + step] {
            if c <= 0.0 {
                continue;
            }
            let v = eval(c);
            if v < bv {
                bv = v;
                bc = c;
            }
        }
        step /= 2.0;
    }
    if bv < best.0 {
        best = (bv, format!("weighted_l2(c={bc})"));
    }
    best
}

/// `sqrt(||K||_{1->1} ||K||_{inf->inf})`, an `L^2` upper bound.
pub fn schur_bound(k: &KernelMatrix) -> f64 {
    let (wx, wy) = k.weights();
    let (rows, cols) = k.abs_sums(None);
    (wx / wy * max_of(&cols) * max_of(&rows)).sqrt()
}
