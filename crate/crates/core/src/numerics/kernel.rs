use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use super::cutoff::Cutoff;
use super::grid::GridSpec;
use super::phase::Phase;
use super::NumericsError;
use crate::wpoly::{Factorization, PolyEval};

/// Dense storage is used up to this many entries (2^24, about 256 MB).
pub const DENSE_ENTRY_LIMIT: usize = 1 << 24;

/// Rows per block in reductions; fixed so results don't depend on the
/// number of worker threads.
const BLOCK: usize = 64;

const SINGULAR: f64 = 1e-300;

/// `|D(x, y)|` for the supported damping shapes.
#[derive(Debug, Clone, PartialEq)]
pub enum DampingFactor {
    Poly(PolyEval),
    /// `|x|^m prod_t |x - beta_t |y|^eta|`.
    Linear { m: u32, roots: Vec<Complex64>, eta: f64 },
    /// `constant + prod_t |x - beta_t |y|^eta|`.
    Modified { constant: f64, roots: Vec<Complex64>, eta: f64 },
}

impl DampingFactor {
    pub fn abs_value(&self, x: f64, y: f64) -> f64 {
        let prod = |roots: &[Complex64], eta: f64| -> f64 {
            let ye = y.abs().powf(eta);
            roots
                .iter()
                .map(|b| Complex64::new(x - b.re * ye, -b.im * ye).norm())
                .product()
        };
        match self {
            DampingFactor::Poly(p) => p.value(x, y).abs(),
            DampingFactor::Linear { m, roots, eta } => x.abs().powi(*m as i32) * prod(roots, *eta),
            DampingFactor::Modified { constant, roots, eta } => constant + prod(roots, *eta),
        }
    }

    /// The cell-dependent damping factor
    /// `(|lambda c| |beta_{i_s}|^{-1} 2^{-k(eta-1)} A)^{-s/(s+2)} + prod |x - beta_{i_t} y^eta|`
    /// with `A = 2^{jm} 2^{kn} 2^{j t_r} prod_{t > t_{r+1}} |beta_t| 2^{k eta}`.
    ///
    /// `theta` holds 1-based linear-root indices and must be a full block
    /// `{t_r + 1, ..., t_{r+1}}` between consecutive gap indices.
    pub fn modified(
        f: &Factorization,
        theta: &[usize],
        n0: u32,
        j: i32,
        k: i32,
        lambda: f64,
    ) -> Result<DampingFactor, NumericsError> {
        let lin = f.linear_roots();
        let big_n = lin.len();
        let bad = |m: String| Err(NumericsError::InvalidCutoff(m));
        if theta.is_empty() || theta.windows(2).any(|w| w[1] != w[0] + 1) || theta[theta.len() - 1] > big_n {
            return bad(format!("index set {theta:?} is not a block of 1..={big_n}"));
        }
        let gaps = f.gap_indices(n0).indices;
        let t_r = theta[0] - 1;
        let t_r1 = theta[theta.len() - 1];
        if (t_r != 0 && !gaps.contains(&t_r)) || (t_r1 != big_n && !gaps.contains(&t_r1)) {
            return bad(format!("index set {theta:?} does not end at gap indices {gaps:?}"));
        }
        let eta = f.weights.p as f64 / f.weights.q as f64;
        let s = theta.len() as f64;
        let (jf, kf) = (f64::from(j), f64::from(k));
        let mut log2_a = jf * f64::from(f.m) + kf * f64::from(f.n) + jf * t_r as f64;
        for r in &lin[t_r1..] {
            log2_a += r.modulus.log2() + kf * eta;
        }
        let top = lin[t_r1 - 1].modulus;
        let log2_base = (lambda * f.c).abs().log2() - top.log2() - kf * (eta - 1.0) + log2_a;
        let constant = (-(s / (s + 2.0)) * log2_base).exp2();
        Ok(DampingFactor::Modified {
            constant,
            roots: theta.iter().map(|&i| lin[i - 1].beta).collect(),
            eta,
        })
    }
}

/// `|D|^z` with an optional floor for `Re z < 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Damping {
    pub factor: DampingFactor,
    pub z: Complex64,
    pub floor: Option<f64>,
}

impl Damping {
    pub fn new(factor: DampingFactor, z: Complex64) -> Self {
        Self { factor, z, floor: None }
    }

    pub fn with_floor(mut self, floor: f64) -> Self {
        self.floor = Some(floor);
        self
    }

    /// `|D(x,y)|^z = |D|^{Re z} e^{i Im z log |D|}`.
    pub fn weight(&self, x: f64, y: f64) -> Result<Complex64, NumericsError> {
        let mut d = self.factor.abs_value(x, y);
        if self.z == Complex64::new(0.0, 0.0) {
            return Ok(Complex64::new(1.0, 0.0));
        }
        if d < SINGULAR || !d.is_finite() {
            if self.z.re > 0.0 && d.is_finite() {
                return Ok(Complex64::new(0.0, 0.0));
            }
            match self.floor {
                Some(f) if d.is_finite() => d = d.max(f),
                _ => return Err(NumericsError::DampingSingular { x, y, re_z: self.z.re }),
            }
        } else if let Some(f) = self.floor {
            if self.z.re < 0.0 {
                d = d.max(f);
            }
        }
        let ld = d.ln();
        Ok(Complex64::from_polar((self.z.re * ld).exp(), self.z.im * ld))
    }
}

/// Generates `K[i][j] = e^{i lambda S} |D|^z phi dy` on demand.
struct Generator {
    phase: Arc<dyn Phase>,
    cutoff: Cutoff,
    damping: Option<Damping>,
    lambda: f64,
    xs: Vec<f64>,
    ys: Vec<f64>,
    dy: f64,
}

impl Generator {
    fn entry(&self, i: usize, j: usize) -> Complex64 {
        let (x, y) = (self.xs[i], self.ys[j]);
        let c = self.cutoff.eval(x, y);
        if c == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let w = match &self.damping {
            // Singular nodes were rejected when the kernel was built.
            Some(d) => d.weight(x, y).unwrap_or(Complex64::new(0.0, 0.0)),
            None => Complex64::new(1.0, 0.0),
        };
        let ph = self.lambda * self.phase.value(x, y);
        Complex64::new(ph.cos(), ph.sin()) * w * (c * self.dy)
    }

    fn row(&self, i: usize, out: &mut [Complex64]) {
        for (j, o) in out.iter_mut().enumerate() {
            *o = self.entry(i, j);
        }
    }
}

/// Fills row `i` of a matrix-free operator.
pub type RowFn = Box<dyn Fn(usize, &mut [Complex64]) + Send + Sync>;

pub enum Storage {
    /// Row-major entries.
    Dense(Vec<Complex64>),
    MatrixFree(RowFn),
}

impl std::fmt::Debug for Storage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Storage::Dense(v) => write!(f, "Dense({} entries)", v.len()),
            Storage::MatrixFree(_) => write!(f, "MatrixFree"),
        }
    }
}

/// Discretized operator with quadrature weights `wx` (output) and `wy`
/// (input). The `y` weight is already folded into the entries; discrete
/// `L^p` norms use `wx` on the output side and `wy` on the input side.
#[derive(Debug)]
pub struct KernelMatrix {
    rows: usize,
    cols: usize,
    wx: f64,
    wy: f64,
    xs: Option<Vec<f64>>,
    grid: Option<GridSpec>,
    lambda: f64,
    storage: Storage,
}

/// Builds the kernel, choosing dense storage up to [`DENSE_ENTRY_LIMIT`].
pub fn build_kernel(
    phase: Arc<dyn Phase>,
    lambda: f64,
    cutoff: &Cutoff,
    damping: Option<Damping>,
    grid: &GridSpec,
) -> Result<KernelMatrix, NumericsError> {
    build_kernel_with(phase, lambda, cutoff, damping, grid, None)
}

/// As [`build_kernel`]; `dense` forces the storage kind when set.
pub fn build_kernel_with(
    phase: Arc<dyn Phase>,
    lambda: f64,
    cutoff: &Cutoff,
    damping: Option<Damping>,
    grid: &GridSpec,
    dense: Option<bool>,
) -> Result<KernelMatrix, NumericsError> {
    let xs = grid.xs();
    let ys = grid.ys();
    if let Some(d) = &damping {
        // Reject singular nodes up front so evaluation can't fail later.
        let bad = xs.par_iter().find_map_first(|&x| {
            ys.iter().find_map(|&y| {
                if cutoff.eval(x, y) == 0.0 {
                    return None;
                }
                d.weight(x, y).err()
            })
        });
        if let Some(e) = bad {
            return Err(e);
        }
    }
    let (rows, cols) = (grid.mx, grid.my);
    let gen = Generator {
        phase,
        cutoff: cutoff.clone(),
        damping,
        lambda,
        xs: xs.clone(),
        ys,
        dy: grid.dy(),
    };
    let dense = dense.unwrap_or(rows * cols <= DENSE_ENTRY_LIMIT);
    let storage = if dense {
        let mut data = vec![Complex64::new(0.0, 0.0); rows * cols];
        data.par_chunks_mut(cols)
            .enumerate()
            .for_each(|(i, row)| gen.row(i, row));
        Storage::Dense(data)
    } else {
        Storage::MatrixFree(Box::new(move |i, out| gen.row(i, out)))
    };
    Ok(KernelMatrix {
        rows,
        cols,
        wx: grid.dx(),
        wy: grid.dy(),
        xs: Some(xs),
        grid: Some(*grid),
        lambda,
        storage,
    })
}

impl KernelMatrix {
    /// Wraps a raw row-major matrix with the given quadrature weights.
    pub fn from_dense(rows: usize, cols: usize, data: Vec<Complex64>, wx: f64, wy: f64) -> Self {
        assert_eq!(data.len(), rows * cols, "data length must be rows * cols");
        Self {
            rows,
            cols,
            wx,
            wy,
            xs: None,
            grid: None,
            lambda: 0.0,
            storage: Storage::Dense(data),
        }
    }

    /// Unit-weight operator from an nalgebra matrix.
    pub fn from_dmatrix(m: &DMatrix<Complex64>) -> Self {
        let (r, c) = m.shape();
        let data = (0..r).flat_map(|i| (0..c).map(move |j| m[(i, j)])).collect();
        Self::from_dense(r, c, data, 1.0, 1.0)
    }

    /// Attaches output node coordinates (enables weighted bounds).
    pub fn with_output_nodes(mut self, xs: Vec<f64>) -> Self {
        assert_eq!(xs.len(), self.rows);
        self.xs = Some(xs);
        self
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn weights(&self) -> (f64, f64) {
        (self.wx, self.wy)
    }

    pub fn output_nodes(&self) -> Option<&[f64]> {
        self.xs.as_deref()
    }

    pub fn grid(&self) -> Option<&GridSpec> {
        self.grid.as_ref()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.storage, Storage::Dense(_))
    }

    pub fn storage(&self) -> &Storage {
        &self.storage
    }

    fn with_row<R>(&self, i: usize, buf: &mut Vec<Complex64>, f: impl FnOnce(&[Complex64]) -> R) -> R {
        match &self.storage {
            Storage::Dense(d) => f(&d[i * self.cols..(i + 1) * self.cols]),
            Storage::MatrixFree(g) => {
                buf.resize(self.cols, Complex64::new(0.0, 0.0));
                g(i, buf);
                f(buf)
            }
        }
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        let mut buf = Vec::new();
        self.with_row(i, &mut buf, |r| r[j])
    }

    pub fn row(&self, i: usize) -> Vec<Complex64> {
        let mut buf = Vec::new();
        self.with_row(i, &mut buf, |r| r.to_vec())
    }

    /// `K v`.
    pub fn apply(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows)
            .into_par_iter()
            .map_init(Vec::new, |buf, i| {
                self.with_row(i, buf, |r| {
                    r.iter().zip(v).fold(Complex64::new(0.0, 0.0), |acc, (a, b)| acc + a * b)
                })
            })
            .collect()
    }

    /// `K^* u`, reduced over fixed row blocks in order.
    pub fn apply_adjoint(&self, u: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(u.len(), self.rows);
        let partials: Vec<Vec<Complex64>> = (0..self.rows.div_ceil(BLOCK))
            .into_par_iter()
            .map(|b| {
                let mut acc = vec![Complex64::new(0.0, 0.0); self.cols];
                let mut buf = Vec::new();
                for i in b * BLOCK..((b + 1) * BLOCK).min(self.rows) {
                    let ui = u[i];
                    if ui == Complex64::new(0.0, 0.0) {
                        continue;
                    }
                    self.with_row(i, &mut buf, |r| {
                        for (a, k) in acc.iter_mut().zip(r) {
                            *a += k.conj() * ui;
                        }
                    });
                }
                acc
            })
            .collect();
        let mut out = vec![Complex64::new(0.0, 0.0); self.cols];
        for p in partials {
            for (o, v) in out.iter_mut().zip(p) {
                *o += v;
            }
        }
        out
    }

    /// Absolute row sums and column sums of `diag(w) K`.
    pub fn abs_sums(&self, row_weight: Option<&[f64]>) -> (Vec<f64>, Vec<f64>) {
        let partials: Vec<(Vec<f64>, Vec<f64>)> = (0..self.rows.div_ceil(BLOCK))
            .into_par_iter()
            .map(|b| {
                let mut cols = vec![0.0; self.cols];
                let mut rows = Vec::with_capacity(BLOCK);
                let mut buf = Vec::new();
                for i in b * BLOCK..((b + 1) * BLOCK).min(self.rows) {
                    let w = row_weight.map_or(1.0, |w| w[i]);
                    let s = self.with_row(i, &mut buf, |r| {
                        let mut s = 0.0;
                        for (c, k) in cols.iter_mut().zip(r) {
                            let a = k.norm() * w;
                            *c += a;
                            s += a;
                        }
                        s
                    });
                    rows.push(s);
                }
                (rows, cols)
            })
            .collect();
        let mut rows = Vec::with_capacity(self.rows);
        let mut cols = vec![0.0; self.cols];
        for (r, c) in partials {
            rows.extend(r);
            for (o, v) in cols.iter_mut().zip(c) {
                *o += v;
            }
        }
        (rows, cols)
    }

    /// Copy as an nalgebra matrix with rows scaled by `row_weight`.
    pub fn to_dmatrix(&self, row_weight: Option<&[f64]>) -> DMatrix<Complex64> {
        let mut m = DMatrix::<Complex64>::zeros(self.rows, self.cols);
        let mut buf = Vec::new();
        for i in 0..self.rows {
            let w = row_weight.map_or(1.0, |w| w[i]);
            self.with_row(i, &mut buf, |r| {
                for (j, v) in r.iter().enumerate() {
                    m[(i, j)] = v * w;
                }
            });
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{build_cutoff, BoxRegion, CutoffSpec};
    use crate::wpoly::WPoly;

    fn xy() -> Arc<dyn Phase> {
        Arc::new(WPoly::from_ratio_terms(&[(1, 1, 1, 1)]).to_eval())
    }

    #[test]
    fn tiny_grid_matches_entry_formula() {
        let region = BoxRegion::new(0.0, 1.0, 0.0, 1.0);
        let grid = GridSpec::new(region, 2, 2).unwrap();
        let cut = build_cutoff(&CutoffSpec::IndicatorBox { support: region }).unwrap();
        let lambda = 3.0;
        let k = build_kernel(xy(), lambda, &cut, None, &grid).unwrap();
        for (i, x) in [0.25, 0.75].into_iter().enumerate() {
            for (j, y) in [0.25, 0.75].into_iter().enumerate() {
                let want = Complex64::from_polar(0.5, lambda * x * y);
                assert!((k.entry(i, j) - want).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn dense_and_matrix_free_agree() {
        let region = BoxRegion::square(1.0);
        let grid = GridSpec::new(region, 40, 30).unwrap();
        let cut = build_cutoff(&CutoffSpec::tensor_bump(region)).unwrap();
        let d = Damping::new(
            DampingFactor::Poly(WPoly::from_ratio_terms(&[(1, 0, 1, 1), (0, 1, -1, 1)]).to_eval()),
            Complex64::new(0.5, 0.3),
        );
        let a = build_kernel_with(xy(), 17.0, &cut, Some(d.clone()), &grid, Some(true)).unwrap();
        let b = build_kernel_with(xy(), 17.0, &cut, Some(d), &grid, Some(false)).unwrap();
        assert!(a.is_dense() && !b.is_dense());
        for i in (0..40).step_by(7) {
            for j in (0..30).step_by(5) {
                assert!((a.entry(i, j) - b.entry(i, j)).norm() <= 1e-14);
            }
        }
        let v: Vec<Complex64> = (0..30).map(|j| Complex64::new(j as f64, 1.0)).collect();
        let (ya, yb) = (a.apply(&v), b.apply(&v));
        assert!(ya.iter().zip(&yb).all(|(p, q)| (p - q).norm() < 1e-12));
    }

    #[test]
    fn zero_of_damping_with_positive_exponent() {
        // Grid nodes on the diagonal hit D = x - y = 0 exactly.
        let region = BoxRegion::new(0.0, 1.0, 0.0, 1.0);
        let grid = GridSpec::new(region, 4, 4).unwrap();
        let cut = build_cutoff(&CutoffSpec::IndicatorBox { support: region }).unwrap();
        let d = DampingFactor::Poly(WPoly::from_ratio_terms(&[(1, 0, 1, 1), (0, 1, -1, 1)]).to_eval());
        let k = build_kernel(xy(), 1.0, &cut, Some(Damping::new(d.clone(), Complex64::new(0.5, 0.0))), &grid)
            .unwrap();
        assert_eq!(k.entry(2, 2), Complex64::new(0.0, 0.0));
        assert!(k.entry(1, 2).norm() > 0.0);

        let neg = Damping::new(d.clone(), Complex64::new(-0.5, 0.0));
        assert!(matches!(
            build_kernel(xy(), 1.0, &cut, Some(neg), &grid),
            Err(NumericsError::DampingSingular { .. })
        ));
        let floored = Damping::new(d, Complex64::new(-0.5, 0.0)).with_floor(1e-12);
        let k = build_kernel(xy(), 1.0, &cut, Some(floored), &grid).unwrap();
        assert!(k.entry(2, 2).norm().is_finite() && k.entry(2, 2).norm() > 1e5);
    }

    #[test]
    fn adjoint_is_conjugate_transpose() {
        let data: Vec<Complex64> = (0..12).map(|t| Complex64::new(t as f64, (t * t) as f64 * 0.1)).collect();
        let k = KernelMatrix::from_dense(3, 4, data, 1.0, 1.0);
        let u = vec![Complex64::new(1.0, -1.0), Complex64::new(0.5, 2.0), Complex64::new(-1.0, 0.0)];
        let v = vec![Complex64::new(0.3, 0.1), Complex64::new(1.0, 1.0), Complex64::new(0.0, -2.0), Complex64::new(2.0, 0.0)];
        let lhs: Complex64 = k.apply(&v).iter().zip(&u).map(|(a, b)| a * b.conj()).sum();
        let rhs: Complex64 = v.iter().zip(k.apply_adjoint(&u)).map(|(a, b)| a * b.conj()).sum();
        assert!((lhs - rhs).norm() < 1e-12);
    }
}
