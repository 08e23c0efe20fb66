//! Python bindings. Configs and reports cross the boundary as plain dicts
//! with the same schema as the command-line JSON; exact exponents come back
//! as `fractions.Fraction`.

use num_complex::Complex64;
use num_rational::Rational64;
use oscillab::cli::{analyze as analyze_poly, selftest};
use oscillab::experiments::{
    atom_image_l1 as atom_series, counterexample_growth as counterexample, decay_sweep as sweep, sweep_json,
    uniformity_sweep as uniformity, AtomSeriesConfig, CounterexampleConfig, SweepConfig, UniformityConfig,
};
use oscillab::numerics::{opnorm_l2 as l2, opnorm_lp_lower, opnorm_lp_upper, schur_bound as schur, KernelMatrix};
use oscillab::predict;
use oscillab::wpoly::{detect_weights, factorize, WPoly};
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use serde::de::DeserializeOwned;
use serde::Serialize;

create_exception!(oscillab, OscillabError, PyException);

fn fail(e: impl std::fmt::Display) -> PyErr {
    OscillabError::new_err(e.to_string())
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(fail)?;
    py.import("json")?.call_method1("loads", (text,))
}

fn from_py<T: DeserializeOwned>(obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let text: String = match obj.extract::<String>() {
        Ok(s) => s,
        Err(_) => obj.py().import("json")?.call_method1("dumps", (obj,))?.extract()?,
    };
    serde_json::from_str(&text).map_err(fail)
}

fn fraction<'py>(py: Python<'py>, r: Rational64) -> PyResult<Bound<'py, PyAny>> {
    py.import("fractions")?.getattr("Fraction")?.call1((*r.numer(), *r.denom()))
}

fn ratio(num: i64, den: i64) -> PyResult<Rational64> {
    if den == 0 {
        return Err(fail("zero denominator"));
    }
    Ok(Rational64::new(num, den))
}

/// Polynomial `sum a_{k,l} x^k y^l` with exact rational coefficients.
#[pyclass(name = "WPoly", module = "oscillab", frozen, skip_from_py_object)]
pub struct PyWPoly {
    inner: WPoly,
}

#[pymethods]
impl PyWPoly {
    /// `terms` is a list of `(k, l, num, den)`.
    #[new]
    fn new(terms: Vec<(u32, u32, i64, i64)>) -> PyResult<Self> {
        if terms.iter().any(|t| t.3 == 0) {
            return Err(fail("zero denominator"));
        }
        Ok(Self { inner: WPoly::from_ratio_terms(&terms) })
    }

    /// From the JSON schema `{"terms": [{"k", "l", "a"}]}`, as a dict or string.
    #[staticmethod]
    fn from_json(obj: &Bound<'_, PyAny>) -> PyResult<Self> {
        Ok(Self { inner: from_py(obj)? })
    }

    fn to_json<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner)
    }

    /// `(p, q, D)` with `p k + q l = D` on every term.
    fn weights(&self) -> PyResult<(u32, u32, u64)> {
        let w = detect_weights(&self.inner).map_err(fail)?;
        Ok((w.p, w.q, w.weighted_degree))
    }

    fn hessian(&self) -> Self {
        Self { inner: self.inner.hessian_xy() }
    }

    /// `(c, m, n, roots)` of `c x^m y^n prod (x - beta y^eta)`, roots as complex.
    fn factorize(&self) -> PyResult<(f64, u32, u32, Vec<Complex64>)> {
        let w = detect_weights(&self.inner).map_err(fail)?;
        let f = factorize(&self.inner, &w).map_err(fail)?;
        let roots = f.linear_roots().iter().map(|r| r.beta).collect();
        Ok((f.c, f.m, f.n, roots))
    }

    fn evaluate(&self, x: f64, y: f64) -> f64 {
        self.inner.to_eval().value(x, y)
    }

    fn __str__(&self) -> String {
        self.inner.to_string()
    }

    fn __repr__(&self) -> String {
        format!("WPoly('{}')", self.inner)
    }
}

/// Weights, Hessian factorization and the prediction table.
#[pyfunction]
fn analyze<'py>(py: Python<'py>, poly: &PyWPoly) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &analyze_poly(&poly.inner).map_err(fail)?)
}

/// `(p, decay)` of the sharp estimate for the monomial `x^k y^l`.
#[pyfunction]
fn sharp_lp<'py>(py: Python<'py>, k: u32, l: u32) -> PyResult<(Bound<'py, PyAny>, Bound<'py, PyAny>)> {
    let s = predict::sharp_lp(k, l).map_err(fail)?;
    Ok((fraction(py, s.p)?, fraction(py, s.decay)?))
}

/// `(p, delta)` obtained by interpolating the damped estimate.
#[pyfunction]
#[pyo3(signature = (m, n, big_n, s, eta=(1, 1)))]
fn lp_from_damping<'py>(
    py: Python<'py>,
    m: u32,
    n: u32,
    big_n: u32,
    s: u32,
    eta: (i64, i64),
) -> PyResult<(Bound<'py, PyAny>, Bound<'py, PyAny>)> {
    let (p, d) = predict::lp_from_damping(m, n, big_n, s, ratio(eta.0, eta.1)?).map_err(fail)?;
    Ok((fraction(py, p)?, fraction(py, d)?))
}

/// Damped `L^2` exponents as a dict.
#[pyfunction]
#[pyo3(signature = (m, n, big_n, s, eta=(1, 1)))]
fn damped_l2_exponents<'py>(
    py: Python<'py>,
    m: u32,
    n: u32,
    big_n: u32,
    s: u32,
    eta: (i64, i64),
) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &predict::damped_l2_exponents(m, n, big_n, s, ratio(eta.0, eta.1)?).map_err(fail)?)
}

fn kernel(rows: Vec<Vec<Complex64>>) -> PyResult<KernelMatrix> {
    let nr = rows.len();
    let nc = rows.first().map_or(0, Vec::len);
    if nr == 0 || nc == 0 || rows.iter().any(|r| r.len() != nc) {
        return Err(fail("matrix must be a nonempty list of equal-length rows"));
    }
    Ok(KernelMatrix::from_dense(nr, nc, rows.into_iter().flatten().collect(), 1.0, 1.0))
}

/// `(lower, upper)` for the spectral norm of a dense matrix.
#[pyfunction]
fn opnorm_l2(matrix: Vec<Vec<Complex64>>) -> PyResult<(f64, f64)> {
    let b = l2(&kernel(matrix)?);
    Ok((b.lower, b.upper))
}

/// `(lower, upper)` for the `l^p -> l^p` norm of a dense matrix.
#[pyfunction]
#[pyo3(signature = (matrix, p, restarts=4, seed=0))]
fn opnorm_lp(matrix: Vec<Vec<Complex64>>, p: f64, restarts: usize, seed: u64) -> PyResult<(f64, f64)> {
    if !(p >= 1.0) {
        return Err(fail(format!("p = {p} is below 1")));
    }
    let k = kernel(matrix)?;
    let upper = opnorm_lp_upper(&k, p);
    let lower = if p > 1.0 && p.is_finite() { opnorm_lp_lower(&k, p, restarts, seed) } else { upper };
    Ok((lower, upper))
}

#[pyfunction]
fn schur_bound(matrix: Vec<Vec<Complex64>>) -> PyResult<f64> {
    Ok(schur(&kernel(matrix)?))
}

/// Runs a sweep config and returns the JSON report.
#[pyfunction]
fn decay_sweep<'py>(py: Python<'py>, config: &Bound<'py, PyAny>) -> PyResult<Bound<'py, PyAny>> {
    let cfg: SweepConfig = from_py(config)?;
    let result = py.detach(|| sweep(&cfg)).map_err(fail)?;
    to_py(py, &sweep_json(&cfg, &result))
}

#[pyfunction]
fn uniformity_sweep<'py>(py: Python<'py>, config: &Bound<'py, PyAny>) -> PyResult<Bound<'py, PyAny>> {
    let cfg: UniformityConfig = from_py(config)?;
    to_py(py, &py.detach(|| uniformity(&cfg)).map_err(fail)?)
}

#[pyfunction]
fn counterexample_growth<'py>(py: Python<'py>, config: &Bound<'py, PyAny>) -> PyResult<Bound<'py, PyAny>> {
    let cfg: CounterexampleConfig = from_py(config)?;
    to_py(py, &py.detach(|| counterexample(&cfg)).map_err(fail)?)
}

#[pyfunction]
fn atom_image_l1<'py>(py: Python<'py>, config: &Bound<'py, PyAny>) -> PyResult<Bound<'py, PyAny>> {
    let cfg: AtomSeriesConfig = from_py(config)?;
    to_py(py, &py.detach(|| atom_series(&cfg)).map_err(fail)?)
}

/// Every invariant suite; a list of dicts with `failures == 0` on success.
#[pyfunction]
#[pyo3(signature = (seed=0))]
fn run_selftest<'py>(py: Python<'py>, seed: u64) -> PyResult<Bound<'py, PyAny>> {
    let results = py.detach(|| selftest::run_all(&selftest::Formulas::default(), seed));
    to_py(py, &results)
}

#[pymodule(name = "oscillab")]
fn oscillab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("OscillabError", m.py().get_type::<OscillabError>())?;
    m.add_class::<PyWPoly>()?;
    m.add_function(wrap_pyfunction!(analyze, m)?)?;
    m.add_function(wrap_pyfunction!(sharp_lp, m)?)?;
    m.add_function(wrap_pyfunction!(lp_from_damping, m)?)?;
    m.add_function(wrap_pyfunction!(damped_l2_exponents, m)?)?;
    m.add_function(wrap_pyfunction!(opnorm_l2, m)?)?;
    m.add_function(wrap_pyfunction!(opnorm_lp, m)?)?;
    m.add_function(wrap_pyfunction!(schur_bound, m)?)?;
    m.add_function(wrap_pyfunction!(decay_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(uniformity_sweep, m)?)?;
    m.add_function(wrap_pyfunction!(counterexample_growth, m)?)?;
    m.add_function(wrap_pyfunction!(atom_image_l1, m)?)?;
    m.add_function(wrap_pyfunction!(run_selftest, m)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_rejects_ragged_rows() {
        let one = Complex64::new(1.0, 0.0);
        assert!(kernel(vec![vec![one, one], vec![one]]).is_err());
        assert!(kernel(vec![]).is_err());
        assert_eq!(kernel(vec![vec![one; 3]; 2]).unwrap().cols(), 3);
    }

    #[test]
    fn zero_denominator_is_rejected() {
        assert!(ratio(1, 0).is_err());
        assert!(PyWPoly::new(vec![(1, 1, 1, 0)]).is_err());
    }
}
