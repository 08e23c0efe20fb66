//! Exact-arithmetic and small numeric invariant suites, shared by the
//! `selftest` command and the test suites.

use num_complex::Complex64;
use num_rational::Rational64;
use num_traits::One;
use rand::Rng;
use serde::Serialize;

use crate::numerics::{
    dyadic_partition, opnorm_l2, opnorm_lp_lower, opnorm_lp_upper, task_rng, KernelMatrix,
};
use crate::predict::{self, DampingSpec, PredictError};
use crate::wpoly::{detect_weights, factorize, Factorization, Root, WeightSignature};

type Exponents = fn(u32, u32, u32, u32, Rational64) -> Result<DampingSpec, PredictError>;

/// The formulas under test; swapped out by mutation tests.
#[derive(Clone, Copy)]
pub struct Formulas {
    pub damped: Exponents,
    pub damped_dual: Exponents,
}

impl Default for Formulas {
    fn default() -> Self {
        Self {
            damped: predict::damped_l2_exponents,
            damped_dual: predict::damped_l2_dual_exponents,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteResult {
    pub name: &'static str,
    pub cases: usize,
    pub failures: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_failure: Option<String>,
}

impl SuiteResult {
    fn new(name: &'static str) -> Self {
        Self { name, cases: 0, failures: 0, first_failure: None }
    }

    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.cases += 1;
        if !ok {
            self.failures += 1;
            if self.first_failure.is_none() {
                self.first_failure = Some(what());
            }
        }
    }

    pub fn passed(&self) -> bool {
        self.failures == 0 && self.cases > 0
    }
}

fn r(n: i64) -> Rational64 {
    Rational64::from_integer(n)
}

const BOX: u32 = 5;

/// Primal exponents at `eta = 1` equal the dual ones at `nu = 1`.
pub fn duality_suite(f: &Formulas) -> SuiteResult {
    let mut out = SuiteResult::new("duality");
    for m in 0..=BOX {
        for n in 0..=BOX {
            for big_n in 0..=BOX {
                for s in 0..=big_n {
                    let a = (f.damped)(m, n, big_n, s, r(1));
                    let b = (f.damped_dual)(m, n, big_n, s, r(1));
                    let ok = match (&a, &b) {
                        (Ok(a), Ok(b)) => a.gamma == b.gamma && a.re_z == b.re_z,
                        _ => false,
                    };
                    out.check(ok, || format!("m={m} n={n} N={big_n} s={s}: {a:?} vs {b:?}"));
                }
            }
        }
    }
    out
}

fn ratios() -> Vec<Rational64> {
    vec![r(1), r(2), r(3), Rational64::new(3, 2), Rational64::new(5, 2), Rational64::new(4, 3)]
}

/// Interpolating the two damped endpoints reproduces the closed form, and
/// integer cases agree with the sharp exponents of `k = m+s+1`,
/// `l = n + (N-s) eta + 1`.
pub fn matching_suite(f: &Formulas) -> SuiteResult {
    let mut out = SuiteResult::new("matching");
    for m in 0..=BOX {
        for n in 0..=BOX {
            for big_n in 0..=BOX {
                for s in 0..=big_n {
                    if m + s == 0 {
                        continue;
                    }
                    for eta in ratios() {
                        let closed = predict::lp_from_damping(m, n, big_n, s, eta);
                        let residual = r(i64::from(n)) + r(i64::from(big_n - s)) * eta;
                        // The interpolation parameter lies in (0, 1) only here.
                        if residual < r(i64::from(m + s)) {
                            let chained = chain(f, m, n, big_n, s, eta);
                            let ok = matches!((&chained, &closed), (Ok(a), Ok(b)) if a == b);
                            out.check(ok, || {
                                format!("m={m} n={n} N={big_n} s={s} eta={eta}: {chained:?} vs {closed:?}")
                            });
                        }
                        let l = residual + r(1);
                        if l.is_integer() {
                            let k = m + s + 1;
                            let sharp = predict::sharp_lp(k, *l.numer() as u32);
                            let ok = matches!((&sharp, &closed), (Ok(sh), Ok((p, d))) if sh.p == *p && sh.decay == *d);
                            out.check(ok, || format!("k={k} l={l}: {sharp:?} vs {closed:?}"));
                        }
                    }
                }
            }
        }
    }
    out
}

fn chain(
    f: &Formulas,
    m: u32,
    n: u32,
    big_n: u32,
    s: u32,
    eta: Rational64,
) -> Result<(Rational64, Rational64), PredictError> {
    let spec = (f.damped)(m, n, big_n, s, eta)?;
    let theta = predict::matching_theta(m, n, big_n, s, eta)?;
    let a = r(i64::from(m + s)) * spec.re_z()?;
    let (weight, p) = predict::interpolate_weights(a, r(2), theta)?;
    if weight != r(0) {
        return Err(PredictError::HypothesisViolated(format!("weight {weight}")));
    }
    Ok((p, theta * spec.gamma))
}

/// `sharp_lp(k, l)` and `sharp_lp(l, k)` sit at Hölder-dual exponents
/// with the same decay.
pub fn holder_suite() -> SuiteResult {
    let mut out = SuiteResult::new("holder_pairing");
    for k in 1..=12u32 {
        for l in 1..=12u32 {
            let (a, b) = (predict::sharp_lp(k, l), predict::sharp_lp(l, k));
            let ok = match (&a, &b) {
                (Ok(a), Ok(b)) => {
                    a.p_dual() == b.p && a.decay == b.decay && a.p.recip() + b.p.recip() == Rational64::one()
                }
                _ => false,
            };
            out.check(ok, || format!("k={k} l={l}: {a:?} / {b:?}"));
        }
    }
    out
}

/// Random conjugate-invariant root multiset, `N <= 6`, moduli log-uniform
/// in `[1e-2, 1e2]`.
pub fn random_roots(seed: u64, case: u64) -> Vec<Root> {
    let mut rng = task_rng(seed, case);
    let target = rng.random_range(1..=6usize);
    let mut out = Vec::new();
    let mut count = 0;
    while count < target {
        let modulus = 10f64.powf(rng.random_range(-2.0..=2.0));
        if count + 2 <= target && rng.random_bool(0.5) {
            let z = Complex64::from_polar(modulus, rng.random_range(0.05..3.09));
            out.push(Root::new(z, 1));
            out.push(Root::new(z.conj(), 1));
            count += 2;
        } else {
            let sign = if rng.random_bool(0.5) { -1.0 } else { 1.0 };
            out.push(Root::new(Complex64::new(sign * modulus, 0.0), 1));
            count += 1;
        }
    }
    out
}

/// Worst relative coefficient error over `cases` expand, factorize, expand
/// round trips, and the suite result at tolerance `1e-8`.
pub fn roundtrip_suite(seed: u64, cases: u64) -> (SuiteResult, f64) {
    const WEIGHTS: [(u32, u32); 5] = [(1, 1), (3, 2), (2, 1), (1, 2), (5, 3)];
    let mut out = SuiteResult::new("factorization_roundtrip");
    let mut worst = 0.0_f64;
    for case in 0..cases {
        let roots = random_roots(seed, case);
        let mut rng = task_rng(seed, 1 << 32 | case);
        let (p, q) = WEIGHTS[rng.random_range(0..WEIGHTS.len())];
        let (m, n) = (rng.random_range(0..3u32), rng.random_range(0..3u32));
        let c = [1.0, -2.5, 0.125, 7.0][rng.random_range(0..4)];
        let big_n: u32 = roots.iter().map(|r| r.mult).sum();
        let d = u64::from(p * m + q * n + p * q * big_n);
        let result = WeightSignature::new(p, q, d)
            .and_then(|w| Factorization::new(c, m, n, w, roots))
            .and_then(|f0| {
                let q0 = f0.expand()?;
                let f1 = factorize(&q0, &detect_weights(&q0)?)?;
                Ok(q0.rel_coeff_error(&f1.expand()?))
            });
        let err = result.as_ref().copied().unwrap_or(f64::INFINITY);
        worst = worst.max(err);
        out.check(err <= 1e-8, || format!("case {case}: {result:?}"));
    }
    (out, worst)
}

/// `|sum_j Phi(x/2^j) - 1|` on log-spaced points of the safe range.
pub fn partition_suite(points: usize) -> (SuiteResult, f64) {
    let mut out = SuiteResult::new("partition_of_unity");
    let part = dyadic_partition(-40, 40);
    let (a, b) = part.safe_range();
    let (la, lb) = (a.ln(), b.ln());
    let mut worst = 0.0_f64;
    for i in 0..points {
        let x = (la + (lb - la) * i as f64 / (points - 1) as f64).exp();
        let e = (part.sum(x) - 1.0).abs();
        worst = worst.max(e);
        out.check(e <= 1e-10, || format!("x={x}: error {e:e}"));
    }
    (out, worst)
}

fn lp_norm(v: &[f64], p: f64) -> f64 {
    v.iter().map(|x| x.abs().powf(p)).sum::<f64>().powf(1.0 / p)
}

/// For `K = u v^T`, `||K||_{p->p} = ||u||_p ||v||_{p'}`: the lower estimate
/// must hit it within `1e-6` and the upper estimate must not undercut it.
pub fn rank_one_suite(seed: u64) -> (SuiteResult, f64) {
    let mut out = SuiteResult::new("rank_one_holder");
    let mut worst = 0.0_f64;
    for case in 0..6u64 {
        let mut rng = task_rng(seed, 0x7261_6e6b + case);
        let (nr, nc) = (16 + 8 * case as usize, 24);
        let u: Vec<f64> = (0..nr).map(|_| rng.random_range(-1.0..1.0)).collect();
        let v: Vec<f64> = (0..nc).map(|_| rng.random_range(-1.0..1.0)).collect();
        let data = u.iter().flat_map(|a| v.iter().map(move |b| Complex64::new(a * b, 0.0))).collect();
        let k = KernelMatrix::from_dense(nr, nc, data, 1.0, 1.0);
        for p in [1.5, 2.0, 3.0] {
            let exact = lp_norm(&u, p) * lp_norm(&v, p / (p - 1.0));
            let (lo, up) = if p == 2.0 {
                let b = opnorm_l2(&k);
                (b.lower, b.upper)
            } else {
                (opnorm_lp_lower(&k, p, 2, seed), opnorm_lp_upper(&k, p))
            };
            let rel = (lo - exact).abs() / exact;
            worst = worst.max(rel);
            out.check(rel <= 1e-6 && up >= exact * (1.0 - 1e-12), || {
                format!("case {case} p={p}: lower {lo}, upper {up}, exact {exact}")
            });
        }
    }
    (out, worst)
}

/// Every suite; the verdict does not depend on `seed`.
pub fn run_all(f: &Formulas, seed: u64) -> Vec<SuiteResult> {
    vec![
        duality_suite(f),
        matching_suite(f),
        holder_suite(),
        roundtrip_suite(seed, 200).0,
        partition_suite(10_000).0,
        rank_one_suite(seed).0,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_suites_pass() {
        let f = Formulas::default();
        for s in [duality_suite(&f), matching_suite(&f), holder_suite()] {
            assert!(s.passed(), "{s:?}");
        }
    }

    fn broken(m: u32, n: u32, big_n: u32, s: u32, eta: Rational64) -> Result<DampingSpec, PredictError> {
        let mut spec = predict::damped_l2_exponents(m, n, big_n, s, eta)?;
        spec.re_z = spec.re_z.map(|z| z + Rational64::new(1, 7));
        Ok(spec)
    }

    #[test]
    fn mutated_re_z_is_caught() {
        let f = Formulas { damped: broken, ..Formulas::default() };
        assert!(!duality_suite(&f).passed());
        assert!(!matching_suite(&f).passed());
    }
}
