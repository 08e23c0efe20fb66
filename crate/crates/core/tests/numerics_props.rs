use std::sync::Arc;

use num_complex::Complex64;
use oscillab::numerics::*;
use oscillab::wpoly::WPoly;
use proptest::prelude::*;

fn matrix(rows: usize, cols: usize, raw: &[(f64, f64)]) -> KernelMatrix {
    let data = raw.iter().take(rows * cols).map(|&(a, b)| Complex64::new(a, b)).collect();
    KernelMatrix::from_dense(rows, cols, data, 1.0, 1.0)
}

fn small_matrix() -> impl Strategy<Value = KernelMatrix> {
    (2usize..=12, 2usize..=12).prop_flat_map(|(r, c)| {
        prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), r * c).prop_map(move |raw| matrix(r, c, &raw))
    })
}

fn lp_norm(v: &[Complex64], p: f64, w: f64) -> f64 {
    (w * v.iter().map(|z| z.norm().powf(p)).sum::<f64>()).powf(1.0 / p)
}

fn kernel(terms: &[(u32, u32, i64, i64)], lambda: f64, m: usize) -> KernelMatrix {
    let phase: Arc<dyn Phase> = Arc::new(WPoly::from_ratio_terms(terms).to_eval());
    let cutoff = build_cutoff(&CutoffSpec::tensor_bump(BoxRegion::square(1.0))).unwrap();
    let grid = GridSpec::new(BoxRegion::square(1.0), m, m).unwrap();
    build_kernel(phase, lambda, &cutoff, None, &grid).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn brackets_enclose_the_norm(k in small_matrix(), p in 1.1f64..4.0, probes in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 12)) {
        let exact = k.to_dmatrix(None).singular_values().max();
        let l2 = opnorm_l2(&k);
        prop_assert!(l2.lower <= exact * (1.0 + 1e-12) && exact <= l2.upper * (1.0 + 1e-12));
        prop_assert!(schur_bound(&k) >= l2.lower * (1.0 - 1e-12));

        let lower = opnorm_lp_lower(&k, p, 3, 7);
        let upper = opnorm_lp_upper(&k, p);
        prop_assert!(lower <= upper * (1.0 + 1e-9), "p={p}: {lower} > {upper}");
        // Any test vector is a brute-force lower estimate.
        let v: Vec<Complex64> = probes.iter().cycle().take(k.cols()).map(|&(a, b)| Complex64::new(a, b)).collect();
        let ratio = lp_norm(&k.apply(&v), p, 1.0) / lp_norm(&v, p, 1.0);
        prop_assert!(ratio <= upper * (1.0 + 1e-9));
    }

    #[test]
    fn negating_lambda_keeps_norms(a in 1i64..5, b in 1i64..5, lambda in 4.0f64..64.0) {
        let terms = [(2, 1, a, 1), (1, 2, b, 3)];
        let (kp, km) = (kernel(&terms, lambda, 40), kernel(&terms, -lambda, 40));
        prop_assert!(rel(opnorm_l2(&kp).lower, opnorm_l2(&km).lower) <= 1e-12);
        prop_assert!(rel(opnorm_lp_upper(&kp, 1.5), opnorm_lp_upper(&km, 1.5)) <= 1e-12);
        prop_assert!(rel(opnorm_lp_lower(&kp, 3.0, 2, 1), opnorm_lp_lower(&km, 3.0, 2, 1)) <= 1e-10);
    }

    #[test]
    fn pure_terms_do_not_change_norms(cx in -4i64..4, cy in -4i64..4, jx in 1u32..4, jy in 1u32..4, lambda in 4.0f64..64.0) {
        let base = kernel(&[(1, 1, 1, 1)], lambda, 48);
        let shifted = kernel(&[(1, 1, 1, 1), (jx, 0, cx, 1), (0, jy, cy, 2)], lambda, 48);
        prop_assert!(rel(opnorm_l2(&base).lower, opnorm_l2(&shifted).lower) <= 1e-6);
        prop_assert!(rel(opnorm_lp_upper(&base, 1.5), opnorm_lp_upper(&shifted, 1.5)) <= 1e-6);
    }
}

#[test]
fn trivial_operators() {
    let n = 7;
    let mut id = vec![Complex64::new(0.0, 0.0); n * n];
    for i in 0..n {
        id[i * n + i] = Complex64::new(1.0, 0.0);
    }
    let id = KernelMatrix::from_dense(n, n, id, 1.0, 1.0);
    assert!((opnorm_l2(&id).lower - 1.0).abs() < 1e-12);
    let ones = KernelMatrix::from_dense(n, n, vec![Complex64::new(1.0, 0.0); n * n], 1.0, 1.0);
    assert!((opnorm_l2(&ones).lower - n as f64).abs() < 1e-12);
    assert!((schur_bound(&ones) - n as f64).abs() < 1e-12);
}

#[test]
fn matrix_free_matches_dense() {
    let phase: Arc<dyn Phase> = Arc::new(WPoly::from_ratio_terms(&[(2, 1, 1, 1), (1, 2, -3, 2)]).to_eval());
    let cutoff = build_cutoff(&CutoffSpec::tensor_bump(BoxRegion::square(1.0))).unwrap();
    let grid = GridSpec::new(BoxRegion::square(1.0), 37, 29).unwrap();
    let dense = build_kernel_with(phase.clone(), 50.0, &cutoff, None, &grid, Some(true)).unwrap();
    let lazy = build_kernel_with(phase, 50.0, &cutoff, None, &grid, Some(false)).unwrap();
    assert!(dense.is_dense() && !lazy.is_dense());
    for i in (0..37).step_by(5) {
        for j in (0..29).step_by(3) {
            assert!((dense.entry(i, j) - lazy.entry(i, j)).norm() <= 1e-14);
        }
    }
    let v: Vec<Complex64> = (0..29).map(|j| Complex64::new(j as f64, 1.0)).collect();
    let (a, b) = (dense.apply(&v), lazy.apply(&v));
    assert!(a.iter().zip(&b).all(|(x, y)| (x - y).norm() <= 1e-12));
}

#[test]
fn refining_a_resolved_grid_barely_moves_the_l2_norm() {
    let phase: Arc<dyn Phase> = Arc::new(WPoly::from_ratio_terms(&[(1, 1, 1, 1)]).to_eval());
    let cutoff = build_cutoff(&CutoffSpec::tensor_bump(BoxRegion::square(1.0))).unwrap();
    let grid = auto_grid(phase.as_ref(), 128.0, BoxRegion::square(1.0), &GridCaps::default()).unwrap();
    assert!(!grid.under_resolved);
    let coarse = build_kernel(phase.clone(), 128.0, &cutoff, None, &grid).unwrap();
    let fine = build_kernel(phase, 128.0, &cutoff, None, &grid.refined(2)).unwrap();
    assert!(rel(opnorm_l2(&coarse).lower, opnorm_l2(&fine).lower) <= 1e-3);
}
