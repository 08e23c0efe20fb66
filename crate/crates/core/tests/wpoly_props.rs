use num_bigint::BigInt;
use num_complex::Complex64;
use num_rational::BigRational;
use oscillab::wpoly::{detect_weights, factorize, Factorization, Root, WPoly, WeightSignature};
use proptest::prelude::*;

/// Conjugate-invariant root multiset with moduli log-uniform in [1e-2, 1e2].
fn root_set() -> impl Strategy<Value = Vec<Root>> {
    prop::collection::vec((-2.0f64..2.0, 0.05f64..3.09, any::<bool>()), 1..=6).prop_map(|raw| {
        let mut out = Vec::new();
        let mut count = 0;
        for (lm, arg, real) in raw {
            let r = 10f64.powf(lm);
            if real || count + 2 > 6 {
                if count + 1 > 6 {
                    break;
                }
                let s = if arg > 1.5 { -1.0 } else { 1.0 };
                out.push(Root::new(Complex64::new(s * r, 0.0), 1));
                count += 1;
            } else {
                let z = Complex64::from_polar(r, arg);
                out.push(Root::new(z, 1));
                out.push(Root::new(z.conj(), 1));
                count += 2;
            }
        }
        out
    })
}

fn weights() -> impl Strategy<Value = (u32, u32)> {
    prop::sample::select(vec![(1, 1), (3, 2), (2, 1), (1, 2), (5, 3)])
}

fn build(roots: Vec<Root>, (p, q): (u32, u32), m: u32, n: u32, c: f64) -> Factorization {
    let big_n: u32 = roots.iter().map(|r| r.mult).sum();
    let d = u64::from(p * m + q * n + p * q * big_n);
    Factorization::new(c, m, n, WeightSignature::new(p, q, d).unwrap(), roots).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn expand_factorize_round_trip(
        roots in root_set(),
        w in weights(),
        m in 0u32..3,
        n in 0u32..3,
        c in prop::sample::select(vec![1.0, -2.5, 0.125, 7.0]),
    ) {
        let f0 = build(roots, w, m, n, c);
        let q0 = f0.expand().unwrap();
        let sig = detect_weights(&q0).unwrap();
        prop_assert!(sig.admits(&q0));
        let f1 = factorize(&q0, &sig).unwrap();
        prop_assert!(f1.is_conjugate_invariant());
        prop_assert_eq!((f1.m, f1.n), (m, n));
        let q1 = f1.expand().unwrap();
        let err = q0.rel_coeff_error(&q1);
        prop_assert!(err <= 1e-8, "relative error {err:e}");
    }

    #[test]
    fn gap_indices_shrink_with_n0(roots in root_set(), n0 in 1u32..4) {
        let f = build(roots, (1, 1), 0, 0, 1.0);
        let a = f.gap_indices(n0).indices;
        let b = f.gap_indices(n0 + 1).indices;
        prop_assert!(b.iter().all(|i| a.contains(i)));
    }

    #[test]
    fn damping_selection_is_real(roots in root_set(), s in 0usize..7) {
        let f = build(roots, (1, 1), 0, 0, 1.0);
        prop_assume!(s <= f.linear_count());
        let sel = f.select_damping_indices(s).unwrap();
        prop_assert!(sel.indices.len() >= s);
        let lin = f.linear_roots();
        let mut c = vec![Complex64::new(1.0, 0.0)];
        for &i in &sel.indices {
            let b = lin[i - 1].beta;
            let mut next = vec![Complex64::new(0.0, 0.0); c.len() + 1];
            for (k, &ck) in c.iter().enumerate() {
                next[k + 1] += ck;
                next[k] -= b * ck;
            }
            c = next;
        }
        let scale = c.iter().fold(0.0f64, |m, z| m.max(z.norm()));
        let imag = c.iter().fold(0.0f64, |m, z| m.max(z.im.abs()));
        prop_assert!(imag <= 1e-10 * scale);
    }

    #[test]
    fn hessian_is_linear(
        a in -5i64..5, b in -5i64..5,
        p in prop::collection::vec((0u32..5, 0u32..5, -9i64..9), 0..6),
        q in prop::collection::vec((0u32..5, 0u32..5, -9i64..9), 0..6),
    ) {
        let mk = |v: &[(u32, u32, i64)]| WPoly::from_ratio_terms(
            &v.iter().map(|&(k, l, c)| (k, l, c, 3)).collect::<Vec<_>>());
        let (pp, qq) = (mk(&p), mk(&q));
        let ra = BigRational::from_integer(BigInt::from(a));
        let rb = BigRational::from_integer(BigInt::from(b));
        let lhs = pp.scale(&ra).add(&qq.scale(&rb)).hessian_xy();
        let rhs = pp.hessian_xy().scale(&ra).add(&qq.hessian_xy().scale(&rb));
        prop_assert_eq!(lhs, rhs);
    }

    #[test]
    fn detected_weights_are_exact(
        (p, q) in weights(),
        cs in prop::collection::vec(-9i64..9, 1..5),
        m in 0u32..3,
        n in 0u32..3,
    ) {
        let big_n = cs.len() as u32;
        let terms: Vec<_> = cs.iter().enumerate()
            .map(|(i, &c)| (m + q * i as u32, n + p * (big_n - i as u32), if c == 0 { 1 } else { c }, 1))
            .collect();
        let poly = WPoly::from_ratio_terms(&terms);
        let sig = detect_weights(&poly).unwrap();
        let w0 = sig.weight_of(poly.terms()[0].k, poly.terms()[0].l);
        prop_assert!(poly.terms().iter().all(|t| sig.weight_of(t.k, t.l) == w0));
        if poly.len() > 1 {
            prop_assert_eq!((sig.p, sig.q), (p, q));
        }
    }
}
