use kpz_exact::contour::*;
use kpz_exact::procsim::OrderedConfig;
use kpz_exact::specfn::QParam;
use kpz_exact::{tol, C64};
use proptest::prelude::*;

fn qp(v: f64) -> QParam {
    QParam::new(v).unwrap()
}

#[test]
fn unnesting_qtasep_integrand() {
    for q in [0.3, 0.5, 0.8] {
        for parts in [vec![1], vec![2, 1], vec![1, 1], vec![2, 2, 1], vec![3, 1, 1]] {
            let n = OrderedConfig::new(parts.clone()).unwrap();
            let spec = nested_radii(Model::QTasep(qp(q)), n.k()).unwrap();
            let nested = qtasep_moment_nested(&n, 0.8, qp(q), &spec).unwrap().value;
            let un = qtasep_moment_unnested(&n, 0.8, qp(q), &unnest_contour(qp(q))).unwrap().total;
            let rel = (un - nested).norm() / nested.abs();
            assert!(rel <= tol::UNNESTING, "q={q} n={parts:?}: {nested} vs {un}");
        }
    }
}

#[test]
fn symmetric_unnesting_matches_nested() {
    for (n, k) in [(1, 2), (2, 3), (3, 2)] {
        let cfg = OrderedConfig::new(vec![n; k]).unwrap();
        let q = qp(0.5);
        let nested = qtasep_moment_nested(&cfg, 1.0, q, &nested_radii(Model::QTasep(q), k).unwrap()).unwrap().value;
        let sym = qtasep_moment_unnested_symmetric(n, k, 1.0, q).unwrap().value;
        assert!((sym - nested).abs() <= 1e-10 * nested, "n={n} k={k}: {nested} vs {sym}");
    }
}

#[test]
fn contour_deformation_is_invisible() {
    let q = qp(0.5);
    let n = OrderedConfig::new(vec![2, 1]).unwrap();
    let spec = nested_radii(Model::QTasep(q), 2).unwrap();
    let base = qtasep_moment_nested(&n, 1.0, q, &spec).unwrap().value;
    let r = spec.radii();
    // inner circle anywhere in its annulus: below (r_1 - (1-q))/q, above 0
    for inner in [0.05, 0.15, 0.8 * (r[0] - 0.5) / 0.5] {
        let moved = spec.with_radii(&[r[0], inner]).unwrap();
        let v = qtasep_moment_nested(&n, 1.0, q, &moved.with_nodes(&[256, 256])).unwrap().value;
        assert!((v - base).abs() <= 1e-9 * base, "inner radius {inner}: {v} vs {base}");
    }
}

#[test]
fn crossing_a_constraint_is_rejected() {
    let q = qp(0.5);
    let spec = nested_radii(Model::QTasep(q), 2).unwrap();
    let r = spec.radii();
    assert!(spec.with_radii(&[r[0], r[0]]).is_err());
    assert!(spec.with_radii(&[1.2, r[1]]).is_err());
}

#[test]
fn moments_decrease_in_time() {
    let q = qp(0.4);
    let n = OrderedConfig::new(vec![2, 1]).unwrap();
    let spec = nested_radii(Model::QTasep(q), 2).unwrap();
    let vals: Vec<f64> = (0..8).map(|i| qtasep_moment_nested(&n, 0.25 * i as f64, q, &spec).unwrap().value).collect();
    assert!((vals[0] - 1.0).abs() < 1e-12);
    assert!(vals.windows(2).all(|w| w[1] < w[0]), "{vals:?}");
}

#[test]
fn nesting_infeasible_message() {
    let e = nested_radii(Model::QTasep(qp(0.1)), 3).unwrap_err();
    assert!(e.to_string().contains("nesting infeasible: r_1 > 1"), "{e}");
}

#[test]
fn she_moments_nested() {
    // E z(tau; n) = e^{-tau} tau^{n-1}/(n-1)!
    let spec = nested_radii(Model::She, 1).unwrap();
    for n in 1..=4i64 {
        let cfg = OrderedConfig::new(vec![n]).unwrap();
        let v = she_moment_nested(&cfg, 1.5, &spec).unwrap().value;
        let fact: f64 = (1..n).map(|i| i as f64).product();
        let exact = (-1.5f64).exp() * 1.5f64.powi(n as i32 - 1) / fact;
        assert!((v - exact).abs() < 1e-12, "n={n}: {v} vs {exact}");
    }
}

#[test]
fn string_term_dominates_at_large_tau() {
    for tau in [5.0, 10.0, 20.0] {
        let [t11, t2] = she_second_moment_unnested(tau as i64, tau, 0.5).unwrap();
        assert!(t2.norm() > t11.norm(), "tau={tau}: |(1,1)| {} vs |(2)| {}", t11.norm(), t2.norm());
    }
}

#[test]
fn partition_counts() {
    let p: Vec<usize> = (1..=6).map(|k| partitions(k).len()).collect();
    assert_eq!(p, vec![1, 2, 3, 5, 7, 11]);
    for k in 1..=6 {
        assert!(partitions(k).iter().all(|l| l.k() == k));
    }
    assert_eq!(permutations(4).len(), 24);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn radii_schedule_verifies(q in 0.3..0.95f64, k in 1usize..5) {
        // either a schedule that passes every geometric check, or an infeasibility error
        match nested_radii(Model::QTasep(qp(q)), k) {
            Ok(spec) => prop_assert!(spec.verify().is_ok()),
            Err(e) => prop_assert!(e.to_string().contains("nesting infeasible"), "{}", e),
        }
        let she = nested_radii(Model::She, k).unwrap();
        prop_assert!(she.verify().is_ok());
    }

    #[test]
    fn residue_of_pole(re in -0.5..0.5f64, im in -0.5..0.5f64) {
        let a = C64::new(re, im);
        let c = Contour::circle(C64::new(0.0, 0.0), 1.0, 64).unwrap();
        let v = contour_quadrature(|z| z.exp() / (z - a), &c, 1e-13).unwrap().value;
        prop_assert!((v - a.exp()).norm() < 1e-12);
    }

    #[test]
    fn moments_lie_in_unit_interval(q in 0.3..0.8f64, t in 0.0..2.0f64, n1 in 1i64..4, n2 in 1i64..4) {
        let parts = if n1 >= n2 { vec![n1, n2] } else { vec![n2, n1] };
        let n = OrderedConfig::new(parts).unwrap();
        let v = qtasep_moment_nested(&n, t, qp(q), &nested_radii(Model::QTasep(qp(q)), 2).unwrap()).unwrap().value;
        prop_assert!(v > 0.0 && v <= 1.0 + 1e-12);
    }
}
