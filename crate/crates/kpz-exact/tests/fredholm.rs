use std::f64::consts::PI;

use kpz_exact::fredholm::*;
use kpz_exact::specfn::QParam;
use kpz_exact::{quad, tol, C64};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn qp(v: f64) -> QParam {
    QParam::new(v).unwrap()
}

#[test]
fn kernel_forms_on_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let q = qp(rng.gen_range(0.3..0.7));
        let zeta = C64::from_polar(rng.gen_range(0.05..1.2), rng.gen_range(0.6 * PI..1.4 * PI));
        let t = rng.gen_range(0.2..2.0);
        let n = rng.gen_range(1..=3);
        let pts = qlaplace_contour(q, 64).unwrap().points();
        let w = pts[rng.gen_range(0..64)].0;
        let wp = pts[rng.gen_range(0..64)].0;
        let a = kernel_eval(&KernelSpec::QLaplaceSummed { q, zeta, t, n }, w, wp).unwrap().value;
        let b = kernel_eval(&KernelSpec::QLaplaceMb { q, zeta, t, n }, w, wp).unwrap().value;
        worst = worst.max((a - b).norm() / a.norm().max(1.0));
    }
    assert!(worst <= tol::KERNEL_FORMS, "{worst:e}");
}

#[test]
fn determinant_continues_past_the_series_disk() {
    // the G series converges only for |zeta| < 1/(1-q); the two kernel forms
    // keep agreeing well outside it
    let q = qp(0.5);
    let gamma = qlaplace_contour(q, 64).unwrap();
    let mb = QLaplaceMbGrid::new(q, 1.0, 1, &gamma, PI / 4.0).unwrap();
    let res = QLaplaceResummed::new(q, 1.0, 1, &gamma).unwrap();
    for zeta in [C64::new(-0.5, 0.0), C64::new(-3.0, 0.0), C64::new(-10.0, 4.0), C64::new(-2.0, -2.0)] {
        let (a, _) = mb.det(zeta, 16).unwrap();
        let b = res.det_at_x(zeta * 0.5).unwrap();
        assert!((a - b).norm() < 1e-8, "zeta={zeta}: {a} vs {b}");
    }
}

#[test]
fn g_series_matches_det_near_zero() {
    let q = qp(0.5);
    let gamma = qlaplace_contour(q, 64).unwrap();
    let res = QLaplaceResummed::new(q, 0.7, 2, &gamma).unwrap();
    for zeta in [C64::new(-0.02, 0.0), C64::new(0.0, 0.05), C64::new(-0.05, -0.05)] {
        let g = g_series(zeta, q, 0.7, 2, 6).unwrap();
        let d = res.det_at_x(zeta * 0.5).unwrap();
        assert!((g.value - d).norm() <= tol::G_VS_DET, "zeta={zeta}: {} vs {d}", g.value);
    }
}

#[test]
fn pmf_first_particle_is_poisson() {
    // x_1(t) + 1 is Poisson(t) for step data
    let pmf = qtasep_pmf(qp(0.5), 1.0, 1, 10, 64).unwrap();
    let mut p = (-1.0f64).exp();
    for (m, est) in pmf.iter().enumerate() {
        assert!((est.value - p).abs() < 1e-10, "m={m}: {} vs {p}", est.value);
        p /= (m + 1) as f64;
    }
}

#[test]
fn pmf_mass_and_sign() {
    for (q, t, n) in [(0.3, 0.5, 2), (0.5, 1.0, 3), (0.7, 0.8, 2)] {
        let pmf = qtasep_pmf(qp(q), t, n, 14, 64).unwrap();
        let mass: f64 = pmf.iter().map(|p| p.value).sum();
        assert!((mass - 1.0).abs() <= tol::PMF_MASS, "q={q} t={t} n={n}: mass {mass}");
        assert!(pmf.iter().all(|p| p.value >= -tol::PMF_NEGATIVITY));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn laplace_inversion_roundtrip(f in proptest::collection::vec(0.0..1.0f64, 1..6), q in 0.3..0.7f64) {
        let q = qp(q);
        let total: f64 = f.iter().sum();
        prop_assume!(total > 1e-3);
        let f: Vec<f64> = f.iter().map(|v| v / total).collect();
        for (m, want) in f.iter().enumerate() {
            let got = eq_laplace_invert_adaptive(|z| Ok(eq_laplace_forward(&f, q, z)), m, q, 1e-11).unwrap();
            prop_assert!((got.value - want).abs() < 1e-9, "m={m}: {} vs {want}", got.value);
        }
    }

    #[test]
    fn clipping_window(v in -1e-8..1e-8f64) {
        let c = clip_probability(v).unwrap();
        prop_assert!((0.0..=1.0).contains(&c));
        let c = clip_probability(1.0 + v.abs()).unwrap();
        prop_assert_eq!(c, 1.0);
    }
}

#[test]
fn clipping_rejects_large_excursions() {
    assert!(clip_probability(-1e-6).is_err());
    assert!(clip_probability(1.0 + 1e-6).is_err());
}

#[test]
fn nystrom_node_doubling() {
    for s in [-6.0, -3.0, 0.0, 2.0] {
        let a = airy_f2_fredholm(s, 80).unwrap().value;
        let b = airy_f2_fredholm(s, 160).unwrap().value;
        assert!((a - b).abs() < 1e-9, "s={s}: {a} vs {b}");
    }
}

#[test]
fn painleve_start_point_sensitivity() {
    let base = painleve_f2(0.0, 8.0).unwrap();
    for x0 in [7.0, 9.0] {
        let v = painleve_f2(0.0, x0).unwrap();
        assert!((v - base).abs() < 1e-9, "x0={x0}: {v} vs {base}");
    }
}

#[test]
fn tracy_widom_reference_points() {
    // F2(-2) and F2(0) from the Airy-kernel determinant at high resolution
    let a = tracy_widom_f2(-2.0, TwMethod::Fredholm).unwrap();
    let b = tracy_widom_f2(0.0, TwMethod::Painleve).unwrap();
    assert!((a - 0.413_224_142_5).abs() < 1e-9);
    assert!((b - 0.969_372_828_4).abs() < 1e-9);
    assert!(tracy_widom_f2(11.0, TwMethod::Fredholm).is_err());
}

#[test]
fn airy_kernel_diagonal_is_the_limit() {
    for x in [-2.0, 0.0, 1.5] {
        let d = airy_kernel(x, x).unwrap();
        // symmetric differences remove the O(h) term, Richardson the O(h^2) one
        let sym = |h: f64| 0.5 * (airy_kernel(x, x + h).unwrap() + airy_kernel(x, x - h).unwrap());
        let (h1, h2) = (1e-3f64, 1e-4f64);
        let ext = (sym(h2) * h1 * h1 - sym(h1) * h2 * h2) / (h1 * h1 - h2 * h2);
        assert!((d - ext).abs() < 1e-8, "x={x}: {d} vs {ext}");
    }
}

#[test]
fn crossover_monotone_in_r() {
    for t in [1.0, 10.0] {
        let v: Vec<f64> = (0..=16).map(|i| kpz_crossover(-4.0 + 0.5 * i as f64, t).unwrap()).collect();
        assert!(v.windows(2).all(|w| w[1] >= w[0]), "t={t}: {v:?}");
        assert!(v.iter().all(|x| (0.0..=1.0 + tol::CROSSOVER_RANGE).contains(x)));
    }
}

/// E[exp(-u e^{B})] with B ~ N(0, tau), by Gauss-Legendre on +-12 sigma.
fn lognormal_laplace(u: f64, tau: f64) -> f64 {
    let s = tau.sqrt();
    let f = |x: f64| (-u * (s * x).exp()).exp() * (-x * x / 2.0).exp() / (2.0 * PI).sqrt();
    quad::gl_integrate(f, -12.0, 12.0, 400)
}

#[test]
fn semidiscrete_det_at_n1_is_lognormal() {
    // at n = 1 the determinant is E[exp(-u e^{B_tau})] with B_tau ~ N(0, tau)
    for u in [0.5, 1.0, 2.0] {
        let d = semidiscrete_laplace_det(C64::new(u, 0.0), 0.5, 1).unwrap().value;
        let want = lognormal_laplace(u, 0.5);
        assert!((d - want).abs() < 1e-10, "u={u}: {d} vs {want}");
    }
}

#[test]
fn kernel_spec_validation() {
    let q = qp(0.5);
    assert!(KernelSpec::QLaplaceMb { q, zeta: C64::new(0.5, 0.0), t: 1.0, n: 1 }.validate().is_err());
    assert!(KernelSpec::SemidiscreteKu { u: C64::new(-1.0, 0.0), tau: 1.0, n: 1 }.validate().is_err());
    assert!(KernelSpec::CrossoverKs { s: -1.0, t: 1.0 }.validate().is_err());
    assert!(KernelSpec::Airy.validate().is_ok());
}
