use kpz_exact::specfn::*;
use kpz_exact::C64;
use proptest::prelude::*;

fn qp(v: f64) -> QParam {
    QParam::new(v).unwrap()
}

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pochhammer_recurrence(re in -2.0..2.0f64, im in -2.0..2.0f64, q in 0.05..0.95f64, n in 0usize..64) {
        let a = c(re, im);
        let pol = TruncationPolicy::default();
        let pn = q_pochhammer(a, qp(q), PochOrder::Finite(n), pol).unwrap().value;
        let pn1 = q_pochhammer(a, qp(q), PochOrder::Finite(n + 1), pol).unwrap().value;
        let want = pn * (1.0 - q.powi(n as i32) * a);
        prop_assert!((pn1 - want).norm() <= 1e-14 * want.norm().max(1e-300) + 1e-300);
    }

    #[test]
    fn q_binomial_theorem(re in -2.0..2.0f64, x in -0.9..0.9f64, qi in 0usize..3) {
        let q = [0.3, 0.5, 0.8][qi];
        let a = c(re, 0.0);
        let x = c(x, 0.0);
        let mut sum = C64::new(0.0, 0.0);
        let mut xk = C64::new(1.0, 0.0);
        for k in 0..2000 {
            sum += qpoch(a, q, k) / qpoch(c(q, 0.0), q, k) * xk;
            xk *= x;
            if xk.norm() < 1e-18 {
                break;
            }
        }
        let want = qpoch_inf(a * x, q) / qpoch_inf(x, q);
        prop_assert!((sum - want).norm() <= 1e-10 * want.norm().max(1.0));
    }

    #[test]
    fn e_q_taylor(re in -0.3..0.3f64, im in -0.3..0.3f64, q in 0.1..0.9f64) {
        let x = c(re, im);
        let prod = q_exponential(x, qp(q), QExpVariant::LittleE, TruncationPolicy::default()).unwrap().value;
        let mut sum = C64::new(0.0, 0.0);
        let mut xk = C64::new(1.0, 0.0);
        for k in 0..200 {
            sum += xk / q_factorial(k, qp(q));
            xk *= x;
        }
        prop_assert!((sum - prod).norm() <= 1e-10);
    }

    #[test]
    fn e_q_times_big_e(re in -0.8..0.8f64, im in -0.8..0.8f64, q in 0.1..0.9f64) {
        let x = c(re, im);
        let pol = TruncationPolicy::default();
        let e = q_exponential(x, qp(q), QExpVariant::LittleE, pol).unwrap().value;
        let big = q_exponential(-x, qp(q), QExpVariant::BigE, pol).unwrap().value;
        prop_assert!((e * big - 1.0).norm() <= 1e-12);
    }

    #[test]
    fn gamma_recurrence(re in 0.1..12.0f64, im in -6.0..6.0f64) {
        let z = c(re, im);
        let g = complex_gamma(z).unwrap();
        let g1 = complex_gamma(z + 1.0).unwrap();
        prop_assert!((g1 - z * g).norm() <= 1e-12 * g1.norm());
    }

    #[test]
    fn polygamma_recurrences(s in 0.05..30.0f64) {
        let d0 = polygamma(s + 1.0, 0).unwrap() - polygamma(s, 0).unwrap() - 1.0 / s;
        let d1 = polygamma(s + 1.0, 1).unwrap() - polygamma(s, 1).unwrap() + 1.0 / (s * s);
        let d2 = polygamma(s + 1.0, 2).unwrap() - polygamma(s, 2).unwrap() - 2.0 / (s * s * s);
        prop_assert!(d0.abs() <= 1e-12 * (1.0 / s).max(1.0));
        prop_assert!(d1.abs() <= 1e-12 * (1.0 / (s * s)).max(1.0));
        prop_assert!(d2.abs() <= 1e-12 * (2.0 / (s * s * s)).max(1.0));
    }

    #[test]
    fn airy_equation(x in -12.0..12.0f64) {
        let h = 1e-3;
        let d = |y: f64| airy(y, true).unwrap();
        let d2 = (d(x - 2.0 * h) - 8.0 * d(x - h) + 8.0 * d(x + h) - d(x + 2.0 * h)) / (12.0 * h);
        let res = d2 - x * airy(x, false).unwrap();
        prop_assert!(res.abs() <= 1e-8, "x = {x}: residual {res:e}");
    }
}

#[test]
fn q_outside_unit_interval_is_rejected() {
    for bad in [0.0, 1.0, -0.5, 1.5, f64::NAN] {
        let e = QParam::new(bad).unwrap_err();
        assert!(e.to_string().contains("q must lie in (0,1)"), "{e}");
    }
}

#[test]
fn truncation_policy_bounds() {
    assert!(TruncationPolicy::new(1e-20, 100).is_err());
    assert!(TruncationPolicy::new(1e-12, 4).is_err());
    assert!(TruncationPolicy::new(1e-12, 8).is_ok());
}

#[test]
fn infinite_product_error_is_honest() {
    let pol = TruncationPolicy::new(1e-6, 1000).unwrap();
    let a = c(0.9, 0.0);
    let rough = q_pochhammer(a, qp(0.7), PochOrder::Infinite, pol).unwrap();
    let fine = qpoch_inf(a, 0.7);
    assert!((rough.value - fine).norm() <= rough.error);
}

#[test]
fn e_q_pole_is_a_domain_error() {
    // (1-q) x = 1
    let q = 0.5;
    assert!(q_exponential(c(2.0, 0.0), qp(q), QExpVariant::LittleE, TruncationPolicy::default()).is_err());
}

#[test]
fn heat_kernel_semigroup() {
    // int p(s, x - y) p(t, y) dy = p(s + t, x)
    let (s, t, x) = (0.3, 0.7, 0.4);
    let f = |y: f64| heat_kernel(s, x - y).unwrap() * heat_kernel(t, y).unwrap();
    let v = kpz_exact::quad::adaptive(&f, -12.0, 12.0, 1e-14).unwrap();
    assert!((v - heat_kernel(s + t, x).unwrap()).abs() < 1e-12);
}

#[test]
fn airy_reference_values() {
    // Ai(0) = 3^{-2/3}/Gamma(2/3), Ai'(0) = -3^{-1/3}/Gamma(1/3)
    let a0 = 3f64.powf(-2.0 / 3.0) / gamma(2.0 / 3.0);
    let b0 = -(3f64.powf(-1.0 / 3.0)) / gamma(1.0 / 3.0);
    assert!((airy(0.0, false).unwrap() - a0).abs() < 1e-15);
    assert!((airy(0.0, true).unwrap() - b0).abs() < 1e-15);
    assert!(airy(250.0, false).is_err());
}
