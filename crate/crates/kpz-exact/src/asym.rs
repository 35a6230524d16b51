//! Laplace's method, Lyapunov exponents of the semi-discrete SHE and the
//! intermittency diagnostics built from them.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::contour;
use crate::error::{domain, Error, Result};
use crate::quad;
use crate::specfn::polygamma;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaddleReport {
    pub n: f64,
    pub critical_point: f64,
    pub f_at_c: f64,
    pub f2_at_c: f64,
    /// sqrt(2 pi / (-n f''(c))) g(c) e^{n f(c)}, scaled by e^{-n f(c)}.
    pub approx_value: f64,
    /// int g e^{n f} by adaptive quadrature, scaled by e^{-n f(c)}.
    pub quadrature_value: f64,
    pub ratio: f64,
}

const PRESCAN: usize = 4001;

/// Locates the unique interior maximum of f on [a, b].
pub fn interior_maximum<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Result<f64> {
    if !(b > a) {
        return Err(Error::InvalidConfig(format!("empty interval [{a}, {b}]")));
    }
    let h = (b - a) / (PRESCAN - 1) as f64;
    let v: Vec<f64> = (0..PRESCAN).map(|i| f(a + i as f64 * h)).collect();
    let mut peaks = Vec::new();
    for i in 1..PRESCAN - 1 {
        if v[i] > v[i - 1] && v[i] >= v[i + 1] {
            peaks.push(i);
        }
    }
    if peaks.len() != 1 {
        return domain(format!("expected one interior maximum, found {}", peaks.len()));
    }
    let i = peaks[0];
    if v[0] > v[i] || v[PRESCAN - 1] > v[i] {
        return domain("the maximum sits at an endpoint");
    }
    // golden section on the bracketing cells
    let (mut lo, mut hi) = (a + (i - 1) as f64 * h, a + (i + 1) as f64 * h);
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if hi - lo < 1e-13 * (1.0 + lo.abs()) {
            break;
        }
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Second derivative by a fourth-order central difference.
pub fn second_derivative<F: Fn(f64) -> f64>(f: &F, x: f64) -> f64 {
    let h = 1e-3 * (1.0 + x.abs());
    (-f(x + 2.0 * h) + 16.0 * f(x + h) - 30.0 * f(x) + 16.0 * f(x - h) - f(x - 2.0 * h)) / (12.0 * h * h)
}

/// Compares the Laplace approximation of int_a^b g e^{n f} with adaptive
/// quadrature for each n.
pub fn laplace_estimate<F, G>(f: F, g: G, a: f64, b: f64, n_values: &[f64]) -> Result<Vec<SaddleReport>>
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    let c = interior_maximum(&f, a, b)?;
    let fc = f(c);
    let f2 = second_derivative(&f, c);
    if !(f2 < 0.0) {
        return domain(format!("f''(c) = {f2} is not negative"));
    }
    n_values
        .iter()
        .map(|&n| {
            let approx = (2.0 * PI / (-n * f2)).sqrt() * g(c);
            let integrand = |x: f64| {
                let e = n * (f(x) - fc);
                if e.is_finite() {
                    g(x) * e.exp()
                } else {
                    0.0
                }
            };
            // split at c so the peak is a panel endpoint
            let quad = quad::adaptive(&integrand, a, c, 1e-13)? + quad::adaptive(&integrand, c, b, 1e-13)?;
            Ok(SaddleReport { n, critical_point: c, f_at_c: fc, f2_at_c: f2, approx_value: approx, quadrature_value: quad, ratio: approx / quad })
        })
        .collect()
}

/// Stirling's formula as a Laplace problem: n! = n^{n+1} int_0^inf e^{n(log y - y)} dy.
/// Returns sqrt(2 pi n) n^n e^{-n} / n!.
pub fn stirling_ratio(n: u32) -> f64 {
    let exact: f64 = (1..=n).map(|k| k as f64).product();
    let nf = n as f64;
    (2.0 * PI * nf).sqrt() * nf.powf(nf) * (-nf).exp() / exact
}

/// H_k(z) = k(k-3)/2 + k z - nu sum_{i<k} log(z + i).
pub fn h_k(nu: f64, k: usize, z: f64) -> f64 {
    let kf = k as f64;
    kf * (kf - 3.0) / 2.0 + kf * z - nu * (0..k).map(|i| (z + i as f64).ln()).sum::<f64>()
}

pub fn h_k_prime(nu: f64, k: usize, z: f64) -> f64 {
    k as f64 - nu * (0..k).map(|i| 1.0 / (z + i as f64)).sum::<f64>()
}

pub fn h_k_second(nu: f64, k: usize, z: f64) -> f64 {
    nu * (0..k).map(|i| 1.0 / (z + i as f64).powi(2)).sum::<f64>()
}

fn check_nu(nu: f64) -> Result<()> {
    if !(nu > 0.0) || !nu.is_finite() {
        return domain(format!("nu must be positive, got {nu}"));
    }
    Ok(())
}

/// The unique positive root of H_k'(z) = 0.
pub fn critical_point(nu: f64, k: usize) -> Result<f64> {
    check_nu(nu)?;
    if k == 0 || k > 20 {
        return Err(Error::InvalidConfig(format!("k must lie in 1..=20, got {k}")));
    }
    let mut lo = 1e-8;
    let mut hi = 1.0;
    while h_k_prime(nu, k, hi) <= 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if h_k_prime(nu, k, mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-6 * hi {
            break;
        }
    }
    let mut z = 0.5 * (lo + hi);
    for _ in 0..50 {
        let step = h_k_prime(nu, k, z) / h_k_second(nu, k, z);
        let next = (z - step).clamp(lo, hi);
        if (next - z).abs() < 1e-16 * z {
            z = next;
            break;
        }
        z = next;
    }
    Ok(z)
}

/// gamma_k(nu) = H_k(z_{c,k}).
pub fn gamma_k(nu: f64, k: usize) -> Result<f64> {
    let z = critical_point(nu, k)?;
    Ok(h_k(nu, k, z))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlmostSure {
    pub gamma_as: f64,
    pub s_of_nu: f64,
    pub d_of_nu: f64,
}

/// tilde gamma_1(nu) = -3/2 + inf_{s>0} (s - nu psi(s)), the minimiser s(nu)
/// and d(nu) = (-nu psi''(s)/2)^{1/3}.
pub fn gamma_as(nu: f64) -> Result<AlmostSure> {
    check_nu(nu)?;
    // nu psi'(s) = 1; psi' decreases from +inf to 0
    let g = |s: f64| nu * polygamma(s, 1).expect("s > 0") - 1.0;
    let mut lo = 1e-6;
    while g(lo) <= 0.0 {
        lo /= 10.0;
    }
    let mut hi = 1.0;
    while g(hi) > 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-8 * hi {
            break;
        }
    }
    let mut s = 0.5 * (lo + hi);
    for _ in 0..50 {
        let d = nu * polygamma(s, 2)?;
        let next = (s - g(s) / d).clamp(lo, hi);
        if (next - s).abs() < 1e-16 * s {
            s = next;
            break;
        }
        s = next;
    }
    let value = -1.5 + s - nu * polygamma(s, 0)?;
    let d = (-nu * polygamma(s, 2)? / 2.0).cbrt();
    Ok(AlmostSure { gamma_as: value, s_of_nu: s, d_of_nu: d })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovProfile {
    pub nu: f64,
    pub gamma_as: f64,
    /// gamma_k for k = 1..=k_max.
    pub gamma_k: Vec<f64>,
    pub s_of_nu: f64,
    pub d_of_nu: f64,
    /// tilde gamma_1 <= gamma_1 <= gamma_2/2 <= ...
    pub weakly_ordered: bool,
    /// Smallest gap in the chain tilde gamma_1, gamma_1, gamma_2/2, ...
    pub min_gap: f64,
    /// For each adjacent pair, whether some alpha has gamma_k/k < alpha < gamma_{k+1}/(k+1).
    pub alpha_windows: Vec<bool>,
    /// Coefficient of k^2 in a least-squares fit of gamma_k on (1, k, k^2).
    pub quadratic_coefficient: f64,
}

impl LyapunovProfile {
    /// tilde gamma_1, gamma_1, gamma_2/2, ..., gamma_kmax/kmax.
    pub fn chain(&self) -> Vec<f64> {
        let mut c = vec![self.gamma_as];
        c.extend(self.gamma_k.iter().enumerate().map(|(i, g)| g / (i + 1) as f64));
        c
    }
}

pub fn intermittency_report(nu: f64, k_max: usize) -> Result<LyapunovProfile> {
    if k_max == 0 || k_max > 6 {
        return Err(Error::InvalidConfig(format!("k_max must lie in 1..=6, got {k_max}")));
    }
    let a = gamma_as(nu)?;
    let gk: Vec<f64> = (1..=k_max).map(|k| gamma_k(nu, k)).collect::<Result<_>>()?;
    let mut profile = LyapunovProfile {
        nu,
        gamma_as: a.gamma_as,
        gamma_k: gk.clone(),
        s_of_nu: a.s_of_nu,
        d_of_nu: a.d_of_nu,
        weakly_ordered: true,
        min_gap: f64::INFINITY,
        alpha_windows: Vec::new(),
        quadratic_coefficient: f64::NAN,
    };
    let chain = profile.chain();
    for w in chain.windows(2) {
        let gap = w[1] - w[0];
        profile.weakly_ordered &= gap >= -1e-12;
        profile.min_gap = profile.min_gap.min(gap);
    }
    profile.alpha_windows = chain[1..].windows(2).map(|w| w[1] > w[0]).collect();
    if k_max >= 3 {
        let x = DMatrix::from_fn(k_max, 3, |i, j| ((i + 1) as f64).powi(j as i32));
        let y = DVector::from_vec(gk);
        let xt = x.transpose();
        if let Some(beta) = (&xt * &x).lu().solve(&(&xt * y)) {
            profile.quadratic_coefficient = beta[2];
        }
    }
    Ok(profile)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GrowthReport {
    pub tau: f64,
    pub nu: f64,
    pub z_c: f64,
    pub h2_at_zc: f64,
    /// log |lambda = (2) term| / tau.
    pub observed_rate: f64,
    /// observed rate plus the Gaussian prefactor correction log(2 pi tau H''(z_c)) / (2 tau).
    pub corrected_rate: f64,
    pub relative_error: f64,
    pub corrected_relative_error: f64,
}

/// Growth rate of the lambda = (2) residue term of E[z(tau, nu tau)^2],
/// evaluated on the circle through the critical point.
pub fn lyapunov_growth(nu: f64, tau: f64) -> Result<GrowthReport> {
    check_nu(nu)?;
    let n = (nu * tau).round();
    if n < 1.0 || (n - nu * tau).abs() > 1e-9 {
        return Err(Error::InvalidConfig(format!("nu * tau = {} must be a positive integer", nu * tau)));
    }
    let zc = critical_point(nu, 2)?;
    if zc >= 1.0 {
        return domain(format!("critical point {zc} outside the string contour range (0,1)"));
    }
    let [_, t2] = contour::she_second_moment_unnested(n as i64, tau, zc)?;
    let h = h_k(nu, 2, zc);
    let rate = t2.norm().ln() / tau;
    let corrected = rate + (2.0 * PI * tau * h_k_second(nu, 2, zc)).ln() / (2.0 * tau);
    Ok(GrowthReport {
        tau,
        nu,
        z_c: zc,
        h2_at_zc: h,
        observed_rate: rate,
        corrected_rate: corrected,
        relative_error: ((rate - h) / h).abs(),
        corrected_relative_error: ((corrected - h) / h).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma1_closed_form() {
        for nu in [0.3, 1.0, 2.5] {
            let g = gamma_k(nu, 1).unwrap();
            assert!((g - (nu - 1.0 - nu * f64::ln(nu))).abs() < 1e-12);
        }
    }

    #[test]
    fn k2_root() {
        for nu in [0.5, 1.0, 2.0] {
            let z = critical_point(nu, 2).unwrap();
            let closed = 0.5 * (nu - 1.0 + f64::sqrt(nu * nu + 1.0));
            assert!((z - closed).abs() < 1e-12, "{z} {closed}");
        }
    }

    #[test]
    fn gaussian_laplace() {
        let r = laplace_estimate(|x| -x * x, |_| 1.0, -1.0, 1.0, &[100.0]).unwrap();
        assert!((r[0].ratio - 1.0).abs() < 5e-3);
        assert!(r[0].critical_point.abs() < 1e-8);
    }

    #[test]
    fn bimodal_rejected() {
        let e = laplace_estimate(|x: f64| (3.0 * x).cos(), |_| 1.0, -3.0, 3.0, &[10.0]);
        assert!(matches!(e, Err(Error::Domain(_))));
    }
}
