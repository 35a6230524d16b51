//! Chaos-series variances for the continuum SHE, Dirichlet simplex
//! integrals and the white-noise scaling law.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Exp1};

use crate::error::{domain, Error, Result};
use crate::mc::{self, MCEstimate, RngStream};
use crate::quad;
use crate::specfn::{gamma, heat_kernel_sq};
use crate::Estimate;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DirichletMode {
    Formula,
    MonteCarlo { samples: usize, stream: RngStream },
}

fn check_alpha(alpha: &[f64]) -> Result<()> {
    if alpha.is_empty() {
        return Err(Error::InvalidConfig("alpha must be nonempty".into()));
    }
    if let Some(a) = alpha.iter().find(|a| !(**a > 0.0)) {
        return domain(format!("Dirichlet parameters must be positive, got {a}"));
    }
    Ok(())
}

/// prod Gamma(alpha_i) / Gamma(sum alpha_i).
pub fn dirichlet_formula(alpha: &[f64]) -> Result<f64> {
    check_alpha(alpha)?;
    let log: f64 = alpha.iter().map(|a| ln_gamma(*a)).sum::<f64>() - ln_gamma(alpha.iter().sum());
    Ok(log.exp())
}

fn ln_gamma(x: f64) -> f64 {
    gamma(x).abs().ln()
}

/// Uniform point on the simplex {x_i >= 0, sum x_i = 1} from normalised exponentials.
pub fn uniform_simplex_point<R: Rng + ?Sized>(rng: &mut R, out: &mut [f64]) {
    let mut s = 0.0;
    for x in out.iter_mut() {
        *x = Exp1.sample(rng);
        s += *x;
    }
    for x in out.iter_mut() {
        *x /= s;
    }
}

/// int_{simplex} prod x_i^{alpha_i - 1} dx against the (d-1)-dimensional
/// coordinate measure, either in closed form or as vol * E[prod x_i^{alpha_i-1}].
pub fn dirichlet_integral(alpha: &[f64], mode: DirichletMode) -> Result<Estimate<f64>> {
    check_alpha(alpha)?;
    match mode {
        DirichletMode::Formula => Ok(Estimate::new(dirichlet_formula(alpha)?, 0.0)),
        DirichletMode::MonteCarlo { samples, stream } => {
            let e = dirichlet_mc(alpha, samples, stream)?;
            Ok(Estimate::new(e.mean, e.stderr))
        }
    }
}

pub fn dirichlet_mc(alpha: &[f64], samples: usize, stream: RngStream) -> Result<MCEstimate> {
    check_alpha(alpha)?;
    let d = alpha.len();
    let vol = 1.0 / gamma(d as f64);
    let alpha = alpha.to_vec();
    let e = mc::run(samples, stream, |rng| {
        let mut x = vec![0.0; d];
        uniform_simplex_point(rng, &mut x);
        x.iter().zip(&alpha).map(|(x, a)| x.powf(a - 1.0)).product::<f64>() * vol
    });
    Ok(e)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChaosMode {
    Formula,
    SimplexMc,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChaosVariance {
    pub k: usize,
    pub t: f64,
    pub x: f64,
    pub value: f64,
    pub stderr: f64,
}

/// int_{Delta_k(1)} prod_{j=1}^{k+1} (s_j - s_{j-1})^{-1/2} ds with s_0 = 0,
/// s_{k+1} = 1: a Dirichlet integral with k+1 parameters 1/2.
pub fn simplex_integral(k: usize) -> f64 {
    let h = 0.5 * (k as f64 + 1.0);
    PI.sqrt().powi(k as i32 + 1) / gamma(h)
}

/// E[I_k(t,x)^2] = t^{k/2} (4 pi)^{-k/2} p^2(t,x) int_{Delta_k(1)} ...
pub fn chaos_variance(k: usize, t: f64, x: f64, mode: ChaosMode, samples: usize, stream: RngStream) -> Result<ChaosVariance> {
    let p2 = heat_kernel_sq(t, x)?;
    if k == 0 {
        return Ok(ChaosVariance { k, t, x, value: p2, stderr: 0.0 });
    }
    let pref = (t / (4.0 * PI)).powf(k as f64 / 2.0) * p2;
    let (integral, err) = match mode {
        ChaosMode::Formula => (simplex_integral(k), 0.0),
        ChaosMode::SimplexMc => {
            if k > 8 {
                return Err(Error::InvalidConfig(format!("simplex Monte Carlo is capped at k = 8, got {k}")));
            }
            // The simplex Delta_k(1) has the k+1 increments as Dirichlet(1,...,1) coordinates.
            let e = dirichlet_mc(&vec![0.5; k + 1], samples, stream)?;
            (e.mean, e.stderr)
        }
    };
    Ok(ChaosVariance { k, t, x, value: pref * integral, stderr: pref * err })
}

/// The k = 2 variance from the proof's reduction: the space integrals via
/// the heat-kernel identity, the two time integrals by Gauss-Legendre after
/// s = a + (b - a) sin^2(theta) on each level.
pub fn chaos_variance_k2_iterated(t: f64, x: f64, nodes: usize) -> Result<f64> {
    let p2 = heat_kernel_sq(t, x)?;
    // after integrating y_2 then y_1 the s-integrand is
    // sqrt(t/(4 pi (t-s1) s1)) sqrt((t-s1)/(4 pi (t-s2)(s2-s1)))
    let inner = |s1: f64, s2: f64| (t / (4.0 * PI * (t - s1) * s1)).sqrt() * ((t - s1) / (4.0 * PI * (t - s2) * (s2 - s1))).sqrt();
    let half = PI / 2.0;
    let outer = |th2: f64| {
        let s2 = t * th2.sin().powi(2);
        let ds2 = 2.0 * t * th2.sin() * th2.cos();
        let f = |th1: f64| {
            let s1 = s2 * th1.sin().powi(2);
            let ds1 = 2.0 * s2 * th1.sin() * th1.cos();
            inner(s1, s2) * ds1
        };
        quad::gl_integrate(f, 0.0, half, nodes) * ds2
    };
    Ok(quad::gl_integrate(outer, 0.0, half, nodes) * p2)
}

/// The lemma's closed form as printed: t^{k/2} (4 pi)^{-k/2} Gamma(1/2)^k / Gamma(k/2) p^2.
pub fn chaos_variance_printed(k: usize, t: f64, x: f64) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidConfig("the printed form needs k >= 1".into()));
    }
    let kf = k as f64;
    Ok((t / (4.0 * PI)).powf(kf / 2.0) * PI.sqrt().powi(k as i32) / gamma(kf / 2.0) * heat_kernel_sq(t, x)?)
}

/// Least-squares slope of log E[I_k^2(eps t, eps^{1/2} x)] against log eps.
pub fn scaling_slope(k: usize, t: f64, x: f64, eps: &[f64]) -> Result<f64> {
    if eps.len() < 2 {
        return Err(Error::InvalidConfig("need at least two eps values".into()));
    }
    let pts: Vec<(f64, f64)> = eps
        .iter()
        .map(|&e| {
            let v = chaos_variance(k, e * t, e.sqrt() * x, ChaosMode::Formula, 0, RngStream::new(0, 0))?;
            Ok((e.ln(), v.value.ln()))
        })
        .collect::<Result<_>>()?;
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Ok(sxy / sxx)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecondMoment {
    pub partial_sum: f64,
    pub ratio_to_p2: f64,
    pub tail_bound: f64,
}

/// Partial sums of E[z(t,x)^2] = sum_k E[I_k^2(t,x)] up to k = K, with a
/// geometric tail bound from the ratio of consecutive terms.
pub fn she_second_moment(t: f64, x: f64, k_max: usize) -> Result<SecondMoment> {
    let p2 = heat_kernel_sq(t, x)?;
    // a_k = E[I_k^2]/p^2 = sqrt(pi) (t/4)^{k/2} / Gamma((k+1)/2)
    let a = |k: usize| -> f64 {
        if k == 0 {
            1.0
        } else {
            PI.sqrt() * (t / 4.0).powf(k as f64 / 2.0) / gamma(0.5 * (k as f64 + 1.0))
        }
    };
    let ratio: f64 = (0..=k_max).map(a).sum();
    let r = a(k_max + 2) / a(k_max + 1);
    if r >= 1.0 {
        return Err(Error::Truncation(format!("terms still growing at K = {k_max}")));
    }
    let tail = a(k_max + 1) / (1.0 - r);
    Ok(SecondMoment { partial_sum: ratio * p2, ratio_to_p2: ratio, tail_bound: tail * p2 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dirichlet_values() {
        assert!((dirichlet_formula(&[1.0, 1.0]).unwrap() - 1.0).abs() < 1e-14);
        assert!((dirichlet_formula(&[0.5, 0.5]).unwrap() - PI).abs() < 1e-13);
        assert!((dirichlet_formula(&[2.0, 3.0]).unwrap() - 1.0 / 12.0).abs() < 1e-14);
        assert!(dirichlet_formula(&[0.0, 1.0]).is_err());
    }

    #[test]
    fn k1_variance_by_hand() {
        // int_0^1 (s(1-s))^{-1/2} ds = pi
        let v = chaos_variance(1, 1.0, 0.0, ChaosMode::Formula, 0, RngStream::new(0, 0)).unwrap();
        let p2 = heat_kernel_sq(1.0, 0.0).unwrap();
        assert!((v.value - (1.0 / (4.0 * PI)).sqrt() * PI * p2).abs() < 1e-14);
    }

    #[test]
    fn second_moment_small_t() {
        let s = she_second_moment(1e-8, 0.0, 10).unwrap();
        assert!((s.ratio_to_p2 - 1.0).abs() < 1e-3);
    }
}
