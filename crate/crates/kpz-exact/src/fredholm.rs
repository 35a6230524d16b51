//! Fredholm determinants on contours and on real rays, the q-Laplace
//! transform and its inversion, Tracy-Widom F_2 and the KPZ crossover.

use std::f64::consts::PI;

use nalgebra::{DMatrix, Vector4};
use ode_solvers::dop_shared::OutputType;
use ode_solvers::{Dopri5, System};
use rayon::prelude::*;

use crate::contour::{self, circle_points, Contour, ContourKind, Model, NestedContourSpec};
use crate::error::{domain, Error, Result};
use crate::procsim::OrderedConfig;
use crate::specfn::{airy_pair, complex_ln_gamma, q_factorial, qpoch_inf, sin_pi, QParam};
use crate::{linalg, quad, tol, Estimate, C64};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelName {
    QLaplaceSummed,
    QLaplaceMb,
    SemidiscreteKu,
    CrossoverKs,
    Airy,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelSpec {
    /// sum_{lambda >= 1} g(q^lambda) ((1-q) zeta)^lambda.
    QLaplaceSummed { q: QParam, zeta: C64, t: f64, n: i64 },
    /// Mellin-Barnes line integral on Re s = 1/2.
    QLaplaceMb { q: QParam, zeta: C64, t: f64, n: i64 },
    SemidiscreteKu { u: C64, tau: f64, n: i64 },
    /// `s` is the Laplace variable S.
    CrossoverKs { s: f64, t: f64 },
    Airy,
}

impl KernelSpec {
    pub fn name(&self) -> KernelName {
        match self {
            KernelSpec::QLaplaceSummed { .. } => KernelName::QLaplaceSummed,
            KernelSpec::QLaplaceMb { .. } => KernelName::QLaplaceMb,
            KernelSpec::SemidiscreteKu { .. } => KernelName::SemidiscreteKu,
            KernelSpec::CrossoverKs { .. } => KernelName::CrossoverKs,
            KernelSpec::Airy => KernelName::Airy,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::QLaplaceSummed { zeta, n, .. } | KernelSpec::QLaplaceMb { zeta, n, .. } => {
                if zeta.im == 0.0 && zeta.re > 0.0 {
                    return domain(format!("zeta = {zeta} lies on the positive real axis"));
                }
                if n < 1 {
                    return Err(Error::InvalidConfig(format!("n must be >= 1, got {n}")));
                }
            }
            KernelSpec::SemidiscreteKu { u, n, tau } => {
                if u.re < 0.0 {
                    return domain(format!("Re u must be >= 0, got {u}"));
                }
                if n < 1 || !(tau > 0.0) {
                    return Err(Error::InvalidConfig(format!("need n >= 1 and tau > 0, got n={n}, tau={tau}")));
                }
            }
            KernelSpec::CrossoverKs { s, t } => {
                if s < 0.0 || !(t > 0.0) {
                    return domain(format!("need S >= 0 and t > 0, got S={s}, t={t}"));
                }
            }
            KernelSpec::Airy => {}
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FredholmMethod {
    Series { l_max: usize },
    Nystrom { nodes: usize, ray_cutoff: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FredholmValue {
    pub value: f64,
    pub method: FredholmMethod,
    pub error_estimate: f64,
}

/// Default contour for the q-Laplace kernels: a circle around 1 whose radius
/// keeps |w q^s| away from |w'| on Re s = 1/2.
pub fn qlaplace_contour(q: QParam, nodes: usize) -> Result<Contour> {
    let sq = q.get().sqrt();
    Contour::circle(ONE, 0.5 * (1.0 - sq) / (1.0 + sq), nodes)
}

/// A(w, u) = e^{(u-1) t w} ((u w; q)_inf / (w; q)_inf)^n.
fn qlaplace_a(w: C64, u: C64, q: f64, t: f64, n: i64) -> C64 {
    ((u - 1.0) * t * w).exp() * (qpoch_inf(u * w, q) / qpoch_inf(w, q)).powi(n as i32)
}

/// pi / sin(-pi s).
fn mb_factor(s: C64) -> C64 {
    -PI / sin_pi(s)
}

/// Log of -(1-q) zeta on the principal branch.
fn log_minus(x: C64) -> C64 {
    (-x).ln()
}

/// Line nodes s = 1/2 + i y for the Mellin-Barnes integrals, with weights
/// for ds / 2 pi i.
fn mb_line(decay: f64, bound: f64) -> (Vec<C64>, Vec<f64>) {
    let l = contour::vline_half_height(decay, bound, 1e-15).min(400.0);
    let c = Contour::vline(0.5, l, 16).expect("valid line");
    c.points().into_iter().map(|(s, w)| (s, w.re)).unzip()
}

/// Evaluates a kernel at one pair of points.
pub fn kernel_eval(spec: &KernelSpec, w: C64, wp: C64) -> Result<Estimate<C64>> {
    spec.validate()?;
    match *spec {
        KernelSpec::QLaplaceSummed { q, zeta, t, n } => {
            let qv = q.get();
            let x = (1.0 - qv) * zeta;
            // geometric tail: |x|^lambda times a bound on |g|
            let ratio = x.norm();
            if ratio >= 0.95 {
                return domain(format!("|(1-q) zeta| = {ratio} too large for the summed kernel"));
            }
            let mut sum = ZERO;
            let mut xl = ONE;
            let mut ql = 1.0;
            let mut last = f64::INFINITY;
            for _ in 1..10_000 {
                xl *= x;
                ql *= qv;
                let g = ((ql - 1.0) * t * w).exp() / crate::specfn::qpoch(w, qv, ((ql.ln() / qv.ln()).round()) as usize).powi(n as i32)
                    / (w * ql - wp);
                let term = g * xl;
                sum += term;
                last = term.norm();
                if last < 1e-17 * sum.norm().max(1e-300) {
                    break;
                }
            }
            Ok(Estimate::new(sum, last * ratio / (1.0 - ratio)))
        }
        KernelSpec::QLaplaceMb { q, zeta, t, n } => {
            let qv = q.get();
            let lx = log_minus((1.0 - qv) * zeta);
            let decay = PI - lx.im.abs();
            let (s, wt) = mb_line(decay, 10.0);
            let mut sum = ZERO;
            for (s, wt) in s.iter().zip(&wt) {
                let qs = (s * qv.ln()).exp();
                sum += *wt * mb_factor(*s) * (s * lx).exp() * qlaplace_a(w, qs, qv, t, n) / (w * qs - wp);
            }
            Ok(Estimate::new(sum, 1e-13))
        }
        KernelSpec::SemidiscreteKu { u, tau, n } => {
            let grid = KuGrid::new(u, tau, n, &[w])?;
            Ok(Estimate::new(grid.kernel(0, wp), 1e-13))
        }
        KernelSpec::CrossoverKs { s, t } => {
            let k = crossover_kernel_matrix(s, t, &[w.re, wp.re], None)?;
            Ok(Estimate::new(C64::new(k[(0, 1)], 0.0), 1e-13))
        }
        KernelSpec::Airy => Ok(Estimate::new(C64::new(airy_kernel(w.re, wp.re)?, 0.0), 1e-14)),
    }
}

/// (Ai(x)Ai'(y) - Ai'(x)Ai(y))/(x - y), with the diagonal Ai'(x)^2 - x Ai(x)^2.
pub fn airy_kernel(x: f64, y: f64) -> Result<f64> {
    let (ax, apx) = airy_pair(x)?;
    if x == y {
        return Ok(apx * apx - x * ax * ax);
    }
    let (ay, apy) = airy_pair(y)?;
    Ok((ax * apy - apx * ay) / (x - y))
}

/// Mellin-Barnes form of the q-Laplace kernel on a fixed set of contour
/// points, with A(w_i, s) precomputed on one shared line grid.
pub struct QLaplaceMbGrid {
    q: f64,
    pts: Vec<(C64, C64)>,
    s: Vec<C64>,
    sw: Vec<C64>,
    qs: Vec<C64>,
    a: Vec<C64>,
}

impl QLaplaceMbGrid {
    /// `min_decay` bounds pi - |arg(-zeta)| from below over every zeta the
    /// grid will be used for.
    pub fn new(q: QParam, t: f64, n: i64, gamma: &Contour, min_decay: f64) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidConfig(format!("n must be >= 1, got {n}")));
        }
        if !(min_decay > 0.0) {
            return domain("zeta too close to the positive real axis for the Mellin-Barnes line");
        }
        let qv = q.get();
        let pts = gamma.points();
        let (s, w) = mb_line(min_decay, 10.0);
        let sw: Vec<C64> = s.iter().zip(&w).map(|(s, w)| *w * mb_factor(*s)).collect();
        let qs: Vec<C64> = s.iter().map(|s| (s * qv.ln()).exp()).collect();
        let ns = s.len();
        let mut a = vec![ZERO; pts.len() * ns];
        a.par_chunks_mut(ns).enumerate().for_each(|(i, row)| {
            for (k, v) in row.iter_mut().enumerate() {
                *v = qlaplace_a(pts[i].0, qs[k], qv, t, n);
            }
        });
        Ok(QLaplaceMbGrid { q: qv, pts, s, sw, qs, a })
    }

    /// Matrix K(w_i, w_j) wt_j for the given zeta.
    pub fn matrix(&self, zeta: C64) -> Result<Vec<C64>> {
        if zeta.im == 0.0 && zeta.re > 0.0 {
            return domain(format!("zeta = {zeta} lies on the positive real axis"));
        }
        let lx = log_minus((1.0 - self.q) * zeta);
        let ns = self.s.len();
        let f: Vec<C64> = (0..ns).map(|k| self.sw[k] * (self.s[k] * lx).exp()).collect();
        let m = self.pts.len();
        let mut out = vec![ZERO; m * m];
        out.par_chunks_mut(m).enumerate().for_each(|(i, row)| {
            let wi = self.pts[i].0;
            let arow = &self.a[i * ns..(i + 1) * ns];
            let fa: Vec<C64> = (0..ns).map(|k| f[k] * arow[k]).collect();
            let wq: Vec<C64> = self.qs.iter().map(|qs| wi * qs).collect();
            for (j, v) in row.iter_mut().enumerate() {
                let wj = self.pts[j].0;
                let mut sum = ZERO;
                for k in 0..ns {
                    sum += fa[k] / (wq[k] - wj);
                }
                *v = sum * self.pts[j].1;
            }
        });
        Ok(out)
    }

    pub fn det(&self, zeta: C64, l_max: usize) -> Result<(C64, f64)> {
        let m = self.matrix(zeta)?;
        Ok(series_from_matrix(&m, self.pts.len(), l_max))
    }
}

/// The summed kernel continued in zeta: with A(w, u) = sum_i a_i(w) u^i and
/// 1/(w u - w') expanded in u, sum_lambda x^lambda h(q^lambda) becomes
/// sum_j c_j(w, w') x q^j / (1 - x q^j), meromorphic in x = (1-q) zeta with
/// poles only at x = q^{-j}.
pub struct QLaplaceResummed {
    q: f64,
    pts: Vec<(C64, C64)>,
    /// c_j(w_i, w_k), j-fastest.
    coeffs: Vec<C64>,
    jmax: usize,
}

impl QLaplaceResummed {
    pub fn new(q: QParam, t: f64, n: i64, gamma: &Contour) -> Result<Self> {
        let qv = q.get();
        let (center, radius) = match gamma.kind {
            ContourKind::Circle { center, radius } => (center, radius),
            _ => return Err(Error::InvalidConfig("gamma must be a circle".into())),
        };
        if center != ONE || radius >= (1.0 - qv) / (1.0 + qv) {
            return Err(Error::InvalidConfig("gamma must be a circle around 1 of radius below (1-q)/(1+q)".into()));
        }
        let pts = gamma.points();
        let ratio = qv * (1.0 + radius) / (1.0 - radius);
        let jmax = ((1e-17f64).ln() / ratio.ln()).ceil() as usize + 4;
        // Taylor coefficients of the entire function u -> A(w, u)
        let p = 96usize;
        let roots: Vec<C64> = (0..p).map(|k| C64::from_polar(1.0, 2.0 * PI * k as f64 / p as f64)).collect();
        let a: Vec<Vec<C64>> = pts
            .par_iter()
            .map(|(w, _)| {
                let vals: Vec<C64> = roots.iter().map(|u| qlaplace_a(*w, *u, qv, t, n)).collect();
                (0..=jmax.min(p - 1))
                    .map(|i| {
                        let mut s = ZERO;
                        for (k, v) in vals.iter().enumerate() {
                            s += v * roots[(i * k) % p].conj();
                        }
                        s / p as f64
                    })
                    .chain(std::iter::repeat(ZERO))
                    .take(jmax + 1)
                    .collect()
            })
            .collect();
        let m = pts.len();
        let mut coeffs = vec![ZERO; m * m * (jmax + 1)];
        coeffs.par_chunks_mut(m * (jmax + 1)).enumerate().for_each(|(i, block)| {
            let wi = pts[i].0;
            for k in 0..m {
                let wk = pts[k].0;
                let r = wi / wk;
                let mut b = -1.0 / wk;
                let mut bs = vec![ZERO; jmax + 1];
                for v in bs.iter_mut() {
                    *v = b;
                    b *= r;
                }
                for j in 0..=jmax {
                    let mut c = ZERO;
                    for mm in 0..=j {
                        c += a[i][j - mm] * bs[mm];
                    }
                    block[k * (jmax + 1) + j] = c;
                }
            }
        });
        Ok(QLaplaceResummed { q: qv, pts, coeffs, jmax })
    }

    /// Matrix K(w_i, w_k) wt_k at x = (1-q) zeta.
    pub fn matrix_at_x(&self, x: C64) -> Result<Vec<C64>> {
        let mut geo = Vec::with_capacity(self.jmax + 1);
        let mut qj = 1.0;
        for j in 0..=self.jmax {
            let d = 1.0 - x * qj;
            if d.norm() < 1e-12 {
                return domain(format!("x = {x} hits the pole q^-{j}"));
            }
            geo.push(x * qj / d);
            qj *= self.q;
        }
        let m = self.pts.len();
        let jn = self.jmax + 1;
        let mut out = vec![ZERO; m * m];
        out.par_chunks_mut(m).enumerate().for_each(|(i, row)| {
            for (k, v) in row.iter_mut().enumerate() {
                let c = &self.coeffs[(i * m + k) * jn..(i * m + k + 1) * jn];
                let s: C64 = c.iter().zip(&geo).map(|(c, g)| c * g).sum();
                *v = s * self.pts[k].1;
            }
        });
        Ok(out)
    }

    /// det(I + K) at x = (1-q) zeta.
    pub fn det_at_x(&self, x: C64) -> Result<C64> {
        let m = self.matrix_at_x(x)?;
        Ok(linalg::det_identity_plus(&m, self.pts.len(), ONE))
    }

    pub fn kernel(&self, i: usize, k: usize, zeta: C64) -> Result<C64> {
        let m = self.matrix_at_x((1.0 - self.q) * zeta)?;
        Ok(m[i * self.pts.len() + k] / self.pts[k].1)
    }

    pub fn points(&self) -> &[(C64, C64)] {
        &self.pts
    }
}

/// Coefficients of x^l in det(I + x A) from a discrete Fourier transform on
/// |x| = 1; the partial sum up to l_max and |coefficient l_max + 1|.
pub fn series_from_matrix(a: &[C64], n: usize, l_max: usize) -> (C64, f64) {
    let c = det_series_coefficients(a, n);
    let value: C64 = c.iter().take(l_max + 1).sum();
    let err = c.get(l_max + 1).map(|v| v.norm()).unwrap_or(0.0);
    (value, err)
}

/// c_l with det(I + x A) = sum_l c_l x^l; c_l is the l-th Fredholm series term.
pub fn det_series_coefficients(a: &[C64], n: usize) -> Vec<C64> {
    let p = n + 1;
    let d: Vec<C64> = (0..p)
        .into_par_iter()
        .map(|k| linalg::det_identity_plus(a, n, C64::from_polar(1.0, 2.0 * PI * k as f64 / p as f64)))
        .collect();
    (0..p)
        .map(|l| {
            let mut s = ZERO;
            for (k, dk) in d.iter().enumerate() {
                s += dk * C64::from_polar(1.0, -2.0 * PI * ((l * k) % p) as f64 / p as f64);
            }
            s / p as f64
        })
        .collect()
}

/// 1 + sum_{l <= l_max} (1/l!) int det[K(w_i, w_j)], with the l-fold
/// integrals discretised by the trapezoid rule on gamma.
pub fn fredholm_series<K: Fn(C64, C64) -> C64 + Sync>(kernel: K, gamma: &Contour, l_max: usize) -> Result<(C64, FredholmValue)> {
    let pts = gamma.points();
    let m = pts.len();
    let mut a = vec![ZERO; m * m];
    a.par_chunks_mut(m).enumerate().for_each(|(i, row)| {
        for (j, v) in row.iter_mut().enumerate() {
            *v = kernel(pts[i].0, pts[j].0) * pts[j].1;
        }
    });
    let (v, err) = series_from_matrix(&a, m, l_max);
    if err > 1e-3 {
        return Err(Error::Truncation(format!("Fredholm series term {} is still {err:e}", l_max + 1)));
    }
    Ok((v, FredholmValue { value: v.re, method: FredholmMethod::Series { l_max }, error_estimate: err }))
}

/// det(I + sign K) on [s, s + cutoff] with Gauss-Legendre nodes; the error
/// estimate compares against twice the nodes.
pub fn fredholm_nystrom<K: Fn(f64, f64) -> f64 + Sync>(kernel: K, s: f64, cutoff: f64, nodes: usize, sign: f64) -> Result<FredholmValue> {
    let det = |m: usize| -> f64 {
        let (x, w) = quad::gl_nodes(s, s + cutoff, m);
        let sw: Vec<f64> = w.iter().map(|w| w.sqrt()).collect();
        let mut a = vec![0.0; m * m];
        a.par_chunks_mut(m).enumerate().for_each(|(i, row)| {
            for (j, v) in row.iter_mut().enumerate() {
                *v = -sign * sw[i] * kernel(x[i], x[j]) * sw[j];
            }
        });
        linalg::det_identity_minus_real(&a, m)
    };
    let v = det(nodes);
    let v2 = det(2 * nodes);
    if !v.is_finite() {
        return Err(Error::QuadratureNotConverged(format!("Nystrom determinant at s = {s}")));
    }
    Ok(FredholmValue { value: v2, method: FredholmMethod::Nystrom { nodes: 2 * nodes, ray_cutoff: cutoff }, error_estimate: (v2 - v).abs() })
}

/// Clips probability-valued results within the tolerance band.
pub fn clip_probability(v: f64) -> Result<f64> {
    let t = tol::PROBABILITY_CLIP;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else if v >= -t && v < 0.0 {
        log::warn!("clipping {v:e} to 0");
        Ok(0.0)
    } else if v > 1.0 && v <= 1.0 + t {
        log::warn!("clipping {v} to 1");
        Ok(1.0)
    } else {
        Err(Error::NonPositiveDeterminant(format!("value {v} outside [0,1]")))
    }
}

/// G(zeta) = sum_k E[q^{k(x_n(t)+n)}] zeta^k / k_q!.
pub fn g_series(zeta: C64, q: QParam, t: f64, n: i64, k_max: usize) -> Result<Estimate<C64>> {
    if n < 1 {
        return Err(Error::InvalidConfig(format!("n must be >= 1, got {n}")));
    }
    let mut sum = ONE;
    let mut zk = ONE;
    let mut last = 1.0;
    for k in 1..=k_max {
        zk *= zeta;
        let mu = if t == 0.0 {
            1.0
        } else if k <= 3 {
            let spec = contour::nested_radii(Model::QTasep(q), k);
            match spec {
                Ok(spec) => contour::qtasep_moment_nested(&OrderedConfig::new(vec![n; k])?, t, q, &spec)?.value,
                Err(_) => contour::qtasep_moment_unnested_symmetric(n, k, t, q)?.value,
            }
        } else {
            contour::qtasep_moment_unnested_symmetric(n, k, t, q)?.value
        };
        let term = zk * mu / q_factorial(k, q);
        sum += term;
        last = term.norm();
    }
    // remaining terms are bounded by a geometric series in |zeta| (1-q)/(1-q^{k+1})
    let r = zeta.norm() * (1.0 - q.get());
    if r >= 1.0 {
        return Err(Error::Truncation(format!("|zeta| = {} outside the series disk", zeta.norm())));
    }
    let tail = last * r / (1.0 - r);
    if tail > 1e-3 {
        return Err(Error::Truncation(format!("G series tail {tail:e} after {k_max} terms")));
    }
    Ok(Estimate::new(sum, tail))
}

/// f(n) = -q^n (1/2 pi i) int (q^{n+1} zeta; q)_inf fhat(zeta) d zeta over a
/// circle enclosing q^{-m} for m <= n only. Nodes sit half a step off the
/// real axis and the lower half is taken from conjugate symmetry.
pub fn eq_laplace_invert<F: Fn(C64) -> Result<C64> + Sync>(fhat: F, n: usize, q: QParam, nodes: usize) -> Result<Estimate<f64>> {
    let qv = q.get();
    let qn = qv.powi(-(n as i32));
    let gap = qn / qv - qn;
    let delta = gap / 4.0;
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Error::InvalidConfig(format!("cannot separate q^-{n} from q^-{}", n + 1)));
    }
    let center = C64::new(0.5 * (1.0 + qn), 0.0);
    let radius = 0.5 * (qn - 1.0) + delta;
    let m = nodes.max(16) & !1;
    let pts = circle_points(center, radius, m, 0.5);
    let upper: Vec<(C64, C64)> = pts.into_iter().filter(|(z, _)| z.im > 0.0).collect();
    let vals: Vec<Result<C64>> = upper
        .par_iter()
        .map(|(z, w)| Ok(*w * qpoch_inf(*z * qv.powi(n as i32 + 1), qv) * fhat(*z)?))
        .collect();
    let mut s = ZERO;
    for v in vals {
        s += v?;
    }
    let total = -qv.powi(n as i32) * 2.0 * s.re;
    let eval = |mm: usize| -> Result<f64> {
        let pts = circle_points(center, radius, mm, 0.5);
        let mut s = ZERO;
        for (z, w) in pts.iter().filter(|(z, _)| z.im > 0.0) {
            s += *w * qpoch_inf(*z * qv.powi(n as i32 + 1), qv) * fhat(*z)?;
        }
        Ok(-qv.powi(n as i32) * 2.0 * s.re)
    };
    let coarse = eval(m / 2)?;
    Ok(Estimate::new(total, (total - coarse).abs()))
}

/// `eq_laplace_invert` with the node count doubled from 64 until the error
/// estimate drops below `tol` (at most 1024 nodes, with a warning).
pub fn eq_laplace_invert_adaptive<F: Fn(C64) -> Result<C64> + Sync>(fhat: F, n: usize, q: QParam, tol: f64) -> Result<Estimate<f64>> {
    let mut nodes = 64;
    loop {
        let e = eq_laplace_invert(&fhat, n, q, nodes)?;
        if e.error <= tol || nodes >= 1024 {
            if e.error > tol {
                log::warn!("q-Laplace atom {n}: inversion error {:e} at {nodes} nodes", e.error);
            }
            return Ok(e);
        }
        nodes *= 2;
    }
}

/// fhat(zeta) = sum_m f(m) / (zeta q^m; q)_inf for a finitely supported f.
pub fn eq_laplace_forward(f: &[f64], q: QParam, zeta: C64) -> C64 {
    let qv = q.get();
    f.iter().enumerate().map(|(m, v)| *v / qpoch_inf(zeta * qv.powi(m as i32), qv)).sum()
}

/// The pmf of x_n(t) + n on 0..=m_max from the inverted determinant.
pub fn qtasep_pmf(q: QParam, t: f64, n: i64, m_max: usize, gamma_nodes: usize) -> Result<Vec<Estimate<f64>>> {
    let gamma = qlaplace_contour(q, gamma_nodes)?;
    let r = QLaplaceResummed::new(q, t, n, &gamma)?;
    // fhat(zeta) = G(zeta/(1-q)) = det(I + K) at x = zeta; the inversion circle
    // needs more nodes as q -> 1 because the poles q^{-m} crowd together
    (0..=m_max).map(|m| eq_laplace_invert_adaptive(|z| r.det_at_x(z), m, q, PMF_ATOM_TOL)).collect::<Result<Vec<_>>>()
}

const PMF_ATOM_TOL: f64 = 1e-9;

/// Semi-discrete kernel K_u on a small circle around 0, with the line
/// integral on Re s = 1/2 tabulated once per contour point.
pub struct KuGrid {
    v: Vec<C64>,
    s: Vec<C64>,
    /// [i][k] = ds-weight * pi/sin(-pi s) * g(v_i)/g(v_i + s)
    f: Vec<C64>,
}

impl KuGrid {
    pub fn new(u: C64, tau: f64, n: i64, v: &[C64]) -> Result<Self> {
        // Gaussian decay e^{-tau y^2/2} beats the growth of 1/Gamma^n
        let growth = (n as f64 + 1.0) * PI / 2.0 + u.arg().abs();
        let l = ((growth + (growth * growth + 2.0 * tau * 40.0).sqrt()) / tau).clamp(4.0, 200.0);
        let c = Contour::vline(0.5, l, 16)?;
        let (s, w): (Vec<C64>, Vec<f64>) = c.points().into_iter().map(|(s, w)| (s, w.re)).unzip();
        let lu = u.ln();
        let ns = s.len();
        let mut f = vec![ZERO; v.len() * ns];
        let rows: Vec<Result<Vec<C64>>> = v
            .par_iter()
            .map(|vi| {
                let lg = complex_ln_gamma(*vi)?;
                s.iter()
                    .zip(&w)
                    .map(|(sk, wk)| {
                        let e = n as f64 * (lg - complex_ln_gamma(vi + sk)?) + sk * lu + tau * (2.0 * vi * sk + sk * sk) / 2.0;
                        Ok(*wk * mb_factor(*sk) * e.exp())
                    })
                    .collect()
            })
            .collect();
        for (i, r) in rows.into_iter().enumerate() {
            f[i * ns..(i + 1) * ns].copy_from_slice(&r?);
        }
        Ok(KuGrid { v: v.to_vec(), s, f })
    }

    pub fn kernel(&self, i: usize, vp: C64) -> C64 {
        let ns = self.s.len();
        let vi = self.v[i];
        self.f[i * ns..(i + 1) * ns].iter().zip(&self.s).map(|(f, s)| f / (vi + s - vp)).sum()
    }
}

/// E[exp(-u e^{3 tau/2} z(tau, n))] as det(I + K_u) on a circle of radius
/// 0.2 around 0.
pub fn semidiscrete_laplace_det(u: C64, tau: f64, n: i64) -> Result<FredholmValue> {
    KernelSpec::SemidiscreteKu { u, tau, n }.validate()?;
    if n > 4 || tau > 4.0 {
        return Err(Error::Truncation(format!("(n, tau) = ({n}, {tau}) outside the validated box n <= 4, tau <= 4")));
    }
    if u == ZERO {
        return Ok(FredholmValue { value: 1.0, method: FredholmMethod::Series { l_max: 0 }, error_estimate: 0.0 });
    }
    let gamma = Contour::circle(ZERO, 0.2, 48)?;
    let pts = gamma.points();
    let v: Vec<C64> = pts.iter().map(|p| p.0).collect();
    let grid = KuGrid::new(u, tau, n, &v)?;
    let m = pts.len();
    let mut a = vec![ZERO; m * m];
    for i in 0..m {
        for j in 0..m {
            a[i * m + j] = grid.kernel(i, v[j]) * pts[j].1;
        }
    }
    let l_max = 3;
    let (val, err) = series_from_matrix(&a, m, l_max);
    if err > 1e-6 {
        return Err(Error::Truncation(format!("semi-discrete series term {} is {err:e}", l_max + 1)));
    }
    let value = if u.im == 0.0 { clip_probability(val.re)? } else { val.re };
    Ok(FredholmValue { value, method: FredholmMethod::Series { l_max }, error_estimate: err })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TwMethod {
    Fredholm,
    Painleve,
}

const PII_X0: f64 = 8.0;

/// Painleve II in the reversed variable u = x0 - x, so the solver runs forward.
struct PainleveII {
    x0: f64,
}

impl System<f64, Vector4<f64>> for PainleveII {
    // state (q, q', int_x^inf q^2, int_x^inf y q^2)
    fn system(&self, u: f64, y: &Vector4<f64>, dy: &mut Vector4<f64>) {
        let x = self.x0 - u;
        let q = y[0];
        dy[0] = -y[1];
        dy[1] = -(x * q + 2.0 * q * q * q);
        dy[2] = q * q;
        dy[3] = x * q * q;
    }
}

/// Tail integrals of Ai^2 and x Ai^2 over [x, inf).
fn airy_tails(x: f64) -> Result<(f64, f64)> {
    let (a, ap) = airy_pair(x)?;
    let i0 = ap * ap - x * a * a;
    let i1 = -x * x * a * a / 3.0 + x * ap * ap / 3.0 - a * ap / 3.0;
    Ok((i0, i1))
}

/// Hastings-McLeod integration from x0 down to s; returns F_2(s).
pub fn painleve_f2(s: f64, x0: f64) -> Result<f64> {
    let (i0, i1) = airy_tails(x0.max(s))?;
    if s >= x0 {
        return Ok((-(i1 - s * i0)).exp());
    }
    let (a, ap) = airy_pair(x0)?;
    let y0 = Vector4::new(a, ap, i0, i1);
    let span = x0 - s;
    let mut solver = Dopri5::new(PainleveII { x0 }, 0.0, span, span, y0, 1e-13, 1e-16);
    solver.set_output(OutputType::Sparse);
    solver
        .integrate()
        .map_err(|e| Error::QuadratureNotConverged(format!("Painleve II integration: {e:?}")))?;
    let (u, y) = solver.results().get();
    match (u.last(), y.last()) {
        (Some(u), Some(_)) if (u - span).abs() < 1e-9 * span.max(1.0) => {}
        _ => return Err(Error::QuadratureNotConverged("Painleve II did not reach s".into())),
    }
    let y = y.last().expect("checked");
    Ok((-(y[3] - s * y[2])).exp())
}

/// Nystrom determinant of the Airy kernel on [s, max(s,0) + 16].
pub fn airy_f2_fredholm(s: f64, nodes: usize) -> Result<FredholmValue> {
    let cutoff = s.max(0.0) + 16.0 - s;
    airy_pair(s)?;
    fredholm_nystrom(|x, y| airy_kernel(x, y).unwrap_or(0.0), s, cutoff, nodes, -1.0)
}

pub fn tracy_widom_f2(s: f64, method: TwMethod) -> Result<f64> {
    if !(-10.0..=10.0).contains(&s) {
        return domain(format!("s = {s} outside [-10, 10]"));
    }
    let v = match method {
        TwMethod::Fredholm => airy_f2_fredholm(s, 80)?.value,
        TwMethod::Painleve => painleve_f2(s, PII_X0)?,
    };
    clip_probability(v)
}

/// Logistic weight S/(S + e^{-r c}) written as a function of r - r0 with S = e^{-r0 c}.
fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// K_S(eta_i, eta_j) for all pairs, via Gauss-Legendre in r. When `weights`
/// is given the result is W^{1/2} K W^{1/2}.
fn crossover_kernel_matrix(s_lap: f64, t: f64, eta: &[f64], weights: Option<&[f64]>) -> Result<DMatrix<f64>> {
    let c = (t / 2.0).powf(1.0 / 3.0);
    let m = eta.len();
    if s_lap == 0.0 {
        return Ok(DMatrix::zeros(m, m));
    }
    let r0 = -s_lap.ln() / c;
    let lo = r0 - 40.0 / c;
    let hi = 20.0f64.max(r0 + 20.0 / c);
    let panels = ((hi - lo) / 0.5).ceil() as usize;
    let (r, w) = quad::gl_panels(lo, hi, panels, 16);
    let nr = r.len();
    let rows: Vec<Result<Vec<f64>>> = eta
        .par_iter()
        .map(|e| {
            r.iter()
                .map(|ri| {
                    let x = ri + e;
                    if x > 100.0 {
                        Ok(0.0)
                    } else {
                        Ok(airy_pair(x)?.0)
                    }
                })
                .collect()
        })
        .collect();
    let mut a = DMatrix::<f64>::zeros(m, nr);
    for (i, row) in rows.into_iter().enumerate() {
        let row = row?;
        let sw = weights.map(|w| w[i].sqrt()).unwrap_or(1.0);
        for k in 0..nr {
            a[(i, k)] = row[k] * sw;
        }
    }
    let sig: Vec<f64> = r.iter().zip(&w).map(|(ri, wi)| wi * logistic(c * (ri - r0))).collect();
    let mut b = a.clone();
    for k in 0..nr {
        let f = sig[k];
        b.column_mut(k).scale_mut(f);
    }
    Ok(&b * a.transpose())
}

/// Largest eta at which K_S(eta, eta) still exceeds 1e-15.
fn crossover_eta_cutoff(s_lap: f64, t: f64) -> Result<f64> {
    let mut eta = 2.0;
    while eta < 150.0 {
        let k = crossover_kernel_matrix(s_lap, t, &[eta], None)?;
        if k[(0, 0)].abs() < 1e-15 {
            return Ok(eta);
        }
        eta += 2.0;
    }
    Ok(eta)
}

/// det(1 - K_S) on L^2(R_+) by Gauss-Legendre panels in eta.
pub fn crossover_det(s_lap: f64, t: f64, panel_nodes: usize) -> Result<FredholmValue> {
    KernelSpec::CrossoverKs { s: s_lap, t }.validate()?;
    if s_lap == 0.0 {
        return Ok(FredholmValue { value: 1.0, method: FredholmMethod::Nystrom { nodes: 0, ray_cutoff: 0.0 }, error_estimate: 0.0 });
    }
    let cut = crossover_eta_cutoff(s_lap, t)?;
    let det = |per: usize| -> Result<f64> {
        let panels = (cut / 2.5).ceil() as usize;
        let (eta, w) = quad::gl_panels(0.0, cut, panels, per);
        let k = crossover_kernel_matrix(s_lap, t, &eta, Some(&w))?;
        let m = eta.len();
        let a: Vec<f64> = (0..m * m).map(|idx| k[(idx / m, idx % m)]).collect();
        Ok(linalg::det_identity_minus_real(&a, m))
    };
    let v = det(panel_nodes)?;
    let coarse = det((panel_nodes * 2) / 3)?;
    let panels = (cut / 2.5).ceil() as usize;
    Ok(FredholmValue {
        value: clip_probability(v)?,
        method: FredholmMethod::Nystrom { nodes: panels * panel_nodes, ray_cutoff: cut },
        error_estimate: (v - coarse).abs(),
    })
}

/// det(1 - K_S) at S = exp(-r (t/2)^{1/3}): a smoothed CDF of
/// (log z(t,0) + t/24)/(t/2)^{1/3}.
pub fn kpz_crossover(r: f64, t: f64) -> Result<f64> {
    if !(t > 0.0) {
        return domain(format!("t must be positive, got {t}"));
    }
    let c = (t / 2.0).powf(1.0 / 3.0);
    Ok(crossover_det((-r * c).exp(), t, 16)?.value)
}

/// Nested-contour spec used by the q-Laplace checks.
pub fn moment_spec(q: QParam, k: usize) -> Result<NestedContourSpec> {
    contour::nested_radii(Model::QTasep(q), k)
}
