//! Special functions: q-series, gamma and polygamma, Airy, heat kernel.

use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{domain, Error, Result};
use crate::{Estimate, C64};

/// The asymmetry parameter, strictly inside (0, 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QParam(f64);

impl QParam {
    pub fn new(q: f64) -> Result<Self> {
        if q > 0.0 && q < 1.0 {
            Ok(QParam(q))
        } else {
            Err(Error::InvalidConfig(format!("q must lie in (0,1), got {q}")))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

/// Controls truncation of infinite products and series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationPolicy {
    pub abs_tol: f64,
    pub max_terms: usize,
}

impl TruncationPolicy {
    pub fn new(abs_tol: f64, max_terms: usize) -> Result<Self> {
        if !(abs_tol >= 10.0 * f64::EPSILON) {
            return Err(Error::InvalidConfig(format!(
                "abs_tol must be at least 10 eps, got {abs_tol}"
            )));
        }
        if max_terms < 8 {
            return Err(Error::InvalidConfig("max_terms must be at least 8".into()));
        }
        Ok(TruncationPolicy { abs_tol, max_terms })
    }
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        TruncationPolicy { abs_tol: 1e-15, max_terms: 1_000_000 }
    }
}

/// Length of a q-Pochhammer product.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PochOrder {
    Finite(usize),
    Infinite,
}

/// (a;q)_n = (1-a)(1-qa)...(1-q^{n-1}a), also for n = infinity.
///
/// In the infinite case the product stops once |q^m a| < abs_tol; the
/// neglected factors are bounded by exp(S) - 1 with S = |q^m a|/(1-q), which
/// is folded into the returned error.
pub fn q_pochhammer(a: C64, q: QParam, n: PochOrder, policy: TruncationPolicy) -> Result<Estimate<C64>> {
    let q = q.get();
    match n {
        PochOrder::Finite(n) => {
            let mut p = C64::new(1.0, 0.0);
            let mut qa = a;
            for _ in 0..n {
                p *= 1.0 - qa;
                qa *= q;
            }
            Ok(Estimate::new(p, f64::EPSILON * n as f64 * p.norm()))
        }
        PochOrder::Infinite => {
            let mut p = C64::new(1.0, 0.0);
            let mut qa = a;
            let mut m = 0usize;
            while qa.norm() >= policy.abs_tol {
                if m >= policy.max_terms {
                    return Err(Error::Truncation(format!(
                        "(a;q)_inf needs more than {} factors (a={a}, q={q})",
                        policy.max_terms
                    )));
                }
                p *= 1.0 - qa;
                qa *= q;
                m += 1;
            }
            let tail = qa.norm() / (1.0 - q);
            let err = p.norm() * tail.exp_m1() + f64::EPSILON * m as f64 * p.norm();
            Ok(Estimate::new(p, err))
        }
    }
}

/// Fast (a;q)_inf for inner loops; truncates once |q^m a| < 1e-17.
pub fn qpoch_inf(a: C64, q: f64) -> C64 {
    let mut p = C64::new(1.0, 0.0);
    let mut qa = a;
    while qa.norm_sqr() >= 1e-34 {
        p *= 1.0 - qa;
        qa *= q;
    }
    p
}

/// Fast finite (a;q)_n.
pub fn qpoch(a: C64, q: f64, n: usize) -> C64 {
    let mut p = C64::new(1.0, 0.0);
    let mut qa = a;
    for _ in 0..n {
        p *= 1.0 - qa;
        qa *= q;
    }
    p
}

/// k_q! = (q;q)_k/(1-q)^k as the product of (1-q^j)/(1-q).
pub fn q_factorial(k: usize, q: QParam) -> f64 {
    let q = q.get();
    let mut p = 1.0;
    let mut qj = 1.0;
    for _ in 1..=k {
        qj *= q;
        p *= (1.0 - qj) / (1.0 - q);
    }
    p
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QExpVariant {
    /// e_q(x) = 1/((1-q)x; q)_inf
    LittleE,
    /// E_q(x) = (-(1-q)x; q)_inf
    BigE,
}

pub fn q_exponential(x: C64, q: QParam, variant: QExpVariant, policy: TruncationPolicy) -> Result<Estimate<C64>> {
    let qq = q.get();
    match variant {
        QExpVariant::LittleE => {
            let a = (1.0 - qq) * x;
            // pole set: a = q^{-m}
            if a.im.abs() <= 1e-14 * a.norm().max(1.0) && a.re >= 1.0 - 1e-14 {
                let m = (a.re.ln() / (-qq.ln())).round();
                if m >= 0.0 && (a.re * qq.powf(m) - 1.0).abs() < 1e-12 {
                    return domain(format!("e_q has a pole at x = {x} (q = {qq})"));
                }
            }
            let p = q_pochhammer(a, q, PochOrder::Infinite, policy)?;
            let v = 1.0 / p.value;
            Ok(Estimate::new(v, p.error * v.norm() / p.value.norm()))
        }
        QExpVariant::BigE => q_pochhammer(-(1.0 - qq) * x, q, PochOrder::Infinite, policy),
    }
}

const BERNOULLI_2K: [f64; 10] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
    -174611.0 / 330.0,
];

fn sinpi(x: f64) -> f64 {
    let r = x - 2.0 * (x / 2.0).round();
    // r in [-1, 1]
    if r > 0.5 {
        (PI * (1.0 - r)).sin()
    } else if r < -0.5 {
        -(PI * (1.0 + r)).sin()
    } else {
        (PI * r).sin()
    }
}

fn cospi(x: f64) -> f64 {
    sinpi(x + 0.5)
}

/// sin(pi z) with the real part reduced exactly before multiplying by pi.
pub fn sin_pi(z: C64) -> C64 {
    let (y, x) = (PI * z.im, z.re);
    C64::new(sinpi(x) * y.cosh(), cospi(x) * y.sinh())
}

fn is_nonpositive_integer(z: C64) -> bool {
    z.im == 0.0 && z.re <= 0.0 && z.re == z.re.round()
}

/// log Gamma for Re z >= 0.5 by an upward shift and the Stirling series.
fn ln_gamma_right(z: C64) -> C64 {
    let mut shift = C64::new(0.0, 0.0);
    let mut w = z;
    while w.norm() < 15.0 {
        shift += w.ln();
        w += 1.0;
    }
    let inv = 1.0 / w;
    let inv2 = inv * inv;
    let mut series = C64::new(0.0, 0.0);
    let mut pow = inv;
    for (k, b) in BERNOULLI_2K.iter().enumerate() {
        let k = (k + 1) as f64;
        series += pow * (b / (2.0 * k * (2.0 * k - 1.0)));
        pow *= inv2;
    }
    (w - 0.5) * w.ln() - w + 0.5 * (2.0 * PI).ln() + series - shift
}

/// A branch of log Gamma(z); exp of it is Gamma(z).
pub fn complex_ln_gamma(z: C64) -> Result<C64> {
    if is_nonpositive_integer(z) {
        return domain(format!("Gamma has a pole at {z}"));
    }
    if z.re >= 0.5 {
        Ok(ln_gamma_right(z))
    } else {
        let s = sin_pi(z);
        Ok(PI.ln() - s.ln() - ln_gamma_right(1.0 - z))
    }
}

pub fn complex_gamma(z: C64) -> Result<C64> {
    if is_nonpositive_integer(z) {
        return domain(format!("Gamma has a pole at {z}"));
    }
    if z.re >= 0.5 {
        Ok(ln_gamma_right(z).exp())
    } else {
        Ok(PI / (sin_pi(z) * ln_gamma_right(1.0 - z).exp()))
    }
}

/// Real Gamma on the positive axis.
pub fn gamma(x: f64) -> f64 {
    complex_gamma(C64::new(x, 0.0)).map(|g| g.re).unwrap_or(f64::NAN)
}

/// Digamma (order 0), trigamma (1) and tetragamma (2) for s > 0.
pub fn polygamma(s: f64, order: u8) -> Result<f64> {
    if !(s > 0.0) || !s.is_finite() {
        return domain(format!("polygamma needs s > 0, got {s}"));
    }
    if order > 2 {
        return domain(format!("polygamma order {order} not supported"));
    }
    let mut x = s;
    let mut acc = 0.0;
    while x < 10.0 {
        acc += match order {
            0 => -1.0 / x,
            1 => 1.0 / (x * x),
            _ => -2.0 / (x * x * x),
        };
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let v = match order {
        0 => {
            let mut sum = 0.0;
            let mut p = inv2;
            for (k, b) in BERNOULLI_2K.iter().enumerate() {
                sum += b / (2.0 * (k + 1) as f64) * p;
                p *= inv2;
            }
            x.ln() - 0.5 * inv - sum
        }
        1 => {
            let mut sum = 0.0;
            let mut p = inv2 * inv;
            for b in BERNOULLI_2K.iter() {
                sum += b * p;
                p *= inv2;
            }
            inv + 0.5 * inv2 + sum
        }
        _ => {
            let mut sum = 0.0;
            let mut p = inv2 * inv2;
            for (k, b) in BERNOULLI_2K.iter().enumerate() {
                sum += (2.0 * (k + 1) as f64 + 1.0) * b * p;
                p *= inv2;
            }
            -inv2 - inv2 * inv - sum
        }
    };
    Ok(v + acc)
}

const AI0: f64 = 0.355_028_053_887_817_24;
const AIP0: f64 = -0.258_819_403_792_806_8;
const AIRY_SWITCH: f64 = 8.0;
const AIRY_SERIES: f64 = 2.0;
const AIRY_STEP: f64 = 0.25;

/// Maclaurin series: (Ai, Ai').
fn airy_maclaurin(x: f64) -> (f64, f64) {
    let x3 = x * x * x;
    let (mut f, mut g, mut fp, mut gp) = (1.0, x, 0.0, 1.0);
    let (mut a, mut b, mut d, mut e) = (1.0, x, x * x / 2.0, 1.0);
    fp += d;
    for k in 1..200 {
        let kf = k as f64;
        a *= x3 / ((3.0 * kf - 1.0) * (3.0 * kf));
        b *= x3 / ((3.0 * kf) * (3.0 * kf + 1.0));
        e *= x3 / ((3.0 * kf - 2.0) * (3.0 * kf));
        if k >= 2 {
            d *= x3 / ((3.0 * kf - 3.0) * (3.0 * kf - 1.0));
            fp += d;
        }
        f += a;
        g += b;
        gp += e;
        if a.abs() + b.abs() + d.abs() + e.abs() < 1e-18 * (f.abs() + g.abs() + fp.abs() + gp.abs()) {
            break;
        }
    }
    (AI0 * f + AIP0 * g, AI0 * fp + AIP0 * gp)
}

fn airy_u_coeffs() -> &'static [(f64, f64)] {
    static C: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    C.get_or_init(|| {
        let mut v = vec![(1.0, 1.0)];
        let mut u = 1.0;
        for k in 1..60 {
            let kf = k as f64;
            u *= (6.0 * kf - 5.0) * (6.0 * kf - 3.0) * (6.0 * kf - 1.0) / ((2.0 * kf - 1.0) * 216.0 * kf);
            v.push((u, -u * (6.0 * kf + 1.0) / (6.0 * kf - 1.0)));
        }
        v
    })
}

/// Asymptotic expansions for |x| >= 8: (Ai, Ai').
fn airy_asymptotic(x: f64) -> (f64, f64) {
    let c = airy_u_coeffs();
    let ax = x.abs();
    let zeta = 2.0 / 3.0 * ax.powf(1.5);
    let q = ax.powf(0.25);
    let sqpi = PI.sqrt();
    if x > 0.0 {
        let (mut su, mut sv) = (0.0, 0.0);
        let mut p = 1.0;
        let mut last = f64::INFINITY;
        for (k, &(u, v)) in c.iter().enumerate() {
            let t = u * p;
            if t.abs() > last {
                break;
            }
            last = t.abs();
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            su += sign * t;
            sv += sign * v * p;
            if last < 1e-17 {
                break;
            }
            p /= zeta;
        }
        let e = (-zeta).exp();
        (e / (2.0 * sqpi * q) * su, -q * e / (2.0 * sqpi) * sv)
    } else {
        let (mut ue, mut uo, mut ve, mut vo) = (0.0, 0.0, 0.0, 0.0);
        let mut p = 1.0;
        let mut last = f64::INFINITY;
        for (k, &(u, v)) in c.iter().enumerate() {
            let t = u * p;
            if t.abs() > last {
                break;
            }
            last = t.abs();
            let sign = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 };
            if k % 2 == 0 {
                ue += sign * t;
                ve += sign * v * p;
            } else {
                uo += sign * t;
                vo += sign * v * p;
            }
            if last < 1e-17 {
                break;
            }
            p /= zeta;
        }
        let th = zeta - PI / 4.0;
        let (s, co) = th.sin_cos();
        ((co * ue + s * uo) / (sqpi * q), q / sqpi * (s * ve - co * vo))
    }
}

/// One Taylor step of y'' = x y from x0 by h.
fn airy_taylor(x0: f64, y0: f64, y1: f64, h: f64) -> (f64, f64) {
    // coefficients c_m of y(x0 + h) = sum c_m h^m, c_{m+1} = (x0 c_{m-1} + c_{m-2}) / (m (m+1))
    let mut y = y0 + y1 * h;
    let mut yp = y1;
    let (mut cm2, mut cm1, mut cm) = (y0, y1, x0 * y0 / 2.0);
    let mut hp = h;
    let mut hm = h * h;
    let mut m = 2usize;
    loop {
        y += cm * hm;
        yp += m as f64 * cm * hp;
        let scale = y.abs() + yp.abs() + 1e-300;
        if (m > 6 && (cm * hm).abs() < 1e-18 * scale && (m as f64 * cm * hp).abs() < 1e-18 * scale) || m > 400 {
            break;
        }
        let next = (x0 * cm1 + cm2) / ((m as f64) * (m as f64 + 1.0));
        hp = hm;
        hm *= h;
        cm2 = cm1;
        cm1 = cm;
        cm = next;
        m += 1;
    }
    (y, yp)
}

struct AiryAnchors {
    // grid x_j = -8 + 0.25 j for j = 0..=64
    vals: Vec<(f64, f64)>,
}

fn airy_anchors() -> &'static AiryAnchors {
    static A: OnceLock<AiryAnchors> = OnceLock::new();
    A.get_or_init(|| {
        let n = ((2.0 * AIRY_SWITCH) / AIRY_STEP).round() as usize;
        let mut vals = vec![(0.0, 0.0); n + 1];
        let x_of = |j: usize| -AIRY_SWITCH + AIRY_STEP * j as f64;
        // middle block straight from the series
        for (j, v) in vals.iter_mut().enumerate() {
            if x_of(j).abs() <= AIRY_SERIES + 1e-12 {
                *v = airy_maclaurin(x_of(j));
            }
        }
        // oscillatory side: march down from -2, both solutions stay bounded
        let j_left = ((AIRY_SWITCH - AIRY_SERIES) / AIRY_STEP).round() as usize;
        for j in (0..j_left).rev() {
            let (y0, y1) = vals[j + 1];
            vals[j] = airy_taylor(x_of(j + 1), y0, y1, -AIRY_STEP);
        }
        // decaying side: march down from +8, Ai is the growing solution in that direction
        vals[n] = airy_asymptotic(AIRY_SWITCH);
        let j_right = ((AIRY_SWITCH + AIRY_SERIES) / AIRY_STEP).round() as usize;
        for j in (j_right + 1..n).rev() {
            let (y0, y1) = vals[j + 1];
            vals[j] = airy_taylor(x_of(j + 1), y0, y1, -AIRY_STEP);
        }
        AiryAnchors { vals }
    })
}

/// (Ai(x), Ai'(x)) for |x| <= 200.
pub fn airy_pair(x: f64) -> Result<(f64, f64)> {
    if !(x.abs() <= 200.0) {
        return domain(format!("airy is validated for |x| <= 200, got {x}"));
    }
    if x.abs() >= AIRY_SWITCH {
        return Ok(airy_asymptotic(x));
    }
    if x.abs() <= AIRY_SERIES {
        return Ok(airy_maclaurin(x));
    }
    let a = airy_anchors();
    let j = ((x + AIRY_SWITCH) / AIRY_STEP).round() as usize;
    let x0 = -AIRY_SWITCH + AIRY_STEP * j as f64;
    let (y0, y1) = a.vals[j];
    Ok(airy_taylor(x0, y0, y1, x - x0))
}

pub fn airy(x: f64, derivative: bool) -> Result<f64> {
    let (a, ap) = airy_pair(x)?;
    Ok(if derivative { ap } else { a })
}

/// Exposes the two branches that meet at |x| = 8, for the overlap test.
pub fn airy_branches_at_switch(x: f64) -> ((f64, f64), (f64, f64)) {
    let a = airy_anchors();
    let cont = if x > 0.0 {
        let (y0, y1) = a.vals[a.vals.len() - 2];
        airy_taylor(AIRY_SWITCH - AIRY_STEP, y0, y1, AIRY_STEP)
    } else {
        a.vals[0]
    };
    (cont, airy_asymptotic(x))
}

/// p(t,x) = exp(-x^2/2t)/sqrt(2 pi t).
pub fn heat_kernel(t: f64, x: f64) -> Result<f64> {
    if !(t > 0.0) {
        return domain(format!("heat kernel needs t > 0, got {t}"));
    }
    Ok((-x * x / (2.0 * t)).exp() / (2.0 * PI * t).sqrt())
}

/// p(t,x)^2.
pub fn heat_kernel_sq(t: f64, x: f64) -> Result<f64> {
    heat_kernel(t, x).map(|p| p * p)
}
