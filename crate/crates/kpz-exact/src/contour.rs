//! Contour quadrature, nested-contour moment formulas and the partition
//! (unnested) expansion.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::procsim::OrderedConfig;
use crate::quad;
use crate::specfn::{q_factorial, qpoch, QParam};
use crate::{Estimate, C64};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ContourKind {
    Circle { center: C64, radius: f64 },
    VLine { real_part: f64, half_height: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contour {
    pub kind: ContourKind,
    pub nodes: usize,
}

impl Contour {
    pub fn circle(center: C64, radius: f64, nodes: usize) -> Result<Self> {
        if !(radius > 0.0) {
            return Err(Error::InvalidConfig(format!("radius must be positive, got {radius}")));
        }
        if nodes < 16 {
            return Err(Error::InvalidConfig(format!("need at least 16 nodes, got {nodes}")));
        }
        Ok(Contour { kind: ContourKind::Circle { center, radius }, nodes })
    }

    pub fn vline(real_part: f64, half_height: f64, nodes: usize) -> Result<Self> {
        if !(half_height > 0.0) {
            return Err(Error::InvalidConfig(format!("half_height must be positive, got {half_height}")));
        }
        if nodes < 16 {
            return Err(Error::InvalidConfig(format!("need at least 16 nodes, got {nodes}")));
        }
        Ok(Contour { kind: ContourKind::VLine { real_part, half_height }, nodes })
    }

    pub fn with_nodes(&self, nodes: usize) -> Contour {
        Contour { kind: self.kind, nodes }
    }

    /// Points and weights such that sum w f(z) approximates (1/2 pi i) int f dz.
    pub fn points(&self) -> Vec<(C64, C64)> {
        match self.kind {
            ContourKind::Circle { center, radius } => circle_points(center, radius, self.nodes, 0.0),
            ContourKind::VLine { real_part, half_height } => {
                // panels of height at most 0.5 with 16 nodes each
                let panels = ((2.0 * half_height / 0.5).ceil() as usize).max(self.nodes / 16).max(1);
                let (y, w) = quad::gl_panels(-half_height, half_height, panels, 16);
                y.iter()
                    .zip(&w)
                    .map(|(y, w)| (C64::new(real_part, *y), C64::new(w / (2.0 * PI), 0.0)))
                    .collect()
            }
        }
    }
}

/// Trapezoid nodes on a counterclockwise circle, shifted by `offset`
/// (in units of the node spacing).
pub fn circle_points(center: C64, radius: f64, m: usize, offset: f64) -> Vec<(C64, C64)> {
    (0..m)
        .map(|j| {
            let th = 2.0 * PI * (j as f64 + offset) / m as f64;
            let e = C64::from_polar(radius, th);
            (center + e, e / m as f64)
        })
        .collect()
}

/// (1/2 pi i) int f dz by trapezoid (circles) or panel Gauss-Legendre
/// (lines), doubling nodes until two successive values agree.
pub fn contour_quadrature<F: Fn(C64) -> C64 + Sync>(f: F, c: &Contour, rel_tol: f64) -> Result<Estimate<C64>> {
    let eval = |c: &Contour| -> C64 { c.points().iter().map(|(z, w)| w * f(*z)).sum() };
    let mut m = c.nodes;
    let mut prev = eval(&c.with_nodes(m));
    for _ in 0..16 {
        m *= 2;
        let cur = eval(&c.with_nodes(m));
        let d = (cur - prev).norm();
        if d <= rel_tol * cur.norm() || d < 1e-15 {
            return Ok(Estimate::new(cur, d));
        }
        prev = cur;
    }
    Err(Error::QuadratureNotConverged(format!("contour quadrature at {m} nodes")))
}

/// Half height L with 2 C e^{-a L}/(2 pi a) below `abs_tol`, for integrands
/// bounded by C e^{-a|Im s|} on the line.
pub fn vline_half_height(decay: f64, bound: f64, abs_tol: f64) -> f64 {
    ((bound / (PI * decay * abs_tol)).ln() / decay).max(1.0)
}

/// (1/2 pi i) int f ds over the truncated line, checking that |f| at the
/// ends is already negligible.
pub fn vline_quadrature<F: Fn(C64) -> C64 + Sync>(f: F, c: &Contour, abs_tol: f64) -> Result<Estimate<C64>> {
    let (x, l) = match c.kind {
        ContourKind::VLine { real_part, half_height } => (real_part, half_height),
        _ => return Err(Error::InvalidConfig("vline_quadrature needs a VLine contour".into())),
    };
    let edge = f(C64::new(x, l)).norm().max(f(C64::new(x, -l)).norm());
    if !(edge < abs_tol) {
        return Err(Error::Truncation(format!("integrand is {edge:e} at |Im s| = {l}; no decay")));
    }
    let pts = c.points();
    let v: C64 = pts.par_iter().map(|(z, w)| w * f(*z)).collect::<Vec<_>>().iter().sum();
    Ok(Estimate::new(v, edge))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Model {
    /// Circles around 1 that exclude 0, each enclosing q times the inner ones.
    QTasep(QParam),
    /// Circles around 0, each enclosing the inner ones shifted by +1.
    She,
    /// Circles around 1 enclosing q times the inner ones, with no
    /// constraint at 0 (used by the spectral transform J).
    Spectral(QParam),
}

#[derive(Debug, Clone, PartialEq)]
pub struct NestedContourSpec {
    pub model: Model,
    /// A = 1 (outermost) first.
    pub contours: Vec<Contour>,
    /// Per-contour convergence ratio of the trapezoid rule.
    pub ratios: Vec<f64>,
}

fn circle_of(c: &Contour) -> (C64, f64) {
    match c.kind {
        ContourKind::Circle { center, radius } => (center, radius),
        _ => unreachable!("nested contours are circles"),
    }
}

impl NestedContourSpec {
    pub fn k(&self) -> usize {
        self.contours.len()
    }

    pub fn radii(&self) -> Vec<f64> {
        self.contours.iter().map(|c| circle_of(c).1).collect()
    }

    /// Checks every enclosure constraint.
    pub fn verify(&self) -> Result<()> {
        let r = self.radii();
        let k = r.len();
        for a in 0..k {
            match self.model {
                Model::QTasep(q) | Model::Spectral(q) => {
                    let q = q.get();
                    if let Model::QTasep(_) = self.model {
                        if r[a] >= 1.0 {
                            return Err(Error::NestingInfeasible(format!("r_{} = {} encloses 0", a + 1, r[a])));
                        }
                    }
                    for b in a + 1..k {
                        if (1.0 - q) + q * r[b] >= r[a] {
                            return Err(Error::NestingInfeasible(format!(
                                "contour {} does not enclose q times contour {}",
                                a + 1,
                                b + 1
                            )));
                        }
                    }
                }
                Model::She => {
                    for b in a + 1..k {
                        if r[b] + 1.0 >= r[a] {
                            return Err(Error::NestingInfeasible(format!(
                                "contour {} does not enclose contour {} + 1",
                                a + 1,
                                b + 1
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Replaces the contour radii (used by deformation tests).
    pub fn with_radii(&self, radii: &[f64]) -> Result<Self> {
        let mut s = self.clone();
        for (c, r) in s.contours.iter_mut().zip(radii) {
            let (center, _) = circle_of(c);
            *c = Contour::circle(center, *r, c.nodes)?;
        }
        s.verify()?;
        Ok(s)
    }

    pub fn with_nodes(&self, nodes: &[usize]) -> Self {
        let mut s = self.clone();
        for (c, m) in s.contours.iter_mut().zip(nodes) {
            *c = c.with_nodes(*m);
        }
        s
    }
}

const QTASEP_INNER: f64 = 0.1;
const QTASEP_RHO_MAX: f64 = 0.97;
const SHE_INNER: f64 = 0.2;
const SHE_RATIO: f64 = 0.7;
const SPECTRAL_INNER: f64 = 1.0;
const SPECTRAL_RATIO: f64 = 0.5;
const TARGET: f64 = 1e-13;

fn nodes_for_ratio(rho: f64) -> usize {
    let m = (TARGET.ln() / rho.ln()).ceil() as usize + 8;
    let m = m.max(16);
    m + m % 2
}

/// Default nested circles for `model` with k contours and a 5% margin.
pub fn nested_radii(model: Model, k: usize) -> Result<NestedContourSpec> {
    nested_radii_with_margin(model, k, 0.05)
}

/// Radius schedule. For q-TASEP every image ratio ((1-q) + q r_{A+1})/r_A
/// equals a common rho, and r_1 <= rho keeps 0 at least as far (relative)
/// as the inner images; `margin` moves rho that fraction towards 1 from its
/// smallest feasible value.
pub fn nested_radii_with_margin(model: Model, k: usize, margin: f64) -> Result<NestedContourSpec> {
    if k == 0 {
        return Err(Error::InvalidConfig("k must be at least 1".into()));
    }
    if !(0.0..1.0).contains(&margin) {
        return Err(Error::InvalidConfig(format!("margin must lie in [0,1), got {margin}")));
    }
    let spec = match model {
        Model::QTasep(q) => {
            let qv = q.get();
            let schedule = |rho: f64| -> Vec<f64> {
                let mut r = vec![0.0; k];
                r[k - 1] = QTASEP_INNER;
                for a in (0..k - 1).rev() {
                    r[a] = ((1.0 - qv) + qv * r[a + 1]) / rho;
                }
                r
            };
            let ok = |rho: f64| schedule(rho)[0] <= rho;
            let rho_min = if k == 1 {
                QTASEP_INNER
            } else {
                let (mut lo, mut hi) = (1e-3, 1.0);
                if !ok(hi) {
                    return Err(Error::NestingInfeasible(format!(
                        "r_1 > 1 for q = {qv}, k = {k}: r_A >= (1-q) + q r_(A+1) cannot close below 1"
                    )));
                }
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if ok(mid) {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                hi
            };
            let rho = rho_min + margin * (1.0 - rho_min);
            if rho > QTASEP_RHO_MAX {
                let r1 = schedule(rho_min)[0];
                return Err(Error::NestingInfeasible(format!(
                    "r_1 > 1 for q = {qv}, k = {k} (need r_1 = {r1:.4} with image ratio {rho:.4} above {QTASEP_RHO_MAX})"
                )));
            }
            let r = schedule(rho);
            build_spec(model, &r, ONE, |a| {
                let mut rho_a: f64 = r[a];
                if a + 1 < k {
                    rho_a = rho_a.max(((1.0 - qv) + qv * r[a + 1]) / r[a]);
                }
                if a > 0 {
                    rho_a = rho_a.max(r[a] * qv / (r[a - 1] - (1.0 - qv)));
                }
                rho_a
            })?
        }
        Model::She => {
            let mut r = vec![0.0; k];
            r[k - 1] = SHE_INNER;
            for a in (0..k - 1).rev() {
                r[a] = (r[a + 1] + 1.0) / SHE_RATIO;
            }
            build_spec(model, &r, ZERO, |a| {
                let mut rho_a: f64 = 0.0;
                if a + 1 < k {
                    rho_a = rho_a.max((r[a + 1] + 1.0) / r[a]);
                }
                if a > 0 {
                    rho_a = rho_a.max(r[a] / (r[a - 1] - 1.0));
                }
                rho_a.max(0.5)
            })?
        }
        Model::Spectral(q) => {
            let qv = q.get();
            let mut r = vec![0.0; k];
            r[k - 1] = SPECTRAL_INNER;
            for a in (0..k - 1).rev() {
                r[a] = ((1.0 - qv) + qv * r[a + 1]) / SPECTRAL_RATIO;
            }
            build_spec(model, &r, ONE, |a| {
                let mut rho_a: f64 = 0.25;
                if a + 1 < k {
                    rho_a = rho_a.max(((1.0 - qv) + qv * r[a + 1]) / r[a]);
                }
                if a > 0 {
                    rho_a = rho_a.max(r[a] * qv / (r[a - 1] - (1.0 - qv)));
                }
                rho_a
            })?
        }
    };
    spec.verify()?;
    Ok(spec)
}

fn build_spec(model: Model, r: &[f64], center: C64, ratio: impl Fn(usize) -> f64) -> Result<NestedContourSpec> {
    let ratios: Vec<f64> = (0..r.len()).map(&ratio).collect();
    let contours = r
        .iter()
        .zip(&ratios)
        .map(|(r, rho)| Contour::circle(center, *r, nodes_for_ratio(*rho)))
        .collect::<Result<Vec<_>>>()?;
    Ok(NestedContourSpec { model, contours, ratios })
}

/// k-fold product-rule quadrature of
/// prod_A single(A, z_A) prod_{A<B} cross(z_A, z_B).
///
/// The returned error is |I_M - I_{M/2}| scaled by the worst rho_A^{M_A/2},
/// with I_{M/2} the even-index subrule computed in the same pass.
pub fn nested_product_integral<S, X>(spec: &NestedContourSpec, single: S, cross: X) -> Estimate<C64>
where
    S: Fn(usize, C64) -> C64 + Sync,
    X: Fn(C64, C64) -> C64 + Sync,
{
    let k = spec.k();
    let pts: Vec<Vec<(C64, C64)>> = spec.contours.iter().map(|c| c.points()).collect();
    let s: Vec<Vec<C64>> = (0..k).map(|a| pts[a].iter().map(|(z, w)| w * single(a, *z)).collect()).collect();
    // xm[a][b] is the M_a x M_b matrix of cross factors, row-major
    let mut xm: Vec<Vec<Vec<C64>>> = vec![vec![Vec::new(); k]; k];
    for a in 0..k {
        for b in a + 1..k {
            let mb = pts[b].len();
            let mut m = vec![ZERO; pts[a].len() * mb];
            m.par_chunks_mut(mb).enumerate().for_each(|(i, row)| {
                for (j, v) in row.iter_mut().enumerate() {
                    *v = cross(pts[a][i].0, pts[b][j].0);
                }
            });
            xm[a][b] = m;
        }
    }
    let ms: Vec<usize> = pts.iter().map(|p| p.len()).collect();

    fn rec(level: usize, idx: &mut Vec<usize>, acc: C64, even: bool, s: &[Vec<C64>], xm: &[Vec<Vec<C64>>], ms: &[usize]) -> (C64, C64) {
        let k = s.len();
        let mut full = ZERO;
        let mut ev = ZERO;
        for c in 0..ms[level] {
            let mut v = acc * s[level][c];
            for (a, &ia) in idx.iter().enumerate() {
                v *= xm[a][level][ia * ms[level] + c];
            }
            let e = even && c % 2 == 0;
            if level + 1 == k {
                full += v;
                if e {
                    ev += v;
                }
            } else {
                idx.push(c);
                let (f, g) = rec(level + 1, idx, v, e, s, xm, ms);
                idx.pop();
                full += f;
                ev += g;
            }
        }
        (full, ev)
    }

    let parts: Vec<(C64, C64)> = (0..ms[0])
        .into_par_iter()
        .map(|i| {
            let v = s[0][i];
            if k == 1 {
                (v, if i % 2 == 0 { v } else { ZERO })
            } else {
                let mut idx = vec![i];
                rec(1, &mut idx, v, i % 2 == 0, &s, &xm, &ms)
            }
        })
        .collect();
    let (mut full, mut ev) = (ZERO, ZERO);
    for (f, e) in parts {
        full += f;
        ev += e;
    }
    let half = ev * 2f64.powi(k as i32);
    let scale = spec
        .ratios
        .iter()
        .zip(&ms)
        .map(|(r, m)| r.powi((*m / 2) as i32))
        .fold(0.0f64, f64::max);
    let err = (full - half).norm() * scale + 1e-15 * full.norm();
    Estimate::new(full, err)
}

/// Tensor-product quadrature of an arbitrary integrand over nested contours.
pub fn nested_integral<F: Fn(&[C64]) -> C64 + Sync>(spec: &NestedContourSpec, f: F) -> C64 {
    let pts: Vec<Vec<(C64, C64)>> = spec.contours.iter().map(|c| c.points()).collect();
    let k = pts.len();
    let parts: Vec<C64> = (0..pts[0].len())
        .into_par_iter()
        .map(|i| {
            let mut z = vec![ZERO; k];
            let mut idx = vec![0usize; k];
            idx[0] = i;
            let mut total = ZERO;
            loop {
                let mut w = ONE;
                for a in 0..k {
                    z[a] = pts[a][idx[a]].0;
                    w *= pts[a][idx[a]].1;
                }
                total += w * f(&z);
                // odometer over indices 1..k
                let mut a = k;
                loop {
                    if a == 1 {
                        return total;
                    }
                    a -= 1;
                    idx[a] += 1;
                    if idx[a] < pts[a].len() {
                        break;
                    }
                    idx[a] = 0;
                }
            }
        })
        .collect();
    parts.iter().sum()
}

fn check_imag(v: Estimate<C64>) -> Result<Estimate<f64>> {
    if v.value.im.abs() > 1e-9 * v.value.norm() + 1e-13 + v.error {
        return Err(Error::Assertion(format!("imaginary part {:e} of a real moment", v.value.im)));
    }
    Ok(Estimate::new(v.value.re, v.error))
}

/// E^step[prod_i q^{x_{n_i}(t) + n_i}] from the nested contour formula.
pub fn qtasep_moment_nested(n: &OrderedConfig, t: f64, q: QParam, spec: &NestedContourSpec) -> Result<Estimate<f64>> {
    let k = n.k();
    if spec.k() != k || !matches!(spec.model, Model::QTasep(_)) {
        return Err(Error::InvalidConfig(format!("contour spec is not a q-TASEP spec for {k} variables")));
    }
    let qv = q.get();
    let pref = (if k % 2 == 0 { 1.0 } else { -1.0 }) * qv.powi((k * (k - 1) / 2) as i32);
    let parts = n.parts.clone();
    let v = nested_product_integral(
        spec,
        |a, z| ((qv - 1.0) * t * z).exp() / ((1.0 - z).powi(parts[a] as i32) * z),
        |za, zb| (za - zb) / (za - qv * zb),
    );
    check_imag(Estimate::new(v.value * pref, v.error * pref.abs()))
}

/// E[prod_i z(tau; n_i)] for the semi-discrete SHE with z_0(n) = 1_{n=1}.
pub fn she_moment_nested(n: &OrderedConfig, tau: f64, spec: &NestedContourSpec) -> Result<Estimate<f64>> {
    let k = n.k();
    if spec.k() != k || spec.model != Model::She {
        return Err(Error::InvalidConfig(format!("contour spec is not an SHE spec for {k} variables")));
    }
    let parts = n.parts.clone();
    let v = nested_product_integral(
        spec,
        |a, z| (tau * (z - 1.0)).exp() / z.powi(parts[a] as i32),
        |za, zb| (za - zb) / (za - zb - 1.0),
    );
    check_imag(v)
}

/// Partition lambda of k, parts weakly decreasing.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Partition {
    pub parts: Vec<usize>,
}

impl Partition {
    pub fn k(&self) -> usize {
        self.parts.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }

    /// m_i for i = 1..=k (index 0 holds m_1).
    pub fn multiplicities(&self) -> Vec<usize> {
        let mut m = vec![0; self.k()];
        for &p in &self.parts {
            m[p - 1] += 1;
        }
        m
    }

    /// prod_i m_i!
    pub fn symmetry_factor(&self) -> f64 {
        self.multiplicities().iter().map(|&m| (1..=m).map(|x| x as f64).product::<f64>()).product()
    }
}

impl std::fmt::Display for Partition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s: Vec<String> = self.parts.iter().map(|p| p.to_string()).collect();
        write!(f, "({})", s.join(","))
    }
}

/// All partitions of k in reverse-lexicographic order.
pub fn partitions(k: usize) -> Vec<Partition> {
    fn rec(rem: usize, max: usize, cur: &mut Vec<usize>, out: &mut Vec<Partition>) {
        if rem == 0 {
            out.push(Partition { parts: cur.clone() });
            return;
        }
        for p in (1..=rem.min(max)).rev() {
            cur.push(p);
            rec(rem - p, p, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if k > 0 {
        rec(k, k, &mut Vec::new(), &mut out);
    }
    out
}

/// All permutations of 0..k in lexicographic order.
pub fn permutations(k: usize) -> Vec<Vec<usize>> {
    let mut p: Vec<usize> = (0..k).collect();
    let mut out = vec![p.clone()];
    loop {
        let Some(i) = (1..k).rev().find(|&i| p[i - 1] < p[i]) else { return out };
        let j = (i..k).rev().find(|&j| p[j] > p[i - 1]).unwrap();
        p.swap(i - 1, j);
        p[i..].reverse();
        out.push(p.clone());
    }
}

/// w o lambda: each w_j expanded to the string w_j, q w_j, ..., q^{lambda_j - 1} w_j.
pub fn geometric_string(w: &[C64], lambda: &Partition, q: f64) -> Vec<C64> {
    let mut z = Vec::with_capacity(lambda.k());
    for (wj, &l) in w.iter().zip(&lambda.parts) {
        let mut v = *wj;
        for _ in 0..l {
            z.push(v);
            v *= q;
        }
    }
    z
}

/// det[1/(x_i - y_j)] in product form.
pub fn cauchy_det(x: &[C64], y: &[C64]) -> C64 {
    let l = x.len();
    let mut num = ONE;
    let mut den = ONE;
    for i in 0..l {
        for j in i + 1..l {
            num *= (x[j] - x[i]) * (y[i] - y[j]);
        }
        for j in 0..l {
            den *= x[i] - y[j];
        }
    }
    num / den
}

/// The density of d mu_lambda(w) with respect to prod dw_j / 2 pi i, without
/// the 1/prod m_i! factor.
pub fn dmu_density(w: &[C64], lambda: &Partition, q: f64) -> C64 {
    let k = lambda.k() as i32;
    let pref = (1.0 - q).powi(k) * if k % 2 == 0 { 1.0 } else { -1.0 } * q.powi(-(k * (k - 1) / 2));
    let x: Vec<C64> = w.iter().zip(&lambda.parts).map(|(w, &l)| w * q.powi(l as i32)).collect();
    let mut v = cauchy_det(&x, w) * pref;
    for (wj, &l) in w.iter().zip(&lambda.parts) {
        v *= wj.powi(l as i32) * q.powi((l * (l - 1) / 2) as i32);
    }
    v
}

/// E^q(z) = sum_sigma prod_{B<A} (z_{s(A)} - q z_{s(B)})/(z_{s(A)} - z_{s(B)}) F(z_s).
pub fn e_q_sym(z: &[C64], q: f64, perms: &[Vec<usize>], f: &dyn Fn(&[C64]) -> C64) -> C64 {
    let k = z.len();
    let mut zs = vec![ZERO; k];
    let mut total = ZERO;
    for p in perms {
        let mut c = ONE;
        for a in 0..k {
            zs[a] = z[p[a]];
            for b in 0..a {
                c *= (z[p[a]] - q * z[p[b]]) / (z[p[a]] - z[p[b]]);
            }
        }
        total += c * f(&zs);
    }
    total
}

/// Smallest circle radius for which q times the circle stays outside it.
pub fn unnest_radius_bound(q: QParam) -> f64 {
    let q = q.get();
    (1.0 - q) / (1.0 + q)
}

/// Default small contour for the unnested expansion.
pub fn unnest_contour(q: QParam) -> Contour {
    Contour::circle(ONE, 0.5 * unnest_radius_bound(q), 48).expect("valid")
}

#[derive(Debug, Clone)]
pub struct UnnestResult {
    pub total: C64,
    pub per_partition: Vec<(Partition, C64)>,
}

/// The nested integral of prod_{A<B} (z_A - z_B)/(z_A - q z_B) F(z), as a sum
/// over partitions of l(lambda)-fold integrals on the single contour gamma.
pub fn unnest_expand(f: &(dyn Fn(&[C64]) -> C64 + Sync), q: QParam, k: usize, gamma: &Contour) -> Result<UnnestResult> {
    if k == 0 || k > 6 {
        return Err(Error::InvalidConfig(format!("unnest_expand needs 1 <= k <= 6, got {k}")));
    }
    let (center, radius) = match gamma.kind {
        ContourKind::Circle { center, radius } => (center, radius),
        _ => return Err(Error::InvalidConfig("gamma must be a circle".into())),
    };
    if center != ONE || radius >= unnest_radius_bound(q) {
        return Err(Error::InvalidConfig(format!(
            "gamma must be a circle around 1 with radius below (1-q)/(1+q) = {}",
            unnest_radius_bound(q)
        )));
    }
    let qv = q.get();
    let pts = gamma.points();
    let m = pts.len();
    let perms = permutations(k);
    let mut per = Vec::new();
    let mut total = ZERO;
    for lambda in partitions(k) {
        let l = lambda.len();
        let tuples = m.pow(l as u32);
        let v: C64 = (0..tuples)
            .into_par_iter()
            .map(|code| {
                let mut idx = vec![0usize; l];
                let mut c = code;
                for slot in idx.iter_mut() {
                    *slot = c % m;
                    c /= m;
                }
                for i in 0..l {
                    for j in i + 1..l {
                        if idx[i] == idx[j] {
                            return ZERO;
                        }
                    }
                }
                let w: Vec<C64> = idx.iter().map(|&i| pts[i].0).collect();
                let wt: C64 = idx.iter().map(|&i| pts[i].1).product();
                let z = geometric_string(&w, &lambda, qv);
                wt * dmu_density(&w, &lambda, qv) * e_q_sym(&z, qv, &perms, f)
            })
            .collect::<Vec<_>>()
            .iter()
            .sum::<C64>()
            / lambda.symmetry_factor();
        total += v;
        per.push((lambda, v));
    }
    Ok(UnnestResult { total, per_partition: per })
}

/// Calls `visit` on every index tuple with distinct entries that increase
/// inside each run of equal parts of lambda.
fn for_each_tuple(lambda: &Partition, m: usize, visit: &mut dyn FnMut(&[usize])) {
    fn rec(pos: usize, lambda: &[usize], m: usize, idx: &mut Vec<usize>, visit: &mut dyn FnMut(&[usize])) {
        if pos == lambda.len() {
            visit(idx);
            return;
        }
        let start = if pos > 0 && lambda[pos] == lambda[pos - 1] { idx[pos - 1] + 1 } else { 0 };
        for i in start..m {
            if idx.contains(&i) {
                continue;
            }
            idx.push(i);
            rec(pos + 1, lambda, m, idx, visit);
            idx.pop();
        }
    }
    rec(0, &lambda.parts, m, &mut Vec::new(), visit);
}

/// E^step[q^{k(x_n(t)+n)}] through the symmetric unnested formula, where
/// E^q collapses to k_q! F.
pub fn qtasep_moment_unnested_symmetric(n: i64, k: usize, t: f64, q: QParam) -> Result<Estimate<f64>> {
    if n < 1 || k == 0 {
        return Err(Error::InvalidConfig(format!("need n >= 1 and k >= 1, got n={n}, k={k}")));
    }
    let qv = q.get();
    let r = 0.3 * unnest_radius_bound(q);
    let ratio = r / (1.0 - qv - qv * r);
    let m = nodes_for_ratio(ratio);
    let pts = circle_points(ONE, r, m, 0.0);
    let mut total = ZERO;
    let mut mag = 0.0;
    for lambda in partitions(k) {
        // per-node factor for each distinct part size
        let sizes: Vec<usize> = lambda.parts.clone();
        let fac = |l: usize, w: C64| -> C64 { (t * (qv.powi(l as i32) - 1.0) * w).exp() / qpoch(w, qv, l).powi(n as i32) };
        let mut sum = ZERO;
        for_each_tuple(&lambda, m, &mut |idx| {
            let w: Vec<C64> = idx.iter().map(|&i| pts[i].0).collect();
            let x: Vec<C64> = w.iter().zip(&sizes).map(|(w, &l)| w * qv.powi(l as i32)).collect();
            let mut v = cauchy_det(&x, &w);
            for ((&i, wj), &l) in idx.iter().zip(&w).zip(&sizes) {
                v *= pts[i].1 * fac(l, *wj);
            }
            mag += v.norm();
            sum += v;
        });
        total += sum;
    }
    let pref = q_factorial(k, q) * (1.0 - qv).powi(k as i32);
    let v = total * pref;
    let err = 1e-15 * mag * pref + ratio.powi(m as i32) * mag * pref;
    if v.im.abs() > 1e-9 * v.norm() + 1e-12 {
        return Err(Error::Assertion(format!("imaginary part {:e} in symmetric moment", v.im)));
    }
    Ok(Estimate::new(v.re, err))
}

/// The q-TASEP integrand F(z) = (-1)^k q^{k(k-1)/2} prod e^{(q-1) t z_j}/((1-z_j)^{n_j} z_j).
pub fn qtasep_integrand(n: &OrderedConfig, t: f64, q: QParam) -> impl Fn(&[C64]) -> C64 + Sync {
    let qv = q.get();
    let k = n.k();
    let pref = (if k % 2 == 0 { 1.0 } else { -1.0 }) * qv.powi((k * (k - 1) / 2) as i32);
    let parts = n.parts.clone();
    move |z: &[C64]| {
        let mut v = C64::new(pref, 0.0);
        for (zj, &nj) in z.iter().zip(&parts) {
            v *= ((qv - 1.0) * t * zj).exp() / ((1.0 - zj).powi(nj as i32) * zj);
        }
        v
    }
}

/// q-TASEP moment from the partition expansion.
pub fn qtasep_moment_unnested(n: &OrderedConfig, t: f64, q: QParam, gamma: &Contour) -> Result<UnnestResult> {
    let f = qtasep_integrand(n, t, q);
    unnest_expand(&f, q, n.k(), gamma)
}

/// The two residue families of E[z(tau; n)^2]: the lambda = (1,1) double
/// integral with both variables on |z| = 0.49 and the lambda = (2) string
/// z_1 = z_2 + 1 on |z| = `string_radius`.
pub fn she_second_moment_unnested(n: i64, tau: f64, string_radius: f64) -> Result<[C64; 2]> {
    if n < 1 {
        return Err(Error::InvalidConfig(format!("n must be >= 1, got {n}")));
    }
    if !(string_radius > 0.0 && string_radius < 1.0) {
        return Err(Error::InvalidConfig("string radius must lie in (0,1)".into()));
    }
    let m11 = nodes_for_ratio(0.49).max((2.0 * tau * 0.49 * std::f64::consts::E).ceil() as usize + 64);
    let p = circle_points(ZERO, 0.49, m11, 0.0);
    let single: Vec<C64> = p.iter().map(|(z, w)| w * (tau * (z - 1.0)).exp() / z.powi(n as i32)).collect();
    let t11: C64 = (0..p.len())
        .into_par_iter()
        .map(|a| {
            let mut s = ZERO;
            for b in 0..p.len() {
                let (za, zb) = (p[a].0, p[b].0);
                s += single[b] * (za - zb) / (za - zb - 1.0);
            }
            s * single[a]
        })
        .collect::<Vec<_>>()
        .iter()
        .sum();
    let m2 = 256.max((4.0 * tau).ceil() as usize);
    let t2: C64 = circle_points(ZERO, string_radius, m2, 0.0)
        .iter()
        .map(|(z, w)| w * (tau * z).exp() / (z + 1.0).powi(n as i32) * (tau * (z - 1.0)).exp() / z.powi(n as i32))
        .sum();
    Ok([t11, t2])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(v: f64) -> QParam {
        QParam::new(v).unwrap()
    }

    #[test]
    fn residues() {
        let c = Contour::circle(ZERO, 1.0, 32).unwrap();
        assert!((contour_quadrature(|z| 1.0 / z, &c, 1e-13).unwrap().value - ONE).norm() < 1e-14);
        assert!(contour_quadrature(|z| 1.0 / (z * z), &c, 1e-13).unwrap().value.norm() < 1e-14);
        let v = contour_quadrature(|z| z.exp() / (z - 0.3), &c, 1e-13).unwrap().value;
        assert!((v - C64::new(0.3f64.exp(), 0.0)).norm() < 1e-13);
    }

    #[test]
    fn partition_lists() {
        let p: Vec<Vec<usize>> = partitions(3).into_iter().map(|p| p.parts).collect();
        assert_eq!(p, vec![vec![3], vec![2, 1], vec![1, 1, 1]]);
        assert_eq!(partitions(5).len(), 7);
        assert_eq!(partitions(1).len(), 1);
    }

    #[test]
    fn infeasible_nesting() {
        let e = nested_radii(Model::QTasep(q(0.1)), 3).unwrap_err();
        assert!(e.to_string().contains("nesting infeasible: r_1 > 1"), "{e}");
    }

    #[test]
    fn she_radii_nest() {
        let s = nested_radii(Model::She, 3).unwrap();
        let r = s.radii();
        assert!(r[0] > r[1] + 1.0 && r[1] > r[2] + 1.0);
    }

    #[test]
    fn cauchy_matches_direct() {
        let x = [C64::new(0.3, 0.1), C64::new(-0.2, 0.5)];
        let y = [C64::new(1.1, 0.0), C64::new(0.7, -0.4)];
        let d = 1.0 / ((x[0] - y[0]) * (x[1] - y[1])) - 1.0 / ((x[0] - y[1]) * (x[1] - y[0]));
        assert!((cauchy_det(&x, &y) - d).norm() < 1e-14);
    }

    #[test]
    fn permutation_count() {
        assert_eq!(permutations(4).len(), 24);
        assert_eq!(permutations(1), vec![vec![0]]);
    }

    #[test]
    fn vanishing_moment_for_zero_part() {
        let spec = nested_radii(Model::QTasep(q(0.5)), 1).unwrap();
        let n = OrderedConfig::new(vec![0]).unwrap();
        assert!(qtasep_moment_nested(&n, 0.7, q(0.5), &spec).unwrap().value.abs() < 1e-14);
    }
}
