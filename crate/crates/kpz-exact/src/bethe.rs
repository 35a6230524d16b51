//! Bethe ansatz eigenfunctions of the q-Boson generator, the direct and
//! inverse spectral transforms, and the backward-equation solver built on them.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::contour::{self, circle_points, Model, NestedContourSpec, Partition};
use crate::error::{domain, Error, Result};
use crate::procsim::OrderedConfig;
use crate::specfn::{q_factorial, QParam};
use crate::{Estimate, C64};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralVector {
    pub z: Vec<C64>,
}

impl SpectralVector {
    pub fn new(z: Vec<C64>) -> Result<Self> {
        for (i, a) in z.iter().enumerate() {
            if (a - ONE).norm() < 1e-14 {
                return domain(format!("z_{} = 1", i + 1));
            }
            for b in &z[i + 1..] {
                if (a - b).norm() < 1e-14 * (1.0 + a.norm()) {
                    return domain(format!("coincident spectral variables at {a}"));
                }
            }
        }
        Ok(SpectralVector { z })
    }

    pub fn k(&self) -> usize {
        self.z.len()
    }
}

/// A finitely supported function on W^k.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CompactFunction {
    pub values: BTreeMap<Vec<i64>, C64>,
}

impl CompactFunction {
    pub fn delta(x: &OrderedConfig) -> Self {
        let mut values = BTreeMap::new();
        values.insert(x.parts.clone(), ONE);
        CompactFunction { values }
    }

    pub fn insert(&mut self, n: &OrderedConfig, v: C64) {
        *self.values.entry(n.parts.clone()).or_insert(ZERO) += v;
    }

    pub fn get(&self, n: &[i64]) -> C64 {
        self.values.get(n).copied().unwrap_or(ZERO)
    }

    /// k of the configurations in the support.
    pub fn k(&self) -> Option<usize> {
        self.values.keys().next().map(|p| p.len())
    }

    /// prod_j 1_{n_j >= 1} restricted to n_1 <= box_size.
    pub fn step_box(k: usize, box_size: i64) -> Self {
        let mut f = CompactFunction::default();
        for n in OrderedConfig::enumerate(k, box_size) {
            if n.parts.iter().all(|&p| p >= 1) {
                f.insert(&n, ONE);
            }
        }
        f
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

fn check_k(k: usize) -> Result<()> {
    if k == 0 || k > 6 {
        return Err(Error::InvalidConfig(format!("eigenfunctions need 1 <= k <= 6, got {k}")));
    }
    Ok(())
}

/// sum_sigma prod_{B<A} (z_s(A) - c z_s(B))/(z_s(A) - z_s(B)) prod_j (1 - z_s(j))^{e n_j},
/// evaluated at any integer vector n.
fn bethe_sum(z: &[C64], n: &[i64], c: f64, e: i64) -> C64 {
    let k = z.len();
    let perms = contour::permutations(k);
    let mut total = ZERO;
    for p in &perms {
        let mut v = ONE;
        for a in 0..k {
            for b in 0..a {
                v *= (z[p[a]] - c * z[p[b]]) / (z[p[a]] - z[p[b]]);
            }
            v *= (1.0 - z[p[a]]).powi((e * n[a]) as i32);
        }
        total += v;
    }
    total
}

/// Cluster sizes of an arbitrary vector (maximal runs of equal entries).
fn cluster_sizes(n: &[i64]) -> Vec<usize> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < n.len() {
        let mut j = i;
        while j + 1 < n.len() && n[j + 1] == n[i] {
            j += 1;
        }
        out.push(j - i + 1);
        i = j + 1;
    }
    out
}

/// C_q(n) = (-1)^k q^{-k(k-1)/2} prod_clusters c_q!.
pub fn c_q(n: &[i64], q: QParam) -> f64 {
    let k = n.len() as i32;
    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
    sign * q.get().powi(-(k * (k - 1) / 2)) * cluster_sizes(n).iter().map(|&c| q_factorial(c, q)).product::<f64>()
}

/// The right eigenfunction as the displayed sum with q^{-1} in the cross
/// factor, without normalisation.
pub fn psi_right_sum(z: &SpectralVector, n: &[i64], q: QParam) -> C64 {
    bethe_sum(&z.z, n, 1.0 / q.get(), 1)
}

/// Left eigenfunction psi^l (any integer vector n) or right eigenfunction
/// psi^r (normalised so that J and F are mutual inverses).
pub fn psi(z: &SpectralVector, n: &[i64], side: Side, q: QParam) -> Result<C64> {
    check_k(z.k())?;
    if n.len() != z.k() {
        return Err(Error::InvalidConfig(format!("n has {} parts but z has {}", n.len(), z.k())));
    }
    Ok(match side {
        Side::Left => bethe_sum(&z.z, n, q.get(), -1),
        Side::Right => {
            let k = z.k() as i32;
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            let norm = sign * q.get().powi(k * (k - 1) / 2) / cluster_sizes(n).iter().map(|&c| q_factorial(c, q)).product::<f64>();
            psi_right_sum(z, n, q) * norm
        }
    })
}

/// q^{-k(k-1)/2} (P C_q)^{-1} psi^l at n, with (Pf)(n) = f(-n_k, ..., -n_1).
pub fn pt_conjugate_left(z: &SpectralVector, n: &[i64], q: QParam) -> Result<C64> {
    let k = n.len() as i32;
    let pn: Vec<i64> = n.iter().rev().map(|x| -x).collect();
    Ok(psi(z, &pn, Side::Left, q)? / (c_q(n, q) * q.get().powi(k * (k - 1) / 2)))
}

/// |psi^r - q^{-k(k-1)/2} (P C_q)^{-1} psi^l| at one point.
pub fn pt_residual(z: &SpectralVector, n: &OrderedConfig, q: QParam) -> Result<f64> {
    Ok((psi(z, &n.parts, Side::Right, q)? - pt_conjugate_left(z, &n.parts, q)?).norm())
}

/// q-Boson generator in cluster coordinates for complex functions on Z^k.
fn generator_cluster(q: f64, h: &dyn Fn(&[i64]) -> C64, n: &OrderedConfig) -> C64 {
    let h0 = h(&n.parts);
    let mut s = n.parts.clone();
    let mut idx = 0;
    let mut acc = ZERO;
    for c in n.clusters() {
        let last = idx + c - 1;
        idx += c;
        s[last] -= 1;
        acc += (1.0 - q.powi(c as i32)) * (h(&s) - h0);
        s[last] += 1;
    }
    acc
}

/// |L psi^l(n) - sum_j (q-1) z_j psi^l(n)|.
pub fn eigen_residual(z: &SpectralVector, n: &OrderedConfig, q: QParam) -> Result<f64> {
    check_k(z.k())?;
    let qv = q.get();
    let f = |m: &[i64]| bethe_sum(&z.z, m, qv, -1);
    let lhs = generator_cluster(qv, &f, n);
    let ev: C64 = z.z.iter().map(|zj| (qv - 1.0) * zj).sum();
    Ok((lhs - ev * f(&n.parts)).norm())
}

/// |(nabla_i - q nabla_{i+1}) psi^l| at n with n_i = n_{i+1}, where
/// nabla f(n) = f(n - 1) - f(n) in one coordinate. `i` is zero-based.
pub fn boundary_residual(z: &SpectralVector, n: &[i64], i: usize, q: QParam) -> Result<f64> {
    check_k(z.k())?;
    if i + 1 >= n.len() || n[i] != n[i + 1] {
        return Err(Error::InvalidConfig(format!("need n_{} = n_{}", i + 1, i + 2)));
    }
    let qv = q.get();
    let f = |m: &[i64]| bethe_sum(&z.z, m, qv, -1);
    let base = f(n);
    let mut a = n.to_vec();
    a[i] -= 1;
    let mut b = n.to_vec();
    b[i + 1] -= 1;
    Ok(((f(&a) - base) - qv * (f(&b) - base)).norm())
}

/// Bethe amplitude A_sigma = sgn(sigma) prod_{a>b} S(z_s(a), z_s(b)) / S(z_a, z_b)
/// with S(z1, z2) = -(z1 - q z2).
pub fn amplitude(z: &[C64], sigma: &[usize], q: f64) -> C64 {
    let s = |a: C64, b: C64| -(a - q * b);
    let k = z.len();
    let mut v = C64::new(permutation_sign(sigma), 0.0);
    for a in 0..k {
        for b in 0..a {
            v *= s(z[sigma[a]], z[sigma[b]]) / s(z[a], z[b]);
        }
    }
    v
}

pub fn permutation_sign(p: &[usize]) -> f64 {
    let mut sign = 1.0;
    for i in 0..p.len() {
        for j in i + 1..p.len() {
            if p[i] > p[j] {
                sign = -sign;
            }
        }
    }
    sign
}

/// Max over sigma and i of |A_{tau_i sigma} + S(z_s(i), z_s(i+1))/S(z_s(i+1), z_s(i)) A_sigma|,
/// where tau_i sigma swaps the values in positions i and i+1. This is the
/// ratio forced by S(z_s(i), z_s(i+1)) T_sigma + S(z_s(i+1), z_s(i)) T_{tau_i sigma} = 0.
pub fn amplitude_recursion_residual(z: &[C64], q: f64) -> f64 {
    let s = |a: C64, b: C64| -(a - q * b);
    let k = z.len();
    let mut worst = 0.0f64;
    for sigma in contour::permutations(k) {
        let a = amplitude(z, &sigma, q);
        for i in 0..k.saturating_sub(1) {
            let mut t = sigma.clone();
            t.swap(i, i + 1);
            let rhs = -s(z[sigma[i]], z[sigma[i + 1]]) / s(z[sigma[i + 1]], z[sigma[i]]) * a;
            worst = worst.max((amplitude(z, &t, q) - rhs).norm() / (1.0 + a.norm()));
        }
    }
    worst
}

/// (F f)(z) = sum_n f(n) psi^r_z(n).
pub fn transform_f(f: &CompactFunction, z: &SpectralVector, q: QParam) -> Result<C64> {
    let mut total = ZERO;
    for (n, v) in &f.values {
        total += v * psi(z, n, Side::Right, q)?;
    }
    Ok(total)
}

/// G_0(z) = q^{k(k-1)/2} prod (z_j - 1)/z_j, the spectral image of step data.
pub fn step_spectral(z: &[C64], q: QParam) -> C64 {
    let k = z.len() as i32;
    z.iter().map(|zj| (zj - 1.0) / zj).product::<C64>() * q.get().powi(k * (k - 1) / 2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JRoute {
    Nested,
    Unnested,
}

/// Default nested circles for J.
pub fn spectral_contours(q: QParam, k: usize) -> Result<NestedContourSpec> {
    contour::nested_radii(Model::Spectral(q), k)
}

/// (J G)(n) = int prod_{A<B} (z_A - z_B)/(z_A - q z_B) prod (1 - z_j)^{-n_j - 1} G(z) dz / (2 pi i)^k.
pub fn transform_j<G>(g: &G, n: &OrderedConfig, q: QParam, spec: &NestedContourSpec, route: JRoute) -> Result<C64>
where
    G: Fn(&[C64]) -> C64 + Sync,
{
    let k = n.k();
    if k == 0 || k > 4 {
        return Err(Error::InvalidConfig(format!("transform_j needs 1 <= k <= 4, got {k}")));
    }
    let parts = n.parts.clone();
    let f = move |z: &[C64]| {
        let mut v = g(z);
        for (zj, &nj) in z.iter().zip(&parts) {
            v /= (1.0 - zj).powi(nj as i32 + 1);
        }
        v
    };
    match route {
        JRoute::Nested => {
            if spec.k() != k {
                return Err(Error::InvalidConfig(format!("contour spec has {} circles, need {k}", spec.k())));
            }
            spec.verify()?;
            let qv = q.get();
            Ok(contour::nested_integral(spec, |z| {
                let mut c = ONE;
                for a in 0..k {
                    for b in a + 1..k {
                        c *= (z[a] - z[b]) / (z[a] - qv * z[b]);
                    }
                }
                c * f(z)
            }))
        }
        JRoute::Unnested => {
            let gamma = contour::unnest_contour(q).with_nodes(32);
            Ok(contour::unnest_expand(&f, q, k, &gamma)?.total)
        }
    }
}

/// max over x, y in the box of |J(F delta_x)(y) - 1_{x=y}|.
pub fn plancherel_check(k: usize, max_part: i64, q: QParam) -> Result<f64> {
    if k == 0 || k > 3 {
        return Err(Error::InvalidConfig(format!("plancherel_check needs 1 <= k <= 3, got {k}")));
    }
    let spec = spectral_contours(q, k)?;
    let configs = OrderedConfig::enumerate(k, max_part);
    let mut worst = 0.0f64;
    for x in &configs {
        let g = |z: &[C64]| {
            bethe_sum(z, &x.parts, 1.0 / q.get(), 1) * right_norm(&x.parts, q)
        };
        for y in &configs {
            let v = transform_j(&g, y, q, &spec, JRoute::Nested)?;
            let target = if x == y { ONE } else { ZERO };
            worst = worst.max((v - target).norm());
        }
    }
    Ok(worst)
}

fn right_norm(n: &[i64], q: QParam) -> f64 {
    let k = n.len() as i32;
    let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
    sign * q.get().powi(k * (k - 1) / 2) / cluster_sizes(n).iter().map(|&c| q_factorial(c, q)).product::<f64>()
}

/// <F, G>_C = int d mu_{(1)^k}(w) prod 1/(1 - w_j) F(w) G(w) on |w| = radius.
pub fn pairing_c<F, G>(f: &F, g: &G, k: usize, q: QParam, radius: f64, nodes: usize) -> Result<C64>
where
    F: Fn(&[C64]) -> C64 + Sync,
    G: Fn(&[C64]) -> C64 + Sync,
{
    if radius <= 1.0 {
        return Err(Error::InvalidConfig(format!("pairing circle must have radius > 1, got {radius}")));
    }
    if k == 0 || k > 3 {
        return Err(Error::InvalidConfig(format!("pairing needs 1 <= k <= 3, got {k}")));
    }
    let qv = q.get();
    let pts = circle_points(ZERO, radius, nodes, 0.0);
    let ones = Partition { parts: vec![1; k] };
    let m = pts.len();
    let total: C64 = (0..m.pow(k as u32))
        .into_par_iter()
        .map(|code| {
            let mut idx = vec![0usize; k];
            let mut c = code;
            for s in idx.iter_mut() {
                *s = c % m;
                c /= m;
            }
            for i in 0..k {
                for j in i + 1..k {
                    if idx[i] == idx[j] {
                        return ZERO;
                    }
                }
            }
            let w: Vec<C64> = idx.iter().map(|&i| pts[i].0).collect();
            let mut v = contour::dmu_density(&w, &ones, qv) * f(&w) * g(&w);
            for (&i, wj) in idx.iter().zip(&w) {
                v *= pts[i].1 / (1.0 - wj);
            }
            v
        })
        .sum();
    Ok(total / ones.symmetry_factor())
}

/// max over m, n in the box of |<psi^l(m), psi^r(n)>_C - 1_{m=n}|.
pub fn biorthogonality_check(k: usize, max_part: i64, q: QParam) -> Result<f64> {
    let configs = OrderedConfig::enumerate(k, max_part);
    let qv = q.get();
    let mut worst = 0.0f64;
    for m in &configs {
        for n in &configs {
            let l = |w: &[C64]| bethe_sum(w, &m.parts, qv, -1);
            let r = |w: &[C64]| bethe_sum(w, &n.parts, 1.0 / qv, 1) * right_norm(&n.parts, q);
            let v = pairing_c(&l, &r, k, q, 1.2, 256)?;
            let target = if m == n { ONE } else { ZERO };
            worst = worst.max((v - target).norm());
        }
    }
    Ok(worst)
}

/// h(t, n) = J(e^{t(q-1) sum z} F h0)(n) with nested contours.
pub fn solve_qboson(h0: &CompactFunction, t: f64, n: &OrderedConfig, q: QParam, spec: &NestedContourSpec) -> Result<Estimate<f64>> {
    let k = n.k();
    if let Some(kk) = h0.k() {
        if kk != k {
            return Err(Error::InvalidConfig(format!("h0 lives on k = {kk}, n has k = {k}")));
        }
    }
    let qv = q.get();
    let support: Vec<(Vec<i64>, C64, f64)> = h0.values.iter().map(|(p, v)| (p.clone(), *v, right_norm(p, q))).collect();
    let g = |z: &[C64]| {
        let mut fh = ZERO;
        for (p, v, norm) in &support {
            fh += v * bethe_sum(z, p, 1.0 / qv, 1) * *norm;
        }
        let s: C64 = z.iter().sum();
        (t * (qv - 1.0) * s).exp() * fh
    };
    let coarse_spec = spec.with_nodes(&spec.contours.iter().map(|c| (c.nodes / 2).max(16) & !1).collect::<Vec<_>>());
    let v = transform_j(&g, n, q, spec, JRoute::Nested)?;
    let vc = transform_j(&g, n, q, &coarse_spec, JRoute::Nested)?;
    if v.im.abs() > 1e-8 * (1.0 + v.norm()) {
        return Err(Error::Assertion(format!("imaginary part {:e} in a real solution", v.im)));
    }
    Ok(Estimate::new(v.re, (v - vc).norm()))
}

/// |d/dt h - L h| at (t, n) by centred differences of the solver.
pub fn backward_equation_residual(h0: &CompactFunction, t: f64, n: &OrderedConfig, q: QParam, spec: &NestedContourSpec, dt: f64) -> Result<f64> {
    let h = |m: &[i64], s: f64| -> C64 {
        match OrderedConfig::from_integers(m.to_vec()) {
            Ok(c) => solve_qboson(h0, s, &c, q, spec).map(|e| C64::new(e.value, 0.0)).unwrap_or(C64::new(f64::NAN, 0.0)),
            Err(_) => C64::new(f64::NAN, 0.0),
        }
    };
    let ddt = (h(&n.parts, t + dt) - h(&n.parts, t - dt)) / (2.0 * dt);
    let lh = generator_cluster(q.get(), &|m| h(m, t), n);
    let r = (ddt - lh).norm();
    if r.is_nan() {
        return Err(Error::QuadratureNotConverged("backward-equation residual".into()));
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q() -> QParam {
        QParam::new(0.4).unwrap()
    }

    #[test]
    fn k1_left_value() {
        let z = SpectralVector::new(vec![C64::new(0.5, 0.0)]).unwrap();
        assert!((psi(&z, &[2], Side::Left, q()).unwrap() - C64::new(4.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn rejects_degenerate_z() {
        assert!(SpectralVector::new(vec![ONE]).is_err());
        assert!(SpectralVector::new(vec![C64::new(0.2, 0.0), C64::new(0.2, 0.0)]).is_err());
    }

    #[test]
    fn full_cluster_eigen() {
        let z = SpectralVector::new(vec![C64::new(0.3, 0.2), C64::new(-0.5, 0.1), C64::new(0.7, -0.4)]).unwrap();
        let n = OrderedConfig::new(vec![2, 2, 2]).unwrap();
        assert!(eigen_residual(&z, &n, q()).unwrap() < 1e-10);
    }

    #[test]
    fn j_of_one_k1() {
        let spec = spectral_contours(q(), 1).unwrap();
        let g = |_: &[C64]| ONE;
        let v0 = transform_j(&g, &OrderedConfig::new(vec![0]).unwrap(), q(), &spec, JRoute::Nested).unwrap();
        let v2 = transform_j(&g, &OrderedConfig::new(vec![2]).unwrap(), q(), &spec, JRoute::Nested).unwrap();
        assert!((v0 + ONE).norm() < 1e-12);
        assert!(v2.norm() < 1e-12);
    }
}
