//! Real-line quadrature: Gauss-Legendre rules, panels and adaptive bisection.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};

/// Nodes and weights of the n-point Gauss-Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> Arc<(Vec<f64>, Vec<f64>)> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<(Vec<f64>, Vec<f64>)>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(r) = cache.lock().unwrap().get(&n) {
        return r.clone();
    }
    let r = Arc::new(compute_gl(n));
    cache.lock().unwrap().insert(n, r.clone());
    r
}

fn compute_gl(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for j in 2..=n {
                let jf = j as f64;
                let p2 = ((2.0 * jf - 1.0) * z * p1 - (jf - 1.0) * p0) / jf;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p0 = 1.0;
                p1 = z;
            }
            dp = nf * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// Nodes and weights mapped to [a, b].
pub fn gl_nodes(a: f64, b: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let r = gauss_legendre(n);
    let (c, h) = ((a + b) / 2.0, (b - a) / 2.0);
    (r.0.iter().map(|t| c + h * t).collect(), r.1.iter().map(|w| h * w).collect())
}

/// Composite Gauss-Legendre on `panels` equal panels.
pub fn gl_panels(a: f64, b: f64, panels: usize, per_panel: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = Vec::with_capacity(panels * per_panel);
    let mut ws = Vec::with_capacity(panels * per_panel);
    let h = (b - a) / panels as f64;
    for p in 0..panels {
        let (x, w) = gl_nodes(a + h * p as f64, a + h * (p + 1) as f64, per_panel);
        xs.extend(x);
        ws.extend(w);
    }
    (xs, ws)
}

pub fn gl_integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let (x, w) = gl_nodes(a, b, n);
    x.iter().zip(&w).map(|(x, w)| w * f(*x)).sum()
}

/// Adaptive bisection with a 15-point rule, compared against its two halves.
pub fn adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> Result<f64> {
    fn rec<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> Result<f64> {
        let m = 0.5 * (a + b);
        let l = gl_integrate(f, a, m, 15);
        let r = gl_integrate(f, m, b, 15);
        if (l + r - whole).abs() <= tol || (b - a).abs() < 1e-12 {
            return Ok(l + r);
        }
        if depth > 50 {
            return Err(Error::QuadratureNotConverged(format!("adaptive on [{a}, {b}]")));
        }
        Ok(rec(f, a, m, l, tol / 2.0, depth + 1)? + rec(f, m, b, r, tol / 2.0, depth + 1)?)
    }
    let whole = gl_integrate(f, a, b, 15);
    rec(f, a, b, whole, tol, 0)
}
