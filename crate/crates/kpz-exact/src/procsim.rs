//! q-TASEP, q-Boson, semi-discrete SHE and O'Connell-Yor simulation, plus
//! exact generator applications.

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};

use crate::error::{Error, Result};
use crate::mc::{self, MCEstimate, RngStream};
use crate::specfn::QParam;

/// Particle positions x_1 > x_2 > ... > x_N, with x_0 = +infinity implicit.
#[derive(Debug, Clone, PartialEq)]
pub struct QTasepState {
    pub positions: Vec<i64>,
    pub time: f64,
    pub q: QParam,
}

impl QTasepState {
    pub fn new(positions: Vec<i64>, q: QParam) -> Result<Self> {
        if positions.windows(2).any(|w| w[0] <= w[1]) {
            return Err(Error::InvalidConfig("positions must be strictly decreasing".into()));
        }
        Ok(QTasepState { positions, time: 0.0, q })
    }

    /// gap_i = x_{i-1} - x_i - 1 for 0-based i, None for the first particle.
    pub fn gap(&self, i: usize) -> Option<i64> {
        (i > 0).then(|| self.positions[i - 1] - self.positions[i] - 1)
    }

    pub fn gaps(&self) -> Vec<i64> {
        (1..self.positions.len()).map(|i| self.gap(i).unwrap()).collect()
    }

    fn rate(&self, i: usize) -> f64 {
        match self.gap(i) {
            None => 1.0,
            Some(g) => 1.0 - self.q.get().powi(g as i32),
        }
    }
}

/// Occupations y_0..y_N. Site 0 absorbs. With `reservoir` the top site
/// holds infinitely many particles and emits at rate 1.
#[derive(Debug, Clone, PartialEq)]
pub struct QBosonState {
    pub occupations: Vec<u32>,
    pub time: f64,
    pub reservoir: bool,
}

impl QBosonState {
    pub fn new(occupations: Vec<u32>) -> Self {
        QBosonState { occupations, time: 0.0, reservoir: false }
    }

    pub fn total(&self) -> u64 {
        self.occupations.iter().map(|&y| y as u64).sum()
    }
}

/// Weakly decreasing integer vector n_1 >= ... >= n_k.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OrderedConfig {
    pub parts: Vec<i64>,
}

impl OrderedConfig {
    /// Nonnegative, weakly decreasing parts.
    pub fn new(parts: Vec<i64>) -> Result<Self> {
        if parts.iter().any(|&p| p < 0) {
            return Err(Error::InvalidConfig(format!("negative part in {parts:?}")));
        }
        Self::from_integers(parts)
    }

    /// Weakly decreasing parts of any sign (the free evolution lives on Z^k).
    pub fn from_integers(parts: Vec<i64>) -> Result<Self> {
        if parts.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidConfig(format!("parts must be weakly decreasing: {parts:?}")));
        }
        Ok(OrderedConfig { parts })
    }

    pub fn k(&self) -> usize {
        self.parts.len()
    }

    /// Cluster sizes, in order.
    pub fn clusters(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut i = 0;
        while i < self.parts.len() {
            let mut j = i;
            while j + 1 < self.parts.len() && self.parts[j + 1] == self.parts[i] {
                j += 1;
            }
            out.push(j - i + 1);
            i = j + 1;
        }
        out
    }

    /// y_i = #{j : n_j = i} for i = 0..=n_sites.
    pub fn to_qboson(&self, n_sites: usize) -> Result<QBosonState> {
        let mut y = vec![0u32; n_sites + 1];
        for &p in &self.parts {
            if p < 0 || p as usize > n_sites {
                return Err(Error::InvalidConfig(format!("part {p} outside 0..={n_sites}")));
            }
            y[p as usize] += 1;
        }
        Ok(QBosonState::new(y))
    }

    pub fn from_qboson(y: &QBosonState) -> Self {
        let mut parts = Vec::new();
        for (i, &c) in y.occupations.iter().enumerate().rev() {
            for _ in 0..c {
                parts.push(i as i64);
            }
        }
        OrderedConfig { parts }
    }

    /// All nonnegative configurations with k parts bounded by `max_part`.
    pub fn enumerate(k: usize, max_part: i64) -> Vec<OrderedConfig> {
        fn rec(k: usize, hi: i64, cur: &mut Vec<i64>, out: &mut Vec<OrderedConfig>) {
            if cur.len() == k {
                out.push(OrderedConfig { parts: cur.clone() });
                return;
            }
            for p in (0..=hi).rev() {
                cur.push(p);
                rec(k, p, cur, out);
                cur.pop();
            }
        }
        let mut out = Vec::new();
        rec(k, max_part, &mut Vec::new(), &mut out);
        out
    }
}

pub fn step_initial(n: usize, q: QParam) -> Result<QTasepState> {
    if n == 0 {
        return Err(Error::InvalidConfig("N must be at least 1".into()));
    }
    QTasepState::new((1..=n as i64).map(|i| -i).collect(), q)
}

/// Exact Gillespie simulation up to `t_end`. After particle i jumps only
/// the rates of i and i+1 change; the running total is updated in place
/// and resummed every 1024 events to stop drift.
pub fn qtasep_simulate<R: Rng + ?Sized>(state: &mut QTasepState, t_end: f64, rng: &mut R) {
    let n = state.positions.len();
    let mut rates: Vec<f64> = (0..n).map(|i| state.rate(i)).collect();
    let mut total: f64 = rates.iter().sum();
    let mut events = 0u32;
    loop {
        let e: f64 = Exp1.sample(rng);
        let dt = e / total;
        if state.time + dt >= t_end {
            state.time = t_end;
            return;
        }
        state.time += dt;
        let mut u = rng.gen::<f64>() * total;
        let mut i = n - 1;
        for (j, r) in rates.iter().enumerate() {
            if u < *r {
                i = j;
                break;
            }
            u -= r;
        }
        if rates[i] == 0.0 {
            continue;
        }
        state.positions[i] += 1;
        for j in [i, i + 1] {
            if j < n {
                let r = state.rate(j);
                total += r - rates[j];
                rates[j] = r;
            }
        }
        events += 1;
        if events % 1024 == 0 {
            total = rates.iter().sum();
        }
    }
}

/// Gillespie simulation of the q-Boson process.
pub fn qboson_simulate<R: Rng + ?Sized>(state: &mut QBosonState, q: QParam, t_end: f64, rng: &mut R) {
    let q = q.get();
    let top = state.occupations.len() - 1;
    let rate = |s: &QBosonState, i: usize| -> f64 {
        if i == 0 {
            0.0
        } else if s.reservoir && i == top {
            1.0
        } else {
            1.0 - q.powi(s.occupations[i] as i32)
        }
    };
    let mut rates: Vec<f64> = (0..=top).map(|i| rate(state, i)).collect();
    loop {
        let total: f64 = rates.iter().sum();
        if total <= 0.0 {
            state.time = t_end;
            return;
        }
        let e: f64 = Exp1.sample(rng);
        if state.time + e / total >= t_end {
            state.time = t_end;
            return;
        }
        state.time += e / total;
        let mut u = rng.gen::<f64>() * total;
        let mut i = top;
        for (j, r) in rates.iter().enumerate() {
            if u < *r {
                i = j;
                break;
            }
            u -= r;
        }
        if rates[i] == 0.0 {
            continue;
        }
        if !(state.reservoir && i == top) {
            state.occupations[i] -= 1;
        }
        state.occupations[i - 1] += 1;
        rates[i] = rate(state, i);
        rates[i - 1] = rate(state, i - 1);
    }
}

/// q-TASEP gaps as q-Boson occupations: gap of particle i (1-based) sits at
/// site N + 1 - i, particle 1 becomes the reservoir and site 0 is the sink.
pub fn gaps_as_qboson(state: &QTasepState) -> QBosonState {
    let n = state.positions.len();
    let mut y = vec![0u32; n + 1];
    for i in 2..=n {
        y[n + 1 - i] = state.gap(i - 1).unwrap() as u32;
    }
    QBosonState { occupations: y, time: state.time, reservoir: true }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Process {
    QTasep,
    QBoson,
}

/// (L f)(state). For q-TASEP the state is the position vector; for the
/// q-Boson process it is the occupation vector y_0..y_N.
pub fn generator_apply(process: Process, q: QParam, f: &dyn Fn(&[i64]) -> f64, state: &[i64]) -> f64 {
    let qv = q.get();
    let f0 = f(state);
    let mut acc = 0.0;
    let mut s = state.to_vec();
    match process {
        Process::QTasep => {
            for i in 0..state.len() {
                let rate = if i == 0 { 1.0 } else { 1.0 - qv.powi((state[i - 1] - state[i] - 1) as i32) };
                if rate == 0.0 {
                    continue;
                }
                s[i] += 1;
                acc += rate * (f(&s) - f0);
                s[i] -= 1;
            }
        }
        Process::QBoson => {
            for i in 1..state.len() {
                if state[i] == 0 {
                    continue;
                }
                let rate = 1.0 - qv.powi(state[i] as i32);
                s[i] -= 1;
                s[i - 1] += 1;
                acc += rate * (f(&s) - f0);
                s[i] += 1;
                s[i - 1] -= 1;
            }
        }
    }
    acc
}

/// Duality functional prod_i q^{(x_i + i) y_i}, zero when y_0 > 0.
pub fn duality_h(x: &[i64], y: &[i64], q: QParam) -> f64 {
    if y[0] > 0 {
        return 0.0;
    }
    let mut e = 0i64;
    for i in 1..y.len() {
        e += (x[i - 1] + i as i64) * y[i];
    }
    q.get().powi(e as i32)
}

/// |L^{qTASEP} H(., y)(x) - L^{qBoson} H(x, .)(y)|.
pub fn duality_residual(x: &[i64], y: &[i64], q: QParam) -> f64 {
    let lx = generator_apply(Process::QTasep, q, &|xs| duality_h(xs, y, q), x);
    let ly = generator_apply(Process::QBoson, q, &|ys| duality_h(x, ys, q), y);
    (lx - ly).abs()
}

/// A random pair (x, y) with N <= max_n, sum(y) <= max_particles and
/// x_N + N >= 0, so that H lies in (0, 1].
pub fn random_dual_pair<R: Rng + ?Sized>(rng: &mut R, max_n: usize, max_particles: u32) -> (Vec<i64>, Vec<i64>) {
    let n = rng.gen_range(1..=max_n);
    let mut x = vec![0i64; n];
    x[n - 1] = -(n as i64) + rng.gen_range(0..4);
    for i in (0..n - 1).rev() {
        x[i] = x[i + 1] + 1 + rng.gen_range(0..4);
    }
    let mut y = vec![0i64; n + 1];
    let total = rng.gen_range(0..=max_particles);
    for _ in 0..total {
        // site 0 is hit rarely so the H = 0 convention is exercised too
        let site = if rng.gen_bool(0.05) { 0 } else { rng.gen_range(1..=n) };
        y[site] += 1;
    }
    (x, y)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// Every cluster moves, so configurations range over Z^k.
    Free,
    /// Clusters at 0 are frozen.
    Absorbing,
}

/// q-Boson generator in cluster coordinates: the last member of each
/// cluster of size c steps down at rate 1 - q^c.
pub fn qboson_generator_ordered(q: QParam, h: &dyn Fn(&[i64]) -> f64, n: &OrderedConfig, boundary: Boundary) -> f64 {
    let qv = q.get();
    let h0 = h(&n.parts);
    let mut acc = 0.0;
    let mut idx = 0;
    let mut s = n.parts.clone();
    for c in n.clusters() {
        let last = idx + c - 1;
        idx += c;
        if boundary == Boundary::Absorbing && n.parts[last] == 0 {
            continue;
        }
        s[last] -= 1;
        acc += (1.0 - qv.powi(c as i32)) * (h(&s) - h0);
        s[last] += 1;
    }
    acc
}

/// Monte Carlo estimate of E[prod_i q^{x_{n_i}(t) + n_i}] under step data.
pub fn mc_qmoment(n_vec: &OrderedConfig, t: f64, q: QParam, width: usize, n_samples: usize, stream: RngStream) -> Result<MCEstimate> {
    let max = *n_vec.parts.first().ok_or_else(|| Error::InvalidConfig("empty n_vec".into()))?;
    if n_vec.parts.iter().any(|&p| p < 1) {
        return Err(Error::InvalidConfig("mc_qmoment needs parts >= 1".into()));
    }
    if (width as i64) < max {
        return Err(Error::InvalidConfig(format!("width {width} is smaller than the largest part {max}")));
    }
    // particles beyond the largest part never influence the observable
    let init = step_initial(max as usize, q)?;
    let qv = q.get();
    Ok(mc::run(n_samples, stream, |rng| {
        let mut s = init.clone();
        qtasep_simulate(&mut s, t, rng);
        let e: i64 = n_vec.parts.iter().map(|&n| s.positions[n as usize - 1] + n).sum();
        qv.powi(e as i32)
    }))
}

/// Euler-Maruyama for dz(n) = (z(n-1) - z(n)) dtau + z(n) dB_n, z_0(n) = 1_{n=1}.
pub fn she_semidiscrete_simulate<R: Rng + ?Sized>(n: usize, tau_end: f64, dt: f64, rng: &mut R) -> Result<Vec<f64>> {
    if !(dt > 0.0) {
        return Err(Error::InvalidConfig(format!("dt must be positive, got {dt}")));
    }
    if n == 0 {
        return Err(Error::InvalidConfig("N must be at least 1".into()));
    }
    let steps = (tau_end / dt).ceil().max(1.0) as usize;
    let h = tau_end / steps as f64;
    let sh = h.sqrt();
    let mut z = vec![0.0; n];
    z[0] = 1.0;
    for _ in 0..steps {
        let mut prev = 0.0;
        for zi in z.iter_mut() {
            let xi: f64 = StandardNormal.sample(rng);
            let old = *zi;
            *zi = old + (prev - old) * h + old * sh * xi;
            prev = old;
        }
    }
    Ok(z)
}

/// Monte Carlo E[prod_i z(tau; n_i)] from Euler-Maruyama paths.
pub fn mc_she_moment(n_vec: &OrderedConfig, tau: f64, dt: f64, n_samples: usize, stream: RngStream) -> Result<MCEstimate> {
    let max = *n_vec.parts.first().ok_or_else(|| Error::InvalidConfig("empty n_vec".into()))?;
    if n_vec.parts.iter().any(|&p| p < 1) {
        return Err(Error::InvalidConfig("parts must be >= 1".into()));
    }
    if !(dt > 0.0) {
        return Err(Error::InvalidConfig(format!("dt must be positive, got {dt}")));
    }
    Ok(mc::run(n_samples, stream, |rng| {
        let z = she_semidiscrete_simulate(max as usize, tau, dt, rng).expect("validated");
        n_vec.parts.iter().map(|&p| z[p as usize - 1]).product()
    }))
}

/// Uniform point of {0 < s_1 < ... < s_{m} < T} via sorted uniforms.
pub fn uniform_simplex<R: Rng + ?Sized>(rng: &mut R, m: usize, t: f64) -> Vec<f64> {
    let mut s: Vec<f64> = (0..m).map(|_| rng.gen::<f64>() * t).collect();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    s
}

/// Interval lengths |I_j cap I'_j| for two up-right paths with jump times
/// s and s' (each of length N-1) on [0, T].
pub fn path_overlaps(s: &[f64], sp: &[f64], t: f64) -> Vec<f64> {
    let n = s.len() + 1;
    let bound = |v: &[f64], j: usize| -> (f64, f64) {
        let a = if j == 0 { 0.0 } else { v[j - 1] };
        let b = if j == n - 1 { t } else { v[j] };
        (a, b)
    };
    (0..n)
        .map(|j| {
            let (a, b) = bound(s, j);
            let (c, d) = bound(sp, j);
            (b.min(d) - a.max(c)).max(0.0)
        })
        .collect()
}

/// Variance of sum_i int dB_{phi_i} over all replicas, from the pointwise
/// occupation counts sum_j int (#{i : phi_i(s) = j})^2 ds.
pub fn replica_variance(paths: &[Vec<f64>], t: f64) -> f64 {
    let mut cuts: Vec<f64> = vec![0.0, t];
    for p in paths {
        cuts.extend(p.iter().copied());
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut var = 0.0;
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let mid = 0.5 * (a + b);
        let mut counts = std::collections::BTreeMap::new();
        for p in paths {
            let level = p.iter().filter(|&&s| s <= mid).count();
            *counts.entry(level).or_insert(0u32) += 1;
        }
        var += (b - a) * counts.values().map(|&c| (c * c) as f64).sum::<f64>();
    }
    var
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OverlapReport {
    /// E[Z^2]/E[Z]^2 for the modified polymer, prod (1 + beta B_j).
    pub ratio_modified: MCEstimate,
    /// E[Z^2]/E[Z]^2 for the exponential polymer.
    pub ratio_exponential: MCEstimate,
    /// max |exp(sigma^2/2 - kT/2) - exp(overlap)| over the sampled pairs.
    pub gaussian_identity_residual: f64,
}

/// Second-moment ratios through the replica overlap of two independent
/// uniform paths.
pub fn oy_overlap_second_moment(t: f64, n: usize, beta: f64, n_samples: usize, stream: RngStream) -> Result<OverlapReport> {
    if n < 2 || !(t > 0.0) {
        return Err(Error::InvalidConfig(format!("need N >= 2 and T > 0, got N={n}, T={t}")));
    }
    let b2 = beta * beta;
    let acc = mc::run_vec(n_samples, stream, 2, |rng, out| {
        let s = uniform_simplex(rng, n - 1, t);
        let sp = uniform_simplex(rng, n - 1, t);
        let ov = path_overlaps(&s, &sp, t);
        out[0] = ov.iter().map(|o| 1.0 + b2 * o).product();
        out[1] = (b2 * ov.iter().sum::<f64>()).exp();
    });
    // the Gaussian moment identity, checked pathwise on an independent stream
    let mut rng = stream.block(u32::MAX as u64).rng();
    let mut max_res: f64 = 0.0;
    for _ in 0..1024 {
        let s = uniform_simplex(&mut rng, n - 1, t);
        let sp = uniform_simplex(&mut rng, n - 1, t);
        let total: f64 = path_overlaps(&s, &sp, t).iter().sum();
        let var = replica_variance(&[s, sp], t);
        max_res = max_res.max(((var / 2.0 - t).exp() - total.exp()).abs());
    }
    Ok(OverlapReport {
        ratio_modified: acc[0].estimate(stream.seed),
        ratio_exponential: acc[1].estimate(stream.seed),
        gaussian_identity_residual: max_res,
    })
}

/// Monte Carlo E[Z(T, N)] for the exponential polymer: the simplex volume
/// times the mean of exp(beta sum_j B_j(I_j)).
pub fn oy_mean_partition(t: f64, n: usize, beta: f64, n_samples: usize, stream: RngStream) -> Result<MCEstimate> {
    if n < 2 || !(t > 0.0) {
        return Err(Error::InvalidConfig(format!("need N >= 2 and T > 0, got N={n}, T={t}")));
    }
    let vol = t.powi(n as i32 - 1) / (1..n).map(|i| i as f64).product::<f64>();
    Ok(mc::run(n_samples, stream, |rng| {
        let s = uniform_simplex(rng, n - 1, t);
        let mut prev = 0.0;
        let mut x = 0.0;
        for j in 0..n {
            let end = if j == n - 1 { t } else { s[j] };
            let g: f64 = StandardNormal.sample(rng);
            x += (end - prev).sqrt() * g;
            prev = end;
        }
        vol * (beta * x).exp()
    }))
}
