use std::f64::consts::PI;

use rand::Rng;

use kpz_exact::asym::{intermittency_report, lyapunov_growth};
use kpz_exact::bethe::{biorthogonality_check, boundary_residual, eigen_residual, plancherel_check, SpectralVector};
use kpz_exact::chaos::{
    chaos_variance, chaos_variance_k2_iterated, chaos_variance_printed, dirichlet_formula, dirichlet_mc, scaling_slope,
    she_second_moment, ChaosMode,
};
use kpz_exact::contour::{nested_radii, qtasep_moment_nested, qtasep_moment_unnested, unnest_contour, Model};
use kpz_exact::fredholm::{g_series, kpz_crossover, qlaplace_contour, qtasep_pmf, tracy_widom_f2, QLaplaceMbGrid, QLaplaceResummed, TwMethod};
use kpz_exact::mc::{self, RngStream};
use kpz_exact::procsim::{duality_residual, mc_qmoment, oy_overlap_second_moment, qtasep_simulate, random_dual_pair, step_initial, OrderedConfig};
use kpz_exact::{Result, C64};

use crate::config::ExperimentConfig;
use crate::output::{Curve, RunOutput, Table};

pub fn run(cfg: &ExperimentConfig) -> Result<RunOutput> {
    match cfg.experiment.as_str() {
        "duality-check" => duality(cfg),
        "moments" => moments(cfg),
        "qlaplace" => qlaplace(cfg),
        "lyapunov" => lyapunov(cfg),
        "tracy-widom" => tracy_widom(cfg),
        "crossover" => crossover(cfg),
        "spectral" => spectral(cfg),
        "chaos" => chaos(cfg),
        "polymer" => polymer(cfg),
        other => unreachable!("unregistered experiment {other}"),
    }
}

fn join(v: &[i64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
}

fn duality(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let q = cfg.q();
    let mut rng = RngStream::new(cfg.seed, 0).rng();
    let mut table = Table::new("duality", &["trial", "x", "y", "residual"]);
    let mut worst = 0.0f64;
    for trial in 0..cfg.usize("trials") {
        let (x, y) = random_dual_pair(&mut rng, cfg.usize("N"), cfg.int("max-particles") as u32);
        let r = duality_residual(&x, &y, q);
        worst = worst.max(r);
        table.push(vec![trial.into(), join(&x).into(), join(&y).into(), r.into()]);
    }
    let mut out = RunOutput::default();
    out.check_le("duality-residual", worst, cfg.float("tol-duality"), format!("max residual {worst:.3e}"));
    out.tables.push(table);
    Ok(out)
}

fn moments(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let (q, t) = (cfg.q(), cfg.float("t"));
    let n = OrderedConfig::new(cfg.ints("n").to_vec())?;
    let spec = nested_radii(Model::QTasep(q), n.k())?;
    let nested = qtasep_moment_nested(&n, t, q, &spec)?;
    let un = qtasep_moment_unnested(&n, t, q, &unnest_contour(q))?.total;
    let est = mc_qmoment(&n, t, q, n.parts[0] as usize, cfg.usize("samples"), RngStream::new(cfg.seed, 0))?;
    let mut table = Table::new("moments", &["method", "value", "error"]);
    table.push(vec!["nested".into(), nested.value.into(), nested.error.into()]);
    table.push(vec!["unnested".into(), un.re.into(), un.im.abs().into()]);
    table.push(vec!["monte-carlo".into(), est.mean.into(), est.stderr.into()]);
    let mut out = RunOutput::default();
    let rel = (un - nested.value).norm() / nested.value.abs();
    out.check_le("nested-vs-unnested", rel, cfg.float("tol-contour"), format!("relative difference {rel:.3e}"));
    let z = est.z_score(nested.value);
    out.check_le("monte-carlo", z, cfg.float("tol-mc-sigmas"), format!("{:.6} +- {:.1e}, |z| = {z:.2}", est.mean, est.stderr));
    out.tables.push(table);
    Ok(out)
}

fn qlaplace(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let (q, t, n) = (cfg.q(), cfg.float("t"), cfg.int("n"));
    let qv = q.get();
    let gamma = qlaplace_contour(q, 64)?;
    let mb = QLaplaceMbGrid::new(q, t, n, &gamma, PI / 2.0)?;
    let res = QLaplaceResummed::new(q, t, n, &gamma)?;
    let mut out = RunOutput::default();

    let mut gt = Table::new("g_vs_det", &["zeta", "g_series", "det_mellin_barnes", "det_resummed"]);
    let mut worst = 0.0f64;
    for &zr in cfg.floats("zeta") {
        let z = C64::new(zr, 0.0);
        let g = g_series(z, q, t, n, 6)?.value;
        let (d_mb, _) = mb.det(z, 12)?;
        let d_res = res.det_at_x((1.0 - qv) * z)?;
        worst = worst.max((g - d_mb).norm()).max((g - d_res).norm());
        gt.push(vec![zr.into(), g.re.into(), d_mb.re.into(), d_res.re.into()]);
    }
    out.check_le("g-vs-det", worst, cfg.float("tol-g-vs-det"), format!("max |G - det| {worst:.3e}"));

    let m_max = cfg.usize("m-max");
    let pmf = qtasep_pmf(q, t, n, m_max, 64)?;
    let samples = cfg.usize("samples");
    let nn = n as usize;
    let init = step_initial(nn, q)?;
    let hist = mc::run_vec(samples, RngStream::new(cfg.seed, 0), m_max + 1, |rng, o| {
        let mut s = init.clone();
        qtasep_simulate(&mut s, t, rng);
        o.iter_mut().for_each(|x| *x = 0.0);
        let m = s.positions[nn - 1] + n;
        if (m as usize) <= m_max {
            o[m as usize] = 1.0;
        }
    });
    let mut pt = Table::new("pmf", &["m", "inverted", "inversion_error", "mc_frequency", "mc_stderr"]);
    // binomial z-scores; atoms expecting fewer than 20 hits are pooled into one bin
    let ns = samples as f64;
    let z = |p: f64, f: f64| (f - p).abs() / (p * (1.0 - p) / ns).sqrt();
    let (mut worst_z, mut scored) = (0.0f64, 0);
    let (mut pool_p, mut pool_f) = (0.0, 0.0);
    for (m, (p, h)) in pmf.iter().zip(&hist).enumerate() {
        let e = h.estimate(cfg.seed);
        if p.value * ns >= 20.0 {
            worst_z = worst_z.max(z(p.value, e.mean));
            scored += 1;
        } else {
            pool_p += p.value.max(0.0);
            pool_f += e.mean;
        }
        pt.push(vec![m.into(), p.value.into(), p.error.into(), e.mean.into(), e.stderr.into()]);
    }
    if pool_p * ns >= 20.0 {
        worst_z = worst_z.max(z(pool_p, pool_f));
        scored += 1;
    }
    let mass: f64 = pmf.iter().map(|p| p.value).sum();
    let neg = pmf.iter().map(|p| -p.value).fold(0.0f64, f64::max);
    out.check_le("pmf-mass", (mass - 1.0).abs(), cfg.float("tol-pmf-mass"), format!("mass {mass:.12}"));
    out.check_le("pmf-negativity", neg, cfg.float("tol-pmf-negativity"), format!("smallest atom {:.2e}", -neg));
    out.check_le("histogram", worst_z, cfg.float("tol-mc-sigmas"), format!("max |z| {worst_z:.2} over {scored} bins"));
    out.tables.extend([gt, pt]);
    Ok(out)
}

fn lyapunov(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let k_max = cfg.usize("k-max");
    let mut cols = vec!["nu".to_string(), "gamma_as".to_string()];
    cols.extend((1..=k_max).map(|k| format!("gamma_{k}")));
    cols.extend(["weakly_ordered".to_string(), "min_gap".to_string()]);
    let cols: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut table = Table::new("lyapunov", &cols);
    let mut out = RunOutput::default();
    let mut all_ordered = true;
    let mut worst_gap = f64::INFINITY;
    for &nu in cfg.floats("nu") {
        let p = intermittency_report(nu, k_max)?;
        all_ordered &= p.weakly_ordered;
        worst_gap = worst_gap.min(p.min_gap);
        let mut row = vec![nu.into(), p.gamma_as.into()];
        row.extend(p.gamma_k.iter().map(|g| (*g).into()));
        row.extend([p.weakly_ordered.into(), p.min_gap.into()]);
        table.push(row);
    }
    out.check_bool("chain-ordered", all_ordered, format!("smallest gap {worst_gap:.4e}"));
    out.tables.push(table);

    if let Some(tau) = cfg.opt_float("tau") {
        let g = lyapunov_growth(cfg.float("growth-nu"), tau)?;
        let mut gt = Table::new("growth", &["nu", "tau", "z_c", "h2_at_zc", "observed_rate", "corrected_rate", "relative_error"]);
        gt.push(vec![g.nu.into(), g.tau.into(), g.z_c.into(), g.h2_at_zc.into(), g.observed_rate.into(), g.corrected_rate.into(), g.relative_error.into()]);
        out.check_le(
            "growth-rate",
            g.relative_error,
            cfg.float("tol-growth"),
            format!("log|term|/tau = {:.5} vs H2(z_c) = {:.5}; with the Gaussian prefactor removed {:.5}", g.observed_rate, g.h2_at_zc, g.corrected_rate),
        );
        out.tables.push(gt);
    }
    Ok(out)
}

fn tracy_widom(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let mut table = Table::new("tracy_widom", &["s", "F2_fredholm", "F2_painleve", "abs_diff"]);
    let mut worst = 0.0f64;
    for &s in cfg.floats("s-grid") {
        let f = tracy_widom_f2(s, TwMethod::Fredholm)?;
        let p = tracy_widom_f2(s, TwMethod::Painleve)?;
        worst = worst.max((f - p).abs());
        table.push(vec![s.into(), f.into(), p.into(), (f - p).abs().into()]);
    }
    let mut out = RunOutput::default();
    out.check_le("fredholm-vs-painleve", worst, cfg.float("tol-tw"), format!("max |diff| {worst:.3e}"));
    out.tables.push(table);
    Ok(out)
}

fn crossover(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let rs = cfg.floats("r-grid");
    let mut ts = cfg.floats("t").to_vec();
    ts.sort_by(f64::total_cmp);
    let f2: Vec<f64> = rs.iter().map(|&r| tracy_widom_f2(r, TwMethod::Fredholm)).collect::<Result<_>>()?;
    let mut table = Table::new("crossover", &["r", "t", "F_t", "F2"]);
    let mut out = RunOutput::default();
    let mut sups = Vec::new();
    for &t in &ts {
        let v: Vec<f64> = rs.iter().map(|&r| kpz_crossover(r, t)).collect::<Result<_>>()?;
        let over = v.iter().map(|x| (x - 1.0).max(-x)).fold(0.0f64, f64::max);
        out.check_le(&format!("range-t{t}"), over, cfg.float("tol-range"), format!("largest excursion outside [0,1] {over:.2e}"));
        let monotone = v.windows(2).all(|w| w[1] >= w[0]);
        out.check_bool(&format!("monotone-t{t}"), monotone, String::new());
        sups.push(v.iter().zip(&f2).map(|(a, b)| (a - b).abs()).fold(0.0f64, f64::max));
        for ((r, x), g) in rs.iter().zip(&v).zip(&f2) {
            table.push(vec![(*r).into(), t.into(), (*x).into(), (*g).into()]);
        }
        out.curves.push(Curve {
            file: format!("crossover_t{t}.dat"),
            header: vec!["r [dimensionless]".into(), format!("F_t(r) at t={t} [probability]")],
            points: rs.iter().zip(&v).map(|(r, x)| vec![*r, *x]).collect(),
        });
    }
    out.curves.push(Curve {
        file: "fgue.dat".into(),
        header: vec!["s [dimensionless]".into(), "F2(s) [probability]".into()],
        points: rs.iter().zip(&f2).map(|(r, x)| vec![*r, *x]).collect(),
    });
    if !rs.is_empty() && sups.len() >= 2 {
        let decreasing = sups.windows(2).all(|w| w[1] < w[0]);
        out.check_bool("approach-to-f2", decreasing, format!("sup |F_t - F2| = {sups:.4?}"));
    }
    out.tables.push(table);
    Ok(out)
}

fn spectral(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let q = cfg.q();
    let k_max = cfg.usize("k-max");
    let max_part = cfg.int("max-part");
    let mut rng = RngStream::new(cfg.seed, 0).rng();
    let (mut worst_e, mut worst_b) = (0.0f64, 0.0f64);
    for _ in 0..cfg.usize("trials") {
        let k = rng.gen_range(1..=k_max);
        let z: Vec<C64> = (0..k).map(|_| C64::from_polar(rng.gen_range(0.3..0.9), rng.gen_range(0.0..2.0 * PI)) + 1.0).collect();
        let Ok(z) = SpectralVector::new(z) else { continue };
        let mut parts: Vec<i64> = (0..k).map(|_| rng.gen_range(0..=max_part)).collect();
        parts.sort_unstable_by(|a, b| b.cmp(a));
        worst_e = worst_e.max(eigen_residual(&z, &OrderedConfig::new(parts.clone())?, q)?);
        if k >= 2 {
            let i = rng.gen_range(0..k - 1);
            parts[i + 1] = parts[i];
            parts.sort_unstable_by(|a, b| b.cmp(a));
            let j = (0..k - 1).find(|&j| parts[j] == parts[j + 1]).expect("a cluster was made");
            worst_b = worst_b.max(boundary_residual(&z, &parts, j, q)?);
        }
    }
    let mut table = Table::new("spectral", &["check", "k", "value", "tolerance"]);
    let mut out = RunOutput::default();
    table.push(vec!["eigenrelation".into(), k_max.into(), worst_e.into(), cfg.float("tol-eigen").into()]);
    out.check_le("eigenrelation", worst_e, cfg.float("tol-eigen"), format!("max residual {worst_e:.3e}"));
    if k_max >= 2 {
        table.push(vec!["boundary".into(), k_max.into(), worst_b.into(), cfg.float("tol-eigen").into()]);
        out.check_le("boundary", worst_b, cfg.float("tol-eigen"), format!("max residual {worst_b:.3e}"));
    }
    for k in 1..=k_max {
        let pl = plancherel_check(k, max_part, q)?;
        let bo = biorthogonality_check(k, max_part, q)?;
        table.push(vec!["plancherel".into(), k.into(), pl.into(), cfg.float("tol-plancherel").into()]);
        table.push(vec!["biorthogonality".into(), k.into(), bo.into(), cfg.float("tol-biorthogonality").into()]);
        out.check_le(&format!("plancherel-k{k}"), pl, cfg.float("tol-plancherel"), String::new());
        out.check_le(&format!("biorthogonality-k{k}"), bo, cfg.float("tol-biorthogonality"), String::new());
    }
    out.tables.push(table);
    Ok(out)
}

fn chaos(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let (t, x) = (cfg.float("t"), cfg.float("x"));
    let samples = cfg.usize("samples");
    let mut out = RunOutput::default();
    let mut table = Table::new("chaos", &["k", "variance", "printed_gamma_ratio", "simplex_mc", "simplex_mc_stderr", "scaling_slope"]);
    let mut worst_slope = 0.0f64;
    for k in 0..=cfg.usize("k-max") {
        let f = chaos_variance(k, t, x, ChaosMode::Formula, 0, RngStream::new(cfg.seed, 0))?;
        // the simplex estimator has infinite variance at alpha = 1/2, so it is reported but not checked
        let m = chaos_variance(k, t, x, ChaosMode::SimplexMc, samples, RngStream::new(cfg.seed, 1 + k as u64))?;
        let printed = if k == 0 { f.value } else { chaos_variance_printed(k, t, x)? };
        let s = scaling_slope(k, t, x, &[0.01, 0.1, 1.0, 10.0])?;
        worst_slope = worst_slope.max((s - (k as f64 / 2.0 - 1.0)).abs());
        table.push(vec![k.into(), f.value.into(), printed.into(), m.value.into(), m.stderr.into(), s.into()]);
    }
    out.check_le("scaling-slope", worst_slope, cfg.float("tol-slope"), format!("max slope error {worst_slope:.2e}"));

    let it = chaos_variance_k2_iterated(t, x, 64)?;
    let f2 = chaos_variance(2, t, x, ChaosMode::Formula, 0, RngStream::new(cfg.seed, 0))?.value;
    let rel = (it - f2).abs() / f2;
    out.check_le("k2-iterated", rel, cfg.float("tol-iterated"), format!("iterated {it:.10} vs closed form {f2:.10}"));

    let alpha = cfg.floats("alpha");
    let exact = dirichlet_formula(alpha)?;
    let e = dirichlet_mc(alpha, samples, RngStream::new(cfg.seed, 1000))?;
    let z = e.z_score(exact);
    out.check_le("dirichlet-mc", z, cfg.float("tol-mc-sigmas"), format!("{:.6} +- {:.1e} vs {exact:.6}", e.mean, e.stderr));
    let mut dt = Table::new("dirichlet", &["alpha", "formula", "mc", "mc_stderr"]);
    let a: Vec<String> = alpha.iter().map(|v| v.to_string()).collect();
    dt.push(vec![a.join(" ").into(), exact.into(), e.mean.into(), e.stderr.into()]);
    out.tables.extend([table, dt]);
    Ok(out)
}

fn polymer(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let t = cfg.float("t");
    let r = oy_overlap_second_moment(t, cfg.usize("N"), cfg.float("beta"), cfg.usize("samples"), RngStream::new(cfg.seed, 0))?;
    let sm = she_second_moment(t, 0.0, cfg.usize("k-max"))?;
    let mut table = Table::new("polymer", &["quantity", "value", "stderr"]);
    table.push(vec!["ratio_modified".into(), r.ratio_modified.mean.into(), r.ratio_modified.stderr.into()]);
    table.push(vec!["ratio_exponential".into(), r.ratio_exponential.mean.into(), r.ratio_exponential.stderr.into()]);
    table.push(vec!["gaussian_identity_residual".into(), r.gaussian_identity_residual.into(), 0.0.into()]);
    table.push(vec!["she_second_moment_ratio".into(), sm.ratio_to_p2.into(), 0.0.into()]);
    table.push(vec!["she_second_moment_tail_bound".into(), sm.tail_bound.into(), 0.0.into()]);
    let mut out = RunOutput::default();
    out.check_le("gaussian-identity", r.gaussian_identity_residual, cfg.float("tol-identity"), String::new());
    // 1 + x <= e^x holds pathwise, so it holds for the sample means too
    out.check_bool(
        "modified-below-exponential",
        r.ratio_modified.mean <= r.ratio_exponential.mean,
        format!("{:.5} vs {:.5}", r.ratio_modified.mean, r.ratio_exponential.mean),
    );
    let rel_tail = sm.tail_bound / sm.partial_sum;
    out.check_le("second-moment-tail", rel_tail, cfg.float("tol-tail"), format!("relative tail bound {rel_tail:.2e}"));
    out.tables.push(table);
    Ok(out)
}
