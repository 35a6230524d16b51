use std::path::Path;
use std::process::{Command, Output};

fn kpz(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kpz-exact")).args(args).env("KPZ_EXACT_WORKERS", "2").output().unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn dat_files(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .filter_map(|e| e.ok())
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .filter(|n| n.ends_with(".dat"))
        .collect();
    v.sort();
    v
}

#[test]
fn q_out_of_range_is_a_config_error() {
    let o = kpz(&["validate", "--experiment", "moments", "--q", "1.5"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("q must lie in (0,1)"), "{}", stderr(&o));
}

#[test]
fn infeasible_nesting_fails_validation() {
    let o = kpz(&["validate", "--experiment", "moments", "--q", "0.1", "--n", "3,2,1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("nesting infeasible: r_1 > 1"), "{}", stderr(&o));
    // a run goes through the same check
    let dir = tempfile::tempdir().unwrap();
    let o = kpz(&["moments", "--q", "0.1", "--n", "1,1,1", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn valid_config_prints_the_resolved_table() {
    let o = kpz(&["validate", "--experiment", "moments", "--samples", "1e6"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = stdout(&o);
    assert!(s.starts_with("OK moments"));
    assert!(s.contains("samples") && s.contains("1000000"));
    assert!(s.contains("workers") && s.contains(" 2"));
}

#[test]
fn unknown_keys_are_rejected() {
    let o = kpz(&["validate", "--experiment", "tracy-widom", "--q", "0.5"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("unknown key `q`"));

    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"experiment": "moments", "params": {"q": 0.5, "qq": 1}}"#).unwrap();
    let o = kpz(&["validate", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("unknown key `qq`"));

    std::fs::write(&cfg, r#"{"experiment": "moments", "colour": "red"}"#).unwrap();
    assert_eq!(kpz(&["validate", cfg.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, r#"{"experiment": "moments", "seed": 9, "params": {"q": 0.3, "t": 0.5}}"#).unwrap();
    let o = kpz(&["validate", "--config", cfg.to_str().unwrap(), "--q", "0.4"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let s = stdout(&o);
    assert!(s.lines().any(|l| l.split_whitespace().collect::<Vec<_>>() == ["q", "0.4"]), "{s}");
    assert!(s.lines().any(|l| l.split_whitespace().collect::<Vec<_>>() == ["t", "0.5"]), "{s}");
    assert!(s.lines().any(|l| l.split_whitespace().collect::<Vec<_>>() == ["seed", "9"]), "{s}");
}

#[test]
fn duality_run_writes_csv_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = kpz(&["duality-check", "--N", "5", "--q", "0.5", "--trials", "1000", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("duality.csv")).unwrap();
    assert!(csv.starts_with("trial,x,y,residual\n"));
    assert_eq!(csv.lines().count(), 1001);
    let m = manifest(dir.path());
    assert_eq!(m["workers"], 2);
    assert_eq!(m["status"], "pass");
    assert!(m["checks"][0]["value"].as_f64().unwrap() <= 1e-13);
    let keys: Vec<&String> = m.as_object().unwrap().keys().collect();
    assert_eq!(keys[..4], ["tool", "tool_version", "experiment", "status"]);
}

#[test]
fn tracy_widom_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = kpz(&["tracy-widom", "--s-grid", "-4:2:2", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = std::fs::read_to_string(dir.path().join("tracy_widom.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("s,F2_fredholm,F2_painleve,abs_diff"));
    for l in lines {
        let d: f64 = l.split(',').nth(3).unwrap().parse().unwrap();
        assert!(d <= 1e-6);
    }
}

#[test]
fn json_format() {
    let dir = tempfile::tempdir().unwrap();
    let o = kpz(&["tracy-widom", "--s-grid", "0", "--format", "json", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("tracy_widom.json")).unwrap()).unwrap();
    assert!((v[0]["F2_fredholm"].as_f64().unwrap() - 0.9693728284).abs() < 1e-9);
}

#[test]
fn numeric_failure_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = kpz(&["lyapunov", "--nu", "1", "--k-max", "2", "--tau", "40", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let m = manifest(dir.path());
    assert_eq!(m["status"], "fail");
    assert_eq!(m["failures"], serde_json::json!(["growth-rate"]));
}

#[test]
fn crossover_plot_files_are_reproducible() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = kpz(&["crossover", "--r-grid", "-2:2:1", "--out", d.path().to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let files = dat_files(a.path());
    assert_eq!(files, ["crossover_t1.dat", "crossover_t10.dat", "crossover_t100.dat", "fgue.dat"]);
    for f in &files {
        let x = std::fs::read(a.path().join(f)).unwrap();
        assert_eq!(x, std::fs::read(b.path().join(f)).unwrap(), "{f}");
        let text = String::from_utf8(x).unwrap();
        assert!(text.starts_with('#'));
        assert_eq!(text.lines().count(), 6);
        assert!(text.lines().skip(1).all(|l| l.split_whitespace().count() == 2));
    }
}

#[test]
fn empty_grid_writes_no_plot_files() {
    let dir = tempfile::tempdir().unwrap();
    let o = kpz(&["crossover", "--r-grid", "1:0:0.5", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(dat_files(dir.path()).is_empty());
    assert!(stderr(&o).contains("empty grid"));
}

#[test]
fn manifest_replays_the_run() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let o = kpz(&["moments", "--q", "0.5", "--t", "1", "--n", "2,1", "--samples", "20000", "--seed", "5", "--out", a.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let m = a.path().join("manifest.json");
    let o = kpz(&["moments", "--config", m.to_str().unwrap(), "--out", b.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let x = std::fs::read(a.path().join("moments.csv")).unwrap();
    assert_eq!(x, std::fs::read(b.path().join("moments.csv")).unwrap());
}

#[test]
fn bad_invocations() {
    assert_eq!(kpz(&["no-such-experiment"]).status.code(), Some(1));
    assert_eq!(kpz(&["moments", "--q"]).status.code(), Some(1));
    assert_eq!(kpz(&["moments", "stray"]).status.code(), Some(1));
    assert_eq!(kpz(&["validate", "--experiment", "moments", "--samples", "2.5"]).status.code(), Some(1));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(kpz(&[]).status.code(), Some(1));
    assert_eq!(kpz(&["--help"]).status.code(), Some(0));
}
