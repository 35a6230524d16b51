//! Data tables, check summaries, manifests and plot files.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{Map, Value};

use crate::config::{ConfigFile, ExperimentConfig, Format};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    F(f64),
    I(i64),
    S(String),
    B(bool),
}

impl Cell {
    fn text(&self) -> String {
        match self {
            // shortest round-trip representation, so reruns are byte-identical
            Cell::F(v) => format!("{v:?}"),
            Cell::I(v) => v.to_string(),
            Cell::S(s) => s.clone(),
            Cell::B(b) => b.to_string(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::F(v) => Value::from(*v),
            Cell::I(v) => Value::from(*v),
            Cell::S(s) => Value::from(s.clone()),
            Cell::B(b) => Value::from(*b),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::F(v)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::I(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::I(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::S(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::S(v)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::B(v)
    }
}

#[derive(Debug, Clone)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Table { name: name.into(), columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    fn write(&self, dir: &Path, format: Format) -> std::io::Result<PathBuf> {
        match format {
            Format::Csv => {
                let path = dir.join(format!("{}.csv", self.name));
                let mut w = csv::Writer::from_path(&path)?;
                w.write_record(&self.columns)?;
                for row in &self.rows {
                    w.write_record(row.iter().map(Cell::text))?;
                }
                w.flush()?;
                Ok(path)
            }
            Format::Json => {
                let path = dir.join(format!("{}.json", self.name));
                let records: Vec<Value> = self
                    .rows
                    .iter()
                    .map(|r| Value::Object(self.columns.iter().cloned().zip(r.iter().map(Cell::json)).collect()))
                    .collect();
                let mut text = serde_json::to_string_pretty(&records)?;
                text.push('\n');
                std::fs::write(&path, text)?;
                Ok(path)
            }
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub tolerance: f64,
    pub detail: String,
}

/// A curve for `emit_plotdata`: whitespace columns under a `#` header.
#[derive(Debug, Clone)]
pub struct Curve {
    pub file: String,
    /// `name [unit]` per column.
    pub header: Vec<String>,
    pub points: Vec<Vec<f64>>,
}

#[derive(Debug, Default)]
pub struct RunOutput {
    pub tables: Vec<Table>,
    pub checks: Vec<Check>,
    pub curves: Vec<Curve>,
}

impl RunOutput {
    /// `value <= tolerance` passes.
    pub fn check_le(&mut self, name: &str, value: f64, tolerance: f64, detail: String) {
        self.checks.push(Check { name: name.into(), passed: value <= tolerance, value, tolerance, detail });
    }

    pub fn check_bool(&mut self, name: &str, ok: bool, detail: String) {
        self.checks.push(Check { name: name.into(), passed: ok, value: if ok { 1.0 } else { 0.0 }, tolerance: 1.0, detail });
    }

    pub fn failures(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    tool_version: &'static str,
    experiment: &'a str,
    status: &'static str,
    workers: usize,
    seed: u64,
    started_at: String,
    finished_at: String,
    config: ConfigFile,
    tolerances: Map<String, Value>,
    checks: &'a [Check],
    failures: Vec<&'a str>,
    outputs: Vec<String>,
}

pub struct Timestamps {
    pub started: chrono::DateTime<chrono::Utc>,
    pub finished: chrono::DateTime<chrono::Utc>,
}

fn stamp(t: chrono::DateTime<chrono::Utc>) -> String {
    t.to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// Writes the data tables, plot files and `manifest.json`.
pub fn write_run(cfg: &ExperimentConfig, out: &RunOutput, times: Timestamps) -> std::io::Result<PathBuf> {
    std::fs::create_dir_all(&cfg.out)?;
    let mut files = Vec::new();
    for t in &out.tables {
        files.push(t.write(&cfg.out, cfg.format)?);
    }
    files.extend(emit_plotdata(&out.curves, &cfg.out)?);
    let failures: Vec<&str> = out.failures().iter().map(|c| c.name.as_str()).collect();
    let manifest = Manifest {
        tool: "kpz-exact",
        tool_version: env!("CARGO_PKG_VERSION"),
        experiment: &cfg.experiment,
        status: if failures.is_empty() { "pass" } else { "fail" },
        workers: cfg.workers,
        seed: cfg.seed,
        started_at: stamp(times.started),
        finished_at: stamp(times.finished),
        config: cfg.echo(),
        tolerances: cfg.tolerances(),
        checks: &out.checks,
        failures,
        outputs: files.iter().filter_map(|p| p.file_name()).map(|n| n.to_string_lossy().into_owned()).collect(),
    };
    let path = cfg.out.join("manifest.json");
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    std::fs::write(&path, text)?;
    Ok(path)
}

/// One `.dat` file per curve. Curves without points are skipped with a warning.
pub fn emit_plotdata(curves: &[Curve], dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for c in curves {
        if c.points.is_empty() {
            log::warn!("empty grid: {} not written", c.file);
            continue;
        }
        let path = dir.join(&c.file);
        let mut f = std::io::BufWriter::new(std::fs::File::create(&path)?);
        writeln!(f, "# {}", c.header.join("  "))?;
        for p in &c.points {
            let line: Vec<String> = p.iter().map(|v| format!("{v:.12e}")).collect();
            writeln!(f, "{}", line.join(" "))?;
        }
        f.flush()?;
        written.push(path);
    }
    Ok(written)
}
