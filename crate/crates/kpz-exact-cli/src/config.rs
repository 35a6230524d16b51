//! Experiment configuration: a JSON file merged with `--key value` flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use kpz_exact::contour::{nested_radii, Model};
use kpz_exact::specfn::QParam;
use kpz_exact::tol;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "invalid config: {}", self.0)
    }
}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

pub const EXPERIMENTS: &[&str] = &[
    "duality-check",
    "moments",
    "qlaplace",
    "lyapunov",
    "tracy-widom",
    "crossover",
    "spectral",
    "chaos",
    "polymer",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy)]
enum Kind {
    Float { min: f64, max: f64 },
    Int { min: i64, max: i64 },
    IntList { min: i64, max: i64 },
    /// `a:b:step`, `x,y,z` or a JSON array.
    FloatList { min: f64, max: f64 },
    Q,
}

#[derive(Debug, Clone)]
struct Param {
    name: &'static str,
    kind: Kind,
    /// `None` marks an optional parameter with no default.
    default: Option<String>,
}

fn p(name: &'static str, kind: Kind, default: &str) -> Param {
    Param { name, kind, default: Some(default.to_string()) }
}

const fn f(min: f64, max: f64) -> Kind {
    Kind::Float { min, max }
}

const fn i(min: i64, max: i64) -> Kind {
    Kind::Int { min, max }
}

fn schema(experiment: &str) -> Vec<Param> {
    let tol = |name: &'static str, v: f64| Param { name, kind: f(0.0, f64::INFINITY), default: Some(format!("{v:e}")) };
    match experiment {
        "duality-check" => vec![
            p("N", i(1, 12), "5"),
            p("q", Kind::Q, "0.5"),
            p("trials", i(1, 10_000_000), "1000"),
            p("max-particles", i(1, 12), "6"),
            tol("tol-duality", tol::DUALITY),
        ],
        "moments" => vec![
            p("q", Kind::Q, "0.5"),
            p("t", f(0.0, 50.0), "1"),
            p("n", Kind::IntList { min: 1, max: 20 }, "2,1"),
            p("samples", i(2, 100_000_000), "100000"),
            tol("tol-contour", tol::CONTOUR_VS_UNNESTED),
            tol("tol-mc-sigmas", tol::MC_SIGMAS),
        ],
        "qlaplace" => vec![
            p("q", Kind::Q, "0.5"),
            p("t", f(0.0, 20.0), "1"),
            p("n", i(1, 6), "2"),
            p("m-max", i(1, 40), "12"),
            p("samples", i(2, 100_000_000), "200000"),
            p("zeta", Kind::FloatList { min: -0.5, max: 0.0 }, "-0.05,-0.1"),
            tol("tol-g-vs-det", tol::G_VS_DET),
            tol("tol-pmf-mass", tol::PMF_MASS),
            tol("tol-pmf-negativity", tol::PMF_NEGATIVITY),
            tol("tol-mc-sigmas", tol::MC_SIGMAS),
        ],
        "lyapunov" => vec![
            p("nu", Kind::FloatList { min: 0.05, max: 20.0 }, "0.5:2:0.25"),
            p("k-max", i(1, 6), "4"),
            Param { name: "tau", kind: f(1.0, 200.0), default: None },
            p("growth-nu", f(0.05, 20.0), "1"),
            tol("tol-growth", tol::LYAPUNOV_GROWTH_REL),
        ],
        "tracy-widom" => vec![
            p("s-grid", Kind::FloatList { min: -8.0, max: 8.0 }, "-4:2:0.5"),
            tol("tol-tw", tol::TW_METHODS),
        ],
        "crossover" => vec![
            p("r-grid", Kind::FloatList { min: -8.0, max: 8.0 }, "-4:4:0.25"),
            p("t", Kind::FloatList { min: 0.1, max: 1000.0 }, "1,10,100"),
            tol("tol-range", tol::CROSSOVER_RANGE),
        ],
        "spectral" => vec![
            p("q", Kind::Q, "0.5"),
            p("k-max", i(1, 3), "2"),
            p("max-part", i(1, 5), "3"),
            p("trials", i(1, 100_000), "200"),
            tol("tol-eigen", tol::EIGEN),
            tol("tol-plancherel", tol::PLANCHEREL),
            tol("tol-biorthogonality", tol::BIORTHOGONALITY),
        ],
        "chaos" => vec![
            p("t", f(1e-3, 100.0), "1"),
            p("x", f(-50.0, 50.0), "0.3"),
            p("k-max", i(0, 8), "4"),
            p("alpha", Kind::FloatList { min: 0.5, max: 20.0 }, "0.7,2,1.3"),
            p("samples", i(2, 100_000_000), "200000"),
            tol("tol-mc-sigmas", tol::MC_SIGMAS),
            tol("tol-iterated", tol::CHAOS_ITERATED),
            tol("tol-slope", tol::SCALING_SLOPE),
        ],
        "polymer" => vec![
            p("t", f(1e-3, 20.0), "1"),
            p("N", i(2, 50), "3"),
            p("beta", f(0.0, 5.0), "1"),
            p("samples", i(2, 100_000_000), "20000"),
            p("k-max", i(1, 200), "20"),
            tol("tol-identity", 1e-12),
            tol("tol-tail", 1e-10),
        ],
        _ => Vec::new(),
    }
}

/// The on-disk form; also the `config` block of a manifest.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub experiment: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default)]
    pub params: Map<String, Value>,
}

impl ConfigFile {
    /// Reads a config, or the `config` block of a previous run's manifest.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).or_else(|e| err(format!("cannot read {}: {e}", path.display())))?;
        let mut v: Value = serde_json::from_str(&text).or_else(|e| err(format!("{}: {e}", path.display())))?;
        if let Some(obj) = v.as_object_mut() {
            if obj.contains_key("tool_version") {
                v = obj.remove("config").unwrap_or(Value::Null);
            }
        }
        serde_json::from_value(v).or_else(|e| err(format!("{}: {e}", path.display())))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ParamValue {
    Float(f64),
    Int(i64),
    IntList(Vec<i64>),
    FloatList(Vec<f64>),
}

impl ParamValue {
    fn to_json(&self) -> Value {
        match self {
            ParamValue::Float(v) => Value::from(*v),
            ParamValue::Int(v) => Value::from(*v),
            ParamValue::IntList(v) => Value::from(v.clone()),
            ParamValue::FloatList(v) => Value::from(v.clone()),
        }
    }
}

impl std::fmt::Display for ParamValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ParamValue::Float(v) => write!(f, "{v}"),
            ParamValue::Int(v) => write!(f, "{v}"),
            ParamValue::IntList(v) => write!(f, "{}", v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")),
            ParamValue::FloatList(v) => write!(f, "{}", v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")),
        }
    }
}

/// A validated configuration with every parameter resolved.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub experiment: String,
    /// In schema order.
    pub params: Vec<(String, ParamValue)>,
    pub seed: u64,
    pub format: Format,
    pub out: PathBuf,
    pub workers: usize,
}

impl ExperimentConfig {
    pub fn float(&self, key: &str) -> f64 {
        match self.get(key) {
            Some(ParamValue::Float(v)) => *v,
            Some(ParamValue::Int(v)) => *v as f64,
            other => panic!("parameter {key} is not a float: {other:?}"),
        }
    }

    pub fn opt_float(&self, key: &str) -> Option<f64> {
        self.get(key).map(|_| self.float(key))
    }

    pub fn int(&self, key: &str) -> i64 {
        match self.get(key) {
            Some(ParamValue::Int(v)) => *v,
            other => panic!("parameter {key} is not an integer: {other:?}"),
        }
    }

    pub fn usize(&self, key: &str) -> usize {
        self.int(key) as usize
    }

    pub fn ints(&self, key: &str) -> &[i64] {
        match self.get(key) {
            Some(ParamValue::IntList(v)) => v,
            other => panic!("parameter {key} is not an integer list: {other:?}"),
        }
    }

    pub fn floats(&self, key: &str) -> &[f64] {
        match self.get(key) {
            Some(ParamValue::FloatList(v)) => v,
            other => panic!("parameter {key} is not a float list: {other:?}"),
        }
    }

    pub fn q(&self) -> QParam {
        QParam::new(self.float("q")).expect("validated")
    }

    fn get(&self, key: &str) -> Option<&ParamValue> {
        self.params.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    /// Tolerance parameters, for the manifest.
    pub fn tolerances(&self) -> Map<String, Value> {
        self.params.iter().filter(|(k, _)| k.starts_with("tol-")).map(|(k, v)| (k.clone(), v.to_json())).collect()
    }

    /// The echo written into the manifest; loadable with `--config`.
    pub fn echo(&self) -> ConfigFile {
        ConfigFile {
            experiment: Some(self.experiment.clone()),
            seed: Some(self.seed),
            format: Some(self.format),
            out: Some(self.out.clone()),
            workers: Some(self.workers),
            params: self.params.iter().map(|(k, v)| (k.clone(), v.to_json())).collect(),
        }
    }
}

/// Raw `--key value` pairs split into the reserved keys and the rest.
#[derive(Debug, Default)]
pub struct Flags {
    pub config: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<String>,
    pub format: Option<String>,
    pub workers: Option<String>,
    pub experiment: Option<String>,
    pub params: BTreeMap<String, String>,
    pub positional: Vec<String>,
}

impl Flags {
    pub fn parse(args: &[String]) -> Result<Self, ConfigError> {
        let mut flags = Flags::default();
        let mut it = args.iter();
        while let Some(a) = it.next() {
            let Some(key) = a.strip_prefix("--") else {
                flags.positional.push(a.clone());
                continue;
            };
            let (key, value) = match key.split_once('=') {
                Some((k, v)) => (k.to_string(), v.to_string()),
                None => {
                    let v = it.next().ok_or_else(|| ConfigError(format!("flag --{key} needs a value")))?;
                    (key.to_string(), v.clone())
                }
            };
            match key.as_str() {
                "config" => flags.config = Some(value.into()),
                "out" => flags.out = Some(value.into()),
                "seed" => flags.seed = Some(value),
                "format" => flags.format = Some(value),
                "workers" => flags.workers = Some(value),
                "experiment" => flags.experiment = Some(value),
                _ => {
                    if flags.params.insert(key.clone(), value).is_some() {
                        return err(format!("flag --{key} given twice"));
                    }
                }
            }
        }
        Ok(flags)
    }
}

fn parse_f64(key: &str, s: &str) -> Result<f64, ConfigError> {
    s.trim().parse::<f64>().or_else(|_| err(format!("key `{key}`: cannot parse `{s}` as a number")))
}

fn parse_int(key: &str, s: &str) -> Result<i64, ConfigError> {
    let v = parse_f64(key, s)?;
    // accepts 1e6
    if v.fract() != 0.0 || v.abs() > 9.0e15 {
        return err(format!("key `{key}`: `{s}` is not an integer"));
    }
    Ok(v as i64)
}

fn parse_float_list(key: &str, s: &str) -> Result<Vec<f64>, ConfigError> {
    let s = s.trim();
    if s.is_empty() {
        return Ok(Vec::new());
    }
    let parts: Vec<&str> = s.split(':').collect();
    match parts.len() {
        1 => s.split(',').map(|x| parse_f64(key, x)).collect(),
        3 => {
            let (a, b, h) = (parse_f64(key, parts[0])?, parse_f64(key, parts[1])?, parse_f64(key, parts[2])?);
            if !(h > 0.0) {
                return err(format!("key `{key}`: grid step must be positive"));
            }
            let n = ((b - a) / h + 1e-9).floor();
            if n < 0.0 {
                return Ok(Vec::new());
            }
            if n > 1e5 {
                return err(format!("key `{key}`: grid has more than 1e5 points"));
            }
            Ok((0..=n as usize).map(|i| a + h * i as f64).collect())
        }
        _ => err(format!("key `{key}`: expected `start:stop:step` or a comma list, got `{s}`")),
    }
}

/// JSON values are turned into the flag syntax so both routes share one parser.
fn json_to_text(key: &str, v: &Value) -> Result<String, ConfigError> {
    match v {
        Value::Number(n) => Ok(n.to_string()),
        Value::String(s) => Ok(s.clone()),
        Value::Array(a) => a
            .iter()
            .map(|x| match x {
                Value::Number(n) => Ok(n.to_string()),
                _ => err(format!("key `{key}`: list entries must be numbers")),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(|v| v.join(",")),
        _ => err(format!("key `{key}`: unsupported value {v}")),
    }
}

fn check_range<T: PartialOrd + std::fmt::Display>(key: &str, v: T, min: T, max: T) -> Result<(), ConfigError> {
    if v < min || v > max {
        return err(format!("key `{key}`: {v} outside [{min}, {max}]"));
    }
    Ok(())
}

fn parse_value(key: &str, kind: Kind, text: &str) -> Result<ParamValue, ConfigError> {
    Ok(match kind {
        Kind::Q => {
            let v = parse_f64(key, text)?;
            QParam::new(v).or_else(|_| err(format!("key `{key}`: q must lie in (0,1), got {v}")))?;
            ParamValue::Float(v)
        }
        Kind::Float { min, max } => {
            let v = parse_f64(key, text)?;
            if v.is_nan() {
                return err(format!("key `{key}`: NaN"));
            }
            check_range(key, v, min, max)?;
            ParamValue::Float(v)
        }
        Kind::Int { min, max } => {
            let v = parse_int(key, text)?;
            check_range(key, v, min, max)?;
            ParamValue::Int(v)
        }
        Kind::IntList { min, max } => {
            let v = text.split(',').map(|x| parse_int(key, x)).collect::<Result<Vec<_>, _>>()?;
            for x in &v {
                check_range(key, *x, min, max)?;
            }
            ParamValue::IntList(v)
        }
        Kind::FloatList { min, max } => {
            let v = parse_float_list(key, text)?;
            for x in &v {
                if x.is_nan() {
                    return err(format!("key `{key}`: NaN"));
                }
                check_range(key, *x, min, max)?;
            }
            ParamValue::FloatList(v)
        }
    })
}

fn env_workers() -> Result<Option<usize>, ConfigError> {
    match std::env::var("KPZ_EXACT_WORKERS") {
        Ok(s) => match s.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(Some(n)),
            _ => err(format!("KPZ_EXACT_WORKERS must be a positive integer, got `{s}`")),
        },
        Err(_) => Ok(None),
    }
}

/// Merges file and flags (flags win), fills defaults, checks ranges and
/// the cross-parameter constraints.
pub fn resolve(experiment: Option<&str>, flags: &Flags) -> Result<ExperimentConfig, ConfigError> {
    let file = match &flags.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::default(),
    };
    let experiment = match (experiment.or(flags.experiment.as_deref()), file.experiment.as_deref()) {
        (Some(a), Some(b)) if a != b => return err(format!("config file is for experiment `{b}`, not `{a}`")),
        (Some(a), _) | (None, Some(a)) => a.to_string(),
        (None, None) => return err("no experiment given"),
    };
    if !EXPERIMENTS.contains(&experiment.as_str()) {
        return err(format!("unknown experiment `{experiment}`; expected one of {}", EXPERIMENTS.join(", ")));
    }
    let schema = schema(&experiment);
    for key in file.params.keys().chain(flags.params.keys()) {
        if !schema.iter().any(|p| p.name == key) {
            return err(format!("unknown key `{key}` for experiment `{experiment}`"));
        }
    }
    let mut params = Vec::new();
    for p in &schema {
        let text = match (flags.params.get(p.name), file.params.get(p.name)) {
            (Some(s), _) => Some(s.clone()),
            (None, Some(v)) => Some(json_to_text(p.name, v)?),
            (None, None) => p.default.clone(),
        };
        if let Some(text) = text {
            params.push((p.name.to_string(), parse_value(p.name, p.kind, &text)?));
        }
    }
    let seed = match &flags.seed {
        Some(s) => s.parse::<u64>().or_else(|_| err(format!("key `seed`: `{s}` is not a 64-bit unsigned integer")))?,
        None => file.seed.unwrap_or(1),
    };
    let format = match flags.format.as_deref() {
        Some("csv") => Format::Csv,
        Some("json") => Format::Json,
        Some(other) => return err(format!("key `format`: expected csv or json, got `{other}`")),
        None => file.format.unwrap_or(Format::Csv),
    };
    let out = flags.out.clone().or(file.out).unwrap_or_else(|| PathBuf::from("kpz-exact-out").join(&experiment));
    let workers = match (env_workers()?, &flags.workers, file.workers) {
        (Some(n), _, _) => n,
        (None, Some(s), _) => match s.parse::<usize>() {
            Ok(n) if n >= 1 => n,
            _ => return err(format!("key `workers`: `{s}` is not a positive integer")),
        },
        (None, None, Some(n)) if n >= 1 => n,
        (None, None, Some(_)) => return err("key `workers`: must be at least 1"),
        (None, None, None) => std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1),
    };
    let cfg = ExperimentConfig { experiment, params, seed, format, out, workers };
    cross_checks(&cfg)?;
    Ok(cfg)
}

fn cross_checks(cfg: &ExperimentConfig) -> Result<(), ConfigError> {
    match cfg.experiment.as_str() {
        "moments" => {
            let n = cfg.ints("n");
            if n.is_empty() || n.len() > 4 {
                return err("key `n`: between 1 and 4 entries");
            }
            if n.windows(2).any(|w| w[1] > w[0]) {
                return err("key `n`: entries must be non-increasing");
            }
            nested_radii(Model::QTasep(cfg.q()), n.len()).or_else(|e| err(format!("key `n`: {e}")))?;
        }
        "spectral" => {
            for k in 1..=cfg.usize("k-max") {
                kpz_exact::bethe::spectral_contours(cfg.q(), k).or_else(|e| err(format!("key `k-max`: {e}")))?;
            }
        }
        "lyapunov" => {
            if let Some(tau) = cfg.opt_float("tau") {
                let n = cfg.float("growth-nu") * tau;
                if (n - n.round()).abs() > 1e-9 {
                    return err(format!("key `tau`: growth-nu * tau = {n} must be an integer"));
                }
            }
        }
        "crossover" => {
            if cfg.floats("t").is_empty() {
                return err("key `t`: at least one time");
            }
        }
        "chaos" => {
            if cfg.floats("alpha").len() < 2 || cfg.floats("alpha").iter().any(|a| *a <= 0.5) {
                // the Monte Carlo estimator has infinite variance at alpha <= 1/2
                return err("key `alpha`: at least two entries, each > 0.5");
            }
        }
        _ => {}
    }
    Ok(())
}
