//! `kpz-exact <experiment> [--key value]... [--config file.json] [--out dir]`

mod config;
mod experiments;
mod output;

use std::fmt::Write as _;
use std::io::Write as _;
use std::process::ExitCode;

use clap::Parser;

use config::{ConfigError, ExperimentConfig, Flags};
use output::{RunOutput, Timestamps};

const EXIT_CONFIG: u8 = 1;
const EXIT_CHECK: u8 = 2;

#[derive(Parser)]
#[command(
    name = "kpz-exact",
    version,
    about = "Cross-checked experiments for q-TASEP, the q-Boson process, the semi-discrete SHE and the KPZ crossover",
    after_help = "Experiments: duality-check, moments, qlaplace, lyapunov, tracy-widom, crossover, spectral, chaos, polymer.\n\
                  `kpz-exact validate [config.json] [--experiment name] [--key value]...` checks a configuration without running it.\n\
                  KPZ_EXACT_WORKERS sets the worker pool size and overrides --workers."
)]
struct Cli {
    /// Experiment name, or `validate`.
    command: String,
    /// `--key value` parameters plus --config, --out, --seed, --format and --workers.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true)]
    args: Vec<String>,
}

fn resolve(command: &str, args: &[String]) -> Result<ExperimentConfig, ConfigError> {
    let mut flags = Flags::parse(args)?;
    if command == "validate" {
        match flags.positional.len() {
            0 => {}
            1 if flags.config.is_none() => flags.config = Some(flags.positional.remove(0).into()),
            _ => return Err(ConfigError(format!("unexpected arguments {:?}", flags.positional))),
        }
        return config::resolve(None, &flags);
    }
    if !flags.positional.is_empty() {
        return Err(ConfigError(format!("unexpected arguments {:?}", flags.positional)));
    }
    config::resolve(Some(command), &flags)
}

/// Writes to stdout, tolerating a closed pipe (`kpz-exact ... | head`).
fn emit(text: &str) {
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(text.as_bytes()).and_then(|_| out.flush());
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // usage errors are config errors; exit 2 is reserved for failed checks
            return if e.use_stderr() { ExitCode::from(EXIT_CONFIG) } else { ExitCode::SUCCESS };
        }
    };
    let cfg = match resolve(&cli.command, &cli.args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if cli.command == "validate" {
        let mut text = format!("OK {}\n", cfg.experiment);
        for (k, v) in &cfg.params {
            let _ = writeln!(text, "  {k:<20} {v}");
        }
        let _ = writeln!(text, "  {:<20} {}", "seed", cfg.seed);
        let _ = writeln!(text, "  {:<20} {}", "workers", cfg.workers);
        emit(&text);
        return ExitCode::SUCCESS;
    }
    if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build_global() {
        log::warn!("worker pool already initialised: {e}");
    }

    let started = chrono::Utc::now();
    let out = match experiments::run(&cfg) {
        Ok(o) => o,
        Err(kpz_exact::Error::InvalidConfig(m)) => {
            eprintln!("error: invalid config: {m}");
            return ExitCode::from(EXIT_CONFIG);
        }
        Err(e @ kpz_exact::Error::NestingInfeasible(_)) => {
            eprintln!("error: invalid config: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
        Err(e) => {
            let mut o = RunOutput::default();
            o.check_bool("runtime", false, e.to_string());
            o
        }
    };
    let finished = chrono::Utc::now();
    let manifest = match output::write_run(&cfg, &out, Timestamps { started, finished }) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot write to {}: {e}", cfg.out.display());
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let mut text = String::new();
    for c in &out.checks {
        let _ = writeln!(text, "{} {:<28} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    let _ = writeln!(text, "manifest: {}", manifest.display());
    emit(&text);
    let failures = out.failures();
    if failures.is_empty() {
        ExitCode::SUCCESS
    } else {
        let names: Vec<&str> = failures.iter().map(|c| c.name.as_str()).collect();
        eprintln!("failed checks: {}", names.join(","));
        ExitCode::from(EXIT_CHECK)
    }
}
