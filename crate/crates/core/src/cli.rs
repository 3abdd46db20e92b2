//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage or config error, 2 data error, 3 numeric
//! failure. Every subcommand writes only the paths named on its command line
//! and produces byte-identical output for identical inputs.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use serde_json::{Map, Value};

use crate::dataio::{load_dataset, write_dataset, SynthSpec};
use crate::error::{Error, Result};
use crate::eval::{run_experiment, BaselineEngine, ExperimentOpts, Method};
use crate::mvlpe::{fit, read_model, write_model, MvLpeConfig};
use crate::par;

#[derive(Debug, Parser)]
#[command(name = "mvlpe", version, about = "Multi-view low-rank preserving embedding")]
struct Cli {
    /// Worker threads (falls back to MVLPE_THREADS, then all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a model and write it as JSON.
    Fit(FitArgs),
    /// Run the repeated-split 1NN protocol and write a report CSV.
    Eval(EvalArgs),
    /// Export a model's convergence trace as CSV.
    Trace(TraceArgs),
    /// Generate a synthetic dataset directory from a JSON spec.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
struct FitArgs {
    /// Dataset directory (overrides "data" in the config).
    #[arg(long)]
    data: Option<PathBuf>,
    /// JSON config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Model JSON to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Dataset directory (overrides "data" in the config).
    #[arg(long)]
    data: Option<PathBuf>,
    /// JSON config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// mvlpe, ble or cle.
    #[arg(long)]
    method: Option<String>,
    /// Number of random splits [default: 20].
    #[arg(long)]
    repeats: Option<usize>,
    /// Training fraction in (0, 1) [default: 0.5].
    #[arg(long)]
    fraction: Option<f64>,
    /// Seed of the first split; repeat r uses base_seed + r [default: 0].
    #[arg(long)]
    base_seed: Option<u64>,
    /// Single-view engine for the baselines: lpe or le.
    #[arg(long)]
    engine: Option<String>,
    /// Report CSV to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct TraceArgs {
    /// Model JSON written by `fit`.
    #[arg(long)]
    model: PathBuf,
    /// Trace CSV to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// JSON generator spec.
    #[arg(long)]
    spec: PathBuf,
    /// Dataset directory to create.
    #[arg(long)]
    out: PathBuf,
}

/// Run-level keys a config file may carry next to the model settings.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub data: Option<PathBuf>,
    pub method: Option<Method>,
    pub repeats: Option<usize>,
    pub fraction: Option<f64>,
    pub base_seed: Option<u64>,
    pub engine: Option<BaselineEngine>,
}

const RUN_KEYS: [&str; 6] = ["data", "method", "repeats", "fraction", "base_seed", "engine"];

/// A parsed config file: run-level keys plus a validated [`MvLpeConfig`].
#[derive(Debug, Default)]
pub struct CliConfig {
    pub run: RunSection,
    pub model: MvLpeConfig,
}

/// Parses a config document. Unknown keys anywhere are rejected and every
/// numeric range is validated.
pub fn parse_config(text: &str) -> Result<CliConfig> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
    let Value::Object(mut all) = value else {
        return Err(Error::Config("config must be a JSON object".into()));
    };
    let mut run = Map::new();
    for key in RUN_KEYS {
        if let Some(v) = all.remove(key) {
            run.insert(key.to_string(), v);
        }
    }
    let run: RunSection = serde_json::from_value(Value::Object(run)).map_err(|e| Error::Config(e.to_string()))?;
    let model: MvLpeConfig = serde_json::from_value(Value::Object(all)).map_err(|e| Error::Config(e.to_string()))?;
    model.validate()?;
    if let Some(f) = run.fraction {
        check_fraction(f)?;
    }
    if run.repeats == Some(0) {
        return Err(Error::Config("repeats must be >= 1".into()));
    }
    Ok(CliConfig { run, model })
}

fn read_config(path: Option<&Path>) -> Result<CliConfig> {
    match path {
        None => Ok(CliConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Error::Load {
                path: p.to_path_buf(),
                reason: e.to_string(),
            })?;
            parse_config(&text).map_err(|e| e.context(format!("config {}", p.display())))
        }
    }
}

fn check_fraction(f: f64) -> Result<()> {
    if f > 0.0 && f < 1.0 {
        Ok(())
    } else {
        Err(Error::Argument(format!("fraction must lie in (0, 1), got {f}")))
    }
}

fn data_dir(flag: Option<PathBuf>, cfg: &CliConfig) -> Result<PathBuf> {
    flag.or_else(|| cfg.run.data.clone())
        .ok_or_else(|| Error::Argument("no dataset given; pass --data or set \"data\" in the config".into()))
}

fn run_fit(args: FitArgs) -> Result<()> {
    let cfg = read_config(args.config.as_deref())?;
    let ds = load_dataset(data_dir(args.data, &cfg)?)?;
    let model = fit(&ds, &cfg.model)?;
    if !model.converged {
        log::warn!("fit stopped after {} iterations without meeting outer_tol", model.iters);
    }
    write_model(&model, &args.out)
}

fn run_eval(args: EvalArgs) -> Result<i32> {
    let cfg = read_config(args.config.as_deref())?;
    let method = match args.method {
        Some(m) => m.parse()?,
        None => cfg.run.method.unwrap_or(Method::Mvlpe),
    };
    let engine = match args.engine.as_deref() {
        Some("lpe") => BaselineEngine::Lpe,
        Some("le") => BaselineEngine::Le,
        Some(other) => return Err(Error::Argument(format!("unknown engine {other:?}; expected lpe or le"))),
        None => cfg.run.engine.unwrap_or_default(),
    };
    let defaults = ExperimentOpts::default();
    let opts = ExperimentOpts {
        repeats: args.repeats.or(cfg.run.repeats).unwrap_or(defaults.repeats),
        fraction: args.fraction.or(cfg.run.fraction).unwrap_or(defaults.fraction),
        base_seed: args.base_seed.or(cfg.run.base_seed).unwrap_or(defaults.base_seed),
        engine,
    };
    check_fraction(opts.fraction)?;
    if opts.repeats == 0 {
        return Err(Error::Argument("repeats must be >= 1".into()));
    }
    let ds = load_dataset(data_dir(args.data, &cfg)?)?;
    let report = run_experiment(&ds, method, &cfg.model, &opts)?;
    fs::write(&args.out, report.to_csv())?;
    println!("MEAN={:.4} MAX={:.4}", report.mean_acc, report.max_acc);
    if report.is_partial() {
        for (r, msg) in &report.failures {
            eprintln!("repeat {r} failed: {msg}");
        }
        eprintln!("error: {} of {} repeats failed", report.failures.len(), report.repeats);
        return Ok(3);
    }
    Ok(0)
}

fn run_trace(args: TraceArgs) -> Result<()> {
    let model = read_model(&args.model)?;
    let m = model.n_views();
    let mut out = String::from("iter,objective");
    for v in 1..=m {
        out.push_str(&format!(",disagreement_v{v}"));
    }
    out.push('\n');
    if model.disagreement_trace.len() != model.objective_trace.len() {
        return Err(Error::Data("model trace lengths disagree".into()));
    }
    for (i, (obj, dis)) in model.objective_trace.iter().zip(&model.disagreement_trace).enumerate() {
        if dis.len() != m {
            return Err(Error::Data(format!("iteration {} lists {} views, expected {m}", i + 1, dis.len())));
        }
        out.push_str(&format!("{},{obj}", i + 1));
        for d in dis {
            out.push_str(&format!(",{d}"));
        }
        out.push('\n');
    }
    fs::write(&args.out, out)?;
    Ok(())
}

fn run_synth(args: SynthArgs) -> Result<()> {
    let text = fs::read_to_string(&args.spec).map_err(|e| Error::Load {
        path: args.spec.clone(),
        reason: e.to_string(),
    })?;
    let spec: SynthSpec = serde_json::from_str(&text).map_err(|e| Error::Config(format!("synth spec: {e}")))?;
    let ds = spec.generate().map_err(|e| match e {
        Error::Argument(m) => Error::Config(m),
        other => other,
    })?;
    write_dataset(&ds, &args.out)
}

fn thread_count(flag: Option<usize>) -> Result<Option<usize>> {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var("MVLPE_THREADS") {
            Ok(s) if !s.trim().is_empty() => Some(
                s.trim()
                    .parse::<usize>()
                    .map_err(|_| Error::Argument(format!("MVLPE_THREADS must be a positive integer, got {s:?}")))?,
            ),
            _ => None,
        },
    };
    if n == Some(0) {
        return Err(Error::Argument("thread count must be >= 1".into()));
    }
    Ok(n)
}

fn dispatch(cli: Cli) -> Result<i32> {
    if let Some(n) = thread_count(cli.threads)? {
        if !par::init_thread_pool(n) {
            log::debug!("worker pool already configured; --threads {n} ignored");
        }
    }
    match cli.command {
        Command::Fit(a) => run_fit(a).map(|_| 0),
        Command::Eval(a) => run_eval(a),
        Command::Trace(a) => run_trace(a).map(|_| 0),
        Command::Synth(a) => run_synth(a).map(|_| 0),
    }
}

/// Parses `argv` (program name first), runs the subcommand and returns the
/// process exit code. Diagnostics go to standard error.
pub fn execute<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_splits_run_keys() {
        let c = parse_config(r#"{"data": "d", "repeats": 3, "gamma": 2.0, "method": "ble"}"#).unwrap();
        assert_eq!(c.run.data, Some(PathBuf::from("d")));
        assert_eq!(c.run.repeats, Some(3));
        assert_eq!(c.run.method, Some(Method::Ble));
        assert_eq!(c.model.gamma, 2.0);
    }

    #[test]
    fn config_rejects_unknown_and_out_of_range() {
        assert!(matches!(parse_config(r#"{"gama": 1}"#), Err(Error::Config(_))));
        assert!(matches!(parse_config(r#"{"p": 3}"#), Err(Error::Config(_))));
        assert!(parse_config(r#"{"fraction": 1.5}"#).is_err());
        assert!(matches!(parse_config("[1]"), Err(Error::Config(_))));
        assert!(matches!(parse_config(r#"{"method": "lle"}"#), Err(Error::Config(_))));
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(execute(["mvlpe"]), 1);
        assert_eq!(execute(["mvlpe", "frobnicate"]), 1);
        assert_eq!(execute(["mvlpe", "fit", "--out"]), 1);
    }

    #[test]
    fn missing_data_exits_two() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("m.json");
        let missing = dir.path().join("nope");
        let code = execute([
            "mvlpe".as_ref(),
            "fit".as_ref(),
            "--data".as_ref(),
            missing.as_os_str(),
            "--out".as_ref(),
            out.as_os_str(),
        ]);
        assert_eq!(code, 2);
        assert!(!out.exists());
    }
}
