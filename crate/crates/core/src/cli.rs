//! Command-line front end: `key = value` config files, overrides and the
//! `run` / `sweep` / `timeseries` / `preset` subcommands.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::engine::{GraphMode, InitialCondition};
use crate::error::Error;
use crate::experiments::{
    format_fraction, run_sweep, run_sweep_with_timeseries, run_timeseries, write_csv,
    write_timeseries_csv, Family, MeanStd, Preset, ResultRow, SweepSpec,
};

pub const WORKERS_ENV: &str = "HOAXNET_WORKERS";
pub const DEFAULT_SEED: u64 = 1;

const EXIT_RUNTIME: i32 = 1;
const EXIT_USAGE: i32 = 2;

const SECTIONS: [(&str, &[&str]); 3] = [
    ("network", &["family", "n", "p", "f0", "h00", "h01", "h11"]),
    ("model", &["alpha", "beta", "p_verify", "p_forget"]),
    (
        "run",
        &[
            "steps",
            "iterations",
            "seed",
            "window",
            "believer_fraction",
            "factchecker_fraction",
            "seeding_scope",
            "fixed_graph",
            "preset",
            "out",
            "workers",
        ],
    ),
];

fn section_of(key: &str) -> Option<&'static str> {
    SECTIONS
        .iter()
        .find(|(_, keys)| keys.contains(&key))
        .map(|(name, _)| *name)
}

/// Fully merged settings for one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub sweep: SweepSpec,
    pub preset: Option<Preset>,
    pub out: Option<PathBuf>,
    pub workers: Option<usize>,
}

impl RunConfig {
    /// Settings used when neither a preset nor a config key says otherwise.
    pub fn defaults() -> SweepSpec {
        SweepSpec {
            family: Family::ErdosRenyi,
            n: 1000,
            p: vec![0.006],
            f0: vec![0.2],
            h00: vec![0.05],
            h01: vec![0.002],
            h11: vec![0.007],
            alpha: vec![0.3],
            ..Preset::Fig2a.spec(DEFAULT_SEED)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIssue {
    pub key: String,
    pub message: String,
}

/// Every problem found while reading and validating a configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub issues: Vec<ConfigIssue>,
}

impl ConfigError {
    pub fn mentions(&self, key: &str) -> bool {
        self.issues.iter().any(|i| i.key == key)
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "invalid configuration:")?;
        for issue in &self.issues {
            write!(f, "\n  {}: {}", issue.key, issue.message)?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigError {}

struct Collector {
    issues: Vec<ConfigIssue>,
}

impl Collector {
    fn push(&mut self, key: impl Into<String>, message: impl Into<String>) {
        self.issues.push(ConfigIssue {
            key: key.into(),
            message: message.into(),
        });
    }

    fn parse<T: std::str::FromStr>(&mut self, key: &str, raw: &str) -> Option<T> {
        match raw.parse() {
            Ok(v) => Some(v),
            Err(_) => {
                self.push(key, format!("expected {}, got `{raw}`", type_label::<T>()));
                None
            }
        }
    }

    fn list(&mut self, key: &str, raw: &str) -> Option<Vec<f64>> {
        let mut out = Vec::new();
        for item in raw.split(',').map(str::trim) {
            out.push(self.parse::<f64>(key, item)?);
        }
        Some(out)
    }
}

fn type_label<T>() -> &'static str {
    let name = std::any::type_name::<T>();
    if name.ends_with("f64") {
        "a number"
    } else if name.ends_with("usize") || name.ends_with("u64") {
        "a nonnegative integer"
    } else if name.ends_with("bool") {
        "true or false"
    } else {
        "a valid value"
    }
}

/// Splits `key` or `section.key` and checks it against the schema.
fn resolve_key(raw: &str, section: Option<&str>, errs: &mut Collector) -> Option<&'static str> {
    let (explicit, key) = match raw.split_once('.') {
        Some((s, k)) => (Some(s), k),
        None => (section, raw),
    };
    let Some(home) = section_of(key) else {
        errs.push(raw, "unknown key");
        return None;
    };
    if let Some(s) = explicit {
        if s != home {
            errs.push(raw, format!("key belongs to section [{home}], not [{s}]"));
            return None;
        }
    }
    SECTIONS
        .iter()
        .flat_map(|(_, keys)| keys.iter())
        .find(|k| **k == key)
        .copied()
}

/// Parses config text plus `key=value` overrides (overrides win) into a
/// validated [`RunConfig`]. All problems are reported together.
pub fn parse_config(text: &str, overrides: &[String]) -> Result<RunConfig, ConfigError> {
    let mut errs = Collector { issues: Vec::new() };
    let mut values: BTreeMap<&'static str, String> = BTreeMap::new();

    let mut section: Option<String> = None;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            let name = name.trim();
            if SECTIONS.iter().any(|(s, _)| *s == name) {
                section = Some(name.to_string());
            } else {
                errs.push(
                    format!("[{name}]"),
                    format!("unknown section on line {}", lineno + 1),
                );
                section = None;
            }
            continue;
        }
        match line.split_once('=') {
            Some((k, v)) => {
                if let Some(key) = resolve_key(k.trim(), section.as_deref(), &mut errs) {
                    values.insert(key, v.trim().to_string());
                }
            }
            None => errs.push(
                format!("line {}", lineno + 1),
                format!("expected `key = value`, got `{line}`"),
            ),
        }
    }
    for item in overrides {
        match item.split_once('=') {
            Some((k, v)) => {
                if let Some(key) = resolve_key(k.trim(), None, &mut errs) {
                    values.insert(key, v.trim().to_string());
                }
            }
            None => errs.push(item.clone(), "override must look like key=value"),
        }
    }

    let preset = values
        .get("preset")
        .and_then(|raw| match raw.parse::<Preset>() {
            Ok(p) => Some(p),
            Err(msg) => {
                errs.push("preset", msg);
                None
            }
        });
    let mut spec = match preset {
        Some(p) => p.spec(DEFAULT_SEED),
        None => RunConfig::defaults(),
    };
    let mut out = None;
    let mut workers = None;
    let mut believer_fraction = spec.initial.believer_fraction();
    let mut factchecker_fraction = spec.initial.factchecker_fraction();
    let mut scope = spec.initial.scope();

    for (&key, raw) in &values {
        let raw = raw.as_str();
        match key {
            "family" => match raw.parse() {
                Ok(f) => spec.family = f,
                Err(msg) => errs.push(key, msg),
            },
            "n" => spec.n = errs.parse(key, raw).unwrap_or(spec.n),
            "p" => {
                if let Some(v) = errs.list(key, raw) {
                    spec.p = v;
                }
            }
            "f0" => {
                if let Some(v) = errs.list(key, raw) {
                    spec.f0 = v;
                }
            }
            "h00" => {
                if let Some(v) = errs.list(key, raw) {
                    spec.h00 = v;
                }
            }
            "h01" => {
                if let Some(v) = errs.list(key, raw) {
                    spec.h01 = v;
                }
            }
            "h11" => {
                if let Some(v) = errs.list(key, raw) {
                    spec.h11 = v;
                }
            }
            "alpha" => {
                if let Some(v) = errs.list(key, raw) {
                    spec.alpha = v;
                }
            }
            "beta" => spec.beta = errs.parse(key, raw).unwrap_or(spec.beta),
            "p_verify" => spec.p_verify = errs.parse(key, raw).unwrap_or(spec.p_verify),
            "p_forget" => spec.p_forget = errs.parse(key, raw).unwrap_or(spec.p_forget),
            "steps" => spec.steps = errs.parse(key, raw).unwrap_or(spec.steps),
            "iterations" => spec.iterations = errs.parse(key, raw).unwrap_or(spec.iterations),
            "seed" => spec.master_seed = errs.parse(key, raw).unwrap_or(spec.master_seed),
            "window" => spec.window = errs.parse(key, raw).unwrap_or(spec.window),
            "believer_fraction" => {
                believer_fraction = errs.parse(key, raw).unwrap_or(believer_fraction)
            }
            "factchecker_fraction" => {
                factchecker_fraction = errs.parse(key, raw).unwrap_or(factchecker_fraction)
            }
            "seeding_scope" => match raw.parse() {
                Ok(s) => scope = s,
                Err(msg) => errs.push(key, msg),
            },
            "fixed_graph" => {
                if let Some(fixed) = errs.parse::<bool>(key, raw) {
                    spec.graph_mode = if fixed {
                        GraphMode::Quenched
                    } else {
                        GraphMode::Annealed
                    };
                }
            }
            "preset" => {}
            "out" => out = Some(PathBuf::from(raw)),
            "workers" => match errs.parse::<usize>(key, raw) {
                Some(0) => errs.push(key, "must be at least 1"),
                w => workers = w,
            },
            _ => unreachable!("schema key without handler: {key}"),
        }
    }

    match InitialCondition::new(believer_fraction, factchecker_fraction, scope) {
        Ok(ic) => spec.initial = ic,
        Err(e) => push_error(&mut errs, e),
    }
    for e in spec.violations() {
        push_error(&mut errs, e);
    }

    if errs.issues.is_empty() {
        Ok(RunConfig {
            sweep: spec,
            preset,
            out,
            workers,
        })
    } else {
        Err(ConfigError {
            issues: errs.issues,
        })
    }
}

fn push_error(errs: &mut Collector, e: Error) {
    let key = match &e {
        Error::InvalidParameter { name, .. } => name.to_string(),
        Error::EmptyAxis(name) => name.to_string(),
        Error::EmptyGraph => "n".to_string(),
        _ => "config".to_string(),
    };
    errs.push(key, e.to_string());
}

#[derive(Debug, Parser)]
#[command(
    name = "hoaxnet",
    version,
    about = "Monte Carlo simulation of hoax spreading with fact-checking on random networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one ensemble and print a summary line.
    Run(Common),
    /// Run every point of a parameter grid.
    Sweep(Common),
    /// Write the mean believer fraction per step for a single grid point.
    Timeseries(Common),
    /// Run a built-in figure preset (fig2a, fig2b, fig3).
    Preset {
        name: Preset,
        #[command(flatten)]
        common: Common,
    },
}

#[derive(Debug, Args)]
struct Common {
    /// Config file with [network], [model] and [run] sections.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (defaults to $HOAXNET_WORKERS, then all cores).
    #[arg(long)]
    workers: Option<usize>,
    /// Output CSV path.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Override a config key, e.g. `--set model.alpha=0.5`.
    #[arg(short = 's', long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn load_config(common: &Common, preset: Option<Preset>) -> Result<RunConfig, Failure> {
    let text = match &common.config {
        Some(path) => std::fs::read_to_string(path)
            .map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?,
        None => String::new(),
    };
    let mut overrides = common.set.clone();
    if let Some(p) = preset {
        overrides.push(format!("preset={p}"));
    }
    if let Some(seed) = common.seed {
        overrides.push(format!("seed={seed}"));
    }
    let mut cfg = parse_config(&text, &overrides)?;
    if let Some(w) = common.workers {
        if w == 0 {
            return Err(Failure::Usage("--workers must be at least 1".into()));
        }
        cfg.workers = Some(w);
    }
    if let Some(out) = &common.out {
        cfg.out = Some(out.clone());
    }
    Ok(cfg)
}

fn worker_count(cfg: &RunConfig) -> Result<usize, Failure> {
    if let Some(w) = cfg.workers {
        return Ok(w);
    }
    if let Ok(raw) = std::env::var(WORKERS_ENV) {
        return match raw.trim().parse::<usize>() {
            Ok(w) if w > 0 => Ok(w),
            _ => Err(Failure::Usage(format!(
                "{WORKERS_ENV} must be a positive integer, got `{raw}`"
            ))),
        };
    }
    Ok(std::thread::available_parallelism().map_or(1, |n| n.get()))
}

fn summary_field(v: Option<MeanStd>) -> String {
    match v {
        Some(m) => format!("{}±{}", format_fraction(m.mean), format_fraction(m.std)),
        None => "n/a".into(),
    }
}

/// `believers_global=<mean>±<std> believers_majority=... believers_minority=...`
pub fn summary_line(row: &ResultRow) -> String {
    format!(
        "believers_global={} believers_majority={} believers_minority={}",
        summary_field(Some(row.global)),
        summary_field(row.majority),
        summary_field(row.minority),
    )
}

/// `fig2a.csv` -> `fig2a_p0.002.csv`.
fn series_path(out: &Path, p: f64) -> PathBuf {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("series");
    out.with_file_name(format!("{stem}_p{p}.csv"))
}

fn execute(command: Command) -> Result<(), Failure> {
    let (name, common, preset) = match &command {
        Command::Run(c) => ("run", c, None),
        Command::Sweep(c) => ("sweep", c, None),
        Command::Timeseries(c) => ("timeseries", c, None),
        Command::Preset { name, common } => (name.name(), common, Some(*name)),
    };
    let cfg = load_config(common, preset)?;
    let out = cfg
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{name}.csv")));
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count(&cfg)?)
        .build()
        .map_err(|e| Failure::Runtime(e.to_string()))?;
    let spec = &cfg.sweep;

    pool.install(|| -> Result<(), Failure> {
        match command {
            Command::Run(_) => {
                let size = spec.grid_size();
                if size != 1 {
                    return Err(Failure::Usage(format!(
                        "`run` needs a single grid point, config describes {size}; use `sweep`"
                    )));
                }
                let rows = run_sweep(spec)?;
                write_csv(&rows, &out)?;
                println!("{}", summary_line(&rows[0]));
            }
            Command::Sweep(_) => {
                let rows = run_sweep(spec)?;
                write_csv(&rows, &out)?;
                eprintln!("wrote {} rows to {}", rows.len(), out.display());
            }
            Command::Timeseries(_) => {
                let series = run_timeseries(spec).map_err(|e| match e {
                    Error::NotSinglePoint(_) => Failure::Usage(e.to_string()),
                    other => other.into(),
                })?;
                write_timeseries_csv(&series, &out)?;
                eprintln!("wrote {} steps to {}", series.len(), out.display());
            }
            Command::Preset { name, .. } => {
                if name == Preset::Fig2a && spec.family == Family::ErdosRenyi {
                    let results = run_sweep_with_timeseries(spec)?;
                    for (row, series) in &results {
                        let path = series_path(&out, row.p.unwrap_or_default());
                        write_timeseries_csv(series, &path)?;
                        eprintln!("wrote {}", path.display());
                    }
                    let rows: Vec<_> = results.into_iter().map(|(r, _)| r).collect();
                    write_csv(&rows, &out)?;
                } else {
                    write_csv(&run_sweep(spec)?, &out)?;
                }
                eprintln!("wrote {}", out.display());
            }
        }
        Ok(())
    })
}

/// Entry point shared by the binary and tests. Returns the process exit code.
pub fn main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            EXIT_USAGE
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            EXIT_RUNTIME
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::SeedingScope;

    fn overrides(items: &[&str]) -> Vec<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn empty_file_with_overrides() {
        let cfg = parse_config(
            "",
            &overrides(&[
                "family=sbm",
                "n=500",
                "f0=0.1,0.3",
                "h00=0.05",
                "h01=0.001",
                "h11=0.01",
                "alpha=0.2",
                "beta=0.4",
                "p_verify=0.1",
                "p_forget=0.2",
                "steps=20",
                "iterations=3",
                "seed=7",
            ]),
        )
        .unwrap();
        let s = &cfg.sweep;
        assert_eq!(s.family, Family::TwoBlock);
        assert_eq!((s.n, s.steps, s.iterations, s.master_seed), (500, 20, 3, 7));
        assert_eq!(s.f0, vec![0.1, 0.3]);
        assert_eq!(s.grid_size(), 2);
    }

    #[test]
    fn sections_comments_and_precedence() {
        let text = "\
# experiment
[network]
family = er
p = 0.01, 0.02   # two densities

[model]
alpha = 0.5
[run]
iterations = 5
fixed_graph = true
seeding_scope = majority-only
";
        let cfg = parse_config(text, &overrides(&["model.alpha=0.7", "iterations=9"])).unwrap();
        assert_eq!(cfg.sweep.p, vec![0.01, 0.02]);
        assert_eq!(cfg.sweep.alpha, vec![0.7]);
        assert_eq!(cfg.sweep.iterations, 9);
        assert_eq!(cfg.sweep.graph_mode, GraphMode::Quenched);
        assert_eq!(cfg.sweep.initial.scope(), SeedingScope::MajorityOnly);
    }

    #[test]
    fn alpha_out_of_range() {
        let err = parse_config("[model]\nalpha = 1.5\n", &[]).unwrap_err();
        assert!(err.mentions("alpha"));
        assert!(err.to_string().contains("(-1, 1)"), "{err}");
    }

    #[test]
    fn all_violations_reported() {
        let text =
            "[model]\nbeta = 2\np_verify = 0.6\np_forget = 0.6\n[run]\nbogus = 1\nsteps = many\n";
        let err = parse_config(text, &[]).unwrap_err();
        for key in ["beta", "p_forget", "bogus", "steps"] {
            assert!(err.mentions(key), "missing {key} in {err}");
        }
    }

    #[test]
    fn wrong_section_and_unknown_section() {
        let err = parse_config("[model]\nsteps = 5\n[extras]\n", &[]).unwrap_err();
        assert!(err.mentions("steps"));
        assert!(err.mentions("[extras]"));
        assert!(parse_config("", &overrides(&["network.alpha=0.1"])).is_err());
        assert!(parse_config("", &overrides(&["noequals"])).is_err());
    }

    #[test]
    fn preset_alone_matches_constants() {
        let cfg = parse_config("[run]\npreset = fig3\n", &[]).unwrap();
        assert_eq!(cfg.preset, Some(Preset::Fig3));
        assert_eq!(cfg.sweep, Preset::Fig3.spec(DEFAULT_SEED));
        let cfg = parse_config("", &overrides(&["preset=fig2b", "seed=4"])).unwrap();
        assert_eq!(cfg.sweep, Preset::Fig2b.spec(4));
    }

    #[test]
    fn bad_initial_condition() {
        let err = parse_config(
            "[run]\nbeliever_fraction = 0.8\nfactchecker_fraction = 0.5\n",
            &[],
        )
        .unwrap_err();
        assert!(err.mentions("factchecker_fraction"));
        let err = parse_config("", &overrides(&["seeding_scope=everyone"])).unwrap_err();
        assert!(err.mentions("seeding_scope"));
    }

    #[test]
    fn summary_format() {
        let row = ResultRow {
            family: Family::ErdosRenyi,
            f0: None,
            h00: None,
            h01: None,
            h11: None,
            p: Some(0.01),
            alpha: 0.3,
            beta: 0.0,
            p_verify: 0.05,
            p_forget: 0.1,
            steps: 10,
            iterations: 2,
            seed: 1,
            global: MeanStd {
                mean: 0.0,
                std: 0.0,
            },
            minority: None,
            majority: Some(MeanStd {
                mean: 0.0,
                std: 0.0,
            }),
        };
        assert_eq!(
            summary_line(&row),
            "believers_global=0±0 believers_majority=0±0 believers_minority=n/a"
        );
    }

    #[test]
    fn series_file_names() {
        assert_eq!(
            series_path(Path::new("out/fig2a.csv"), 0.002),
            PathBuf::from("out/fig2a_p0.002.csv")
        );
    }
}
