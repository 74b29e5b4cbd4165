//! Run configuration: flags, config files and defaults.
//!
//! Config files are flat `key = value` text. Blank lines and lines starting
//! with `#` are skipped, keys are the long flag names (`-` and `_` are
//! interchangeable), values run to the end of the line and are not quoted.
//! A file ending in `.json` is read as a previously echoed `run_config.json`.
//! A key may appear only once per file; unknown keys are rejected.
//!
//! Precedence: flags, then the config file, then `LAB_THREADS` (threads
//! only), then defaults.

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::{Parser, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use sparse_ssk::ensemble::{EnsembleConfig, EntryLaw};
use sparse_ssk::experiments::{Suite, SuiteConfig, TestFunction, SCHEMA_VERSION};

use crate::error::CliError;

pub const DEFAULT_TRIALS: usize = 100;
pub const DEFAULT_TW_TRIALS: usize = 20_000;
pub const DEFAULT_BINS: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Eigenvalues of one sampled matrix.
    Spectrum,
    /// Saddle-point free energy of one sampled matrix.
    FreeEnergy,
    /// The deterministic quartic law for s = N^(-2 phi).
    Law,
    HighT,
    LowT,
    Lss,
    Rigidity,
    Edge,
    /// Sampled GOE Tracy-Widom reference.
    TwOracle,
}

impl Command {
    pub fn suite(self) -> Option<Suite> {
        match self {
            Command::HighT => Some(Suite::HighT),
            Command::LowT => Some(Suite::LowT),
            Command::Lss => Some(Suite::Lss),
            Command::Rigidity => Some(Suite::Rigidity),
            Command::Edge => Some(Suite::Edge),
            _ => None,
        }
    }

    fn name(self) -> String {
        self.to_possible_value().map(|v| v.get_name().to_string()).unwrap_or_default()
    }

    fn uses_beta(self) -> bool {
        matches!(self, Command::FreeEnergy | Command::HighT | Command::LowT)
    }

    fn uses_single_trial(self) -> bool {
        matches!(self, Command::Spectrum | Command::FreeEnergy)
    }

    fn uses_tw(self) -> bool {
        matches!(self, Command::LowT | Command::Edge | Command::TwOracle)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Plotdata,
}

#[derive(Debug, Parser, Default)]
#[command(name = "lab", version, about = "Sparse spherical SK laboratory")]
pub struct Cli {
    /// What to run (may also come from the config file).
    #[arg(value_enum)]
    pub command: Option<Command>,
    /// Config file: `key = value` lines, or a previous run_config.json.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub n: Option<String>,
    /// Sparsity exponent in (0, 1/2).
    #[arg(long, allow_hyphen_values = true)]
    pub phi: Option<String>,
    /// diluted_rademacher or diluted_gaussian.
    #[arg(long)]
    pub entry_law: Option<String>,
    #[arg(long)]
    pub seed: Option<String>,
    #[arg(long)]
    pub include_diagonal: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    pub beta: Option<String>,
    /// Monte Carlo trials for the suites.
    #[arg(long)]
    pub trials: Option<String>,
    /// Trial index for spectrum and free-energy.
    #[arg(long)]
    pub trial: Option<String>,
    /// Trial pool size; 0 uses every core. Falls back to LAB_THREADS.
    #[arg(long)]
    pub threads: Option<String>,
    #[arg(long, short = 'o')]
    pub output_dir: Option<String>,
    /// Comma-separated subset of csv, json, plotdata.
    #[arg(long)]
    pub formats: Option<String>,
    /// square or log_shifted:<a> (lss only).
    #[arg(long)]
    pub test_function: Option<String>,
    /// Cached TW reference written by `lab tw-oracle`.
    #[arg(long, conflicts_with_all = ["tw_trials", "tw_size", "tw_seed"])]
    pub tw_reference: Option<String>,
    #[arg(long)]
    pub tw_trials: Option<String>,
    /// Matrix size for the TW reference (default: n, at least 500).
    #[arg(long)]
    pub tw_size: Option<String>,
    #[arg(long)]
    pub tw_seed: Option<String>,
    /// Also evaluate the contour integral (free-energy only).
    #[arg(long)]
    pub contour: bool,
    /// Histogram bins in plot data.
    #[arg(long)]
    pub bins: Option<String>,
}

const KEYS: &[&str] = &[
    "command",
    "n",
    "phi",
    "entry_law",
    "seed",
    "include_diagonal",
    "beta",
    "trials",
    "trial",
    "threads",
    "output_dir",
    "formats",
    "test_function",
    "tw_reference",
    "tw_trials",
    "tw_size",
    "tw_seed",
    "contour",
    "bins",
];

/// Keys of an echoed run_config.json that are derived, not inputs.
const DERIVED_KEYS: &[&str] = &["config_hash", "schema_version"];

#[derive(Debug, Clone, PartialEq)]
enum Origin {
    Flag,
    File(String),
    Env,
}

#[derive(Debug, Clone)]
struct Value {
    raw: String,
    origin: Origin,
}

impl Value {
    fn describe(&self, key: &str) -> String {
        match &self.origin {
            Origin::Flag if key == "command" => "the subcommand".to_string(),
            Origin::Flag => format!("--{}", key.replace('_', "-")),
            Origin::File(path) => format!("key `{key}` in {path}"),
            Origin::Env => "LAB_THREADS".to_string(),
        }
    }
}

type Layer = BTreeMap<String, Value>;

fn normalize_key(key: &str, origin: &Origin) -> Result<String, CliError> {
    let k = key.trim().replace('-', "_");
    let k = if k == "subcommand" { "command".to_string() } else { k };
    if KEYS.contains(&k.as_str()) {
        return Ok(k);
    }
    let at = match origin {
        Origin::File(p) => format!(" in {p}"),
        _ => String::new(),
    };
    Err(CliError::Usage(format!("unknown config key `{}`{at}", key.trim())))
}

fn parse_kv(text: &str, path: &str) -> Result<Layer, CliError> {
    let origin = Origin::File(path.to_string());
    let mut layer = Layer::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("{path}:{}: expected `key = value`", i + 1)))?;
        let key = normalize_key(k, &origin)?;
        if layer.contains_key(&key) {
            return Err(CliError::Usage(format!("{path}:{}: key `{key}` given twice", i + 1)));
        }
        layer.insert(key, Value { raw: v.trim().to_string(), origin: origin.clone() });
    }
    Ok(layer)
}

fn parse_json(text: &str, path: &str) -> Result<Layer, CliError> {
    let origin = Origin::File(path.to_string());
    let obj: BTreeMap<String, serde_json::Value> =
        serde_json::from_str(text).map_err(|e| CliError::Usage(format!("{path}: {e}")))?;
    let mut layer = Layer::new();
    for (k, v) in obj {
        if DERIVED_KEYS.contains(&k.as_str()) {
            continue;
        }
        let key = normalize_key(&k, &origin)?;
        let raw = match v {
            serde_json::Value::Null => continue,
            serde_json::Value::String(s) => s,
            serde_json::Value::Array(items) => items
                .iter()
                .map(|x| x.as_str().map(str::to_string).unwrap_or_else(|| x.to_string()))
                .collect::<Vec<_>>()
                .join(","),
            other => other.to_string(),
        };
        layer.insert(key, Value { raw, origin: origin.clone() });
    }
    Ok(layer)
}

fn flag_layer(cli: &Cli) -> Layer {
    let mut layer = Layer::new();
    let mut put = |key: &str, v: Option<String>| {
        if let Some(raw) = v {
            layer.insert(key.to_string(), Value { raw, origin: Origin::Flag });
        }
    };
    put("command", cli.command.map(Command::name));
    put("n", cli.n.clone());
    put("phi", cli.phi.clone());
    put("entry_law", cli.entry_law.clone());
    put("seed", cli.seed.clone());
    put("include_diagonal", cli.include_diagonal.clone());
    put("beta", cli.beta.clone());
    put("trials", cli.trials.clone());
    put("trial", cli.trial.clone());
    put("threads", cli.threads.clone());
    put("output_dir", cli.output_dir.clone());
    put("formats", cli.formats.clone());
    put("test_function", cli.test_function.clone());
    put("tw_reference", cli.tw_reference.clone());
    put("tw_trials", cli.tw_trials.clone());
    put("tw_size", cli.tw_size.clone());
    put("tw_seed", cli.tw_seed.clone());
    put("contour", cli.contour.then(|| "true".to_string()));
    put("bins", cli.bins.clone());
    layer
}

/// Fully resolved configuration; echoed as run_config.json.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub config_hash: String,
    pub schema_version: u32,
    pub command: Command,
    pub n: usize,
    pub phi: f64,
    pub entry_law: EntryLaw,
    pub seed: u64,
    pub include_diagonal: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trial: Option<u64>,
    pub threads: usize,
    pub output_dir: PathBuf,
    pub formats: Vec<Format>,
    /// `square` or `log_shifted:<a>`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_function: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tw_reference: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tw_trials: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tw_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tw_seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub contour: Option<bool>,
    pub bins: usize,
}

struct Resolver {
    merged: Layer,
}

impl Resolver {
    fn parse<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: std::fmt::Display,
    {
        match self.merged.get(key) {
            None => Ok(None),
            Some(v) => v
                .raw
                .parse::<T>()
                .map(Some)
                .map_err(|e| CliError::Usage(format!("invalid value `{}` for {}: {e}", v.raw, v.describe(key)))),
        }
    }

    /// Flags that have no meaning for the subcommand are an error; the same
    /// keys in a shared config file are dropped.
    fn relevant(&self, key: &str, applies: bool, command: Command) -> Result<bool, CliError> {
        match self.merged.get(key) {
            Some(v) if !applies && v.origin == Origin::Flag => Err(CliError::Usage(format!(
                "conflicting flags: {} does not apply to `{}`",
                v.describe(key),
                command.name()
            ))),
            _ => Ok(applies),
        }
    }
}

pub fn resolve(cli: &Cli, lab_threads: Option<String>) -> Result<RunConfig, CliError> {
    let mut merged = Layer::new();
    if let Some(t) = lab_threads {
        merged.insert("threads".into(), Value { raw: t, origin: Origin::Env });
    }
    if let Some(path) = &cli.config {
        let shown = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read --config {shown}: {e}")))?;
        let file = if path.extension().is_some_and(|e| e == "json") { parse_json(&text, &shown)? } else { parse_kv(&text, &shown)? };
        if file.contains_key("tw_reference") && ["tw_trials", "tw_size", "tw_seed"].iter().any(|k| file.contains_key(*k)) {
            return Err(CliError::Usage(format!("conflicting keys in {shown}: tw_reference excludes tw_trials, tw_size and tw_seed")));
        }
        merged.extend(file);
    }
    let flags = flag_layer(cli);
    // a cached reference and fresh sampling parameters exclude each other across layers too
    if flags.contains_key("tw_reference") {
        for k in ["tw_trials", "tw_size", "tw_seed"] {
            merged.remove(k);
        }
    }
    if ["tw_trials", "tw_size", "tw_seed"].iter().any(|k| flags.contains_key(*k)) {
        merged.remove("tw_reference");
    }
    merged.extend(flags);
    let r = Resolver { merged };

    let command = match r.merged.get("command") {
        None => return Err(CliError::Usage("missing subcommand (try `lab --help`)".into())),
        Some(v) => Command::from_str(&v.raw, true)
            .map_err(|_| CliError::Usage(format!("unknown subcommand `{}` in {}", v.raw, v.describe("command"))))?,
    };
    let n = r.parse("n")?.unwrap_or(2000);
    let phi = r.parse("phi")?.unwrap_or(0.35);
    let entry_law = r.parse::<EntryLaw>("entry_law")?.unwrap_or(EntryLaw::DilutedRademacher);
    let seed = r.parse("seed")?.unwrap_or(42);
    let include_diagonal = r.parse("include_diagonal")?.unwrap_or(true);
    let threads = r.parse("threads")?.unwrap_or(0);
    let output_dir = PathBuf::from(r.parse::<String>("output_dir")?.unwrap_or_else(|| "lab-output".into()));
    let formats = match r.merged.get("formats") {
        None => vec![Format::Csv, Format::Json],
        Some(v) => {
            let mut fs = Vec::new();
            for item in v.raw.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                let f = Format::from_str(item, true)
                    .map_err(|_| CliError::Usage(format!("unknown format `{item}` for {} (expected csv, json, plotdata)", v.describe("formats"))))?;
                fs.push(f);
            }
            fs.sort();
            fs.dedup();
            fs
        }
    };
    let bins = r.parse("bins")?.unwrap_or(DEFAULT_BINS);
    if bins == 0 {
        return Err(CliError::Usage("--bins must be positive".into()));
    }

    let beta = if r.relevant("beta", command.uses_beta(), command)? {
        Some(r.parse::<f64>("beta")?.ok_or_else(|| CliError::Usage(format!("`{}` needs --beta", command.name())))?)
    } else {
        None
    };
    let trials = if r.relevant("trials", command.suite().is_some(), command)? {
        Some(r.parse("trials")?.unwrap_or(DEFAULT_TRIALS))
    } else {
        None
    };
    let trial = if r.relevant("trial", command.uses_single_trial(), command)? { Some(r.parse("trial")?.unwrap_or(0)) } else { None };
    let contour = if r.relevant("contour", command == Command::FreeEnergy, command)? {
        Some(r.parse("contour")?.unwrap_or(false))
    } else {
        None
    };
    let test_function = if r.relevant("test_function", command == Command::Lss, command)? {
        let raw = r.parse::<String>("test_function")?.unwrap_or_else(|| "square".into());
        raw.parse::<TestFunction>().map_err(|e| CliError::Usage(format!("--test-function: {e}")))?;
        Some(raw)
    } else {
        None
    };
    let uses_tw = command.uses_tw();
    let mut tw_reference = None;
    let (mut tw_trials, mut tw_size, mut tw_seed) = (None, None, None);
    if r.relevant("tw_reference", uses_tw && command != Command::TwOracle, command)? {
        tw_reference = r.parse::<String>("tw_reference")?.map(PathBuf::from);
    }
    let fresh = uses_tw && tw_reference.is_none();
    if r.relevant("tw_trials", fresh, command)? & r.relevant("tw_size", fresh, command)? & r.relevant("tw_seed", fresh, command)? {
        tw_trials = Some(r.parse("tw_trials")?.unwrap_or(DEFAULT_TW_TRIALS));
        tw_size = Some(r.parse("tw_size")?.unwrap_or(n.max(500)));
        tw_seed = Some(r.parse("tw_seed")?.unwrap_or(seed));
    }

    let mut cfg = RunConfig {
        config_hash: String::new(),
        schema_version: SCHEMA_VERSION,
        command,
        n,
        phi,
        entry_law,
        seed,
        include_diagonal,
        beta,
        trials,
        trial,
        threads,
        output_dir,
        formats,
        test_function,
        tw_reference,
        tw_trials,
        tw_size,
        tw_seed,
        contour,
        bins,
    };
    cfg.config_hash = cfg.compute_hash();
    Ok(cfg)
}

impl RunConfig {
    pub fn ensemble(&self) -> EnsembleConfig {
        let mut e = EnsembleConfig::new(self.n, self.phi, self.seed).with_law(self.entry_law);
        e.include_diagonal = self.include_diagonal;
        e
    }

    pub fn test_function(&self) -> Option<TestFunction> {
        self.test_function.as_deref().and_then(|s| s.parse().ok())
    }

    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }

    pub fn suite_config(&self) -> Option<SuiteConfig> {
        let suite = self.command.suite()?;
        Some(SuiteConfig::new(suite, self.ensemble(), self.beta, self.trials.unwrap_or(0), self.test_function()))
    }

    /// Suites share the hash written into their per-trial CSV; other
    /// subcommands hash every input that can change their output.
    fn compute_hash(&self) -> String {
        if let Some(s) = self.suite_config() {
            return s.config_hash;
        }
        let mut canon = self.clone();
        canon.threads = 0;
        canon.output_dir = PathBuf::new();
        canon.formats.clear();
        canon.config_hash.clear();
        let text = serde_json::to_string(&canon).expect("config serializes");
        Sha256::digest(text.as_bytes())[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn output_path(&self, name: &str) -> PathBuf {
        self.output_dir.join(name)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cli(args: &[&str]) -> Cli {
        Cli::try_parse_from(std::iter::once("lab").chain(args.iter().copied())).unwrap()
    }

    #[test]
    fn key_value_grammar() {
        let layer = parse_kv("# comment\n\n n = 300 \nentry-law=gaussian\n", "f").unwrap();
        assert_eq!(layer["n"].raw, "300");
        assert_eq!(layer["entry_law"].raw, "gaussian");
        assert!(parse_kv("n = 1\nn = 2\n", "f").is_err());
        assert!(parse_kv("n 1\n", "f").is_err());
        let err = parse_kv("colour = red\n", "f").unwrap_err();
        assert!(err.to_string().contains("colour"));
    }

    #[test]
    fn defaults_and_required_beta() {
        let c = resolve(&cli(&["lss"]), None).unwrap();
        assert_eq!((c.n, c.phi, c.seed, c.trials), (2000, 0.35, 42, Some(DEFAULT_TRIALS)));
        assert_eq!(c.test_function.as_deref(), Some("square"));
        assert!(c.beta.is_none());
        assert!(resolve(&cli(&["high-t"]), None).unwrap_err().to_string().contains("--beta"));
    }

    #[test]
    fn flag_for_another_subcommand_is_a_conflict() {
        let err = resolve(&cli(&["lss", "--beta", "0.2"]), None).unwrap_err();
        assert!(err.to_string().contains("--beta"));
    }

    #[test]
    fn threads_fall_back_to_env() {
        let c = resolve(&cli(&["law"]), Some("3".into())).unwrap();
        assert_eq!(c.threads, 3);
        let c = resolve(&cli(&["law", "--threads", "2"]), Some("3".into())).unwrap();
        assert_eq!(c.threads, 2);
        assert!(resolve(&cli(&["law"]), Some("many".into())).unwrap_err().to_string().contains("LAB_THREADS"));
    }

    #[test]
    fn echoed_json_resolves_to_the_same_config() {
        let c = resolve(&cli(&["lss", "--n", "300", "--test-function", "log_shifted:0.5", "--formats", "json,csv"]), None).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run_config.json");
        std::fs::write(&path, serde_json::to_string_pretty(&c).unwrap()).unwrap();
        let again = resolve(&cli(&["--config", path.to_str().unwrap()]), None).unwrap();
        assert_eq!(again, c);
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("lab.conf");
        std::fs::write(&path, "command = rigidity
n = 150
trials = 5
beta = 0.3
").unwrap();
        let c = resolve(&cli(&["--config", path.to_str().unwrap(), "--trials", "6"]), None).unwrap();
        assert_eq!((c.command, c.n, c.trials), (Command::Rigidity, 150, Some(6)));
        // beta is meaningless for rigidity; from a file it is dropped
        assert!(c.beta.is_none());
    }
}
