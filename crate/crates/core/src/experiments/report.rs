//! Trial records, summary reports and their file formats.
//!
//! JSON summary: the serialized [`ExperimentReport`], tagged with
//! `schema_version`. Per-trial CSV: one `# schema_version=.. suite=..
//! config_hash=..` comment line, a `trial,z,lambda1,f_n,standardized` header,
//! then one row per completed trial in trial order. Floats use the shortest
//! representation that parses back to the same bits; an empty `f_n` cell
//! means the suite does not evaluate the free energy.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::stats::MomentTable;
use crate::ensemble::EnsembleConfig;
use crate::error::{LabError, Result};

pub const SCHEMA_VERSION: u32 = 1;
pub const CSV_HEADER: &str = "trial,z,lambda1,f_n,standardized";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    HighT,
    LowT,
    Lss,
    Rigidity,
    Edge,
}

impl Suite {
    pub fn as_str(self) -> &'static str {
        match self {
            Suite::HighT => "high_t",
            Suite::LowT => "low_t",
            Suite::Lss => "lss",
            Suite::Rigidity => "rigidity",
            Suite::Edge => "edge",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFunction {
    Square,
    /// `log(2 + a - x)`.
    LogShifted { a: f64 },
}

impl TestFunction {
    pub fn eval(self, x: f64) -> f64 {
        match self {
            TestFunction::Square => x * x,
            TestFunction::LogShifted { a } => (2.0 + a - x).ln(),
        }
    }

    pub fn derivative(self, x: f64) -> f64 {
        match self {
            TestFunction::Square => 2.0 * x,
            TestFunction::LogShifted { a } => -1.0 / (2.0 + a - x),
        }
    }

    pub fn validate(self) -> Result<()> {
        match self {
            TestFunction::LogShifted { a } if !(a > 0.0 && a.is_finite()) => {
                Err(LabError::Precondition(format!("log shift a must be positive, got {a}")))
            }
            _ => Ok(()),
        }
    }

    fn canonical(self) -> String {
        match self {
            TestFunction::Square => "square".into(),
            TestFunction::LogShifted { a } => format!("log_shifted:{:016x}", a.to_bits()),
        }
    }
}

impl std::str::FromStr for TestFunction {
    type Err = LabError;

    /// `square` or `log_shifted:<a>`.
    fn from_str(s: &str) -> Result<Self> {
        if s == "square" {
            return Ok(TestFunction::Square);
        }
        if let Some(a) = s.strip_prefix("log_shifted:") {
            let a: f64 = a.parse().map_err(|_| LabError::Parse(format!("bad shift in `{s}`")))?;
            let f = TestFunction::LogShifted { a };
            f.validate()?;
            return Ok(f);
        }
        Err(LabError::Parse(format!("unknown test function `{s}` (expected square or log_shifted:<a>)")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteConfig {
    pub suite: Suite,
    pub ensemble: EnsembleConfig,
    pub beta: Option<f64>,
    pub n_trials: usize,
    pub test_function: Option<TestFunction>,
    pub config_hash: String,
}

impl SuiteConfig {
    pub fn new(suite: Suite, ensemble: EnsembleConfig, beta: Option<f64>, n_trials: usize, test_function: Option<TestFunction>) -> Self {
        let canonical = format!(
            "{};suite={};beta={};trials={};fn={}",
            ensemble.config_hash(),
            suite.as_str(),
            beta.map_or("-".to_string(), |b| format!("{:016x}", b.to_bits())),
            n_trials,
            test_function.map_or("-".to_string(), |f| f.canonical()),
        );
        let digest = Sha256::digest(canonical.as_bytes());
        let config_hash = digest[..8].iter().map(|b| format!("{b:02x}")).collect();
        Self { suite, ensemble, beta, n_trials, test_function, config_hash }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_index: u64,
    pub z_statistic: f64,
    pub lambda_1: f64,
    pub f_n: Option<f64>,
    pub standardized_fluctuation: f64,
    /// Seconds spent on this trial, eigensolve included.
    pub wall_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialFailure {
    pub trial_index: u64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub config: SuiteConfig,
    /// Completed trials.
    pub n_trials: usize,
    pub failures: Vec<TrialFailure>,
    pub records: Vec<TrialRecord>,
    pub sample_mean: f64,
    pub sample_variance: f64,
    /// Short description of the law the KS test compares against.
    pub predicted_law: Option<String>,
    pub predicted_mean: Option<f64>,
    pub predicted_variance: Option<f64>,
    pub ks_statistic: Option<f64>,
    pub ks_p: Option<f64>,
    pub moments: Option<MomentTable>,
    /// Suite-specific diagnostics.
    pub metrics: BTreeMap<String, f64>,
}

impl ExperimentReport {
    pub fn standardized(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.standardized_fluctuation).collect()
    }

    pub fn metric(&self, key: &str) -> Option<f64> {
        self.metrics.get(key).copied()
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self).map_err(|e| LabError::Io(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let report: ExperimentReport = serde_json::from_str(text).map_err(|e| LabError::Parse(e.to_string()))?;
        if report.schema_version != SCHEMA_VERSION {
            return Err(LabError::Parse(format!("unsupported schema_version {}", report.schema_version)));
        }
        Ok(report)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "# schema_version={SCHEMA_VERSION} suite={} config_hash={}",
            self.config.suite.as_str(),
            self.config.config_hash
        )?;
        writeln!(out, "{CSV_HEADER}")?;
        for r in &self.records {
            let f_n = r.f_n.map_or(String::new(), |f| f.to_string());
            writeln!(out, "{},{},{},{},{}", r.trial_index, r.z_statistic, r.lambda_1, f_n, r.standardized_fluctuation)?;
        }
        Ok(())
    }
}

/// Parses per-trial CSV rows; wall times are not stored and come back as 0.
pub fn read_records_csv<R: BufRead>(input: R) -> Result<Vec<TrialRecord>> {
    let mut records = Vec::new();
    let mut seen_header = false;
    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        if !seen_header {
            if line != CSV_HEADER {
                return Err(LabError::Parse(format!("line {}: expected header `{CSV_HEADER}`", lineno + 1)));
            }
            seen_header = true;
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 5 {
            return Err(LabError::Parse(format!("line {}: expected 5 cells, got {}", lineno + 1, cells.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| LabError::Parse(format!("line {}: bad number `{s}`", lineno + 1)));
        records.push(TrialRecord {
            trial_index: cells[0].parse().map_err(|_| LabError::Parse(format!("line {}: bad trial index", lineno + 1)))?,
            z_statistic: num(cells[1])?,
            lambda_1: num(cells[2])?,
            f_n: if cells[3].is_empty() { None } else { Some(num(cells[3])?) },
            standardized_fluctuation: num(cells[4])?,
            wall_time: 0.0,
        });
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn test_function_parsing() {
        assert_eq!("square".parse::<TestFunction>().unwrap(), TestFunction::Square);
        assert_eq!("log_shifted:0.5".parse::<TestFunction>().unwrap(), TestFunction::LogShifted { a: 0.5 });
        assert!("log_shifted:-1".parse::<TestFunction>().is_err());
        assert!("cube".parse::<TestFunction>().is_err());
    }

    #[test]
    fn suite_hash_depends_on_every_parameter() {
        let e = EnsembleConfig::new(100, 0.3, 1);
        let a = SuiteConfig::new(Suite::HighT, e.clone(), Some(0.25), 10, None);
        assert_eq!(a.config_hash, SuiteConfig::new(Suite::HighT, e.clone(), Some(0.25), 10, None).config_hash);
        assert_ne!(a.config_hash, SuiteConfig::new(Suite::HighT, e.clone(), Some(0.26), 10, None).config_hash);
        assert_ne!(a.config_hash, SuiteConfig::new(Suite::LowT, e.clone(), Some(0.25), 10, None).config_hash);
        assert_ne!(a.config_hash, SuiteConfig::new(Suite::HighT, e, Some(0.25), 11, None).config_hash);
    }
}
