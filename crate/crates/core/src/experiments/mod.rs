//! Monte Carlo experiments around the fluctuation theorems.

pub mod exec;
pub mod report;
pub mod stats;
pub mod suites;
pub mod tw;

pub use exec::Executor;
pub use report::{read_records_csv, ExperimentReport, Suite, SuiteConfig, TestFunction, TrialFailure, TrialRecord, SCHEMA_VERSION};
pub use stats::{ks_test, ks_two_sample, moment_table, normal_cdf, KsResult, MomentTable};
pub use suites::*;
pub use tw::{tw1_reference_sample, tw1_reference_sample_with, TwReference, TwRoute};
