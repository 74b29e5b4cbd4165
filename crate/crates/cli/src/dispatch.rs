//! Validation, experiment dispatch and output writing.
//!
//! Everything that can be rejected is rejected before the output directory
//! is touched. Text outputs start with a `# config_hash=..` line; JSON outputs
//! carry `config_hash` as their first member.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use sparse_ssk::ensemble::sample_matrix;
use sparse_ssk::experiments::suites::{
    analyze_edge, analyze_high_t, analyze_low_t, analyze_lss, analyze_rigidity, check_high_t, check_low_t, law_for, sample_spectra,
    CROSSOVER_BAND,
};
use sparse_ssk::experiments::tw::{MIN_TW_SIZE, MIN_TW_TRIALS};
use sparse_ssk::experiments::{tw1_reference_sample, Executor, ExperimentReport, TwReference, SCHEMA_VERSION};
use sparse_ssk::free_energy::{centering, find_saddle, free_energy_contour, Regime};
use sparse_ssk::law::{measure_difference_report, write_density_csv, DeterministicLaw};
use sparse_ssk::spectra::{eigenvalues, SpectrumSample};

use crate::config::{Command, Format, RunConfig};
use crate::error::CliError;
use crate::plot::{gaussian_pdf, smoothed_density, write_curve, write_histogram, Histogram};

/// What validation established, handed on to the run.
pub struct Plan {
    law: Option<DeterministicLaw>,
    tw: Option<TwReference>,
    needs_tw: bool,
}

fn require_trials(cfg: &RunConfig) -> Result<usize, CliError> {
    let t = cfg.trials.unwrap_or(0);
    if t < 2 {
        return Err(CliError::Usage(format!("--trials must be at least 2, got {t}")));
    }
    Ok(t)
}

fn load_tw(path: &Path) -> Result<TwReference, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read --tw-reference {}: {e}", path.display())))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    if let Some(v) = value.get("schema_version") {
        if v.as_u64() != Some(SCHEMA_VERSION as u64) {
            return Err(CliError::Usage(format!("{}: unsupported schema_version {v}", path.display())));
        }
    }
    let tw: TwReference = serde_json::from_value(value).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    if tw.sample.is_empty() {
        return Err(CliError::Usage(format!("{}: empty TW sample", path.display())));
    }
    Ok(tw)
}

/// Checks every precondition of the selected subcommand without sampling.
pub fn validate(cfg: &RunConfig) -> Result<Plan, CliError> {
    let ensemble = cfg.ensemble();
    ensemble.validate()?;
    let phi = cfg.phi;
    let mut plan = Plan { law: None, tw: None, needs_tw: false };
    match cfg.command {
        Command::Spectrum => plan.law = law_for(&ensemble).ok(),
        Command::TwOracle => plan.needs_tw = true,
        Command::FreeEnergy => {
            let law = law_for(&ensemble)?;
            let beta = cfg.beta.unwrap_or(f64::NAN);
            if !(beta > 0.0 && beta.is_finite()) {
                return Err(CliError::Usage(format!("--beta must be positive, got {beta}")));
            }
            centering(&law, beta)?;
            plan.law = Some(law);
        }
        Command::Law => plan.law = Some(law_for(&ensemble)?),
        Command::HighT => {
            let law = law_for(&ensemble)?;
            let beta = cfg.beta.unwrap_or(f64::NAN);
            check_high_t(&law, beta, require_trials(cfg)?)?;
            centering(&law, beta)?;
            plan.law = Some(law);
        }
        Command::LowT => {
            let law = law_for(&ensemble)?;
            check_low_t(&law, cfg.beta.unwrap_or(f64::NAN), require_trials(cfg)?)?;
            plan.law = Some(law);
            plan.needs_tw = phi >= 1.0 / 6.0 - CROSSOVER_BAND;
        }
        Command::Lss => {
            require_trials(cfg)?;
            let f = cfg.test_function().ok_or_else(|| CliError::Usage("--test-function is missing".into()))?;
            f.validate()?;
            plan.law = Some(law_for(&ensemble)?);
        }
        Command::Rigidity => {
            require_trials(cfg)?;
            plan.law = Some(law_for(&ensemble)?);
        }
        Command::Edge => {
            require_trials(cfg)?;
            plan.law = Some(law_for(&ensemble)?);
            plan.needs_tw = phi > 1.0 / 6.0;
        }
    }
    if let Some(path) = &cfg.tw_reference {
        plan.tw = Some(load_tw(path)?);
    } else if plan.needs_tw {
        let size = cfg.tw_size.unwrap_or(0);
        let trials = cfg.tw_trials.unwrap_or(0);
        if size < MIN_TW_SIZE {
            return Err(CliError::Usage(format!("--tw-size must be at least {MIN_TW_SIZE}, got {size}")));
        }
        if trials < MIN_TW_TRIALS {
            return Err(CliError::Usage(format!("--tw-trials must be at least {MIN_TW_TRIALS}, got {trials}")));
        }
    }
    Ok(plan)
}

#[derive(Serialize)]
struct Stamped<'a, T: Serialize> {
    config_hash: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    schema_version: Option<u32>,
    #[serde(flatten)]
    body: &'a T,
}

struct Outputs<'a> {
    cfg: &'a RunConfig,
}

impl Outputs<'_> {
    fn header(&self) -> String {
        format!("config_hash={} schema_version={SCHEMA_VERSION}", self.cfg.config_hash)
    }

    fn create(&self, name: &str) -> Result<BufWriter<File>, CliError> {
        let path = self.cfg.output_path(name);
        let f = File::create(&path).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", path.display())))?;
        Ok(BufWriter::new(f))
    }

    fn json<T: Serialize>(&self, name: &str, body: &T, versioned: bool) -> Result<(), CliError> {
        if !self.cfg.wants(Format::Json) {
            return Ok(());
        }
        let stamped = Stamped {
            config_hash: &self.cfg.config_hash,
            schema_version: if versioned { Some(SCHEMA_VERSION) } else { None },
            body,
        };
        let mut w = self.create(name)?;
        serde_json::to_writer_pretty(&mut w, &stamped).map_err(|e| CliError::Runtime(e.to_string()))?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }

    fn text(&self, format: Format, name: &str, write: impl FnOnce(&mut BufWriter<File>, &str) -> std::io::Result<()>) -> Result<(), CliError> {
        if !self.cfg.wants(format) {
            return Ok(());
        }
        let mut w = self.create(name)?;
        write(&mut w, &self.header())?;
        w.flush()?;
        Ok(())
    }
}

/// Creates the output directory and echoes the resolved config. A directory
/// that cannot be written is a usage error.
pub fn prepare_output(cfg: &RunConfig) -> Result<(), CliError> {
    let dir = &cfg.output_dir;
    let unwritable = |e: std::io::Error| CliError::Usage(format!("output_dir {} is not writable: {e}", dir.display()));
    std::fs::create_dir_all(dir).map_err(unwritable)?;
    let text = serde_json::to_string_pretty(cfg).map_err(|e| CliError::Runtime(e.to_string()))?;
    std::fs::write(cfg.output_path("run_config.json"), text + "\n").map_err(unwritable)?;
    Ok(())
}

pub fn dispatch(cfg: &RunConfig, mut plan: Plan) -> Result<(), CliError> {
    let out = Outputs { cfg };
    let exec = Executor::with_threads(cfg.threads);
    if plan.needs_tw && plan.tw.is_none() {
        let tw = tw1_reference_sample(
            cfg.tw_trials.unwrap_or(0),
            cfg.tw_size.unwrap_or(0),
            cfg.tw_seed.unwrap_or(cfg.seed),
            exec,
        )?;
        write_tw(&out, &tw)?;
        plan.tw = Some(tw);
    }
    match cfg.command {
        Command::Spectrum => run_spectrum(&out, plan.law.as_ref()),
        Command::FreeEnergy => run_free_energy(&out, plan.law.as_ref().expect("validated")),
        Command::Law => run_law(&out, plan.law.as_ref().expect("validated")),
        Command::TwOracle => {
            let tw = plan.tw.as_ref().expect("sampled above");
            println!("tw-oracle: {} draws at N = {}, mean {:.4}, variance {:.4}", tw.sample.len(), tw.matrix_size, tw.mean, tw.variance);
            Ok(())
        }
        _ => run_suite(&out, &plan, exec),
    }
}

fn write_tw(out: &Outputs, tw: &TwReference) -> Result<(), CliError> {
    out.json("tw_reference.json", tw, true)?;
    out.text(Format::Csv, "tw_reference.csv", |w, h| {
        writeln!(w, "# {h} matrix_size={} m_trials={} seed={}", tw.matrix_size, tw.m_trials, tw.seed)?;
        writeln!(w, "value")?;
        for x in &tw.sample {
            writeln!(w, "{x}")?;
        }
        Ok(())
    })?;
    let hist = Histogram::new(&tw.sample, out.cfg.bins);
    out.text(Format::Plotdata, "tw_reference.hist.txt", |w, h| write_histogram(w, h, &hist, None))
}

fn sample_one(cfg: &RunConfig) -> Result<SpectrumSample, CliError> {
    let m = sample_matrix(&cfg.ensemble(), cfg.trial.unwrap_or(0))?;
    Ok(eigenvalues(&m)?)
}

#[derive(Serialize)]
struct SpectrumSummary {
    trial_index: u64,
    n: usize,
    phi: f64,
    z_statistic: f64,
    lambda_max: f64,
    lambda_min: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    edge_plus: Option<f64>,
}

fn run_spectrum(out: &Outputs, law: Option<&DeterministicLaw>) -> Result<(), CliError> {
    let cfg = out.cfg;
    let s = sample_one(cfg)?;
    let summary = SpectrumSummary {
        trial_index: s.trial_index,
        n: s.n,
        phi: cfg.phi,
        z_statistic: s.z_statistic,
        lambda_max: s.lambda_max(),
        lambda_min: s.lambda_min(),
        edge_plus: law.map(|l| l.edge_plus),
    };
    out.json("spectrum.json", &summary, true)?;
    out.text(Format::Csv, "spectrum.csv", |w, h| {
        writeln!(w, "# {h}")?;
        writeln!(w, "index,eigenvalue")?;
        for (i, x) in s.eigenvalues.iter().enumerate() {
            writeln!(w, "{i},{x}")?;
        }
        Ok(())
    })?;
    let hist = Histogram::new(&s.eigenvalues, cfg.bins);
    let rho = law.map(|l| move |x: f64| l.density(x));
    let predicted = rho.as_ref().map(|f| f as &dyn Fn(f64) -> f64);
    out.text(Format::Plotdata, "spectrum.hist.txt", |w, h| write_histogram(w, h, &hist, predicted))?;
    if let (Some(l), Some(f)) = (law, predicted) {
        let (lo, hi) = (hist.lo.min(l.edge_minus), hist.hi().max(l.edge_plus));
        out.text(Format::Plotdata, "spectrum.curve.txt", |w, h| write_curve(w, h, lo, hi, f))?;
    }
    println!("spectrum: trial {}, lambda_max {:.6}, lambda_min {:.6}", s.trial_index, summary.lambda_max, summary.lambda_min);
    Ok(())
}

#[derive(Serialize)]
struct FreeEnergySummary {
    trial_index: u64,
    beta: f64,
    regime: Regime,
    beta_c: f64,
    gamma: f64,
    g1_residual: f64,
    f_saddle: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    f_contour: Option<f64>,
    f_beta: f64,
    f0: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    hat_gamma: Option<f64>,
}

fn run_free_energy(out: &Outputs, law: &DeterministicLaw) -> Result<(), CliError> {
    let cfg = out.cfg;
    let beta = cfg.beta.expect("validated");
    let s = sample_one(cfg)?;
    let saddle = find_saddle(&s, beta)?;
    let f_contour = if cfg.contour == Some(true) { Some(free_energy_contour(&s, beta, &saddle)?) } else { None };
    let c = centering(law, beta)?;
    let summary = FreeEnergySummary {
        trial_index: s.trial_index,
        beta,
        regime: c.regime,
        beta_c: law.beta_c,
        gamma: saddle.gamma,
        g1_residual: saddle.g1_residual,
        f_saddle: saddle.f_saddle,
        f_contour,
        f_beta: c.f_beta,
        f0: c.f0,
        hat_gamma: c.hat_gamma,
    };
    out.json("free_energy.json", &summary, true)?;
    out.text(Format::Csv, "free_energy.csv", |w, h| {
        writeln!(w, "# {h}")?;
        writeln!(w, "trial,beta,gamma,f_saddle,f_contour,f_beta")?;
        let fc = f_contour.map_or(String::new(), |f| f.to_string());
        writeln!(w, "{},{beta},{},{},{fc},{}", s.trial_index, saddle.gamma, saddle.f_saddle, c.f_beta)
    })?;
    println!("free-energy: trial {}, beta {beta}, f_saddle {:.10}, F(beta) {:.10}", s.trial_index, saddle.f_saddle, c.f_beta);
    Ok(())
}

#[derive(Serialize)]
struct LawSummary {
    s_param: f64,
    edge_plus: f64,
    edge_minus: f64,
    beta_c: f64,
    s_nu: f64,
    max_stieltjes_gap: f64,
    max_weighted_density_gap: f64,
    gap_over_s: f64,
}

fn run_law(out: &Outputs, law: &DeterministicLaw) -> Result<(), CliError> {
    let report = measure_difference_report(law)?;
    let summary = LawSummary {
        s_param: law.s_param,
        edge_plus: law.edge_plus,
        edge_minus: law.edge_minus,
        beta_c: law.beta_c,
        s_nu: law.s_nu,
        max_stieltjes_gap: report.max_stieltjes_gap,
        max_weighted_density_gap: report.max_weighted_density_gap,
        gap_over_s: report.ratio,
    };
    out.json("law.json", &summary, true)?;
    out.text(Format::Csv, "law.csv", |w, h| write_density_csv(law, w, &format!("{h} s_param={}", law.s_param)))?;
    out.text(Format::Plotdata, "law.curve.txt", |w, h| write_curve(w, h, law.edge_minus, law.edge_plus, &|x| law.density(x)))?;
    println!("law: s = {:.6e}, C+ = {:.12}, beta_c = {:.12}", law.s_param, law.edge_plus, law.beta_c);
    Ok(())
}

fn run_suite(out: &Outputs, plan: &Plan, exec: Executor) -> Result<(), CliError> {
    let cfg = out.cfg;
    let law = plan.law.as_ref().expect("validated");
    let tw = plan.tw.as_ref();
    let batch = sample_spectra(&cfg.ensemble(), cfg.trials.expect("validated"), exec)?;
    let report = match cfg.command {
        Command::HighT => analyze_high_t(&batch, law, cfg.beta.expect("validated"))?,
        Command::LowT => analyze_low_t(&batch, law, cfg.beta.expect("validated"), tw)?,
        Command::Lss => analyze_lss(&batch, law, cfg.test_function().expect("validated"))?,
        Command::Rigidity => analyze_rigidity(&batch, law)?,
        Command::Edge => analyze_edge(&batch, law, tw)?,
        _ => unreachable!("not a suite"),
    };
    let name = report.config.suite.as_str();
    out.json(&format!("{name}.json"), &report, false)?;
    if cfg.wants(Format::Csv) {
        let mut w = out.create(&format!("{name}.csv"))?;
        report.write_csv(&mut w)?;
        w.flush()?;
    }
    let xs = report.standardized();
    let hist = Histogram::new(&xs, cfg.bins);
    let predicted = predicted_density(&report, tw);
    let f = predicted.as_deref();
    out.text(Format::Plotdata, &format!("{name}.hist.txt"), |w, h| write_histogram(w, h, &hist, f))?;
    if let Some(f) = f {
        out.text(Format::Plotdata, &format!("{name}.curve.txt"), |w, h| write_curve(w, h, hist.lo, hist.hi(), f))?;
    }
    let show = |x: Option<f64>| x.map_or("-".to_string(), |v| format!("{v:.6}"));
    println!(
        "{}: {} trials, sample_variance {:.6}, predicted_variance {}, ks_p {}",
        name,
        report.n_trials,
        report.sample_variance,
        show(report.predicted_variance),
        show(report.ks_p)
    );
    Ok(())
}

fn predicted_density<'a>(report: &ExperimentReport, tw: Option<&'a TwReference>) -> Option<Box<dyn Fn(f64) -> f64 + 'a>> {
    let law = report.predicted_law.as_deref()?;
    match law {
        "gaussian" => {
            let v = report.predicted_variance?;
            Some(Box::new(gaussian_pdf(report.predicted_mean.unwrap_or(0.0), v)))
        }
        "tw" | "tw+gaussian" => {
            let tw = tw?;
            // the edge suite compares with TW itself; low temperature scales it
            let (scale, extra) = match (report.metric("tw_coeff"), report.metric("t_exponent")) {
                (Some(c), Some(t)) => {
                    let n = report.config.ensemble.n as f64;
                    let g = if law == "tw+gaussian" { report.metric("gauss_variance_component").unwrap_or(0.0) } else { 0.0 };
                    (c * n.powf(t - 2.0 / 3.0), g)
                }
                _ => (1.0, 0.0),
            };
            Some(Box::new(smoothed_density(&tw.sample, scale, extra)))
        }
        _ => None,
    }
}
