//! Monte Carlo suites. Each `run_*` samples its own spectra; the `analyze_*`
//! functions take a shared [`SpectrumBatch`] so several suites can reuse one
//! set of eigensolves.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::exec::Executor;
use super::report::{ExperimentReport, Suite, SuiteConfig, TestFunction, TrialFailure, TrialRecord, SCHEMA_VERSION};
use super::stats::{ks_test, ks_two_sample, moment_table, normal_cdf, KsResult};
use super::tw::TwReference;
use crate::ensemble::{sample_matrix, EnsembleConfig};
use crate::error::{LabError, Result};
use crate::free_energy::{centering, find_saddle, DeterministicCentering};
use crate::law::{build_law, chebyshev_integral, classical_locations, ChebyshevWeight, DeterministicLaw, DEFAULT_GRID_SIZE};
use crate::numeric::{compensated_sum, correlation, mean, median, ols_slope, sample_variance, sub_seed};
use crate::spectra::{eigenvalues, SpectrumSample};

pub const HIGH_T_MARGIN: f64 = 0.05;
pub const LOW_T_MARGIN: f64 = 0.1;
pub const MAX_FAILURE_FRACTION: f64 = 0.01;
pub const RIGIDITY_EPSILON: f64 = 0.1;
/// Within this distance of phi = 1/6 the low-temperature law is the full
/// TW + Gaussian convolution.
pub const CROSSOVER_BAND: f64 = 0.02;

/// Spectra of consecutive trials `0..requested`, failures set aside.
#[derive(Debug, Clone)]
pub struct SpectrumBatch {
    pub config: EnsembleConfig,
    pub requested: usize,
    pub spectra: Vec<SpectrumSample>,
    pub wall_times: Vec<f64>,
    pub failures: Vec<TrialFailure>,
}

fn check_failures(failed: usize, total: usize) -> Result<()> {
    if failed as f64 > MAX_FAILURE_FRACTION * total as f64 {
        return Err(LabError::ExperimentAborted { failed, total });
    }
    Ok(())
}

pub fn sample_spectra(cfg: &EnsembleConfig, n_trials: usize, exec: Executor) -> Result<SpectrumBatch> {
    cfg.validate()?;
    let results = exec.map(n_trials, |t| {
        let start = Instant::now();
        let r = sample_matrix(cfg, t as u64).and_then(|m| eigenvalues(&m));
        (r, start.elapsed().as_secs_f64())
    });
    let mut batch =
        SpectrumBatch { config: cfg.clone(), requested: n_trials, spectra: Vec::new(), wall_times: Vec::new(), failures: Vec::new() };
    for (t, (r, secs)) in results.into_iter().enumerate() {
        match r {
            Ok(s) => {
                batch.spectra.push(s);
                batch.wall_times.push(secs);
            }
            // configuration problems are not trial failures
            Err(e @ (LabError::InvalidConfig(_) | LabError::OverflowGuard { .. })) => return Err(e),
            Err(e) => batch.failures.push(TrialFailure { trial_index: t as u64, message: e.to_string() }),
        }
    }
    check_failures(batch.failures.len(), n_trials)?;
    Ok(batch)
}

pub fn law_for(cfg: &EnsembleConfig) -> Result<DeterministicLaw> {
    cfg.validate()?;
    build_law(cfg.s_param(), DEFAULT_GRID_SIZE)
}

struct Summary {
    predicted_law: Option<String>,
    predicted_mean: Option<f64>,
    predicted_variance: Option<f64>,
    ks: Option<KsResult>,
    /// Predicted skewness and excess kurtosis.
    shape: [Option<f64>; 2],
    metrics: BTreeMap<String, f64>,
}

impl Summary {
    fn new() -> Self {
        Self { predicted_law: None, predicted_mean: None, predicted_variance: None, ks: None, shape: [None, None], metrics: BTreeMap::new() }
    }

    fn set(&mut self, key: &str, value: f64) {
        // JSON has no NaN, so undefined diagnostics are left out
        if value.is_finite() {
            self.metrics.insert(key.to_string(), value);
        }
    }
}

fn finish(config: SuiteConfig, records: Vec<TrialRecord>, failures: Vec<TrialFailure>, summary: Summary) -> Result<ExperimentReport> {
    check_failures(failures.len(), config.n_trials)?;
    let xs: Vec<f64> = records.iter().map(|r| r.standardized_fluctuation).collect();
    let sample_variance = sample_variance(&xs).ok_or(LabError::InsufficientTrials { got: xs.len(), need: 2 })?;
    let sample_mean = mean(&xs);
    let moments = moment_table(&xs).ok().map(|t| {
        t.with_predicted([summary.predicted_mean, summary.predicted_variance, summary.shape[0], summary.shape[1]])
    });
    Ok(ExperimentReport {
        schema_version: SCHEMA_VERSION,
        config,
        n_trials: records.len(),
        failures,
        records,
        sample_mean,
        sample_variance,
        predicted_law: summary.predicted_law,
        predicted_mean: summary.predicted_mean,
        predicted_variance: summary.predicted_variance,
        ks_statistic: summary.ks.map(|k| k.statistic),
        ks_p: summary.ks.map(|k| k.p_value),
        moments,
        metrics: summary.metrics,
    })
}

fn require_trials(n_trials: usize) -> Result<()> {
    if n_trials < 2 {
        return Err(LabError::Precondition(format!("a variance needs at least 2 trials, got {n_trials}")));
    }
    Ok(())
}

pub fn check_high_t(law: &DeterministicLaw, beta: f64, n_trials: usize) -> Result<()> {
    require_trials(n_trials)?;
    if !(beta > 0.0 && beta <= law.beta_c - HIGH_T_MARGIN) {
        return Err(LabError::Precondition(format!(
            "high temperature needs 0 < beta <= beta_c - {HIGH_T_MARGIN} = {}, got {beta}",
            law.beta_c - HIGH_T_MARGIN
        )));
    }
    Ok(())
}

pub fn check_low_t(law: &DeterministicLaw, beta: f64, n_trials: usize) -> Result<()> {
    require_trials(n_trials)?;
    if !(beta >= law.beta_c + LOW_T_MARGIN && beta.is_finite()) {
        return Err(LabError::Precondition(format!(
            "low temperature needs beta >= beta_c + {LOW_T_MARGIN} = {}, got {beta}",
            law.beta_c + LOW_T_MARGIN
        )));
    }
    Ok(())
}

/// Saddle free energies of every spectrum, standardized by `scale (f - F)`.
fn free_energy_records(
    batch: &SpectrumBatch,
    beta: f64,
    c: &DeterministicCentering,
    scale: f64,
) -> (Vec<TrialRecord>, Vec<TrialFailure>) {
    let mut records = Vec::with_capacity(batch.spectra.len());
    let mut failures = batch.failures.clone();
    for (s, &secs) in batch.spectra.iter().zip(&batch.wall_times) {
        let start = Instant::now();
        let f = find_saddle(s, beta).map(|r| r.f_saddle).and_then(|f| {
            if f.is_finite() && (f - c.f0).abs() <= 1.0 {
                Ok(f)
            } else {
                Err(LabError::Precondition(format!("f_n = {f} outside the sanity corridor around {}", c.f0)))
            }
        });
        match f {
            Ok(f) => records.push(TrialRecord {
                trial_index: s.trial_index,
                z_statistic: s.z_statistic,
                lambda_1: s.lambda_max(),
                f_n: Some(f),
                standardized_fluctuation: scale * (f - c.f_beta),
                wall_time: secs + start.elapsed().as_secs_f64(),
            }),
            Err(e) => failures.push(TrialFailure { trial_index: s.trial_index, message: e.to_string() }),
        }
    }
    failures.sort_by_key(|f| f.trial_index);
    (records, failures)
}

fn centering_metrics(summary: &mut Summary, law: &DeterministicLaw, c: &DeterministicCentering, records: &[TrialRecord]) {
    let fs: Vec<f64> = records.iter().filter_map(|r| r.f_n).collect();
    summary.set("beta_c", law.beta_c);
    summary.set("f_beta", c.f_beta);
    summary.set("f0", c.f0);
    if !fs.is_empty() {
        let m = mean(&fs);
        summary.set("mean_f_n", m);
        summary.set("location_gap", (m - c.f_beta).abs());
    }
    if let Some(g) = c.hat_gamma {
        summary.set("hat_gamma", g);
    }
}

/// High temperature: `N^{phi+1/2} (F_N - F(beta))` against `N(0, 2 sigma^2 beta^4)`.
///
/// `ks_p` tests the shape with the empirical mean and predicted variance;
/// `ks_p_fitted` uses the fitted variance instead.
pub fn analyze_high_t(batch: &SpectrumBatch, law: &DeterministicLaw, beta: f64) -> Result<ExperimentReport> {
    let cfg = &batch.config;
    check_high_t(law, beta, batch.requested)?;
    let c = centering(law, beta)?;
    let n = cfg.n as f64;
    let (records, failures) = free_energy_records(batch, beta, &c, n.powf(cfg.phi + 0.5));
    let xs: Vec<f64> = records.iter().map(|r| r.standardized_fluctuation).collect();

    let sigma2 = cfg.sigma_limit().powi(2);
    let predicted = 2.0 * sigma2 * beta.powi(4);
    let mut summary = Summary::new();
    summary.predicted_law = Some("gaussian".into());
    summary.predicted_mean = Some(0.0);
    summary.predicted_variance = Some(predicted);
    summary.shape = [Some(0.0), Some(0.0)];
    centering_metrics(&mut summary, law, &c, &records);
    summary.set("location_bound", 10.0 * n.powf(-2.0 * cfg.phi));
    if let Some(v) = sample_variance(&xs) {
        let m = mean(&xs);
        summary.set("variance_ratio", v / predicted);
        summary.ks = ks_test(&xs, normal_cdf(m, predicted)).ok();
        if v > 0.0 {
            if let Ok(k) = ks_test(&xs, normal_cdf(m, v)) {
                summary.set("ks_statistic_fitted", k.statistic);
                summary.set("ks_p_fitted", k.p_value);
            }
        }
    }
    let config = SuiteConfig::new(Suite::HighT, cfg.clone(), Some(beta), batch.requested, None);
    finish(config, records, failures, summary)
}

/// Gaussian draws with the given variance, reproducible from `seed`.
fn gaussian_draws(seed: u64, count: usize, variance: f64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, u64::MAX));
    let sd = variance.sqrt();
    (0..count).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Low temperature: `N^t (F_N - F(beta))`, `t = min(2/3, phi + 1/2)`.
///
/// The predicted law is `c_tw N^{t-2/3} TW_1 + c_g N^{t-phi-1/2} N(0, 2 sigma^2)`
/// with `c_tw = beta - 1/2` and `c_g = beta - beta_c + 1/4`; below the
/// crossover only the Gaussian term is kept, above it only the TW term.
/// Distributional tests shift the sample to the predicted mean; the mean
/// itself is compared separately through `mean_gap` and `mean_se`.
pub fn analyze_low_t(
    batch: &SpectrumBatch,
    law: &DeterministicLaw,
    beta: f64,
    tw: Option<&TwReference>,
) -> Result<ExperimentReport> {
    let cfg = &batch.config;
    check_low_t(law, beta, batch.requested)?;
    let c = centering(law, beta)?;
    let n = cfg.n as f64;
    let phi = cfg.phi;
    let t = (2.0 / 3.0f64).min(phi + 0.5);
    let (records, failures) = free_energy_records(batch, beta, &c, n.powf(t));
    let xs: Vec<f64> = records.iter().map(|r| r.standardized_fluctuation).collect();

    let sigma2 = cfg.sigma_limit().powi(2);
    let c_tw = beta - 0.5;
    let c_g = beta - law.beta_c + 0.25;
    let tw_scale = c_tw * n.powf(t - 2.0 / 3.0);
    let g_var = (c_g * n.powf(t - phi - 0.5)).powi(2) * 2.0 * sigma2;

    let mut summary = Summary::new();
    centering_metrics(&mut summary, law, &c, &records);
    summary.set("t_exponent", t);
    summary.set("tw_coeff", c_tw);
    summary.set("tw_coeff_finite_n", beta - law.beta_c);
    summary.set("gauss_coeff", beta - 0.25);
    summary.set("gauss_coeff_finite_n", c_g);
    summary.set("gauss_variance_component", g_var);
    summary.set(
        "gauss_variance_component_theorem",
        ((beta - 0.25) * n.powf(t - phi - 0.5)).powi(2) * 2.0 * sigma2,
    );
    if let Some(tw) = tw {
        summary.set("tw_mean_component", tw_scale * tw.mean);
        summary.set("tw_variance_component", tw_scale * tw_scale * tw.variance);
        summary.set("predicted_variance_convolution", tw_scale * tw_scale * tw.variance + g_var);
    }

    let m = mean(&xs);
    let v = sample_variance(&xs);
    let need_tw = || {
        tw.ok_or_else(|| LabError::Precondition(format!("phi = {phi} needs a TW reference sample for the low-temperature law")))
    };
    if phi < 1.0 / 6.0 - CROSSOVER_BAND {
        summary.predicted_law = Some("gaussian".into());
        summary.predicted_mean = Some(0.0);
        summary.predicted_variance = Some(g_var);
        summary.shape = [Some(0.0), Some(0.0)];
        summary.ks = ks_test(&xs, normal_cdf(m, g_var)).ok();
        if let Some(v) = v {
            summary.set("variance_ratio", v / g_var);
        }
    } else {
        let tw = need_tw()?;
        let mixture = phi <= 1.0 / 6.0 + CROSSOVER_BAND;
        let reference: Vec<f64> = if mixture {
            let g = gaussian_draws(cfg.seed, tw.sample.len(), g_var);
            tw.sample.iter().zip(g).map(|(x, y)| tw_scale * x + y).collect()
        } else {
            tw.sample.iter().map(|x| tw_scale * x).collect()
        };
        let pm = tw_scale * tw.mean;
        let pv = tw_scale * tw_scale * tw.variance + if mixture { g_var } else { 0.0 };
        summary.predicted_law = Some(if mixture { "tw+gaussian" } else { "tw" }.into());
        summary.predicted_mean = Some(pm);
        summary.predicted_variance = Some(pv);
        if let Ok(ref_moments) = moment_table(&reference) {
            summary.shape = [Some(ref_moments.skewness.value), Some(ref_moments.excess_kurtosis.value)];
        }
        let shifted: Vec<f64> = xs.iter().map(|x| x - m + pm).collect();
        summary.ks = ks_two_sample(&shifted, &reference).ok();
        if let Some(v) = v {
            let se = (v / xs.len() as f64 + tw_scale * tw_scale * tw.variance / tw.sample.len() as f64).sqrt();
            summary.set("variance_ratio", v / pv);
            summary.set("mean_gap", m - pm);
            summary.set("mean_se", se);
        }
    }
    let config = SuiteConfig::new(Suite::LowT, cfg.clone(), Some(beta), batch.requested, None);
    finish(config, records, failures, summary)
}

/// `V[f] = sigma^2 / (2 pi^2) (integral f(x) (2 - x^2) / sqrt(4 - x^2) dx)^2`.
pub fn lss_variance(f: TestFunction, sigma: f64) -> Result<f64> {
    let k = chebyshev_integral(|x| f.eval(x), ChebyshevWeight::CltKernel)?;
    Ok(sigma * sigma / (2.0 * std::f64::consts::PI.powi(2)) * k * k)
}

/// Linear statistic `(q / sqrt N) sum f(lambda_i)`, centered by its trial mean.
pub fn analyze_lss(batch: &SpectrumBatch, law: &DeterministicLaw, f: TestFunction) -> Result<ExperimentReport> {
    f.validate()?;
    let cfg = &batch.config;
    require_trials(batch.requested)?;
    let n = cfg.n as f64;
    let q = cfg.q();
    let rn = n.sqrt();

    let mut raw = Vec::with_capacity(batch.spectra.len());
    let mut kept = Vec::with_capacity(batch.spectra.len());
    let mut failures = batch.failures.clone();
    for s in &batch.spectra {
        let sum = compensated_sum(s.eigenvalues.iter().map(|&x| f.eval(x)));
        if sum.is_finite() {
            raw.push(q / rn * sum);
            kept.push(s);
        } else {
            failures.push(TrialFailure {
                trial_index: s.trial_index,
                message: format!("test function undefined on the spectrum (lambda_1 = {})", s.lambda_max()),
            });
        }
    }
    failures.sort_by_key(|f| f.trial_index);
    let center = if raw.is_empty() { 0.0 } else { mean(&raw) };
    let records: Vec<TrialRecord> = kept
        .iter()
        .zip(&raw)
        .zip(&batch.wall_times)
        .map(|((s, &x), &secs)| TrialRecord {
            trial_index: s.trial_index,
            z_statistic: s.z_statistic,
            lambda_1: s.lambda_max(),
            f_n: None,
            standardized_fluctuation: x - center,
            wall_time: secs,
        })
        .collect();

    let v = lss_variance(f, cfg.sigma_limit())?;
    let mut summary = Summary::new();
    summary.predicted_law = Some("gaussian".into());
    summary.predicted_mean = Some(0.0);
    summary.predicted_variance = Some(v);
    summary.shape = [Some(0.0), Some(0.0)];
    let xs: Vec<f64> = records.iter().map(|r| r.standardized_fluctuation).collect();
    summary.ks = ks_test(&xs, normal_cdf(0.0, v)).ok();
    if let Some(sv) = sample_variance(&xs) {
        summary.set("variance_ratio", sv / v);
    }

    // first-order response to Z: (1/N) sum f'(gamma_sc,k) gamma_sc,k / 2
    let loc = classical_locations(law, cfg.n)?;
    let edge_sum = compensated_sum(loc.gamma_sc.iter().map(|&g| f.derivative(g) * g / 2.0)) / n;
    let predicted: Vec<f64> = records.iter().map(|r| q * rn * r.z_statistic * edge_sum).collect();
    summary.set("z_sum", edge_sum);
    if xs.len() >= 2 {
        summary.set("corr_with_z_term", correlation(&xs, &predicted));
    }

    let per_site: Vec<f64> = raw.iter().map(|x| x / (q * rn)).collect();
    if !per_site.is_empty() {
        let integral = law.integrate(|x| f.eval(x));
        summary.set("mean_per_site", mean(&per_site));
        summary.set("law_integral", integral);
        summary.set("mean_gap", (mean(&per_site) - integral).abs());
        summary.set("mean_bound", 5.0 * n.powf(-1.0 + 0.1));
    }
    if f == TestFunction::Square {
        // (q / sqrt N) sum lambda^2 = q sqrt N (1 + Z) exactly
        let err = raw
            .iter()
            .zip(&records)
            .map(|(x, r)| (x - q * rn * (1.0 + r.z_statistic)).abs())
            .fold(0.0, f64::max);
        summary.metrics.insert("energy_identity_max_error".into(), err);
    }
    let config = SuiteConfig::new(Suite::Lss, cfg.clone(), None, batch.requested, Some(f));
    finish(config, records, failures, summary)
}

/// `N^eps (k^-1/3 N^-2/3 + N^-(1/2 + 3 phi))` with `k` the distance to the nearer edge.
pub fn rigidity_bound(n: usize, phi: f64, k: usize) -> f64 {
    let nf = n as f64;
    let k_hat = k.min(n + 1 - k) as f64;
    nf.powf(RIGIDITY_EPSILON) * (k_hat.powf(-1.0 / 3.0) * nf.powf(-2.0 / 3.0) + nf.powf(-(0.5 + 3.0 * phi)))
}

/// Rigidity of the Z-corrected eigenvalues around the classical locations.
///
/// Each record's standardized value is that trial's worst ratio of corrected
/// residual to bound.
pub fn analyze_rigidity(batch: &SpectrumBatch, law: &DeterministicLaw) -> Result<ExperimentReport> {
    let cfg = &batch.config;
    require_trials(batch.requested)?;
    let n = cfg.n;
    let loc = classical_locations(law, n)?;
    let bounds: Vec<f64> = (1..=n).map(|k| rigidity_bound(n, cfg.phi, k)).collect();
    let mid = n / 2;
    let window = (n / 20).max(1);

    let mut ratios_vs_uncorrected = Vec::with_capacity(batch.spectra.len() * n);
    let mut corrected_all = Vec::with_capacity(batch.spectra.len() * n);
    let mut uncorrected_all = Vec::with_capacity(batch.spectra.len() * n);
    let mut violations = 0usize;
    let mut worst = 0.0f64;
    let mut bulk = Vec::with_capacity(batch.spectra.len());
    let mut records = Vec::with_capacity(batch.spectra.len());
    for (s, &secs) in batch.spectra.iter().zip(&batch.wall_times) {
        let mut trial_worst = 0.0f64;
        for k in 0..n {
            let unc = (s.eigenvalues[k] - loc.gamma[k]).abs();
            let cor = (s.eigenvalues[k] - loc.gamma[k] - 0.5 * loc.gamma_sc[k] * s.z_statistic).abs();
            let ratio = cor / bounds[k];
            if ratio > 1.0 {
                violations += 1;
            }
            trial_worst = trial_worst.max(ratio);
            if unc > 0.0 {
                ratios_vs_uncorrected.push(cor / unc);
            }
            corrected_all.push(cor);
            uncorrected_all.push(unc);
        }
        worst = worst.max(trial_worst);
        let lo = mid.saturating_sub(window);
        let hi = (mid + window).min(n);
        let ms = (lo..hi)
            .map(|k| (s.eigenvalues[k] - loc.gamma[k] - 0.5 * loc.gamma_sc[k] * s.z_statistic).powi(2))
            .sum::<f64>()
            / (hi - lo) as f64;
        bulk.push(ms.sqrt());
        records.push(TrialRecord {
            trial_index: s.trial_index,
            z_statistic: s.z_statistic,
            lambda_1: s.lambda_max(),
            f_n: None,
            standardized_fluctuation: trial_worst,
            wall_time: secs,
        });
    }
    let pairs = corrected_all.len();
    let mut summary = Summary::new();
    summary.set("epsilon", RIGIDITY_EPSILON);
    summary.set("pairs", pairs as f64);
    summary.set("violations", violations as f64);
    if pairs > 0 {
        summary.set("violation_fraction", violations as f64 / pairs as f64);
        summary.set("worst_ratio", worst);
        summary.set("median_corrected", median(&corrected_all));
        summary.set("median_uncorrected", median(&uncorrected_all));
        summary.set("median_ratio_corrected_to_uncorrected", median(&ratios_vs_uncorrected));
        summary.set("bulk_rms_residual", mean(&bulk));
        summary.set("bulk_bound", bounds[mid]);
    }
    let config = SuiteConfig::new(Suite::Rigidity, cfg.clone(), None, batch.requested, None);
    finish(config, records, batch.failures.clone(), summary)
}

/// Largest eigenvalue against the edge: `r = lambda_1 - C_+ - Z`.
///
/// Above phi = 1/6 the standardized value is `N^{2/3} r`, compared with the TW
/// reference; below it is `N^{phi+1/2} (lambda_1 - C_+)`, compared with
/// `N(0, 2 sigma^2)`.
pub fn analyze_edge(batch: &SpectrumBatch, law: &DeterministicLaw, tw: Option<&TwReference>) -> Result<ExperimentReport> {
    let cfg = &batch.config;
    require_trials(batch.requested)?;
    let n = cfg.n as f64;
    let c = law.edge_plus;
    let tw_side = cfg.phi > 1.0 / 6.0;
    let tw = if tw_side {
        Some(tw.ok_or_else(|| LabError::Precondition(format!("phi = {} needs a TW reference sample", cfg.phi)))?)
    } else {
        tw
    };
    let gauss_scale = n.powf(cfg.phi + 0.5);
    let edge_scale = n.powf(2.0 / 3.0);

    let mut rs = Vec::with_capacity(batch.spectra.len());
    let mut zs = Vec::with_capacity(batch.spectra.len());
    let mut records = Vec::with_capacity(batch.spectra.len());
    for (s, &secs) in batch.spectra.iter().zip(&batch.wall_times) {
        let l1 = s.lambda_max();
        let r = edge_scale * (l1 - c - s.z_statistic);
        rs.push(r);
        zs.push(gauss_scale * s.z_statistic);
        records.push(TrialRecord {
            trial_index: s.trial_index,
            z_statistic: s.z_statistic,
            lambda_1: l1,
            f_n: None,
            standardized_fluctuation: if tw_side { r } else { gauss_scale * (l1 - c) },
            wall_time: secs,
        });
    }
    let xs: Vec<f64> = records.iter().map(|r| r.standardized_fluctuation).collect();
    let mut summary = Summary::new();
    summary.set("edge_plus", c);
    if rs.len() >= 2 {
        summary.set("corr_r_z", correlation(&rs, &zs));
        summary.set("mean_r_scaled", mean(&rs));
    }
    if let Some(tw) = tw {
        summary.set("tw_mean", tw.mean);
        summary.set("tw_variance", tw.variance);
        if !rs.is_empty() {
            summary.set("mean_gap", mean(&rs) - tw.mean);
        }
    }
    if tw_side {
        let tw = tw.expect("checked above");
        summary.predicted_law = Some("tw".into());
        summary.predicted_mean = Some(tw.mean);
        summary.predicted_variance = Some(tw.variance);
        if let Ok(t) = tw.moments() {
            summary.shape = [Some(t.skewness.value), Some(t.excess_kurtosis.value)];
        }
        summary.ks = ks_two_sample(&xs, &tw.sample).ok();
    } else {
        let v = 2.0 * cfg.sigma_limit().powi(2);
        summary.predicted_law = Some("gaussian".into());
        summary.predicted_mean = Some(0.0);
        summary.predicted_variance = Some(v);
        summary.shape = [Some(0.0), Some(0.0)];
        summary.ks = ks_test(&xs, normal_cdf(0.0, v)).ok();
        if xs.len() >= 2 {
            if let Ok(k) = ks_test(&xs, normal_cdf(mean(&xs), v)) {
                summary.set("ks_p_centered", k.p_value);
            }
        }
    }
    let config = SuiteConfig::new(Suite::Edge, cfg.clone(), None, batch.requested, None);
    finish(config, records, batch.failures.clone(), summary)
}

pub fn run_high_t(cfg: &EnsembleConfig, beta: f64, n_trials: usize, exec: Executor) -> Result<ExperimentReport> {
    let law = law_for(cfg)?;
    check_high_t(&law, beta, n_trials)?;
    centering(&law, beta)?;
    analyze_high_t(&sample_spectra(cfg, n_trials, exec)?, &law, beta)
}

pub fn run_low_t(
    cfg: &EnsembleConfig,
    beta: f64,
    n_trials: usize,
    tw: Option<&TwReference>,
    exec: Executor,
) -> Result<ExperimentReport> {
    let law = law_for(cfg)?;
    check_low_t(&law, beta, n_trials)?;
    if cfg.phi >= 1.0 / 6.0 - CROSSOVER_BAND && tw.is_none() {
        return Err(LabError::Precondition(format!("phi = {} needs a TW reference sample", cfg.phi)));
    }
    analyze_low_t(&sample_spectra(cfg, n_trials, exec)?, &law, beta, tw)
}

pub fn run_lss(cfg: &EnsembleConfig, f: TestFunction, n_trials: usize, exec: Executor) -> Result<ExperimentReport> {
    f.validate()?;
    require_trials(n_trials)?;
    let law = law_for(cfg)?;
    analyze_lss(&sample_spectra(cfg, n_trials, exec)?, &law, f)
}

pub fn run_rigidity(cfg: &EnsembleConfig, n_trials: usize, exec: Executor) -> Result<ExperimentReport> {
    require_trials(n_trials)?;
    let law = law_for(cfg)?;
    analyze_rigidity(&sample_spectra(cfg, n_trials, exec)?, &law)
}

pub fn run_edge(cfg: &EnsembleConfig, n_trials: usize, tw: Option<&TwReference>, exec: Executor) -> Result<ExperimentReport> {
    require_trials(n_trials)?;
    if cfg.phi > 1.0 / 6.0 && tw.is_none() {
        return Err(LabError::Precondition(format!("phi = {} needs a TW reference sample", cfg.phi)));
    }
    let law = law_for(cfg)?;
    analyze_edge(&sample_spectra(cfg, n_trials, exec)?, &law, tw)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BulkScaling {
    pub ns: Vec<usize>,
    /// Mean over trials of the RMS corrected residual on `|k - N/2| < N/20`.
    pub residuals: Vec<f64>,
    pub fitted_slope: f64,
    /// Log-log slope of the bound at `k = N/2` over the same sizes.
    pub predicted_slope: f64,
}

pub fn rigidity_bulk_scaling(ns: &[usize], phi: f64, seed: u64, n_trials: usize, exec: Executor) -> Result<BulkScaling> {
    if ns.len() < 2 {
        return Err(LabError::Precondition("a slope needs at least two sizes".into()));
    }
    let mut residuals = Vec::with_capacity(ns.len());
    for &n in ns {
        let report = run_rigidity(&EnsembleConfig::new(n, phi, seed), n_trials, exec)?;
        residuals.push(report.metric("bulk_rms_residual").ok_or(LabError::DegenerateSample)?);
    }
    let logn: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let logr: Vec<f64> = residuals.iter().map(|r| r.ln()).collect();
    let logb: Vec<f64> = ns.iter().map(|&n| rigidity_bound(n, phi, n / 2).ln()).collect();
    Ok(BulkScaling { ns: ns.to_vec(), residuals, fitted_slope: ols_slope(&logn, &logr), predicted_slope: ols_slope(&logn, &logb) })
}
