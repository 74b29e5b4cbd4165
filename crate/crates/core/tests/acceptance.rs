//! Acceptance run: one PASS/FAIL line per criterion, followed by the checks
//! and diagnostics behind it.
//!
//! Monte Carlo batches at N = 2000 are sampled once and shared between
//! criteria. The process exits 0 after printing the summary so that the rest
//! of `cargo test` still runs; set `ACCEPTANCE_STRICT=1` to turn any failed
//! criterion into a non-zero exit.

use std::f64::consts::PI;
use std::time::Instant;

use sparse_ssk::ensemble::{sample_matrix, EnsembleConfig};
use sparse_ssk::experiments::suites::{
    analyze_edge, analyze_high_t, analyze_low_t, analyze_lss, analyze_rigidity, law_for, rigidity_bound, rigidity_bulk_scaling,
    run_high_t, sample_spectra, lss_variance, SpectrumBatch,
};
use sparse_ssk::experiments::{tw1_reference_sample, Executor, ExperimentReport, TestFunction, TwReference};
use sparse_ssk::free_energy::{centering, find_saddle, free_energy_contour, limiting_free_energy, limiting_free_energy_branches};
use sparse_ssk::law::{build_law, chebyshev_integral, classical_locations, ChebyshevWeight, DeterministicLaw, DEFAULT_GRID_SIZE};
use sparse_ssk::spectra::eigenvalues;
use sparse_ssk::LabError;

const N: usize = 2000;
const MC_TRIALS: usize = 400;
const RIGIDITY_TRIALS: usize = 100;
const TW_DRAWS: usize = 20_000;
const TW_SEED: u64 = 7;

struct Criterion {
    id: u8,
    title: &'static str,
    checks: Vec<(bool, String)>,
    notes: Vec<String>,
}

impl Criterion {
    fn new(id: u8, title: &'static str) -> Self {
        Self { id, title, checks: Vec::new(), notes: Vec::new() }
    }

    fn check(&mut self, ok: bool, text: impl Into<String>) {
        self.checks.push((ok, text.into()));
    }

    fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    fn error(&mut self, what: &str, e: LabError) {
        self.check(false, format!("{what}: {e}"));
    }

    fn passed(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.0)
    }

    fn print(&self) -> bool {
        let ok = self.passed();
        println!("criterion {} {}: {}", self.id, if ok { "PASS" } else { "FAIL" }, self.title);
        for (ok, text) in &self.checks {
            println!("    {} {text}", if *ok { "ok  " } else { "FAIL" });
        }
        for n in &self.notes {
            println!("    note {n}");
        }
        ok
    }
}

fn metric(r: &ExperimentReport, key: &str) -> f64 {
    r.metric(key).unwrap_or(f64::NAN)
}

fn in_band(x: f64, lo: f64, hi: f64) -> bool {
    x >= lo && x <= hi
}

fn timed<T>(label: &str, f: impl FnOnce() -> T) -> T {
    let start = Instant::now();
    let out = f();
    eprintln!("[acceptance] {label}: {:.1} s", start.elapsed().as_secs_f64());
    out
}

/// Chebyshev coefficients of `f(2 cos t) = c_0 + sum_k c_k cos(k t)` by the
/// trapezoid rule on the circle, which is spectrally accurate for smooth
/// periodic integrands.
fn cosine_coefficients(f: impl Fn(f64) -> f64, kmax: usize) -> Vec<f64> {
    let m = 4096;
    let vals: Vec<f64> = (0..m).map(|j| f(2.0 * (2.0 * PI * (j as f64 + 0.5) / m as f64).cos())).collect();
    (0..=kmax)
        .map(|k| {
            let s: f64 = vals.iter().enumerate().map(|(j, v)| v * (k as f64 * 2.0 * PI * (j as f64 + 0.5) / m as f64).cos()).sum();
            if k == 0 { s / m as f64 } else { 2.0 * s / m as f64 }
        })
        .collect()
}

/// Finite-N variance of `(q / sqrt N) sum f(lambda_i)` relative to `V[f]`.
///
/// The trace term contributes `(1 - 3p) V[f]` (exact variance of Z for this
/// ensemble), and the GOE-type term `p * (1/2 sum k c_k^2 - c_1^2 / 4)`
/// (diagonal variance 1/N instead of 2/N) is no longer negligible at
/// `p = N^(2 phi - 1)`.
fn finite_n_lss_ratio(f: impl Fn(f64) -> f64, p: f64) -> f64 {
    let c = cosine_coefficients(f, 80);
    let goe: f64 = 0.5 * c.iter().enumerate().skip(1).map(|(k, ck)| k as f64 * ck * ck).sum::<f64>() - 0.25 * c[1] * c[1];
    let v = c[2] * c[2] / 2.0;
    (1.0 - 3.0 * p) + p * goe / v
}

fn criterion_1() -> Criterion {
    let mut c = Criterion::new(1, "closed-form pins");
    let (hi, lo) = limiting_free_energy_branches(0.5);
    c.check(
        (hi - 0.25).abs() <= 1e-14 && (lo - 0.25).abs() <= 1e-14 && (limiting_free_energy(0.5) - 0.25).abs() <= 1e-14,
        format!("1a F0(1/2) from both branches: {hi:.17}, {lo:.17} (tol 1e-14)"),
    );

    for beta in [0.1f64, 0.25, 0.45] {
        match chebyshev_integral(|x| (2.0 * beta + 0.5 / beta - x).ln(), ChebyshevWeight::CltKernel) {
            Ok(v) => {
                let want = 4.0 * PI * beta * beta;
                c.check((v - want).abs() <= 1e-8, format!("1b beta = {beta}: {v:.12} vs 4 pi beta^2 = {want:.12}"));
            }
            Err(e) => c.error("1b", e),
        }
    }

    // integral of log(2 + a - x) against the semicircle, closed form
    let closed = |a: f64| {
        let r = (a * (a + 4.0)).sqrt();
        0.5 + a + a * a / 4.0 - (a + 2.0) * r / 4.0 + (1.0 + (a + r) / 2.0).ln()
    };
    for a in [0.01, 0.1, 1.0] {
        match chebyshev_integral(|x| (2.0 + a - x).ln(), ChebyshevWeight::Semicircle) {
            Ok(q) => c.check((q - closed(a)).abs() <= 1e-8, format!("1c a = {a}: quadrature {q:.12} vs closed form {:.12}", closed(a))),
            Err(e) => c.error("1c", e),
        }
    }
    c.check(closed(0.0) == 0.5, format!("1c a = 0 limit of the closed form: {}", closed(0.0)));
    if let Ok(q0) = chebyshev_integral(|x| (2.0 - x).ln(), ChebyshevWeight::Semicircle) {
        c.note(format!("quadrature at a = 0 (log-singular edge): {q0:.10}"));
    }

    match build_law(0.0, DEFAULT_GRID_SIZE) {
        Ok(law) => {
            c.check((law.edge_plus - 2.0).abs() <= 1e-10, format!("1d s = 0 edge C+ = {:.14}", law.edge_plus));
            c.check((law.beta_c - 0.5).abs() <= 1e-10, format!("1d s = 0 beta_c = {:.14}", law.beta_c));
            let mut worst = 0.0f64;
            let betas = [0.1, 0.25, 0.4, 0.75, 1.0, 2.0];
            for beta in betas {
                match centering(&law, beta) {
                    Ok(cent) => worst = worst.max((cent.f_beta - limiting_free_energy(beta)).abs()),
                    Err(e) => c.error("1d centering", e),
                }
            }
            c.check(worst <= 1e-8, format!("1d centering vs F0 at beta in {betas:?}: max gap {worst:.2e} (tol 1e-8)"));
        }
        Err(e) => c.error("1d build_law(0)", e),
    }
    c
}

fn criterion_2() -> Criterion {
    let mut c = Criterion::new(2, "saddle vs contour free energy");
    let (n, beta) = (200, 0.2);
    let cfg = EnsembleConfig::new(n, 0.35, 2002);
    let tol = 0.05 / n as f64;
    let mut worst = 0.0f64;
    let mut done = 0;
    for t in 0..20 {
        let r = sample_matrix(&cfg, t).and_then(|m| eigenvalues(&m)).and_then(|s| {
            let saddle = find_saddle(&s, beta)?;
            let contour = free_energy_contour(&s, beta, &saddle)?;
            Ok((saddle.f_saddle - contour).abs())
        });
        match r {
            Ok(gap) => {
                worst = worst.max(gap);
                done += 1;
            }
            Err(e) => c.error(&format!("trial {t}"), e),
        }
    }
    c.check(done == 20 && worst <= tol, format!("N = {n}, beta = {beta}, {done}/20 trials: max |f_saddle - f_contour| = {worst:.3e} (tol {tol:.1e})"));
    c
}

struct Shared {
    law: DeterministicLaw,
    batch: SpectrumBatch,
}

fn shared(phi: f64, seed: u64, trials: usize, exec: Executor) -> Result<Shared, LabError> {
    let cfg = EnsembleConfig::new(N, phi, seed);
    let law = law_for(&cfg)?;
    let batch = timed(&format!("N = {N}, phi = {phi}, {trials} trials"), || sample_spectra(&cfg, trials, exec))?;
    Ok(Shared { law, batch })
}

fn criterion_3(s: &Result<Shared, LabError>) -> Criterion {
    let mut c = Criterion::new(3, "high-temperature CLT (N = 2000, phi = 0.35, beta = 0.25)");
    let s = match s {
        Ok(s) => s,
        Err(e) => {
            c.error("sampling", e.clone());
            return c;
        }
    };
    let beta = 0.25;
    match analyze_high_t(&s.batch, &s.law, beta) {
        Ok(r) => {
            let ratio = metric(&r, "variance_ratio");
            c.check(
                in_band(ratio, 0.7, 1.3),
                format!(
                    "variance {:.5} / predicted 2 sigma^2 beta^4 = {:.5}: ratio {ratio:.3} (band [0.7, 1.3])",
                    r.sample_variance,
                    r.predicted_variance.unwrap_or(f64::NAN)
                ),
            );
            let p_fit = metric(&r, "ks_p_fitted");
            c.check(p_fit >= 0.01, format!("KS vs Gaussian with fitted variance: p = {p_fit:.4} (need >= 0.01)"));
            let gap = metric(&r, "location_gap");
            let bound = 10.0 * (N as f64).powf(-2.0 * 0.35);
            c.check(gap <= bound, format!("|mean F_N - F(beta)| = {gap:.3e} (bound 10 N^(-2 phi) = {bound:.3e})"));
            c.note(format!("KS vs Gaussian with the predicted variance: p = {:.2e}", r.ks_p.unwrap_or(f64::NAN)));
            c.note(format!("completed trials {}, failures {}", r.n_trials, r.failures.len()));
            let p = s.batch.config.sparsity_probability();
            let gamma = metric(&r, "hat_gamma");
            let oracle = finite_n_lss_ratio(|x| (gamma - x).ln(), p);
            c.note(format!(
                "finite-N oracle: the GOE-type term of the log statistic at p = {p:.4} predicts ratio {oracle:.3}; sample/oracle = {:.3}",
                ratio / oracle
            ));
        }
        Err(e) => c.error("analyze_high_t", e),
    }
    c
}

fn criterion_4(s: &Result<Shared, LabError>) -> Criterion {
    let mut c = Criterion::new(4, "linear statistics CLT (N = 2000, phi = 0.35)");
    let s = match s {
        Ok(s) => s,
        Err(e) => {
            c.error("sampling", e.clone());
            return c;
        }
    };
    let sigma = s.batch.config.sigma_limit();
    match analyze_lss(&s.batch, &s.law, TestFunction::Square) {
        Ok(r) => {
            let err = metric(&r, "energy_identity_max_error");
            c.check(err <= 1e-10, format!("x^2: max |statistic - q sqrt(N) (1 + Z)| = {err:.2e} (tol 1e-10)"));
            let v = lss_variance(TestFunction::Square, sigma).unwrap_or(f64::NAN);
            c.check((v - 2.0 * sigma * sigma).abs() <= 1e-10, format!("x^2: predicted V = {v:.12} vs 2 sigma^2 = {:.12}", 2.0 * sigma * sigma));
            c.note(format!("x^2 variance ratio {:.3}", metric(&r, "variance_ratio")));
        }
        Err(e) => c.error("analyze_lss(square)", e),
    }
    let f = TestFunction::LogShifted { a: 0.5 };
    match analyze_lss(&s.batch, &s.law, f) {
        Ok(r) => {
            let ratio = metric(&r, "variance_ratio");
            c.check(
                in_band(ratio, 0.7, 1.3),
                format!(
                    "log(2.5 - x): variance {:.5} / V = {:.5}: ratio {ratio:.3} (band [0.7, 1.3])",
                    r.sample_variance,
                    r.predicted_variance.unwrap_or(f64::NAN)
                ),
            );
            c.note(format!("log(2.5 - x): correlation with the first-order Z term {:.4}", metric(&r, "corr_with_z_term")));
            let p = s.batch.config.sparsity_probability();
            let oracle = finite_n_lss_ratio(|x| (2.5 - x).ln(), p);
            c.note(format!("finite-N oracle ratio for log(2.5 - x) at p = {p:.4}: {oracle:.3}; sample/oracle = {:.3}", ratio / oracle));
            c.note(format!("finite-N oracle ratio for x^2: {:.4}", finite_n_lss_ratio(|x| x * x, p)));
        }
        Err(e) => c.error("analyze_lss(log)", e),
    }
    c
}

/// Per-pair violation fractions at several multiples of the bound.
fn violation_fractions(batch: &SpectrumBatch, law: &DeterministicLaw, factors: &[f64]) -> Result<Vec<f64>, LabError> {
    let n = batch.config.n;
    let loc = classical_locations(law, n)?;
    let mut counts = vec![0usize; factors.len()];
    let mut pairs = 0usize;
    for s in &batch.spectra {
        for k in 0..n {
            let res = (s.eigenvalues[k] - loc.gamma[k] - 0.5 * loc.gamma_sc[k] * s.z_statistic).abs();
            let b = rigidity_bound(n, batch.config.phi, k + 1);
            for (cnt, f) in counts.iter_mut().zip(factors) {
                if res > f * b {
                    *cnt += 1;
                }
            }
            pairs += 1;
        }
    }
    Ok(counts.iter().map(|&c| c as f64 / pairs.max(1) as f64).collect())
}

fn criterion_5(exec: Executor) -> Criterion {
    let mut c = Criterion::new(5, "rigidity audit (N = 2000, phi = 0.25 and 0.2, 100 trials)");
    match shared(0.25, 3005, RIGIDITY_TRIALS, exec).and_then(|s| Ok((analyze_rigidity(&s.batch, &s.law)?, s))) {
        Ok((r, s)) => {
            let frac = metric(&r, "violation_fraction");
            c.check(
                frac <= 1e-3,
                format!(
                    "phi = 0.25: {} of {} (trial, k) pairs exceed N^0.1 x bound, fraction {frac:.4} (need <= 0.001)",
                    metric(&r, "violations"),
                    metric(&r, "pairs")
                ),
            );
            c.note(format!(
                "bulk RMS corrected residual {:.3e} vs bound at k = N/2 {:.3e}; worst ratio {:.2}",
                metric(&r, "bulk_rms_residual"),
                metric(&r, "bulk_bound"),
                metric(&r, "worst_ratio")
            ));
            let n01 = (N as f64).powf(0.1);
            if let Ok(f) = violation_fractions(&s.batch, &s.law, &[1.0, n01, n01 * n01]) {
                c.note(format!(
                    "recount: fraction above bound x1 {:.4}, x N^0.1 {:.4} (N^0.2 overall), x N^0.2 {:.2e}",
                    f[0], f[1], f[2]
                ));
            }
        }
        Err(e) => c.error("phi = 0.25", e),
    }
    match shared(0.2, 3006, RIGIDITY_TRIALS, exec).and_then(|s| analyze_rigidity(&s.batch, &s.law)) {
        Ok(r) => {
            let m = metric(&r, "median_ratio_corrected_to_uncorrected");
            c.check(
                m <= 0.5,
                format!(
                    "phi = 0.2: median corrected/uncorrected residual {m:.3} (need <= 0.5); medians {:.3e} vs {:.3e}",
                    metric(&r, "median_corrected"),
                    metric(&r, "median_uncorrected")
                ),
            );
        }
        Err(e) => c.error("phi = 0.2", e),
    }
    match timed("bulk scaling N = 500, 1000, 2000", || rigidity_bulk_scaling(&[500, 1000, 2000], 0.25, 3007, 20, exec)) {
        Ok(b) => c.note(format!(
            "bulk scaling at phi = 0.25, 20 trials per N: residuals {:?}, fitted slope {:.3}, predicted {:.3} (module band +/- 0.15: {})",
            b.residuals.iter().map(|r| format!("{r:.3e}")).collect::<Vec<_>>(),
            b.fitted_slope,
            b.predicted_slope,
            if (b.fitted_slope - b.predicted_slope).abs() <= 0.15 { "inside" } else { "outside" }
        )),
        Err(e) => c.note(format!("bulk scaling failed: {e}")),
    }
    c
}

fn criterion_6(hi: &Result<Shared, LabError>, lo: &Result<Shared, LabError>, tw: &Result<TwReference, LabError>) -> Criterion {
    let mut c = Criterion::new(6, "edge decomposition (N = 2000, phi = 0.45 and 0.1)");
    let tw = match tw {
        Ok(tw) => Some(tw),
        Err(e) => {
            c.error("TW reference", e.clone());
            None
        }
    };
    match hi {
        Ok(s) => match analyze_edge(&s.batch, &s.law, tw) {
            Ok(r) => {
                let m = metric(&r, "mean_r_scaled");
                let gap = metric(&r, "mean_gap");
                c.check(
                    gap.abs() <= 0.25,
                    format!("phi = 0.45: mean N^(2/3)(lambda_1 - C+ - Z) = {m:.4} vs TW mean {:.4}: gap {gap:.4} (band +/- 0.25)", metric(&r, "tw_mean")),
                );
                let corr = metric(&r, "corr_r_z");
                c.check(corr.abs() <= 0.15, format!("phi = 0.45: corr(N^(2/3) r, N^(phi+1/2) Z) = {corr:.4} (gate 0.15)"));
                let se = (r.sample_variance / r.n_trials as f64).sqrt();
                c.note(format!(
                    "phi = 0.45: SE of the mean {se:.3}; two-sample KS vs TW p = {:.3}; variance {:.3} vs TW {:.3}",
                    r.ks_p.unwrap_or(f64::NAN),
                    r.sample_variance,
                    metric(&r, "tw_variance")
                ));
            }
            Err(e) => c.error("phi = 0.45", e),
        },
        Err(e) => c.error("phi = 0.45 sampling", e.clone()),
    }
    match lo {
        Ok(s) => match analyze_edge(&s.batch, &s.law, tw) {
            Ok(r) => {
                let p = r.ks_p.unwrap_or(f64::NAN);
                c.check(p >= 0.01, format!("phi = 0.1: KS of N^(phi+1/2)(lambda_1 - C+) vs N(0, 2 sigma^2): p = {p:.2e} (need >= 0.01)"));
                let corr = metric(&r, "corr_r_z");
                c.check(corr.abs() <= 0.15, format!("phi = 0.1: corr(N^(2/3) r, N^(phi+1/2) Z) = {corr:.4} (gate 0.15)"));
                c.note(format!(
                    "phi = 0.1: sample mean {:.3}, variance {:.3} vs predicted N(0, {:.3}); KS with the sample mean p = {:.2e}",
                    r.sample_mean,
                    r.sample_variance,
                    r.predicted_variance.unwrap_or(f64::NAN),
                    metric(&r, "ks_p_centered")
                ));
                c.note(format!(
                    "phi = 0.1: mean degree N p = {:.2}, C+ = {:.4}",
                    N as f64 * s.batch.config.sparsity_probability(),
                    s.law.edge_plus
                ));
            }
            Err(e) => c.error("phi = 0.1", e),
        },
        Err(e) => c.error("phi = 0.1 sampling", e.clone()),
    }
    c
}

fn criterion_7(hi: &Result<Shared, LabError>, lo: &Result<Shared, LabError>, tw: &Result<TwReference, LabError>) -> Criterion {
    let mut c = Criterion::new(7, "low-temperature fluctuations (N = 2000, beta = 1)");
    let beta = 1.0;
    match lo {
        Ok(s) => match analyze_low_t(&s.batch, &s.law, beta, tw.as_ref().ok()) {
            Ok(r) => {
                let ratio = metric(&r, "variance_ratio");
                c.check(
                    in_band(ratio, 0.6, 1.4),
                    format!(
                        "phi = 0.1: variance {:.4} / 2 sigma^2 (beta - beta_c + 1/4)^2 = {:.4}: ratio {ratio:.3} (band [0.6, 1.4])",
                        r.sample_variance,
                        r.predicted_variance.unwrap_or(f64::NAN)
                    ),
                );
                c.note(format!(
                    "phi = 0.1: beta_c = {:.4}; KS vs the Gaussian (sample mean) p = {:.2e}; TW+Gaussian convolution variance {:.4}",
                    s.law.beta_c,
                    r.ks_p.unwrap_or(f64::NAN),
                    metric(&r, "predicted_variance_convolution")
                ));
                if let Some(m) = &r.moments {
                    c.note(format!("phi = 0.1: skewness {:.3}, excess kurtosis {:.3}", m.skewness.value, m.excess_kurtosis.value));
                }
            }
            Err(e) => c.error("phi = 0.1", e),
        },
        Err(e) => c.error("phi = 0.1 sampling", e.clone()),
    }
    match (hi, tw) {
        (Ok(s), Ok(tw)) => match analyze_low_t(&s.batch, &s.law, beta, Some(tw)) {
            Ok(r) => {
                let gap = metric(&r, "mean_gap");
                let se = metric(&r, "mean_se");
                c.check(
                    gap.abs() <= 3.0 * se,
                    format!(
                        "phi = 0.45: standardized mean {:.4} vs (beta - 1/2) x TW mean {:.4}: gap {gap:.4}, SE {se:.4}, {:.2} SE (band 3 SE)",
                        r.sample_mean,
                        r.predicted_mean.unwrap_or(f64::NAN),
                        gap / se
                    ),
                );
                c.note(format!(
                    "phi = 0.45: variance ratio vs (beta - 1/2)^2 TW variance {:.3}; two-sample KS (mean-shifted) p = {:.3}",
                    metric(&r, "variance_ratio"),
                    r.ks_p.unwrap_or(f64::NAN)
                ));
            }
            Err(e) => c.error("phi = 0.45", e),
        },
        (Err(e), _) | (_, Err(e)) => c.error("phi = 0.45 inputs", e.clone()),
    }
    c
}

fn criterion_8() -> Criterion {
    let mut c = Criterion::new(8, "reproducibility across thread counts");
    let cfg = EnsembleConfig::new(300, 0.35, 3008);
    let mut outputs = Vec::new();
    for threads in [1, 4, 8] {
        let r = run_high_t(&cfg, 0.25, 24, Executor::with_threads(threads)).and_then(|r| {
            let mut buf = Vec::new();
            r.write_csv(&mut buf)?;
            Ok((r.config.config_hash.clone(), buf))
        });
        match r {
            Ok(out) => outputs.push((threads, out)),
            Err(e) => c.error(&format!("threads = {threads}"), e),
        }
    }
    if outputs.len() == 3 {
        let same = outputs.iter().all(|(_, o)| *o == outputs[0].1);
        c.check(
            same,
            format!(
                "high-t N = 300, 24 trials, config hash {}: per-trial CSV ({} bytes) identical for threads 1, 4, 8",
                outputs[0].1 .0,
                outputs[0].1 .1.len()
            ),
        );
    }
    c
}

fn main() {
    let start = Instant::now();
    let exec = Executor::default();
    let mut results = Vec::new();

    results.push(criterion_1().print());
    results.push(criterion_2().print());

    let a = shared(0.35, 3003, MC_TRIALS, exec);
    results.push(criterion_3(&a).print());
    results.push(criterion_4(&a).print());
    drop(a);

    results.push(criterion_5(exec).print());

    let tw = timed(&format!("TW reference, {TW_DRAWS} draws at N = {N}"), || tw1_reference_sample(TW_DRAWS, N, TW_SEED, exec));
    if let Ok(tw) = &tw {
        println!(
            "reference: TW sample at N = {N}, {} draws: mean {:.4} +/- {:.4}, variance {:.4}",
            tw.sample.len(),
            tw.mean,
            tw.std_error_of_mean(),
            tw.variance
        );
    }
    let hi = shared(0.45, 3045, MC_TRIALS, exec);
    let lo = shared(0.1, 3010, MC_TRIALS, exec);
    results.push(criterion_6(&hi, &lo, &tw).print());
    results.push(criterion_7(&hi, &lo, &tw).print());

    results.push(criterion_8().print());

    let passed = results.iter().filter(|&&ok| ok).count();
    println!("acceptance: {passed}/{} criteria pass ({:.0} s)", results.len(), start.elapsed().as_secs_f64());
    if passed < results.len() && std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
