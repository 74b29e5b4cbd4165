//! Kolmogorov-Smirnov tests and moment tables.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{LabError, Result};

pub const MIN_SAMPLE: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

fn check_sample(xs: &[f64]) -> Result<()> {
    if xs.len() < MIN_SAMPLE {
        return Err(LabError::Precondition(format!("sample size {} is below {MIN_SAMPLE}", xs.len())));
    }
    if let Some(x) = xs.iter().find(|x| !x.is_finite()) {
        return Err(LabError::Precondition(format!("non-finite sample value {x}")));
    }
    Ok(())
}

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Survival function of the Kolmogorov distribution, `P(K > lambda)`.
pub fn kolmogorov_survival(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        // theta-function form converges fast for small arguments
        let c = -std::f64::consts::PI.powi(2) / (8.0 * lambda * lambda);
        let s: f64 = (1..=8).map(|k| (((2 * k - 1) as f64).powi(2) * c).exp()).sum();
        (1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * s).clamp(0.0, 1.0)
    } else {
        let mut s = 0.0;
        for k in 1..=100 {
            let kf = k as f64;
            let term = (-2.0 * kf * kf * lambda * lambda).exp();
            s += if k % 2 == 1 { term } else { -term };
            if term < 1e-17 {
                break;
            }
        }
        (2.0 * s).clamp(0.0, 1.0)
    }
}

/// Asymptotic p-value with Stephens' small-sample correction.
fn ks_p_value(d: f64, n_eff: f64) -> f64 {
    let r = n_eff.sqrt();
    kolmogorov_survival((r + 0.12 + 0.11 / r) * d)
}

/// Two-sided one-sample test of `xs` against a continuous `cdf`.
pub fn ks_test<F: Fn(f64) -> f64>(xs: &[f64], cdf: F) -> Result<KsResult> {
    check_sample(xs)?;
    let v = sorted(xs);
    let n = v.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in v.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    Ok(KsResult { statistic: d, p_value: ks_p_value(d, n) })
}

/// Two-sided two-sample test.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<KsResult> {
    check_sample(a)?;
    check_sample(b)?;
    let (a, b) = (sorted(a), sorted(b));
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(KsResult { statistic: d, p_value: ks_p_value(d, na * nb / (na + nb)) })
}

pub fn normal_cdf(mean: f64, variance: f64) -> impl Fn(f64) -> f64 {
    let dist = Normal::new(mean, variance.sqrt()).expect("positive finite variance");
    move |x| dist.cdf(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    pub value: f64,
    pub std_error: f64,
    pub predicted: Option<f64>,
}

/// Mean, unbiased variance, skewness and excess kurtosis with jackknife errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentTable {
    pub n: usize,
    pub mean: MomentEstimate,
    pub variance: MomentEstimate,
    pub skewness: MomentEstimate,
    pub excess_kurtosis: MomentEstimate,
}

impl MomentTable {
    /// Attaches predictions `[mean, variance, skewness, excess kurtosis]`.
    pub fn with_predicted(mut self, p: [Option<f64>; 4]) -> Self {
        self.mean.predicted = p[0];
        self.variance.predicted = p[1];
        self.skewness.predicted = p[2];
        self.excess_kurtosis.predicted = p[3];
        self
    }
}

fn moments_from_sums(n: f64, s: [f64; 4]) -> [f64; 4] {
    // s holds power sums of values already shifted by a common center
    let m = s[0] / n;
    let c2 = s[1] / n - m * m;
    let c3 = s[2] / n - 3.0 * m * s[1] / n + 2.0 * m.powi(3);
    let c4 = s[3] / n - 4.0 * m * s[2] / n + 6.0 * m * m * s[1] / n - 3.0 * m.powi(4);
    [m, c2 * n / (n - 1.0), c3 / c2.powf(1.5), c4 / (c2 * c2) - 3.0]
}

pub fn moment_table(xs: &[f64]) -> Result<MomentTable> {
    check_sample(xs)?;
    let first = xs[0];
    if xs.iter().all(|&x| x == first) {
        return Err(LabError::DegenerateSample);
    }
    let center = crate::numeric::mean(xs);
    let mut s = [0.0f64; 4];
    for &x in xs {
        let d = x - center;
        s[0] += d;
        s[1] += d * d;
        s[2] += d * d * d;
        s[3] += d * d * d * d;
    }
    let n = xs.len() as f64;
    let full = moments_from_sums(n, s);

    // leave-one-out by subtracting one term from each power sum
    let mut loo_mean = [0.0f64; 4];
    let mut loo_sq = [0.0f64; 4];
    for &x in xs {
        let d = x - center;
        let si = [s[0] - d, s[1] - d * d, s[2] - d * d * d, s[3] - d * d * d * d];
        let t = moments_from_sums(n - 1.0, si);
        for k in 0..4 {
            loo_mean[k] += t[k];
            loo_sq[k] += t[k] * t[k];
        }
    }
    let se = |k: usize| {
        let m = loo_mean[k] / n;
        let var = (loo_sq[k] / n - m * m).max(0.0);
        (var * (n - 1.0)).sqrt()
    };
    let est = |k: usize, value: f64| MomentEstimate { value, std_error: se(k), predicted: None };
    Ok(MomentTable {
        n: xs.len(),
        mean: est(0, center + full[0]),
        variance: est(1, full[1]),
        skewness: est(2, full[2]),
        excess_kurtosis: est(3, full[3]),
    })
}
