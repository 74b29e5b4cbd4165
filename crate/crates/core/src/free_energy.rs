//! Free energy of the spherical model from the spectrum of the coupling matrix.
//!
//! With `G(z) = 2 beta z - (1/N) sum_i log(z - lambda_i)` the partition function
//! is `Z_N = C_N * integral e^{N G(z) / 2} dz` along any vertical line right of
//! `lambda_1`, where `C_N = Gamma(N/2) / (2 pi i (N beta)^{N/2 - 1})`. The saddle
//! `gamma` solves `G'(gamma) = 0` and gives the steepest-descent estimate
//!
//! `F_N = (G(gamma) - 1 - log 2 beta) / 2 + (log 2 beta - log G''(gamma) / 2) / N`.
//!
//! The contour route integrates the same representation numerically and is
//! used as an independent check of that formula.

use std::collections::BinaryHeap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::ensemble::EnsembleConfig;
use crate::error::{LabError, Result};
use crate::law::DeterministicLaw;
use crate::numeric::{find_root, CompensatedSum};
use crate::spectra::SpectrumSample;

/// Half-width of the band around `beta_c` that is refused.
pub const NEAR_CRITICAL_BAND: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    High,
    Low,
    NearCritical,
}

impl Regime {
    pub fn classify(beta: f64, beta_c: f64) -> Regime {
        if (beta - beta_c).abs() < NEAR_CRITICAL_BAND {
            Regime::NearCritical
        } else if beta < beta_c {
            Regime::High
        } else {
            Regime::Low
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SaddleResult {
    pub gamma: f64,
    pub g_at_gamma: f64,
    pub g1_residual: f64,
    pub g2_at_gamma: f64,
    pub f_saddle: f64,
    pub f_contour: Option<f64>,
    pub beta: f64,
    /// Filled in by callers that know `beta_c`.
    pub regime: Option<Regime>,
}

fn check_domain(s: &SpectrumSample, z: f64) -> Result<()> {
    let lambda_1 = s.lambda_max();
    if !(z > lambda_1) {
        return Err(LabError::DomainViolation { z, lambda_1 });
    }
    Ok(())
}

/// `G(z)` for real `z > lambda_1`.
pub fn g_eval(s: &SpectrumSample, beta: f64, z: f64) -> Result<f64> {
    check_domain(s, z)?;
    let logs: CompensatedSum = s.eigenvalues.iter().map(|l| (z - l).ln()).collect();
    Ok(2.0 * beta * z - logs.value() / s.n as f64)
}

/// `l`-th derivative of `G` at real `z > lambda_1`, `l >= 1`.
pub fn g_derivative(s: &SpectrumSample, beta: f64, z: f64, order: u32) -> Result<f64> {
    if order == 0 {
        return g_eval(s, beta, z);
    }
    check_domain(s, z)?;
    let k = order as i32;
    let sum: CompensatedSum = s.eigenvalues.iter().map(|l| (z - l).powi(-k)).collect();
    let factorial: f64 = (1..order).map(f64::from).product();
    let sign = if order % 2 == 0 { 1.0 } else { -1.0 };
    let base = sign * factorial * sum.value() / s.n as f64;
    Ok(if order == 1 { 2.0 * beta + base } else { base })
}

fn g_prime(s: &SpectrumSample, beta: f64, z: f64) -> f64 {
    let sum: CompensatedSum = s.eigenvalues.iter().map(|l| 1.0 / (z - l)).collect();
    2.0 * beta - sum.value() / s.n as f64
}

/// Complex `G` with principal-branch logarithms.
pub fn g_complex(s: &SpectrumSample, beta: f64, z: Complex64) -> Complex64 {
    let mut re = CompensatedSum::new();
    let mut im = CompensatedSum::new();
    for &l in &s.eigenvalues {
        let w = (z - l).ln();
        re.add(w.re);
        im.add(w.im);
    }
    let n = s.n as f64;
    2.0 * beta * z - Complex64::new(re.value(), im.value()) / n
}

/// Saddle-point formula for `F_N` given `G(gamma)` and `G''(gamma)`.
pub fn saddle_free_energy(n: usize, beta: f64, g: f64, g2: f64) -> f64 {
    let lb = (2.0 * beta).ln();
    0.5 * (g - 1.0 - lb) + (lb - 0.5 * g2.ln()) / n as f64
}

/// Unique root of `G'` right of `lambda_1` and the saddle-point free energy.
pub fn find_saddle(s: &SpectrumSample, beta: f64) -> Result<SaddleResult> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(LabError::Precondition(format!("beta must be positive, got {beta}")));
    }
    let n = s.n as f64;
    let lambda_1 = s.lambda_max();
    // gamma - lambda_1 >= 1 / (3 beta N), so G' < 0 at lambda_1 + 1 / (10 beta N)
    let lo = lambda_1 + 1.0 / (10.0 * beta * n);
    let mut width = 1.0;
    let mut hi = lambda_1 + 1.0 / (2.0 * beta * n) + width;
    while g_prime(s, beta, hi) <= 0.0 {
        width *= 2.0;
        hi = lambda_1 + 1.0 / (2.0 * beta * n) + width;
        if width > 1e12 {
            return Err(LabError::BracketFailure(format!("G' stays nonpositive up to {hi}")));
        }
    }
    if g_prime(s, beta, lo) >= 0.0 {
        return Err(LabError::BracketFailure(format!("G'({lo}) >= 0 at the left bracket")));
    }
    let mut gamma = find_root(|z| g_prime(s, beta, z), lo, hi, 1e-15 * hi.abs().max(1.0))
        .ok_or_else(|| LabError::BracketFailure(format!("no sign change of G' on [{lo}, {hi}]")))?;
    // Newton polish; G' is increasing and concave right of lambda_1
    for _ in 0..20 {
        let r = g_prime(s, beta, gamma);
        if r.abs() <= 1e-13 {
            break;
        }
        let d2 = g_derivative(s, beta, gamma, 2)?;
        let next = gamma - r / d2;
        if !(next > lambda_1) || !next.is_finite() {
            break;
        }
        gamma = next;
    }
    let residual = g_prime(s, beta, gamma);
    if residual.abs() > 1e-12 {
        return Err(LabError::BracketFailure(format!("saddle residual {residual:e} at gamma = {gamma}")));
    }
    let g = g_eval(s, beta, gamma)?;
    let g2 = g_derivative(s, beta, gamma, 2)?;
    Ok(SaddleResult {
        gamma,
        g_at_gamma: g,
        g1_residual: residual,
        g2_at_gamma: g2,
        f_saddle: saddle_free_energy(s.n, beta, g, g2),
        f_contour: None,
        beta,
        regime: None,
    })
}

/// `log |C_N|` via log-Gamma.
pub fn log_abs_c_n(n: usize, beta: f64) -> f64 {
    let nf = n as f64;
    ln_gamma(0.5 * nf) - (2.0 * std::f64::consts::PI).ln() - (0.5 * nf - 1.0) * (nf * beta).ln()
}

// Gauss-Kronrod 7/15 nodes and weights on [-1, 1] (nonnegative half).
const GK_NODES: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const GK_WEIGHTS: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const GAUSS7_WEIGHTS: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let fc = f(mid);
    let mut kronrod = GK_WEIGHTS[7] * fc;
    let mut gauss = GAUSS7_WEIGHTS[3] * fc;
    for j in 0..7 {
        let dx = half * GK_NODES[j];
        let pair = f(mid - dx) + f(mid + dx);
        kronrod += GK_WEIGHTS[j] * pair;
        if j % 2 == 1 {
            gauss += GAUSS7_WEIGHTS[j / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive Gauss-Kronrod on `[a, b]`; bisects the worst panel until
/// the summed error estimate drops below `rel_tol * |I|`.
pub fn adaptive_integral<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, rel_tol: f64, max_panels: usize) -> Result<f64> {
    let (value, error) = gk15(&mut f, a, b);
    if !value.is_finite() {
        return Err(LabError::QuadratureNonconvergence(format!("non-finite integrand on [{a}, {b}]")));
    }
    let mut heap = BinaryHeap::new();
    heap.push(Panel { a, b, value, error });
    let (mut total, mut total_err) = (value, error);
    while total_err > rel_tol * total.abs() && total_err > 1e-300 {
        if heap.len() >= max_panels {
            return Err(LabError::QuadratureNonconvergence(format!("{} panels, error {total_err:e} on {total:e}", heap.len())));
        }
        let worst = heap.pop().expect("heap is nonempty");
        let m = 0.5 * (worst.a + worst.b);
        let (v1, e1) = gk15(&mut f, worst.a, m);
        let (v2, e2) = gk15(&mut f, m, worst.b);
        if !(v1.is_finite() && v2.is_finite()) {
            return Err(LabError::QuadratureNonconvergence(format!("non-finite integrand near {m}")));
        }
        heap.push(Panel { a: worst.a, b: m, value: v1, error: e1 });
        heap.push(Panel { a: m, b: worst.b, value: v2, error: e2 });
        // re-sum to avoid drift from repeated subtraction
        total = heap.iter().map(|p| p.value).collect::<CompensatedSum>().value();
        total_err = heap.iter().map(|p| p.error).sum();
    }
    Ok(total)
}

/// `F_N = log(Z_N) / N` by direct quadrature of the contour integral.
///
/// The path `z(t) = gamma + i t - b t^2` leaves the saddle vertically and bends
/// left, where `e^{N beta z}` decays; it never meets the cuts `(-inf, lambda_i]`
/// for `t != 0`, so it is equivalent to the vertical line. Conjugate symmetry
/// reduces the integral to `2 i * integral_0^inf Im h(t) dt`.
pub fn free_energy_contour(s: &SpectrumSample, beta: f64, saddle: &SaddleResult) -> Result<f64> {
    let n = s.n as f64;
    let gamma = saddle.gamma;
    let g0 = saddle.g_at_gamma;
    let g2 = saddle.g2_at_gamma;
    let bend = g2 / (8.0 * beta);
    let integrand = |t: f64| -> f64 {
        let z = Complex64::new(gamma - bend * t * t, t);
        let dz = Complex64::new(-2.0 * bend * t, 1.0);
        let e = (0.5 * n * (g_complex(s, beta, z) - g0)).exp() * dz;
        e.im
    };
    // Gaussian scale near the saddle, then grow until the integrand is negligible
    let scale = (0.25 * n * g2).sqrt().recip();
    let mut t_max = 8.0 * scale;
    let mut grown = 0;
    while integrand(t_max).abs() > 1e-16 || integrand(0.5 * t_max).abs() > 1e-12 {
        t_max *= 2.0;
        grown += 1;
        if grown > 60 {
            return Err(LabError::QuadratureNonconvergence(format!("integrand does not decay by t = {t_max}")));
        }
    }
    let integral = adaptive_integral(integrand, 0.0, t_max, 1e-12, 4000)?;
    if !(integral > 0.0) {
        return Err(LabError::QuadratureNonconvergence(format!("contour integral {integral} is not positive")));
    }
    let log_z = log_abs_c_n(s.n, beta) + 0.5 * n * g0 + (2.0 * integral).ln();
    Ok(log_z / n)
}

/// Limiting free energy: `beta^2` up to 1/2, `2 beta - (log 2 beta + 3/2) / 2` beyond.
pub fn limiting_free_energy(beta: f64) -> f64 {
    if beta <= 0.5 {
        beta * beta
    } else {
        2.0 * beta - 0.5 * ((2.0 * beta).ln() + 1.5)
    }
}

/// Both branches of the limiting free energy, for continuity checks.
pub fn limiting_free_energy_branches(beta: f64) -> (f64, f64) {
    (beta * beta, 2.0 * beta - 0.5 * ((2.0 * beta).ln() + 1.5))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeterministicCentering {
    pub beta: f64,
    pub f0: f64,
    pub f_beta: f64,
    pub hat_gamma: Option<f64>,
    pub regime: Regime,
}

/// Root of `2 beta = integral d nu / (g - x)` right of the upper edge.
pub fn hat_gamma(law: &DeterministicLaw, beta: f64) -> Result<f64> {
    let lo = law.edge_plus + 1e-12;
    let hi = 2.0 * beta + 0.5 / beta + 1.0;
    let h = |g: f64| 2.0 * beta - law.integrate(|x| 1.0 / (g - x));
    if !(h(lo) < 0.0 && h(hi) > 0.0) {
        return Err(LabError::BracketFailure(format!("no root of the deterministic saddle equation on [{lo}, {hi}] at beta = {beta}")));
    }
    find_root(h, lo, hi, 1e-14).ok_or_else(|| LabError::BracketFailure(format!("deterministic saddle at beta = {beta}")))
}

/// Deterministic centering `F(beta)` of the finite-N free energy.
pub fn centering(law: &DeterministicLaw, beta: f64) -> Result<DeterministicCentering> {
    if !(beta > 0.0) {
        return Err(LabError::Precondition(format!("beta must be positive, got {beta}")));
    }
    let regime = Regime::classify(beta, law.beta_c);
    let f0 = limiting_free_energy(beta);
    let lb = (2.0 * beta).ln();
    match regime {
        Regime::NearCritical => Err(LabError::NearCritical { beta, beta_c: law.beta_c, band: NEAR_CRITICAL_BAND }),
        Regime::High => {
            let g = hat_gamma(law, beta)?;
            let f_beta = beta * g - 0.5 * (1.0 + lb) - 0.5 * law.integrate(|x| (g - x).ln());
            Ok(DeterministicCentering { beta, f0, f_beta, hat_gamma: Some(g), regime })
        }
        Regime::Low => {
            let c = law.edge_plus;
            let f_beta = beta * c - 0.5 * law.integrate(|x| (c - x).ln()) - 0.5 - 0.5 * lb;
            Ok(DeterministicCentering { beta, f0, f_beta, hat_gamma: None, regime })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FluctuationLaw {
    /// `N^{scale_exponent} (F_N - F) => N(0, variance)`.
    Gaussian { scale_exponent: f64, variance: f64 },
    /// `F_N - F ~ tw_coeff N^{-2/3} TW_1 + gauss_coeff N^{-(phi + 1/2)} X`,
    /// `X ~ N(0, gauss_variance)`. The `_finite_n` coefficients replace 1/2 by
    /// the finite-N `beta_c`: `beta - beta_c` and `beta - beta_c + 1/4`.
    TwPlusGaussian {
        tw_coeff: f64,
        tw_exponent: f64,
        gauss_coeff: f64,
        gauss_exponent: f64,
        gauss_variance: f64,
        tw_coeff_finite_n: f64,
        gauss_coeff_finite_n: f64,
    },
}

pub fn predicted_fluctuation_law(law: &DeterministicLaw, cfg: &EnsembleConfig, beta: f64) -> Result<FluctuationLaw> {
    let sigma = cfg.sigma_limit();
    let exponent = cfg.phi + 0.5;
    match Regime::classify(beta, law.beta_c) {
        Regime::NearCritical => Err(LabError::NearCritical { beta, beta_c: law.beta_c, band: NEAR_CRITICAL_BAND }),
        Regime::High => Ok(FluctuationLaw::Gaussian { scale_exponent: exponent, variance: 2.0 * sigma * sigma * beta.powi(4) }),
        Regime::Low => Ok(FluctuationLaw::TwPlusGaussian {
            tw_coeff: beta - 0.5,
            tw_exponent: 2.0 / 3.0,
            gauss_coeff: beta - 0.25,
            gauss_exponent: exponent,
            gauss_variance: 2.0 * sigma * sigma,
            tw_coeff_finite_n: beta - law.beta_c,
            gauss_coeff_finite_n: beta - law.beta_c + 0.25,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn atom() -> SpectrumSample {
        SpectrumSample::from_eigenvalues(vec![0.0], None)
    }

    #[test]
    fn g_on_single_atom() {
        assert_eq!(g_eval(&atom(), 1.0, 1.0).unwrap(), 2.0);
        assert!(matches!(g_eval(&atom(), 1.0, 0.0), Err(LabError::DomainViolation { .. })));
        let far = g_derivative(&atom(), 1.0, 1e6, 1).unwrap();
        assert!((far - 2.0).abs() <= 2e-6);
        assert!(g_derivative(&atom(), 1.0, 0.3, 2).unwrap() > 0.0);
        // G''' = -2 / z^3 for a single atom at 0
        assert!((g_derivative(&atom(), 1.0, 0.5, 3).unwrap() + 16.0).abs() < 1e-12);
    }

    #[test]
    fn saddle_of_single_atom() {
        let r = find_saddle(&atom(), 1.0).unwrap();
        assert!((r.gamma - 0.5).abs() < 1e-14);
    }

    #[test]
    fn contour_reproduces_one_spin_partition_function() {
        // on S_0 = {+1, -1} with M = [0], Z_1 = 1
        let s = atom();
        let r = find_saddle(&s, 1.0).unwrap();
        let f = free_energy_contour(&s, 1.0, &r).unwrap();
        assert!(f.abs() < 1e-10, "{f}");
    }

    #[test]
    fn limiting_free_energy_values() {
        assert_eq!(limiting_free_energy(0.25), 0.0625);
        let (a, b) = limiting_free_energy_branches(0.5);
        assert!((a - 0.25).abs() < 1e-14 && (b - 0.25).abs() < 1e-14);
        // 2 - (log 2 + 3/2) / 2
        assert!((limiting_free_energy(1.0) - 0.90342640972).abs() < 1e-11);
    }

    #[test]
    fn log_c_n_matches_gamma_at_small_n() {
        // C_4 = Gamma(2) / (2 pi (4 beta)^1)
        let beta: f64 = 0.3;
        let expected = -(2.0 * std::f64::consts::PI * 4.0 * beta).ln();
        assert!((log_abs_c_n(4, beta) - expected).abs() < 1e-14);
    }

    #[test]
    fn regime_classification() {
        assert_eq!(Regime::classify(0.3, 0.5), Regime::High);
        assert_eq!(Regime::classify(0.7, 0.5), Regime::Low);
        assert_eq!(Regime::classify(0.5 + 1e-8, 0.5), Regime::NearCritical);
    }
}
