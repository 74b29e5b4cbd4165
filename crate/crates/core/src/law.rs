//! The deterministic law whose Stieltjes transform solves
//! `1 + z m + m^2 + s m^4 = 0`, with `s = N Sigma^2`.
//!
//! At `s = 0` this is the semicircle law on [-2, 2]. For `s > 0` the support
//! widens to `[-C, C]` with `C ~ 2 + s`, the density keeps its square-root
//! edges, and the quantiles shift by O(s).
//!
//! Integrals against the law are taken in the angle variable `x = C cos t`,
//! where the density times the Jacobian is smooth up to both edges; this is
//! what keeps the inverse-square-root integrands (like `1 / (C - x)`)
//! accurate without special edge panels.

use std::f64::consts::PI;
use std::io::Write;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::numeric::{compensated_sum, find_root, gauss_legendre, CompensatedSum};

pub const DEFAULT_GRID_SIZE: usize = 4096;
pub const DEFAULT_CHEBYSHEV_NODES: usize = 2048;
/// Supremum of `s` for which the quartic law is a probability density.
pub const MAX_S_PARAM: f64 = 0.25;
const PANEL_ORDER: usize = 8;

fn quartic(s: f64, z: Complex64, m: Complex64) -> Complex64 {
    let m2 = m * m;
    1.0 + z * m + m2 + s * m2 * m2
}

fn quartic_derivative(s: f64, z: Complex64, m: Complex64) -> Complex64 {
    z + 2.0 * m + 4.0 * s * m * m * m
}

/// Semicircle Stieltjes transform `(-z + sqrt(z^2 - 4)) / 2` on the branch
/// that decays like `-1/z`.
pub fn semicircle_stieltjes(z: Complex64) -> Complex64 {
    let z = if z.im == 0.0 { Complex64::new(z.re, 0.0) } else { z };
    let r = (z - 2.0).sqrt() * (z + 2.0).sqrt();
    (-z + r) * 0.5
}

/// All four roots of the quartic in `m` (Aberth iteration, Newton polished).
fn quartic_roots(s: f64, z: Complex64) -> [Complex64; 4] {
    let i = Complex64::i();
    let msc = semicircle_stieltjes(z);
    let other = -z - msc;
    let big = 1.0 / s.sqrt();
    // seeds: the two semicircle roots and the pair near +-i/sqrt(s), nudged apart
    let mut r = [msc * Complex64::new(1.0, 1e-3), other * Complex64::new(1.0, -2e-3) + 1e-3, i * big, -i * big + 1e-3];
    for _ in 0..500 {
        let mut moved = 0.0f64;
        for k in 0..4 {
            let p = quartic(s, z, r[k]);
            let dp = quartic_derivative(s, z, r[k]);
            if p == Complex64::new(0.0, 0.0) {
                continue;
            }
            let ratio = p / dp;
            let mut rep = Complex64::new(0.0, 0.0);
            for j in 0..4 {
                if j != k {
                    rep += 1.0 / (r[k] - r[j]);
                }
            }
            let step = ratio / (1.0 - ratio * rep);
            if step.is_finite() {
                r[k] -= step;
                moved = moved.max(step.norm() / (1.0 + r[k].norm()));
            }
        }
        if moved < 1e-16 {
            break;
        }
    }
    for root in r.iter_mut() {
        for _ in 0..3 {
            let dp = quartic_derivative(s, z, *root);
            if dp.norm() == 0.0 {
                break;
            }
            let step = quartic(s, z, *root) / dp;
            if !step.is_finite() {
                break;
            }
            *root -= step;
        }
    }
    r
}

/// Minimizer of the real convex quartic `m -> P_x(m)`, from the monotone cubic `P'_x = 0`.
fn real_minimizer(s: f64, x: f64) -> f64 {
    let span = 0.5 * x.abs() + 1.0;
    find_root(|m| x + 2.0 * m + 4.0 * s * m * m * m, -span, span, 1e-16).expect("monotone cubic has a sign change")
}

/// `min_m P_x(m)`; positive exactly where the density is positive.
fn support_indicator(s: f64, x: f64) -> f64 {
    let m = real_minimizer(s, x);
    1.0 + x * m + m * m + s * m.powi(4)
}

fn select_branch(s: f64, z: Complex64, roots: &[Complex64; 4], on_axis: bool) -> Result<Complex64> {
    let scale = 1.0 + z.norm();
    let mut candidates: Vec<Complex64> = if on_axis {
        roots.iter().copied().filter(|r| r.im >= -1e-10 * scale).collect()
    } else {
        roots.iter().copied().filter(|r| r.im > 0.0).collect()
    };
    if candidates.is_empty() {
        return Err(LabError::BranchAmbiguity { re: z.re, im: z.im });
    }
    candidates.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
    if !on_axis && candidates.len() > 1 && (candidates[0] - candidates[1]).norm() <= 1e-12 {
        return Err(LabError::BranchAmbiguity { re: z.re, im: z.im });
    }
    let m = candidates[0];
    let m = if on_axis && m.im.abs() <= 1e-10 * scale && support_indicator(s, z.re) <= 0.0 {
        Complex64::new(m.re, 0.0)
    } else {
        m
    };
    Ok(m)
}

/// Physical root `m(z)` of `1 + z m + m^2 + s m^4 = 0`.
///
/// `Im m > 0` for `Im z > 0` and `m ~ -1/z` at infinity. Real `z` is allowed
/// only outside the open support.
pub fn solve_stieltjes(s_param: f64, z: Complex64) -> Result<Complex64> {
    if !(s_param >= 0.0) || !z.re.is_finite() || !z.im.is_finite() {
        return Err(LabError::Precondition(format!("s_param = {s_param}, z = {z}")));
    }
    if z.im < 0.0 {
        return Ok(solve_stieltjes(s_param, z.conj())?.conj());
    }
    let on_axis = z.im == 0.0;
    if on_axis && support_indicator(s_param, z.re) > 0.0 {
        return Err(LabError::OffSupportViolation(z.re));
    }
    if s_param == 0.0 {
        return Ok(semicircle_stieltjes(z));
    }
    let roots = quartic_roots(s_param, z);
    select_branch(s_param, z, &roots, on_axis)
}

/// Boundary value `m(x + i0)` for real `x`, including points on the support.
pub fn boundary_stieltjes(s_param: f64, x: f64) -> Complex64 {
    let z = Complex64::new(x, 0.0);
    if s_param == 0.0 {
        return semicircle_stieltjes(z);
    }
    let roots = quartic_roots(s_param, z);
    let scale = 1.0 + x.abs();
    roots
        .iter()
        .copied()
        .filter(|r| r.im >= -1e-10 * scale)
        .min_by(|a, b| a.norm().total_cmp(&b.norm()))
        .expect("real quartic has a root in the closed upper half plane")
}

/// Density `Im m(x + i0) / pi`, zero off the support.
pub fn density(s_param: f64, x: f64) -> f64 {
    if support_indicator(s_param, x) <= 0.0 {
        return 0.0;
    }
    (boundary_stieltjes(s_param, x).im / PI).max(0.0)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeterministicLaw {
    pub s_param: f64,
    pub edge_plus: f64,
    pub edge_minus: f64,
    /// `(x, rho(x))`, ascending in x, cosine-stretched toward both edges.
    pub density_grid: Vec<(f64, f64)>,
    /// `nu((-inf, x])` at the density grid abscissae.
    pub cdf_grid: Vec<f64>,
    /// Limit of `rho(x) / sqrt(C+ - x)` at the upper edge.
    pub s_nu: f64,
    pub beta_c: f64,
    /// Angle grid `t_j` with `x = C+ cos t_j` and mass above each point.
    theta: Vec<f64>,
    tail_mass: Vec<f64>,
    /// Nodes and weights of the composite rule for integrals against the law.
    quad: Vec<(f64, f64)>,
}

impl DeterministicLaw {
    /// `integral f d nu`.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.quad.iter().map(|&(x, w)| w * f(x)).collect::<CompensatedSum>().value()
    }

    pub fn density(&self, x: f64) -> f64 {
        density(self.s_param, x)
    }

    pub fn stieltjes(&self, z: Complex64) -> Result<Complex64> {
        solve_stieltjes(self.s_param, z)
    }

    fn angle_integrand(&self, t: f64) -> f64 {
        let c = self.edge_plus;
        density(self.s_param, c * t.cos()) * c * t.sin()
    }

    fn partial_mass(&self, from: f64, to: f64) -> f64 {
        let (nodes, weights) = gl();
        let half = 0.5 * (to - from);
        let mid = 0.5 * (to + from);
        nodes.iter().zip(weights).map(|(u, w)| w * half * self.angle_integrand(mid + half * u)).sum()
    }

    /// `nu([x, inf))`.
    pub fn cdf_above(&self, x: f64) -> f64 {
        if x >= self.edge_plus {
            return 0.0;
        }
        if x <= self.edge_minus {
            return 1.0;
        }
        let t = (x / self.edge_plus).clamp(-1.0, 1.0).acos();
        let j = (self.theta.partition_point(|&tj| tj <= t)).saturating_sub(1).min(self.theta.len() - 2);
        self.tail_mass[j] + self.partial_mass(self.theta[j], t)
    }

    /// Angle `t` with `nu([C cos t, inf)) = target`.
    fn upper_quantile_angle(&self, target: f64) -> f64 {
        let last = self.tail_mass.len() - 1;
        let j = self.tail_mass.partition_point(|&m| m <= target).saturating_sub(1).min(last - 1);
        let (lo, hi) = (self.theta[j], self.theta[j + 1]);
        let base = self.tail_mass[j];
        find_root(|t| base + self.partial_mass(lo, t) - target, lo, hi, 1e-15).unwrap_or(if target - base < 0.5 * (self.tail_mass[j + 1] - base) { lo } else { hi })
    }
}

fn gl() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: std::sync::OnceLock<(Vec<f64>, Vec<f64>)> = std::sync::OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(PANEL_ORDER))
}

fn locate_edge(s: f64, positive: bool) -> Result<f64> {
    let (lo, hi) = (2.0 - 0.5, 2.0 + 4.0 * s + 0.1);
    let g = |x: f64| support_indicator(s, if positive { x } else { -x });
    let (glo, ghi) = (g(lo), g(hi));
    if !(glo > 0.0 && ghi <= 0.0) {
        return Err(LabError::EdgeBracketFailure { lo, hi });
    }
    let x = find_root(g, lo, hi, 1e-14).ok_or(LabError::EdgeBracketFailure { lo, hi })?;
    Ok(if positive { x } else { -x })
}

/// Tabulates the law: edges, density and CDF on a cosine grid, `s_nu`, `beta_c`.
pub fn build_law(s_param: f64, grid_size: usize) -> Result<DeterministicLaw> {
    if grid_size < 256 {
        return Err(LabError::Precondition(format!("grid_size {grid_size} < 256")));
    }
    if !(s_param >= 0.0) || !s_param.is_finite() {
        return Err(LabError::InvalidConfig(format!("s_param must be finite and nonnegative, got {s_param}")));
    }
    // 1 + m^2 + s m^4 has no root on the imaginary axis once s > 1/4, so the
    // equation stops defining a density near x = 0 (mean degree Np below 4)
    if s_param >= MAX_S_PARAM {
        return Err(LabError::Precondition(format!(
            "s_param = {s_param} must be below {MAX_S_PARAM}; the quartic law needs mean degree N p > 4"
        )));
    }
    let edge_plus = locate_edge(s_param, true)?;
    let edge_minus = locate_edge(s_param, false)?;
    if (edge_plus - (2.0 + s_param)).abs() > 10.0 * s_param * s_param + 1e-10 {
        return Err(LabError::CrossCheckFailure(format!("edge {edge_plus} vs 2 + s = {}", 2.0 + s_param)));
    }

    let theta: Vec<f64> = (0..grid_size).map(|j| PI * j as f64 / (grid_size - 1) as f64).collect();
    let mut law = DeterministicLaw {
        s_param,
        edge_plus,
        edge_minus,
        density_grid: Vec::new(),
        cdf_grid: Vec::new(),
        s_nu: 0.0,
        beta_c: 0.0,
        theta,
        tail_mass: Vec::new(),
        quad: Vec::with_capacity(grid_size * PANEL_ORDER),
    };

    let (nodes, weights) = gl();
    let mut tail = vec![0.0; grid_size];
    let mut acc = CompensatedSum::new();
    for j in 0..grid_size - 1 {
        let (a, b) = (law.theta[j], law.theta[j + 1]);
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut panel = 0.0;
        for (u, w) in nodes.iter().zip(weights) {
            let t = mid + half * u;
            let weight = w * half * law.angle_integrand(t);
            panel += weight;
            law.quad.push((edge_plus * t.cos(), weight));
        }
        acc.add(panel);
        tail[j + 1] = acc.value();
    }
    let total = tail[grid_size - 1];
    if (total - 1.0).abs() > 1e-8 {
        return Err(LabError::CrossCheckFailure(format!("total mass {total}")));
    }
    law.tail_mass = tail;

    // ascending abscissae; the grid is symmetric so the lower CDF at x_i is the upper mass at theta_i
    law.density_grid = (0..grid_size)
        .map(|i| {
            let x = edge_plus * law.theta[grid_size - 1 - i].cos();
            let rho = if i == 0 || i == grid_size - 1 { 0.0 } else { density(s_param, x) };
            (x, rho)
        })
        .collect();
    law.cdf_grid = law.tail_mass.clone();

    // s_nu: least squares through the origin of rho against sqrt(C+ - x) over the last decade
    let d_min = edge_plus - law.density_grid[grid_size - 2].0;
    let (mut num, mut den) = (0.0, 0.0);
    for &(x, rho) in law.density_grid[..grid_size - 1].iter().rev() {
        let d = edge_plus - x;
        if d > 10.0 * d_min {
            break;
        }
        num += rho * d.sqrt();
        den += d;
    }
    law.s_nu = num / den;
    law.beta_c = beta_c(&law)?;
    Ok(law)
}

/// `beta_c = -m(C+) / 2`, cross-checked against `(1/2) integral d nu / (C+ - x)`.
pub fn beta_c(law: &DeterministicLaw) -> Result<f64> {
    // at the edge the physical root is the double real root, i.e. the minimizer of P_{C+}
    let m_edge = real_minimizer(law.s_param, law.edge_plus);
    let analytic = -0.5 * m_edge;
    let quadrature = 0.5 * law.integrate(|x| 1.0 / (law.edge_plus - x));
    if (analytic - quadrature).abs() > 1e-6 {
        return Err(LabError::CrossCheckFailure(format!("beta_c root {analytic} vs quadrature {quadrature}")));
    }
    Ok(analytic)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalLocations {
    /// Quantiles of the law, descending.
    pub gamma: Vec<f64>,
    /// Semicircle quantiles, descending.
    pub gamma_sc: Vec<f64>,
    pub n: usize,
}

/// Semicircle point with upper tail mass `mass`: `2 cos t` where
/// `t - sin t cos t = pi * mass`.
pub fn semicircle_upper_quantile(mass: f64) -> f64 {
    let target = PI * mass.clamp(0.0, 1.0);
    let f = |t: f64| t - t.sin() * t.cos() - target;
    // Newton on f' = 2 sin^2 t, falling back to the bracketed solver near the edges
    let mut t = 0.5 * PI;
    let (mut lo, mut hi) = (0.0, PI);
    for _ in 0..100 {
        let ft = f(t);
        if ft == 0.0 {
            break;
        }
        if ft > 0.0 {
            hi = t;
        } else {
            lo = t;
        }
        if hi - lo < 1e-15 {
            break;
        }
        let next = t - ft / (2.0 * t.sin().powi(2));
        let next = if next.is_finite() && next > lo && next < hi { next } else { 0.5 * (lo + hi) };
        if (next - t).abs() < 1e-16 {
            break;
        }
        t = next;
    }
    2.0 * t.cos()
}

/// `gamma_k` and `gamma_sc,k` at upper tail mass `(k - 1/2) / n`, `k = 1..=n`.
pub fn classical_locations(law: &DeterministicLaw, n: usize) -> Result<ClassicalLocations> {
    if n < 2 {
        return Err(LabError::Precondition(format!("n = {n} < 2")));
    }
    let mut gamma = Vec::with_capacity(n);
    let mut gamma_sc = Vec::with_capacity(n);
    for k in 1..=n {
        let mass = (k as f64 - 0.5) / n as f64;
        gamma.push(law.edge_plus * law.upper_quantile_angle(mass).cos());
        gamma_sc.push(semicircle_upper_quantile(mass));
    }
    Ok(ClassicalLocations { gamma, gamma_sc, n })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChebyshevWeight {
    /// `1 / sqrt(4 - x^2)`
    Arcsine,
    /// `sqrt(4 - x^2) / (2 pi)`
    Semicircle,
    /// `(2 - x^2) / sqrt(4 - x^2)`
    CltKernel,
}

fn chebyshev_sum<F: FnMut(f64) -> f64>(f: &mut F, weight: ChebyshevWeight, n: usize) -> Result<f64> {
    let nf = n as f64;
    let mut acc = CompensatedSum::new();
    for j in 1..=n {
        let (x, w) = match weight {
            ChebyshevWeight::Arcsine | ChebyshevWeight::CltKernel => {
                let x = 2.0 * ((2 * j - 1) as f64 * PI / (2.0 * nf)).cos();
                let kernel = if weight == ChebyshevWeight::CltKernel { 2.0 - x * x } else { 1.0 };
                (x, PI / nf * kernel)
            }
            ChebyshevWeight::Semicircle => {
                let t = j as f64 * PI / (nf + 1.0);
                (2.0 * t.cos(), 2.0 / (nf + 1.0) * t.sin().powi(2))
            }
        };
        let fx = f(x);
        if !fx.is_finite() {
            return Err(LabError::NonFiniteIntegrand(x));
        }
        acc.add(w * fx);
    }
    Ok(acc.value())
}

/// Gauss-Chebyshev estimate of `integral f w` over [-2, 2] with `nodes` nodes,
/// and the node-doubling error estimate. Returns `(value, error)` where the
/// value is the doubled-node sum.
pub fn chebyshev_integral_with_error<F: FnMut(f64) -> f64>(mut f: F, weight: ChebyshevWeight, nodes: usize) -> Result<(f64, f64)> {
    if nodes == 0 {
        return Err(LabError::Precondition("node count must be positive".into()));
    }
    let coarse = chebyshev_sum(&mut f, weight, nodes)?;
    let fine = chebyshev_sum(&mut f, weight, 2 * nodes)?;
    Ok((fine, (fine - coarse).abs()))
}

pub fn chebyshev_integral<F: FnMut(f64) -> f64>(f: F, weight: ChebyshevWeight) -> Result<f64> {
    chebyshev_integral_with_error(f, weight, DEFAULT_CHEBYSHEV_NODES).map(|(v, _)| v)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StieltjesGap {
    pub re: f64,
    pub im: f64,
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureDifferenceReport {
    pub s_param: f64,
    /// `|m(z) - m_sc(z)|` on an off-support grid.
    pub stieltjes_gaps: Vec<StieltjesGap>,
    pub max_stieltjes_gap: f64,
    /// `max |rho - rho_sc| sqrt(4 - x^2)` over (-2, 2).
    pub max_weighted_density_gap: f64,
    /// The previous quantity divided by `s_param` (0 when `s_param = 0`).
    pub ratio: f64,
}

pub fn measure_difference_report(law: &DeterministicLaw) -> Result<MeasureDifferenceReport> {
    let s = law.s_param;
    let mut gaps = Vec::new();
    for &im in &[0.05, 0.1, 0.5, 1.0] {
        for i in 0..=24 {
            let re = -3.0 + 0.25 * i as f64;
            let z = Complex64::new(re, im);
            let gap = (solve_stieltjes(s, z)? - semicircle_stieltjes(z)).norm();
            gaps.push(StieltjesGap { re, im, gap });
        }
    }
    for &re in &[law.edge_plus + 0.05, law.edge_plus + 0.5, law.edge_plus + 2.0] {
        for x in [re, -re] {
            let z = Complex64::new(x, 0.0);
            let gap = (solve_stieltjes(s, z)? - semicircle_stieltjes(z)).norm();
            gaps.push(StieltjesGap { re: x, im: 0.0, gap });
        }
    }
    let max_gap = gaps.iter().map(|g| g.gap).fold(0.0, f64::max);

    let mut max_weighted = 0.0f64;
    let points = 2000;
    for i in 1..points {
        let x = 2.0 * (PI * i as f64 / points as f64).cos();
        let root = (4.0 - x * x).max(0.0).sqrt();
        let rho_sc = root / (2.0 * PI);
        max_weighted = max_weighted.max((law.density(x) - rho_sc).abs() * root);
    }
    Ok(MeasureDifferenceReport {
        s_param: s,
        stieltjes_gaps: gaps,
        max_stieltjes_gap: max_gap,
        max_weighted_density_gap: max_weighted,
        ratio: if s > 0.0 { max_weighted / s } else { 0.0 },
    })
}

/// Writes `x,rho,cdf` rows after a `#`-prefixed header line.
pub fn write_density_csv<W: Write>(law: &DeterministicLaw, out: &mut W, header: &str) -> std::io::Result<()> {
    writeln!(out, "# {header}")?;
    writeln!(out, "x,rho,cdf")?;
    for (&(x, rho), cdf) in law.density_grid.iter().zip(&law.cdf_grid) {
        writeln!(out, "{x},{rho},{cdf}")?;
    }
    Ok(())
}

/// `(1/N) sum_i (gamma_sc,i / 2) / (C+ - gamma_i)`.
pub fn edge_sum(law: &DeterministicLaw, loc: &ClassicalLocations) -> f64 {
    compensated_sum(loc.gamma.iter().zip(&loc.gamma_sc).map(|(g, gs)| 0.5 * gs / (law.edge_plus - g))) / loc.n as f64
}
