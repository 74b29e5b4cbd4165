//! Sparse symmetric random matrices with sparsity parameter q = N^phi.
//!
//! Upper-triangle entries are i.i.d. `B_ij * W_ij` where `B_ij` is a
//! Bernoulli(p) mask scaled by (Np)^(-1/2), p = q^2 / N, and `W_ij` is either
//! a Rademacher sign or a standard Gaussian. Off-diagonal variance is exactly
//! 1/N and the k-th absolute moment is p (Np)^(-k/2) E|W|^k, which equals
//! N^-(1 + (k-2) phi) for the Rademacher law.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{LabError, Result};
use crate::numeric::{sub_seed, CompensatedSum};

/// Default cap on the dense N x N allocation (2 GiB).
pub const DEFAULT_MEMORY_CAP: usize = 2 << 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryLaw {
    DilutedRademacher,
    DilutedGaussian,
}

impl EntryLaw {
    /// E|W|^k for the undiluted variable.
    pub fn abs_moment(self, k: u32) -> f64 {
        match self {
            EntryLaw::DilutedRademacher => 1.0,
            EntryLaw::DilutedGaussian => {
                // E|g|^k = 2^(k/2) Gamma((k+1)/2) / sqrt(pi)
                let kf = k as f64;
                (0.5 * kf * std::f64::consts::LN_2 + statrs::function::gamma::ln_gamma(0.5 * (kf + 1.0))
                    - 0.5 * std::f64::consts::PI.ln())
                .exp()
            }
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EntryLaw::DilutedRademacher => "diluted_rademacher",
            EntryLaw::DilutedGaussian => "diluted_gaussian",
        }
    }
}

impl std::str::FromStr for EntryLaw {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "diluted_rademacher" | "rademacher" => Ok(EntryLaw::DilutedRademacher),
            "diluted_gaussian" | "gaussian" => Ok(EntryLaw::DilutedGaussian),
            other => Err(LabError::InvalidConfig(format!("unknown entry law `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    pub n: usize,
    pub phi: f64,
    pub entry_law: EntryLaw,
    pub seed: u64,
    pub include_diagonal: bool,
    pub memory_cap_bytes: usize,
}

impl EnsembleConfig {
    pub fn new(n: usize, phi: f64, seed: u64) -> Self {
        Self {
            n,
            phi,
            entry_law: EntryLaw::DilutedRademacher,
            seed,
            include_diagonal: true,
            memory_cap_bytes: DEFAULT_MEMORY_CAP,
        }
    }

    pub fn with_law(mut self, law: EntryLaw) -> Self {
        self.entry_law = law;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(LabError::InvalidConfig(format!("n must be at least 2, got {}", self.n)));
        }
        if !(self.phi > 0.0 && self.phi < 0.5) {
            return Err(LabError::InvalidConfig(format!(
                "phi must lie in the open interval (0, 1/2), got {}",
                self.phi
            )));
        }
        let p = self.sparsity_probability();
        if !(p > 0.0 && p < 1.0) {
            return Err(LabError::InvalidConfig(format!("derived p = {p} is outside (0, 1)")));
        }
        Ok(())
    }

    /// q = N^phi.
    pub fn q(&self) -> f64 {
        (self.n as f64).powf(self.phi)
    }

    /// p = q^2 / N = N^(2 phi - 1).
    pub fn sparsity_probability(&self) -> f64 {
        (self.n as f64).powf(2.0 * self.phi - 1.0)
    }

    /// Magnitude (Np)^(-1/2) of a nonzero diluted entry before the W factor.
    pub fn magnitude(&self) -> f64 {
        (self.n as f64 * self.sparsity_probability()).powf(-0.5)
    }

    /// Exact E|M_ij|^k for one entry of the configured law.
    pub fn entry_abs_moment(&self, k: u32) -> f64 {
        self.sparsity_probability() * self.magnitude().powi(k as i32) * self.entry_law.abs_moment(k)
    }

    /// Number of (i, j) index pairs, both orders, that carry a random entry.
    fn random_pairs(&self) -> f64 {
        let n = self.n as f64;
        if self.include_diagonal {
            n * n
        } else {
            n * (n - 1.0)
        }
    }

    /// Sigma = (N^-2 sum_ij E M_ij^4)^(1/2), in closed form.
    pub fn sigma(&self) -> f64 {
        let n = self.n as f64;
        (self.random_pairs() * self.entry_abs_moment(4) / (n * n)).sqrt()
    }

    /// sigma = N^(phi + 1/2) Sigma evaluated at the configured N.
    pub fn sigma_limit(&self) -> f64 {
        (self.n as f64).powf(self.phi + 0.5) * self.sigma()
    }

    /// Quartic coefficient N Sigma^2 of the deterministic law.
    pub fn s_param(&self) -> f64 {
        let s = self.sigma();
        self.n as f64 * s * s
    }

    /// Hex digest identifying the configuration.
    pub fn config_hash(&self) -> String {
        let canonical = format!(
            "n={};phi={:016x};law={};seed={};diag={}",
            self.n,
            self.phi.to_bits(),
            self.entry_law.as_str(),
            self.seed,
            self.include_diagonal
        );
        let digest = Sha256::digest(canonical.as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    fn check_allocation(&self) -> Result<()> {
        let bytes = (self.n as u128) * (self.n as u128) * 8;
        if bytes > self.memory_cap_bytes as u128 {
            return Err(LabError::OverflowGuard { n: self.n, bytes, cap: self.memory_cap_bytes as u128 });
        }
        Ok(())
    }

    /// Visits upper-triangle entries (i <= j) in row-major order for one trial.
    fn for_each_upper_entry<F: FnMut(usize, usize, f64)>(&self, trial_index: u64, mut visit: F) {
        let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(self.seed, trial_index));
        let p = self.sparsity_probability();
        let half = 0.5 * p;
        let a = self.magnitude();
        for i in 0..self.n {
            let start = if self.include_diagonal { i } else { i + 1 };
            for j in start..self.n {
                let u: f64 = rng.random();
                if u >= p {
                    continue;
                }
                let value = match self.entry_law {
                    EntryLaw::DilutedRademacher => {
                        if u < half {
                            a
                        } else {
                            -a
                        }
                    }
                    EntryLaw::DilutedGaussian => {
                        let g: f64 = rng.sample(StandardNormal);
                        a * g
                    }
                };
                visit(i, j, value);
            }
        }
    }
}

/// Dense symmetric sample, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MatrixSample {
    pub n: usize,
    pub entries: Vec<f64>,
    pub realized_nonzeros: usize,
    pub config_hash: String,
    pub trial_index: u64,
    /// Sparsity exponent of the generating ensemble, if known.
    pub phi: Option<f64>,
}

impl MatrixSample {
    pub fn from_dense(n: usize, entries: Vec<f64>) -> Self {
        assert_eq!(entries.len(), n * n);
        let realized_nonzeros = (0..n)
            .flat_map(|i| (i..n).map(move |j| (i, j)))
            .filter(|&(i, j)| entries[i * n + j] != 0.0)
            .count();
        Self { n, entries, realized_nonzeros, config_hash: String::new(), trial_index: 0, phi: None }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).collect::<CompensatedSum>().value()
    }

    /// Tr M^2 = sum_ij M_ij^2.
    pub fn trace_of_square(&self) -> f64 {
        self.entries.iter().map(|x| x * x).collect::<CompensatedSum>().value()
    }

    pub fn max_asymmetry(&self) -> f64 {
        let n = self.n;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in (i + 1)..n {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }
}

pub fn sample_matrix(cfg: &EnsembleConfig, trial_index: u64) -> Result<MatrixSample> {
    cfg.validate()?;
    cfg.check_allocation()?;
    let n = cfg.n;
    let mut entries = vec![0.0; n * n];
    let mut nonzeros = 0usize;
    cfg.for_each_upper_entry(trial_index, |i, j, v| {
        entries[i * n + j] = v;
        entries[j * n + i] = v;
        nonzeros += 1;
    });
    Ok(MatrixSample {
        n,
        entries,
        realized_nonzeros: nonzeros,
        config_hash: cfg.config_hash(),
        trial_index,
        phi: Some(cfg.phi),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarStatistics {
    /// Z = N^-1 Tr M^2 - 1.
    pub z_statistic: f64,
    pub sigma: f64,
    pub sigma_limit: f64,
}

pub fn scalar_statistics(cfg: &EnsembleConfig, m: &MatrixSample) -> ScalarStatistics {
    ScalarStatistics {
        z_statistic: m.trace_of_square() / m.n as f64 - 1.0,
        sigma: cfg.sigma(),
        sigma_limit: cfg.sigma_limit(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentRow {
    pub k: u32,
    /// Empirical E|M_ij|^k over upper-triangle entries and trials.
    pub empirical: f64,
    /// Scale N^-(1 + (k-2) phi).
    pub target: f64,
    /// Exact moment of the configured law.
    pub exact: f64,
    pub ratio: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentAudit {
    pub trials: usize,
    pub rows: Vec<MomentRow>,
}

impl MomentAudit {
    pub fn any_flagged(&self) -> bool {
        self.rows.iter().any(|r| r.flagged)
    }
}

pub fn moment_audit(cfg: &EnsembleConfig, trials: usize, k_max: u32) -> Result<MomentAudit> {
    cfg.validate()?;
    if trials < 100 {
        return Err(LabError::InsufficientTrials { got: trials, need: 100 });
    }
    if k_max < 2 {
        return Err(LabError::Precondition(format!("k_max must be at least 2, got {k_max}")));
    }
    let ks: Vec<u32> = (2..=k_max).filter(|k| k % 2 == 0).collect();
    let mut sums = vec![CompensatedSum::new(); ks.len()];
    for t in 0..trials {
        cfg.for_each_upper_entry(t as u64, |_, _, v| {
            let a = v.abs();
            for (acc, &k) in sums.iter_mut().zip(&ks) {
                acc.add(a.powi(k as i32));
            }
        });
    }
    let n = cfg.n as f64;
    let entries_per_trial = if cfg.include_diagonal { n * (n + 1.0) / 2.0 } else { n * (n - 1.0) / 2.0 };
    let denom = entries_per_trial * trials as f64;
    let rows = ks
        .iter()
        .zip(&sums)
        .map(|(&k, acc)| {
            let empirical = acc.value() / denom;
            let target = n.powf(-(1.0 + (k as f64 - 2.0) * cfg.phi));
            let ratio = empirical / target;
            MomentRow {
                k,
                empirical,
                target,
                exact: cfg.entry_abs_moment(k),
                ratio,
                flagged: !(0.25..=4.0).contains(&ratio),
            }
        })
        .collect();
    Ok(MomentAudit { trials, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_entries_take_diluted_values() {
        let cfg = EnsembleConfig::new(2, 0.25, 7);
        let a = (2.0 * 2f64.powf(-0.5)).powf(-0.5);
        assert!((cfg.magnitude() - a).abs() < 1e-15);
        for t in 0..50 {
            let m = sample_matrix(&cfg, t).unwrap();
            for &x in &m.entries {
                assert!(x == 0.0 || x == a || x == -a, "unexpected entry {x}");
            }
            assert_eq!(m.get(0, 1).to_bits(), m.get(1, 0).to_bits());
        }
    }

    #[test]
    fn wigner_boundary_and_out_of_range_rejected() {
        for phi in [0.5, 0.0, -0.1, 0.7, f64::NAN] {
            let cfg = EnsembleConfig::new(100, phi, 1);
            assert!(matches!(sample_matrix(&cfg, 0), Err(LabError::InvalidConfig(_))));
        }
        assert!(matches!(sample_matrix(&EnsembleConfig::new(1, 0.3, 1), 0), Err(LabError::InvalidConfig(_))));
    }

    #[test]
    fn overflow_guard_trips_before_allocation() {
        let mut cfg = EnsembleConfig::new(1000, 0.3, 1);
        cfg.memory_cap_bytes = 1000;
        assert!(matches!(sample_matrix(&cfg, 0), Err(LabError::OverflowGuard { .. })));
    }

    #[test]
    fn nonzero_fraction_within_binomial_band() {
        let cfg = EnsembleConfig::new(1000, 0.3, 11);
        let m = sample_matrix(&cfg, 0).unwrap();
        let p = cfg.sparsity_probability();
        assert!((p - 1000f64.powf(-0.4)).abs() < 1e-15);
        let slots = 1000.0 * 1001.0 / 2.0;
        let se = (slots * p * (1.0 - p)).sqrt();
        let dev = (m.realized_nonzeros as f64 - slots * p).abs();
        assert!(dev <= 3.0 * se, "nonzeros {} vs expected {}", m.realized_nonzeros, slots * p);
    }

    #[test]
    fn zero_matrix_gives_z_minus_one() {
        let cfg = EnsembleConfig::new(3, 0.3, 0);
        let m = MatrixSample::from_dense(3, vec![0.0; 9]);
        assert_eq!(scalar_statistics(&cfg, &m).z_statistic, -1.0);
    }

    #[test]
    fn rademacher_sigma_closed_form() {
        for (n, phi) in [(500usize, 0.2), (2000, 0.35), (1000, 0.45)] {
            let cfg = EnsembleConfig::new(n, phi, 0);
            let nf = n as f64;
            // sigma^2 = N^-2 * N^2 * p (Np)^-2 = N^(-1 - 2 phi)
            assert!((cfg.sigma().powi(2) / nf.powf(-1.0 - 2.0 * phi) - 1.0).abs() < 1e-12);
            assert!((cfg.sigma_limit() - 1.0).abs() < 1e-12);
            assert!((cfg.s_param() - nf.powf(-2.0 * phi)).abs() < 1e-15);
        }
        let g = EnsembleConfig::new(1000, 0.3, 0).with_law(EntryLaw::DilutedGaussian);
        assert!((g.sigma_limit() - 3f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn fourth_moment_matches_empirical() {
        let cfg = EnsembleConfig::new(400, 0.3, 5);
        let audit = moment_audit(&cfg, 100, 4).unwrap();
        let row4 = &audit.rows[1];
        assert_eq!(row4.k, 4);
        assert!((row4.exact / row4.target - 1.0).abs() < 1e-12);
        assert!((row4.ratio - 1.0).abs() < 0.05, "ratio {}", row4.ratio);
        let row2 = &audit.rows[0];
        assert!((row2.empirical * 400.0 - 1.0).abs() < 0.02);
    }

    #[test]
    fn moment_audit_requires_trials() {
        let cfg = EnsembleConfig::new(100, 0.3, 5);
        assert!(matches!(moment_audit(&cfg, 0, 4), Err(LabError::InsufficientTrials { .. })));
        assert!(matches!(moment_audit(&cfg, 99, 4), Err(LabError::InsufficientTrials { .. })));
    }

    #[test]
    fn gaussian_abs_moments() {
        let law = EntryLaw::DilutedGaussian;
        assert!((law.abs_moment(2) - 1.0).abs() < 1e-12);
        assert!((law.abs_moment(4) - 3.0).abs() < 1e-12);
        assert!((law.abs_moment(6) - 15.0).abs() < 1e-10);
    }
}
