//! Eigenvalues of dense symmetric samples and the empirical spectral measure.

pub mod tridiag;

use serde::{Deserialize, Serialize};

use crate::ensemble::MatrixSample;
use crate::error::{LabError, Result};
use crate::numeric::compensated_sum;

pub use tridiag::{tridiagonal_eigenvalues, tridiagonal_max_eigenvalue, tridiagonalize};

/// Sorted spectrum of one draw, largest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSample {
    pub eigenvalues: Vec<f64>,
    pub z_statistic: f64,
    pub n: usize,
    pub phi: Option<f64>,
    pub trial_index: u64,
}

impl SpectrumSample {
    /// Wraps a precomputed spectrum; sorts descending and derives Z from it.
    pub fn from_eigenvalues(mut eigenvalues: Vec<f64>, phi: Option<f64>) -> Self {
        eigenvalues.sort_by(|a, b| b.total_cmp(a));
        let n = eigenvalues.len();
        let z = compensated_sum(eigenvalues.iter().map(|x| x * x)) / n as f64 - 1.0;
        Self { eigenvalues, z_statistic: z, n, phi, trial_index: 0 }
    }

    pub fn lambda_max(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn lambda_min(&self) -> f64 {
        self.eigenvalues[self.n - 1]
    }
}

/// Eigenvalues of a symmetric matrix given row-major; unsorted.
///
/// Runs Householder tridiagonalization then implicit QL with a budget of
/// 30 n sweeps.
pub fn symmetric_eigenvalues(n: usize, entries: &[f64]) -> Result<Vec<f64>> {
    if entries.len() != n * n {
        return Err(LabError::Precondition(format!("expected {} entries, got {}", n * n, entries.len())));
    }
    if let Some(x) = entries.iter().find(|x| !x.is_finite()) {
        return Err(LabError::Precondition(format!("non-finite matrix entry {x}")));
    }
    let mut work = entries.to_vec();
    let (d, e) = tridiagonalize(&mut work, n);
    drop(work);
    tridiagonal_eigenvalues(d, &e, 30 * n.max(1))
}

/// Full spectrum of `m`, validated against the trace identities.
pub fn eigenvalues(m: &MatrixSample) -> Result<SpectrumSample> {
    let n = m.n;
    let mut ev = symmetric_eigenvalues(n, &m.entries)?;
    ev.sort_by(|a, b| b.total_cmp(a));

    let tr2 = m.trace_of_square();
    let sum_sq = compensated_sum(ev.iter().map(|x| x * x));
    if (sum_sq - tr2).abs() > 1e-9 * tr2.max(f64::MIN_POSITIVE) && tr2 > 0.0 {
        return Err(LabError::AccuracyGate(format!("sum of squares {sum_sq} vs Tr M^2 {tr2}")));
    }
    let tr = m.trace();
    let sum = compensated_sum(ev.iter().copied());
    let diag_mass: f64 = (0..n).map(|i| m.get(i, i).abs()).sum();
    // absolute tolerance per unit of diagonal mass, floored by the spectral scale
    let tol = 1e-9 * (diag_mass + tr2.sqrt().max(1.0));
    if (sum - tr).abs() > tol {
        return Err(LabError::AccuracyGate(format!("eigenvalue sum {sum} vs trace {tr}")));
    }

    Ok(SpectrumSample {
        eigenvalues: ev,
        z_statistic: tr2 / n as f64 - 1.0,
        n,
        phi: m.phi,
        trial_index: m.trial_index,
    })
}

/// Fraction of eigenvalues at or below `x`.
pub fn empirical_cdf(s: &SpectrumSample, x: f64) -> f64 {
    // eigenvalues are descending, so count from the tail
    let above = s.eigenvalues.partition_point(|&l| l > x);
    (s.n - above) as f64 / s.n as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_off_diagonal() {
        let a = 0.7;
        let m = MatrixSample::from_dense(2, vec![0.0, a, a, 0.0]);
        let s = eigenvalues(&m).unwrap();
        assert!((s.eigenvalues[0] - a).abs() < 1e-15);
        assert!((s.eigenvalues[1] + a).abs() < 1e-15);
    }

    #[test]
    fn scaled_identity() {
        let n = 6;
        let mut e = vec![0.0; n * n];
        for i in 0..n {
            e[i * n + i] = 1.5;
        }
        let s = eigenvalues(&MatrixSample::from_dense(n, e)).unwrap();
        assert!(s.eigenvalues.iter().all(|&l| l == 1.5));
    }

    #[test]
    fn empirical_cdf_endpoints_and_median() {
        let s = SpectrumSample::from_eigenvalues(vec![3.0, -1.0, 0.5, 2.0], None);
        assert_eq!(empirical_cdf(&s, -2.0), 0.0);
        assert_eq!(empirical_cdf(&s, 3.0), 1.0);
        assert_eq!(empirical_cdf(&s, 0.5), 0.5);
    }

    #[test]
    fn rejects_non_finite_entries() {
        let m = MatrixSample::from_dense(2, vec![0.0, f64::NAN, f64::NAN, 0.0]);
        assert!(eigenvalues(&m).is_err());
    }
}
