//! Sampled GOE Tracy-Widom reference.
//!
//! The default route draws the tridiagonal model obtained by Householder
//! reduction of a GOE matrix: diagonal `N(0, 2/N)`, off-diagonal
//! `chi_{N-k} / sqrt(N)`. Its spectrum has exactly the GOE law, and the top
//! eigenvalue costs O(N) per bisection step. The dense route samples full
//! matrices and is kept as a cross-check.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::exec::Executor;
use super::stats::{moment_table, MomentTable};
use crate::error::{LabError, Result};
use crate::numeric::{mean, sample_variance, sub_seed};
use crate::spectra::{symmetric_eigenvalues, tridiagonal_max_eigenvalue};

pub const MIN_TW_SIZE: usize = 500;
pub const MIN_TW_TRIALS: usize = 500;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TwRoute {
    Tridiagonal,
    Dense,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwReference {
    pub matrix_size: usize,
    pub m_trials: usize,
    pub seed: u64,
    pub route: TwRoute,
    /// `N^{2/3} (lambda_1 - 2)`, ascending.
    pub sample: Vec<f64>,
    pub mean: f64,
    pub variance: f64,
}

impl TwReference {
    pub fn cdf(&self, x: f64) -> f64 {
        self.sample.partition_point(|&v| v <= x) as f64 / self.sample.len() as f64
    }

    pub fn std_error_of_mean(&self) -> f64 {
        (self.variance / self.sample.len() as f64).sqrt()
    }

    pub fn moments(&self) -> Result<MomentTable> {
        moment_table(&self.sample)
    }
}

fn top_eigenvalue(route: TwRoute, n: usize, rng: &mut ChaCha8Rng) -> Result<f64> {
    let nf = n as f64;
    match route {
        TwRoute::Tridiagonal => {
            let d: Vec<f64> = (0..n)
                .map(|_| rng.sample::<f64, _>(StandardNormal) * (2.0 / nf).sqrt())
                .collect();
            let mut e = Vec::with_capacity(n - 1);
            for k in 1..n {
                let chi2 = ChiSquared::new((n - k) as f64).map_err(|err| LabError::Precondition(err.to_string()))?;
                e.push((chi2.sample(rng) / nf).sqrt());
            }
            Ok(tridiagonal_max_eigenvalue(&d, &e))
        }
        TwRoute::Dense => {
            let scale = (2.0 * nf).sqrt().recip();
            let mut a = vec![0.0; n * n];
            for i in 0..n {
                for j in 0..=i {
                    let x: f64 = rng.sample(StandardNormal);
                    let y: f64 = if i == j { x } else { rng.sample(StandardNormal) };
                    let v = (x + y) * scale;
                    a[i * n + j] = v;
                    a[j * n + i] = v;
                }
            }
            let ev = symmetric_eigenvalues(n, &a)?;
            Ok(ev.into_iter().fold(f64::NEG_INFINITY, f64::max))
        }
    }
}

pub fn tw1_reference_sample_with(
    route: TwRoute,
    m_trials: usize,
    matrix_size: usize,
    seed: u64,
    exec: Executor,
) -> Result<TwReference> {
    if matrix_size < MIN_TW_SIZE {
        return Err(LabError::Precondition(format!("matrix_size {matrix_size} is below {MIN_TW_SIZE}")));
    }
    if m_trials < MIN_TW_TRIALS {
        return Err(LabError::InsufficientTrials { got: m_trials, need: MIN_TW_TRIALS });
    }
    let scale = (matrix_size as f64).powf(2.0 / 3.0);
    let draws = exec.map(m_trials, |t| {
        let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, t as u64));
        top_eigenvalue(route, matrix_size, &mut rng).map(|l| scale * (l - 2.0))
    });
    let mut sample = draws.into_iter().collect::<Result<Vec<f64>>>()?;
    sample.sort_by(f64::total_cmp);
    let mean = mean(&sample);
    let variance = sample_variance(&sample).unwrap_or(0.0);
    Ok(TwReference { matrix_size, m_trials, seed, route, sample, mean, variance })
}

/// Tridiagonal-route reference.
pub fn tw1_reference_sample(m_trials: usize, matrix_size: usize, seed: u64, exec: Executor) -> Result<TwReference> {
    tw1_reference_sample_with(TwRoute::Tridiagonal, m_trials, matrix_size, seed, exec)
}
