//! Numerical laboratory for the spherical Sherrington-Kirkpatrick model with
//! sparse couplings.
//!
//! - [`ensemble`]: sparse symmetric samples and their trace statistic.
//! - [`spectra`]: dense eigenvalues with trace-identity self checks.
//! - [`law`]: the quartic deterministic law, its edges, quantiles and quadrature.
//! - [`free_energy`]: saddle point and contour evaluations of the free energy.
//! - [`experiments`]: Monte Carlo suites, KS and moment statistics, the TW reference.

pub mod ensemble;
pub mod error;
pub mod experiments;
pub mod free_energy;
pub mod law;
pub mod numeric;
pub mod spectra;

pub use error::{LabError, Result};
