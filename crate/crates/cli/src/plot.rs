//! Plot data as plain text.
//!
//! Histogram files (three columns): `bin_center empirical_density
//! predicted_density`, densities normalized to unit area; `nan` when there is
//! no prediction. Curve files (two columns): `x predicted_density` on a fine
//! grid spanning the histogram range. Both start with `#` comment lines.

use std::f64::consts::PI;
use std::io::Write;

pub const CURVE_POINTS: usize = 400;

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub lo: f64,
    pub width: f64,
    pub counts: Vec<usize>,
    pub total: usize,
}

impl Histogram {
    /// Equal-width bins over the sample range.
    pub fn new(xs: &[f64], bins: usize) -> Self {
        let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (lo, hi) = if !lo.is_finite() {
            (0.0, 1.0)
        } else if hi > lo {
            (lo, hi)
        } else {
            (lo - 0.5, lo + 0.5)
        };
        let width = (hi - lo) / bins as f64;
        let mut counts = vec![0; bins];
        for &x in xs {
            let b = (((x - lo) / width) as usize).min(bins - 1);
            counts[b] += 1;
        }
        Self { lo, width, counts, total: xs.len() }
    }

    pub fn hi(&self) -> f64 {
        self.lo + self.width * self.counts.len() as f64
    }

    pub fn center(&self, b: usize) -> f64 {
        self.lo + (b as f64 + 0.5) * self.width
    }

    pub fn density(&self, b: usize) -> f64 {
        self.counts[b] as f64 / (self.total.max(1) as f64 * self.width)
    }
}

pub fn write_histogram<W: Write>(
    mut out: W,
    header: &str,
    hist: &Histogram,
    predicted: Option<&dyn Fn(f64) -> f64>,
) -> std::io::Result<()> {
    writeln!(out, "# {header}")?;
    writeln!(out, "# columns: bin_center empirical_density predicted_density")?;
    for b in 0..hist.counts.len() {
        let x = hist.center(b);
        let p = predicted.map_or(f64::NAN, |f| f(x));
        writeln!(out, "{x} {} {p}", hist.density(b))?;
    }
    Ok(())
}

pub fn write_curve<W: Write>(mut out: W, header: &str, lo: f64, hi: f64, f: &dyn Fn(f64) -> f64) -> std::io::Result<()> {
    writeln!(out, "# {header}")?;
    writeln!(out, "# columns: x predicted_density")?;
    for i in 0..CURVE_POINTS {
        let x = lo + (hi - lo) * i as f64 / (CURVE_POINTS - 1) as f64;
        writeln!(out, "{x} {}", f(x))?;
    }
    Ok(())
}

pub fn gaussian_pdf(mean: f64, variance: f64) -> impl Fn(f64) -> f64 {
    let sd = variance.sqrt();
    move |x| (-0.5 * ((x - mean) / sd).powi(2)).exp() / (sd * (2.0 * PI).sqrt())
}

/// Density of `scale * T + G`, `T` drawn from `sample` and `G ~ N(0, extra_var)`,
/// smoothed with a Gaussian kernel of Silverman bandwidth.
pub fn smoothed_density(sample: &[f64], scale: f64, extra_var: f64) -> impl Fn(f64) -> f64 + '_ {
    let m = sample.len() as f64;
    let mean = sample.iter().sum::<f64>() / m;
    let var = sample.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1.0).max(1.0);
    let h = 1.06 * var.sqrt() * m.powf(-0.2) * scale.abs();
    let sd = (h * h + extra_var).sqrt();
    let norm = 1.0 / (m * sd * (2.0 * PI).sqrt());
    move |x| norm * sample.iter().map(|t| (-0.5 * ((x - scale * t) / sd).powi(2)).exp()).sum::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_has_unit_area() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64 * 0.37).sin()).collect();
        let h = Histogram::new(&xs, 17);
        assert_eq!(h.counts.iter().sum::<usize>(), 1000);
        let area: f64 = (0..17).map(|b| h.density(b) * h.width).sum();
        assert!((area - 1.0).abs() < 1e-12);
        assert!((h.hi() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn constant_sample_gets_a_unit_range() {
        let h = Histogram::new(&[2.0; 5], 4);
        assert_eq!((h.lo, h.hi()), (1.5, 2.5));
        assert_eq!(h.counts.iter().sum::<usize>(), 5);
    }

    #[test]
    fn smoothed_density_integrates_to_one() {
        let sample: Vec<f64> = (0..200).map(|i| (i as f64 / 200.0 - 0.5) * 3.0).collect();
        let f = smoothed_density(&sample, 2.0, 0.3);
        let dx = 0.01;
        let area: f64 = (0..2000).map(|i| f(-10.0 + i as f64 * dx) * dx).sum();
        assert!((area - 1.0).abs() < 1e-6, "{area}");
    }
}
