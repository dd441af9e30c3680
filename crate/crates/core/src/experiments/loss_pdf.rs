//! Portfolio-loss densities with the non-default atom at zero kept apart.

use serde::Serialize;

use crate::error::{Error, Result};

/// Density of strictly positive losses on `n` equal bins of `(0, 1]`, plus
/// the probability of an exact zero loss.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LossPdf {
    pub point_mass_at_zero: f64,
    pub n_samples: u64,
    pub density: Vec<f64>,
}

impl LossPdf {
    pub fn bin_width(&self) -> f64 {
        1.0 / self.density.len() as f64
    }

    /// `(left, right, density)` per bin.
    pub fn bins(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        let n = self.density.len() as f64;
        self.density.iter().enumerate().map(move |(i, &d)| (i as f64 / n, (i + 1) as f64 / n, d))
    }

    /// Integral of the continuous part.
    pub fn continuous_mass(&self) -> f64 {
        self.density.iter().sum::<f64>() * self.bin_width()
    }
}

/// Count accumulator behind [`LossPdf`]; merged across work units.
#[derive(Debug, Clone, PartialEq)]
pub struct LossHistogram {
    zeros: u64,
    total: u64,
    counts: Vec<u64>,
}

impl LossHistogram {
    pub fn new(n_bins: usize) -> Result<Self> {
        if n_bins < 1 {
            return Err(Error::invalid("n_bins", "must be >= 1"));
        }
        Ok(Self { zeros: 0, total: 0, counts: vec![0; n_bins] })
    }

    pub fn add(&mut self, loss: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&loss) {
            return Err(Error::invalid("losses", format!("{loss} outside [0, 1]")));
        }
        self.total += 1;
        if loss == 0.0 {
            self.zeros += 1;
        } else {
            let n = self.counts.len();
            let bin = ((loss * n as f64).ceil() as usize).clamp(1, n) - 1;
            self.counts[bin] += 1;
        }
        Ok(())
    }

    pub fn merge(&mut self, other: &LossHistogram) -> Result<()> {
        if other.counts.len() != self.counts.len() {
            return Err(Error::LengthMismatch { left: self.counts.len(), right: other.counts.len() });
        }
        self.zeros += other.zeros;
        self.total += other.total;
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }

    pub fn zeros(&self) -> u64 {
        self.zeros
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn finish(&self) -> LossPdf {
        let n = self.counts.len() as f64;
        let total = self.total.max(1) as f64;
        LossPdf {
            point_mass_at_zero: if self.total == 0 { 0.0 } else { self.zeros as f64 / total },
            n_samples: self.total,
            density: self.counts.iter().map(|&c| c as f64 / total * n).collect(),
        }
    }
}

/// Loss density of `losses ∈ [0, 1]` on `n_bins` bins with the zero atom reported separately.
pub fn loss_pdf(losses: &[f64], n_bins: usize) -> Result<LossPdf> {
    let mut h = LossHistogram::new(n_bins)?;
    for &l in losses {
        h.add(l)?;
    }
    Ok(h.finish())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_zeros() {
        let pdf = loss_pdf(&[0.0; 10], 5).unwrap();
        assert_eq!(pdf.point_mass_at_zero, 1.0);
        assert!(pdf.density.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn mass_balance() {
        let losses: Vec<f64> = (0..1000).map(|i| if i % 3 == 0 { 0.0 } else { (i as f64 / 1000.0).powi(2) }).collect();
        let pdf = loss_pdf(&losses, 37).unwrap();
        assert!((pdf.continuous_mass() + pdf.point_mass_at_zero - 1.0).abs() < 1e-9);
        assert!((pdf.point_mass_at_zero - 334.0 / 1000.0).abs() < 1e-15);
    }

    #[test]
    fn edges_and_errors() {
        let pdf = loss_pdf(&[1.0, 0.5, 1e-12], 2).unwrap();
        assert_eq!(pdf.density, vec![2.0 / 3.0 * 2.0, 1.0 / 3.0 * 2.0]);
        assert!(loss_pdf(&[0.1], 0).is_err());
        assert!(loss_pdf(&[1.5], 4).is_err());
        assert!(loss_pdf(&[-0.1], 4).is_err());
    }

    #[test]
    fn merge_equals_single_pass() {
        let xs: Vec<f64> = (0..200).map(|i| (i % 17) as f64 / 16.0).collect();
        let mut a = LossHistogram::new(8).unwrap();
        let mut b = LossHistogram::new(8).unwrap();
        xs[..90].iter().for_each(|&x| a.add(x).unwrap());
        xs[90..].iter().for_each(|&x| b.add(x).unwrap());
        a.merge(&b).unwrap();
        assert_eq!(a.finish(), loss_pdf(&xs, 8).unwrap());
    }
}
