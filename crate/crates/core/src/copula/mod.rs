//! Copula histograms: rank transforms, empirical binning, Gaussian references.
//!
//! A [`CopulaHistogram`] stores `b × b` bin masses in row-major order, row
//! index along `u` and column index along `v`. The density of a bin is its
//! mass times `b²`, so the independence copula is flat at one.

pub mod bvn;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::StreamKey;
use bvn::{bvn_cdf, norm_quantile};

/// Bins per axis used throughout the studies.
pub const DEFAULT_BINS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CopulaKind {
    Empirical,
    Gaussian,
    Averaged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CopulaHistogram {
    pub b: usize,
    pub n_samples: u64,
    pub kind: CopulaKind,
    pub masses: Vec<f64>,
}

impl CopulaHistogram {
    pub fn mass(&self, i: usize, j: usize) -> f64 {
        self.masses[i * self.b + j]
    }

    pub fn density(&self, i: usize, j: usize) -> f64 {
        self.mass(i, j) * (self.b * self.b) as f64
    }

    pub fn densities(&self) -> Vec<f64> {
        let scale = (self.b * self.b) as f64;
        self.masses.iter().map(|m| m * scale).collect()
    }

    pub fn total_mass(&self) -> f64 {
        self.masses.iter().sum()
    }

    /// Mass per `u`-bin.
    pub fn row_sums(&self) -> Vec<f64> {
        self.masses.chunks_exact(self.b).map(|row| row.iter().sum()).collect()
    }

    /// Mass per `v`-bin.
    pub fn col_sums(&self) -> Vec<f64> {
        (0..self.b).map(|j| (0..self.b).map(|i| self.mass(i, j)).sum()).collect()
    }

    /// Largest `|density(i, j) − density(j, i)|`.
    pub fn max_transpose_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.b {
            for j in 0..i {
                worst = worst.max((self.density(i, j) - self.density(j, i)).abs());
            }
        }
        worst
    }
}

/// Signed density differences `empirical − reference`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationGrid {
    pub b: usize,
    pub n_samples: u64,
    pub kind: String,
    pub densities: Vec<f64>,
}

impl DeviationGrid {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.densities[i * self.b + j]
    }

    pub fn max_abs(&self) -> f64 {
        self.densities.iter().fold(0.0, |m, d| m.max(d.abs()))
    }
}

/// Normalised ranks `k/n`, ties broken uniformly at random from `key`.
///
/// Tied values are ordered by an independent random key, so a block of equal
/// values (the atom of non-defaults at zero loss) is spread over consecutive
/// ranks instead of collapsing into one.
pub fn rank_transform(x: &[f64], key: StreamKey) -> Vec<f64> {
    let n = x.len();
    let mut rng = key.rng();
    let mut order: Vec<(usize, u64)> = (0..n).map(|i| (i, rng.random())).collect();
    order.sort_unstable_by(|a, b| x[a.0].total_cmp(&x[b.0]).then(a.1.cmp(&b.1)).then(a.0.cmp(&b.0)));
    let mut ranks = vec![0.0; n];
    for (k, &(i, _)) in order.iter().enumerate() {
        ranks[i] = (k + 1) as f64 / n as f64;
    }
    ranks
}

/// Bin of `u ∈ (0, 1]` on a `b`-grid of half-open cells `(i/b, (i+1)/b]`, with 0 in the first cell.
///
/// Values within 1e-9 of a bin edge are snapped onto it so that ranks `k/n`
/// land in the bin exact arithmetic would put them in.
pub(crate) fn bin_index(u: f64, b: usize) -> usize {
    let x = u * b as f64;
    let nearest = x.round();
    let ceil = if (x - nearest).abs() < 1e-9 { nearest } else { x.ceil() };
    (ceil as i64 - 1).clamp(0, b as i64 - 1) as usize
}

fn check_bins(b: usize) -> Result<()> {
    if b < 1 {
        return Err(Error::invalid("b", "bin count must be >= 1"));
    }
    Ok(())
}

/// Counts pairs per bin; used by the experiments to accumulate before normalising.
pub(crate) fn bin_counts(u: &[f64], v: &[f64], b: usize) -> Result<Vec<u32>> {
    check_bins(b)?;
    if u.len() != v.len() {
        return Err(Error::LengthMismatch { left: u.len(), right: v.len() });
    }
    let mut counts = vec![0u32; b * b];
    for (&x, &y) in u.iter().zip(v) {
        counts[bin_index(x, b) * b + bin_index(y, b)] += 1;
    }
    Ok(counts)
}

/// Two-dimensional histogram of rank pairs, normalised to unit mass.
pub fn empirical_copula(u: &[f64], v: &[f64], b: usize) -> Result<CopulaHistogram> {
    let counts = bin_counts(u, v, b)?;
    if u.is_empty() {
        return Err(Error::Empty("rank samples"));
    }
    let n = u.len() as f64;
    Ok(CopulaHistogram {
        b,
        n_samples: u.len() as u64,
        kind: CopulaKind::Empirical,
        masses: counts.iter().map(|&c| c as f64 / n).collect(),
    })
}

/// Gaussian copula with correlation `c`, binned on the `b × b` grid.
///
/// Bin masses are bivariate-normal rectangle probabilities between the normal
/// quantiles of the bin edges.
pub fn gaussian_copula(c: f64, b: usize) -> Result<CopulaHistogram> {
    check_bins(b)?;
    if !(c.abs() < 1.0) {
        return Err(Error::invalid("c", format!("correlation {c} must lie in (-1, 1)")));
    }
    let edges: Vec<f64> = (0..=b).map(|i| norm_quantile(i as f64 / b as f64)).collect();
    // cdf[i][j] = P[X ≤ edge_i, Y ≤ edge_j]
    let mut cdf = vec![0.0; (b + 1) * (b + 1)];
    for i in 0..=b {
        for j in 0..=b {
            cdf[i * (b + 1) + j] = match (i, j) {
                (0, _) | (_, 0) => 0.0,
                // Marginal edges are exact quantiles, so Φ(edge_j) = j/b.
                (i, j) if i == b => j as f64 / b as f64,
                (i, j) if j == b => i as f64 / b as f64,
                _ => bvn_cdf(edges[i], edges[j], c),
            };
        }
    }
    let at = |i: usize, j: usize| cdf[i * (b + 1) + j];
    let mut masses = Vec::with_capacity(b * b);
    for i in 0..b {
        for j in 0..b {
            let m = at(i + 1, j + 1) - at(i, j + 1) - at(i + 1, j) + at(i, j);
            masses.push(m.max(0.0));
        }
    }
    Ok(CopulaHistogram { b, n_samples: 0, kind: CopulaKind::Gaussian, masses })
}

/// Entrywise density difference `emp − reference`.
pub fn deviation(emp: &CopulaHistogram, reference: &CopulaHistogram) -> Result<DeviationGrid> {
    if emp.b != reference.b {
        return Err(Error::LengthMismatch { left: emp.b, right: reference.b });
    }
    let scale = (emp.b * emp.b) as f64;
    Ok(DeviationGrid {
        b: emp.b,
        n_samples: emp.n_samples,
        kind: "deviation".to_string(),
        densities: emp.masses.iter().zip(&reference.masses).map(|(a, r)| (a - r) * scale).collect(),
    })
}

/// Product-moment correlation. Fails with [`Error::ZeroVariance`] if either input is constant.
pub fn pearson_correlation(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch { left: x.len(), right: y.len() });
    }
    if x.len() < 2 {
        return Err(Error::invalid("x", "need at least two observations"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    let constant = |v: &[f64]| v.iter().all(|a| *a == v[0]);
    if sxx == 0.0 || syy == 0.0 || constant(x) || constant(y) {
        return Err(Error::ZeroVariance);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Unweighted mean of histogram masses.
pub fn average_histograms(hists: &[CopulaHistogram]) -> Result<CopulaHistogram> {
    let first = hists.first().ok_or(Error::Empty("histogram list"))?;
    let mut masses = vec![0.0; first.masses.len()];
    let mut n_samples = 0;
    for h in hists {
        if h.b != first.b {
            return Err(Error::LengthMismatch { left: h.b, right: first.b });
        }
        for (acc, m) in masses.iter_mut().zip(&h.masses) {
            *acc += m;
        }
        n_samples += h.n_samples;
    }
    let k = hists.len() as f64;
    masses.iter_mut().for_each(|m| *m /= k);
    Ok(CopulaHistogram { b: first.b, n_samples, kind: CopulaKind::Averaged, masses })
}
