use rand::Rng;
use serde::Serialize;

use super::config::{ExperimentConfig, Mode, ParamSpec};
use super::loss_pdf::{LossHistogram, LossPdf};
use super::{run_units, Moments, STREAM_HETERO, STREAM_HOMOGENEOUS};
use crate::copula::{
    bin_counts, deviation, gaussian_copula, pearson_correlation, rank_transform, CopulaHistogram, CopulaKind,
    DeviationGrid,
};
use crate::error::{Error, Result};
use crate::linalg::CorrelationMatrix;
use crate::merton::{simulate_loss_pairs, LossPairSample, PortfolioSpec};
use crate::rng::{MarketParams, StreamKey};

/// Losses below this count as "near zero" in the diagnostics.
pub const NEAR_ZERO_LOSS: f64 = 1e-3;

// Sub-streams of a work unit.
pub(super) const SUB_SIM: u64 = 0;
pub(super) const SUB_RANK1: u64 = 1;
pub(super) const SUB_RANK2: u64 = 2;
pub(super) const SUB_SIGMA: u64 = 3;
pub(super) const SUB_LEVERAGE: u64 = 4;
pub(super) const SUB_DRAW: u64 = 5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyResult {
    #[serde(rename = "K")]
    pub k: usize,
    pub averaged_copula: CopulaHistogram,
    pub gaussian_ref: CopulaHistogram,
    pub deviation: DeviationGrid,
    pub avg_loss_corr: f64,
    pub loss_corr_stderr: f64,
    /// Mean off-diagonal asset correlation over all `2K` companies.
    pub avg_asset_corr: f64,
    pub asset_corr_stderr: f64,
    /// Mean asset correlation between members of different portfolios.
    pub avg_cross_asset_corr: f64,
    /// Fraction of draws with exactly zero loss, per portfolio.
    pub nondefault_prob: [f64; 2],
    pub nondefault_stderr: [f64; 2],
    /// Fraction of draws with loss below [`NEAR_ZERO_LOSS`], per portfolio.
    pub near_zero_mass: [f64; 2],
    pub loss_pdf: [LossPdf; 2],
    pub n_pairs: usize,
    pub pairs_used: usize,
    pub skipped_pairs: usize,
    pub n_sims: usize,
}

/// What one portfolio pair (or window) contributes.
#[derive(Debug, Clone)]
pub(super) struct PairOutcome {
    pub counts: Option<Vec<u32>>,
    pub corr: Option<f64>,
    pub hist: Option<[LossHistogram; 2]>,
    pub near_zero: [u64; 2],
    pub asset_corr: f64,
    pub cross_corr: f64,
}

impl PairOutcome {
    pub fn from_sample(
        sample: &LossPairSample,
        key: StreamKey,
        cfg: &ExperimentConfig,
        full: bool,
        asset_corr: f64,
        cross_corr: f64,
    ) -> Result<Self> {
        let corr = match pearson_correlation(&sample.l1, &sample.l2) {
            Ok(c) => Some(c),
            Err(Error::ZeroVariance) => None,
            Err(e) => return Err(e),
        };
        let near = |l: &[f64]| l.iter().filter(|&&x| x < NEAR_ZERO_LOSS).count() as u64;
        let (counts, hist) = if full {
            let u = rank_transform(&sample.l1, key.child(SUB_RANK1));
            let v = rank_transform(&sample.l2, key.child(SUB_RANK2));
            let mut h1 = LossHistogram::new(cfg.pdf_bins)?;
            let mut h2 = LossHistogram::new(cfg.pdf_bins)?;
            for (&a, &b) in sample.l1.iter().zip(&sample.l2) {
                h1.add(a)?;
                h2.add(b)?;
            }
            (Some(bin_counts(&u, &v, cfg.b)?), Some([h1, h2]))
        } else {
            (None, None)
        };
        Ok(Self {
            counts,
            corr,
            hist,
            near_zero: [near(&sample.l1), near(&sample.l2)],
            asset_corr,
            cross_corr,
        })
    }
}

/// Index-ordered fold of [`PairOutcome`]s.
#[derive(Debug, Clone)]
pub(super) struct StudyAccumulator {
    b: usize,
    k: usize,
    n_sims: usize,
    counts: Vec<u64>,
    hist: [LossHistogram; 2],
    corr: Moments,
    zero_frac: [Moments; 2],
    near_zero: [u64; 2],
    asset: Moments,
    cross: Moments,
    units: usize,
}

impl StudyAccumulator {
    pub fn new(cfg: &ExperimentConfig, k: usize) -> Result<Self> {
        Ok(Self {
            b: cfg.b,
            k,
            n_sims: cfg.n_sims,
            counts: vec![0; cfg.b * cfg.b],
            hist: [LossHistogram::new(cfg.pdf_bins)?, LossHistogram::new(cfg.pdf_bins)?],
            corr: Moments::default(),
            zero_frac: [Moments::default(); 2],
            near_zero: [0; 2],
            asset: Moments::default(),
            cross: Moments::default(),
            units: 0,
        })
    }

    pub fn push(&mut self, o: PairOutcome) -> Result<()> {
        self.units += 1;
        if let Some(c) = o.corr {
            self.corr.push(c);
        }
        if let Some(counts) = &o.counts {
            for (a, &c) in self.counts.iter_mut().zip(counts) {
                *a += c as u64;
            }
        }
        if let Some(h) = &o.hist {
            for p in 0..2 {
                self.zero_frac[p].push(h[p].zeros() as f64 / h[p].total() as f64);
                self.hist[p].merge(&h[p])?;
            }
        }
        for p in 0..2 {
            self.near_zero[p] += o.near_zero[p];
        }
        self.asset.push(o.asset_corr);
        self.cross.push(o.cross_corr);
        Ok(())
    }

    pub fn finish(self) -> Result<StudyResult> {
        if self.corr.n == 0 {
            return Err(Error::NoUsablePairs);
        }
        let total: u64 = self.counts.iter().sum();
        let averaged = CopulaHistogram {
            b: self.b,
            n_samples: total,
            kind: CopulaKind::Averaged,
            masses: self.counts.iter().map(|&c| c as f64 / total.max(1) as f64).collect(),
        };
        let avg_corr = self.corr.mean();
        let gaussian_ref = gaussian_reference(avg_corr, self.b)?;
        let dev = deviation(&averaged, &gaussian_ref)?;
        let n_draws = (self.units * self.n_sims) as f64;
        Ok(StudyResult {
            k: self.k,
            averaged_copula: averaged,
            gaussian_ref,
            deviation: dev,
            avg_loss_corr: avg_corr,
            loss_corr_stderr: self.corr.stderr(),
            avg_asset_corr: self.asset.mean(),
            asset_corr_stderr: self.asset.stderr(),
            avg_cross_asset_corr: self.cross.mean(),
            nondefault_prob: [self.zero_frac[0].mean(), self.zero_frac[1].mean()],
            nondefault_stderr: [self.zero_frac[0].stderr(), self.zero_frac[1].stderr()],
            near_zero_mass: [self.near_zero[0] as f64 / n_draws, self.near_zero[1] as f64 / n_draws],
            loss_pdf: [self.hist[0].finish(), self.hist[1].finish()],
            n_pairs: self.units,
            pairs_used: self.corr.n,
            skipped_pairs: self.units - self.corr.n,
            n_sims: self.n_sims,
        })
    }
}

/// Gaussian copula at `c`; at `|c| = 1` the co- or countermonotone limit.
pub(super) fn gaussian_reference(c: f64, b: usize) -> Result<CopulaHistogram> {
    if c.abs() < 1.0 {
        return gaussian_copula(c, b);
    }
    let mut masses = vec![0.0; b * b];
    for i in 0..b {
        let j = if c > 0.0 { i } else { b - 1 - i };
        masses[i * b + j] = 1.0 / b as f64;
    }
    Ok(CopulaHistogram { b, n_samples: 0, kind: CopulaKind::Gaussian, masses })
}

fn per_contract<R: Rng>(spec: &ParamSpec, n: usize, rng: &mut R) -> Vec<f64> {
    match spec {
        ParamSpec::Scalar(x) => vec![*x; n],
        ParamSpec::PerContract(v) => v.clone(),
        ParamSpec::Uniform { low, high } if low == high => vec![*low; n],
        ParamSpec::Uniform { low, high } => (0..n).map(|_| rng.random_range(*low..=*high)).collect(),
    }
}

/// Simulates pair `key` of a synthetic (homogeneous-correlation) study.
pub(super) fn synthetic_pair(cfg: &ExperimentConfig, k: usize, c_a: f64, key: StreamKey, full: bool) -> Result<PairOutcome> {
    let n = 2 * k;
    let mu = per_contract(&cfg.mu, n, &mut key.child(SUB_DRAW).rng());
    let sigma = per_contract(&cfg.sigma, n, &mut key.child(SUB_SIGMA).rng());
    let leverage = per_contract(&cfg.leverage, n, &mut key.child(SUB_LEVERAGE).rng());
    let market = MarketParams::new(mu, sigma, CorrelationMatrix::homogeneous(n, c_a), cfg.tail_n, cfg.horizon)?;
    let p1 = PortfolioSpec::from_market(&market, (0..k).collect(), &leverage[..k])?;
    let p2 = PortfolioSpec::from_market(&market, (k..n).collect(), &leverage[k..])?;
    let sample = simulate_loss_pairs(&market, &p1, &p2, cfg.n_sims, key.child(SUB_SIM))?;
    PairOutcome::from_sample(&sample, key, cfg, full, c_a, c_a)
}

fn synthetic_study(cfg: &ExperimentConfig, stream: u64) -> Result<StudyResult> {
    let k = cfg.k.single().ok_or_else(|| Error::config("K", "this study takes a single portfolio size"))?;
    let c_a = cfg.c_a.single().ok_or_else(|| Error::config("c_a", "this study takes a single asset correlation"))?;
    let base = StreamKey::for_path(cfg.master_seed, &[stream]);
    let mut acc = StudyAccumulator::new(cfg, k)?;
    run_units(
        cfg.n_pairs,
        |i| synthetic_pair(cfg, k, c_a, base.child(i as u64), true),
        |_, o| acc.push(o),
    )?;
    acc.finish()
}

/// Copula study of `n_pairs` portfolio pairs with homogeneous parameters.
pub fn run_homogeneous_study(cfg: &ExperimentConfig) -> Result<StudyResult> {
    cfg.validate()?;
    if cfg.mode != Mode::Homogeneous {
        return Err(Error::config("mode", "expected homogeneous"));
    }
    synthetic_study(cfg, STREAM_HOMOGENEOUS)
}

/// As [`run_homogeneous_study`] with volatilities redrawn per pair from uniform bounds.
pub fn run_heterogeneous_sigma_study(cfg: &ExperimentConfig) -> Result<StudyResult> {
    cfg.validate()?;
    if cfg.mode != Mode::HeterogeneousSigma {
        return Err(Error::config("mode", "expected heterogeneous_sigma"));
    }
    synthetic_study(cfg, STREAM_HETERO)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::config::Grid;
    use crate::rng::TailParam;

    fn small() -> ExperimentConfig {
        ExperimentConfig { k: Grid::One(5), n_pairs: 6, n_sims: 400, pdf_bins: 50, ..Default::default() }
    }

    #[test]
    fn study_outputs_are_consistent() {
        let cfg = ExperimentConfig { c_a: Grid::One(0.3), ..small() };
        let r = run_homogeneous_study(&cfg).unwrap();
        assert!((r.averaged_copula.total_mass() - 1.0).abs() < 1e-12);
        assert_eq!(r.averaged_copula.n_samples, 6 * 400);
        for p in 0..2 {
            assert!((0.0..=1.0).contains(&r.nondefault_prob[p]));
            assert!((r.loss_pdf[p].continuous_mass() + r.loss_pdf[p].point_mass_at_zero - 1.0).abs() < 1e-9);
            assert!((r.loss_pdf[p].point_mass_at_zero - r.nondefault_prob[p]).abs() < 1e-12);
        }
        assert_eq!(r.pairs_used + r.skipped_pairs, 6);
        assert!(r.avg_loss_corr > 0.0);
    }

    #[test]
    fn same_seed_same_result() {
        let a = run_homogeneous_study(&small()).unwrap();
        let b = run_homogeneous_study(&small()).unwrap();
        assert_eq!(a, b);
        let c = run_homogeneous_study(&ExperimentConfig { master_seed: 2, ..small() }).unwrap();
        assert_ne!(a.avg_loss_corr, c.avg_loss_corr);
    }

    #[test]
    fn never_defaulting_pairs_are_skipped() {
        let cfg = ExperimentConfig { mu: ParamSpec::Scalar(0.05), sigma: ParamSpec::Scalar(0.001), ..small() };
        assert!(matches!(run_homogeneous_study(&cfg), Err(Error::NoUsablePairs)));
    }

    #[test]
    fn wrong_mode_or_grid_rejected() {
        let cfg = ExperimentConfig { mode: Mode::HeterogeneousSigma, ..small() };
        assert!(run_homogeneous_study(&cfg).is_err());
        let cfg = ExperimentConfig { c_a: Grid::Many(vec![0.1, 0.2]), ..small() };
        assert!(matches!(run_homogeneous_study(&cfg), Err(Error::Config { .. })));
        let cfg = ExperimentConfig { c_a: Grid::One(-0.9), k: Grid::One(50), ..small() };
        assert!(matches!(run_homogeneous_study(&cfg), Err(Error::Config { .. })));
    }

    #[test]
    fn perfectly_correlated_assets_give_comonotone_reference() {
        let cfg = ExperimentConfig { c_a: Grid::One(1.0), mu: ParamSpec::Scalar(-3e-3), tail_n: TailParam::Infinite, ..small() };
        let r = run_homogeneous_study(&cfg).unwrap();
        assert!((r.avg_loss_corr - 1.0).abs() < 1e-12);
        assert_eq!(r.gaussian_ref.mass(3, 3), 1.0 / 20.0);
    }
}
