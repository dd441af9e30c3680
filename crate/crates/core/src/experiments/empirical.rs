use rand::Rng;
use serde::Serialize;

use super::config::{ExperimentConfig, Mode, Pairing};
use super::study::{PairOutcome, StudyAccumulator, StudyResult, SUB_DRAW, SUB_SIM};
use super::sweep::{CurvePoint, LossCorrCurve};
use super::{run_units, STREAM_EMPIRICAL, STREAM_PARTITION, STREAM_WINDOWS};
use crate::error::{Error, Result};
use crate::linalg::cholesky_factor;
use crate::market_data::{
    draw_portfolio_pair, estimate_window_subset, partition_submarkets, window_moments, PanelOptions, PriceTable,
    ReturnPanel, Universe, WINDOW_LEN,
};
use crate::merton::{simulate_loss_pairs, PortfolioSpec};
use crate::rng::{MarketParams, StreamKey};

/// Diagonal loading applied when a window's correlation estimate fails to factor.
pub const LOADING_EPS: f64 = 1e-6;

/// A return panel plus the pools the two portfolios are drawn from.
#[derive(Debug, Clone)]
pub struct EmpiricalMarkets {
    pub panel: ReturnPanel,
    pub universe: Universe,
    pub pairing: Pairing,
}

impl EmpiricalMarkets {
    /// Builds the panel and pools for `pairing`.
    ///
    /// Cross pairing joins both price tables on common dates and draws one
    /// portfolio from each; within pairing uses a single market split into
    /// two random halves (seeded by `master_seed`).
    pub fn from_prices(
        a: &PriceTable,
        b: Option<&PriceTable>,
        pairing: Pairing,
        opts: &PanelOptions,
        master_seed: u64,
    ) -> Result<Self> {
        let need_b = || b.ok_or_else(|| Error::config("market_b", "this pairing needs a second market"));
        match pairing {
            Pairing::Cross => {
                let b = need_b()?;
                let panel = ReturnPanel::from_prices(&a.inner_join(b), opts)?;
                let n_a = a.tickers.len();
                let (pool_a, pool_b): (Vec<usize>, Vec<usize>) =
                    (0..panel.n_tickers()).partition(|&i| panel.report.kept_columns[i] < n_a);
                Self::split(panel, pool_a, pool_b)
            }
            Pairing::WithinA => Ok(Self::within(ReturnPanel::from_prices(a, opts)?, pairing, master_seed)),
            Pairing::WithinB => Ok(Self::within(ReturnPanel::from_prices(need_b()?, opts)?, pairing, master_seed)),
        }
    }

    /// Explicit pools over one panel.
    pub fn split(panel: ReturnPanel, pool_a: Vec<usize>, pool_b: Vec<usize>) -> Result<Self> {
        let n = panel.n_tickers();
        if let Some(&bad) = pool_a.iter().chain(&pool_b).find(|&&i| i >= n) {
            return Err(Error::IndexOutOfRange { index: bad, len: n });
        }
        if let Some(&dup) = pool_a.iter().find(|i| pool_b.contains(i)) {
            return Err(Error::OverlappingPortfolios { index: dup });
        }
        Ok(Self { panel, universe: Universe::Split(pool_a, pool_b), pairing: Pairing::Cross })
    }

    /// One market halved at random.
    pub fn within(panel: ReturnPanel, pairing: Pairing, master_seed: u64) -> Self {
        let all: Vec<usize> = (0..panel.n_tickers()).collect();
        let (a, b) = partition_submarkets(&all, StreamKey::for_path(master_seed, &[STREAM_PARTITION]));
        Self { panel, universe: Universe::Split(a, b), pairing }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalResult {
    pub pairing: Pairing,
    /// One study per portfolio size.
    pub studies: Vec<StudyResult>,
    /// Averaged asset and loss correlation per portfolio size.
    pub curves: Vec<LossCorrCurve>,
}

fn iteration(cfg: &ExperimentConfig, markets: &EmpiricalMarkets, k: usize, i: usize) -> Result<PairOutcome> {
    let panel = &markets.panel;
    let last_start = panel.n_dates() - WINDOW_LEN;
    let start = StreamKey::for_path(cfg.master_seed, &[STREAM_WINDOWS, i as u64]).rng().random_range(0..=last_start);
    let key = StreamKey::for_path(cfg.master_seed, &[STREAM_EMPIRICAL, k as u64, i as u64]);

    let (mu_all, sigma_all) = window_moments(panel, start)?;
    let eligible = markets.universe.filter(|c| sigma_all[c] > 0.0);
    let (d1, d2) = draw_portfolio_pair(&eligible, k, cfg.leverage_bounds()?, &mu_all, &sigma_all, key.child(SUB_DRAW))?;

    let mut union: Vec<usize> = d1.members.iter().chain(&d2.members).copied().collect();
    union.sort_unstable();
    let est = estimate_window_subset(panel, start, &union)?;
    let corr = match cholesky_factor(&est.corr) {
        Ok(_) => est.corr.clone(),
        Err(Error::NotPositiveDefinite { .. }) => est.corr.diagonally_loaded(LOADING_EPS),
        Err(e) => return Err(e),
    };
    let market = MarketParams::new(est.mu.clone(), est.sigma.clone(), corr, cfg.tail_n, cfg.horizon)?;

    let local = |d: &PortfolioSpec| -> Result<PortfolioSpec> {
        let members = d.members.iter().map(|m| union.binary_search(m).expect("member in union")).collect();
        let leverages: Vec<f64> = d.contracts.iter().map(|c| c.leverage).collect();
        PortfolioSpec::from_market(&market, members, &leverages)
    };
    let p1 = local(&d1)?;
    let p2 = local(&d2)?;
    let sample = simulate_loss_pairs(&market, &p1, &p2, cfg.n_sims, key.child(SUB_SIM))?;

    let mut cross = 0.0;
    for &a in &p1.members {
        for &b in &p2.members {
            cross += market.corr.get(a, b);
        }
    }
    cross /= (k * k) as f64;
    PairOutcome::from_sample(&sample, key, cfg, true, est.mean_offdiag, cross)
}

/// Window-resampling study on market data: for every portfolio size, draws
/// `n_iterations` random annual windows, estimates the market on each and
/// simulates one portfolio pair per window.
pub fn run_empirical_study(cfg: &ExperimentConfig, markets: &EmpiricalMarkets) -> Result<EmpiricalResult> {
    cfg.validate()?;
    if cfg.mode != Mode::Empirical {
        return Err(Error::config("mode", "expected empirical"));
    }
    if markets.panel.n_dates() < WINDOW_LEN {
        return Err(Error::TooShortHistory {
            ticker: markets.panel.tickers.first().cloned().unwrap_or_default(),
            observations: markets.panel.n_dates(),
            required: WINDOW_LEN,
        });
    }
    let mut studies = Vec::new();
    let mut curves = Vec::new();
    for k in cfg.k.values() {
        let mut acc = StudyAccumulator::new(cfg, k)?;
        run_units(cfg.n_iterations, |i| iteration(cfg, markets, k, i), |_, o| acc.push(o))?;
        let study = acc.finish()?;
        curves.push(LossCorrCurve {
            k,
            points: vec![CurvePoint {
                c_a: study.avg_asset_corr,
                corr: study.avg_loss_corr,
                stderr: study.loss_corr_stderr,
                n_pairs_used: study.pairs_used,
            }],
        });
        studies.push(study);
    }
    Ok(EmpiricalResult { pairing: markets.pairing, studies, curves })
}
