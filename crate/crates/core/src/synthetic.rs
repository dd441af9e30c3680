//! Synthetic return panels for fixtures and pipeline self-checks.

use chrono::{Datelike, NaiveDate, Weekday};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::{cholesky_factor, CorrelationMatrix};
use crate::market_data::{ReturnPanel, WINDOW_LEN};
use crate::rng::{MarketParams, ReturnSampler, StreamKey};

/// `n` consecutive weekdays from `start` on.
pub fn trading_days(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    start
        .iter_days()
        .filter(|d| !matches!(d.weekday(), Weekday::Sat | Weekday::Sun))
        .take(n)
        .collect()
}

fn ticker_names(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("S{i:03}")).collect()
}

/// Daily log-returns `(μ − σ²/2) + σ·ε` with `ε` drawn from the market's
/// (optionally χ²-mixed) correlated normal. The market's horizon is ignored.
pub fn gbm_panel(market: &MarketParams, n_days: usize, start: NaiveDate, key: StreamKey) -> Result<ReturnPanel> {
    let daily = MarketParams { horizon: 1.0, ..market.clone() };
    let all: Vec<usize> = (0..daily.len()).collect();
    let mut sampler = ReturnSampler::new(&daily, &all)?;
    let drift: Vec<f64> = daily.mu.iter().zip(&daily.sigma).map(|(m, s)| m - 0.5 * s * s).collect();
    let mut rng = key.rng();
    let mut returns = vec![0.0; n_days * all.len()];
    if !all.is_empty() {
        for row in returns.chunks_exact_mut(all.len()) {
            sampler.sample_into(&mut rng, row);
            row.iter_mut().zip(&drift).for_each(|(r, d)| *r += d);
        }
    }
    ReturnPanel::new(trading_days(start, n_days), ticker_names(all.len()), returns)
}

/// A panel whose every 252-day window has sample drift, volatility and
/// correlation equal to the targets up to rounding.
///
/// One window of normals is whitened to identity sample covariance,
/// coloured with the target correlation and repeated `n_periods` times.
/// Window estimates then recover `mu`, `sigma` and `corr` exactly, which
/// makes the empirical pipeline comparable to a direct simulation.
pub fn moment_matched_panel(
    mu: &[f64],
    sigma: &[f64],
    corr: &CorrelationMatrix,
    n_periods: usize,
    start: NaiveDate,
    key: StreamKey,
) -> Result<ReturnPanel> {
    let m = mu.len();
    let n = WINDOW_LEN;
    if sigma.len() != m || corr.dim() != m {
        return Err(Error::LengthMismatch { left: sigma.len().max(corr.dim()), right: m });
    }
    if m + 1 >= n {
        return Err(Error::invalid("mu", format!("at most {} tickers fit one window", n - 2)));
    }
    let target = cholesky_factor(corr)?;

    // Standardised columns: zero mean, unit sample variance.
    let mut rng = key.rng();
    let mut z = vec![0.0; n * m];
    for x in z.iter_mut() {
        *x = StandardNormal.sample(&mut rng);
    }
    for j in 0..m {
        let mean = (0..n).map(|t| z[t * m + j]).sum::<f64>() / n as f64;
        let sd = ((0..n).map(|t| (z[t * m + j] - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt();
        (0..n).for_each(|t| z[t * m + j] = (z[t * m + j] - mean) / sd);
    }
    let mut sample_corr = vec![0.0; m * m];
    for i in 0..m {
        sample_corr[i * m + i] = 1.0;
        for j in 0..i {
            let c = (0..n).map(|t| z[t * m + i] * z[t * m + j]).sum::<f64>() / (n - 1) as f64;
            sample_corr[i * m + j] = c;
            sample_corr[j * m + i] = c;
        }
    }
    let whiten = cholesky_factor(&CorrelationMatrix::dense(m, sample_corr)?)?;

    let mut period = vec![0.0; n * m];
    let mut w = vec![0.0; m];
    let mut y = vec![0.0; m];
    for t in 0..n {
        let row = &z[t * m..(t + 1) * m];
        for i in 0..m {
            let s: f64 = (0..i).map(|j| whiten.get(i, j) * w[j]).sum();
            w[i] = (row[i] - s) / whiten.get(i, i);
        }
        target.apply(&w, &mut y);
        for i in 0..m {
            period[t * m + i] = mu[i] - 0.5 * sigma[i] * sigma[i] + sigma[i] * y[i];
        }
    }
    let returns = period.iter().copied().cycle().take(n * m * n_periods).collect();
    ReturnPanel::new(trading_days(start, n * n_periods), ticker_names(m), returns)
}
