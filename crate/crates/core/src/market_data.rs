//! Price-history ingestion, annual-window estimation and portfolio drawing.
//!
//! CSV layout: a header `date,<ticker1>,<ticker2>,...`, ISO-8601 dates in
//! strictly increasing order, positive decimal prices, empty cells for
//! missing data. Tickers missing more than a set fraction of prices are
//! excluded; remaining dates with any missing price are dropped; log-returns
//! are taken between consecutive retained dates.

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use chrono::NaiveDate;
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::CorrelationMatrix;
use crate::merton::{ContractParams, PortfolioSpec};
use crate::rng::StreamKey;

/// Trading days in one estimation window.
pub const WINDOW_LEN: usize = 252;
/// Two annual windows.
pub const MIN_OBSERVATIONS: usize = 2 * WINDOW_LEN;
pub const MAX_MISSING_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PanelOptions {
    pub min_observations: usize,
    pub max_missing_fraction: f64,
}

impl Default for PanelOptions {
    fn default() -> Self {
        Self { min_observations: MIN_OBSERVATIONS, max_missing_fraction: MAX_MISSING_FRACTION }
    }
}

/// Raw prices as read from one or more CSV files.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceTable {
    pub dates: Vec<NaiveDate>,
    pub tickers: Vec<String>,
    /// `prices[row][col]`, `None` for missing cells.
    pub prices: Vec<Vec<Option<f64>>>,
}

impl PriceTable {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::from_reader(file)
    }

    pub fn from_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let malformed = |line: u64, message: String| Error::MalformedCsv { line, message };
        let header = rdr.headers().map_err(|e| malformed(1, e.to_string()))?.clone();
        if header.is_empty() || !header[0].eq_ignore_ascii_case("date") {
            return Err(malformed(1, "first column must be `date`".into()));
        }
        let tickers: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        if tickers.is_empty() {
            return Err(malformed(1, "no ticker columns".into()));
        }

        let mut dates: Vec<NaiveDate> = Vec::new();
        let mut prices = Vec::new();
        for record in rdr.records() {
            let record = record.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line());
                malformed(line, e.to_string())
            })?;
            let line = record.position().map_or(0, |p| p.line());
            let date = NaiveDate::parse_from_str(&record[0], "%Y-%m-%d")
                .map_err(|e| malformed(line, format!("bad date `{}`: {e}", &record[0])))?;
            if let Some(prev) = dates.last() {
                if date <= *prev {
                    return Err(malformed(line, format!("date {date} not after {prev}")));
                }
            }
            let mut row = Vec::with_capacity(tickers.len());
            for (col, cell) in record.iter().skip(1).enumerate() {
                if cell.is_empty() {
                    row.push(None);
                    continue;
                }
                let p: f64 = cell
                    .parse()
                    .map_err(|_| malformed(line, format!("bad price `{cell}` for {}", tickers[col])))?;
                if !(p > 0.0) || !p.is_finite() {
                    return Err(Error::NonPositivePrice {
                        ticker: tickers[col].clone(),
                        date: date.to_string(),
                    });
                }
                row.push(Some(p));
            }
            dates.push(date);
            prices.push(row);
        }
        Ok(Self { dates, tickers, prices })
    }

    /// Columns of both tables on the dates they share.
    pub fn inner_join(&self, other: &PriceTable) -> PriceTable {
        let index: HashMap<NaiveDate, usize> =
            other.dates.iter().enumerate().map(|(i, d)| (*d, i)).collect();
        let mut dates = Vec::new();
        let mut prices = Vec::new();
        for (row, d) in self.dates.iter().enumerate() {
            if let Some(&j) = index.get(d) {
                dates.push(*d);
                let mut r = self.prices[row].clone();
                r.extend_from_slice(&other.prices[j]);
                prices.push(r);
            }
        }
        let tickers = self.tickers.iter().chain(&other.tickers).cloned().collect();
        PriceTable { dates, tickers, prices }
    }

    pub fn missing_fraction(&self, col: usize) -> f64 {
        if self.dates.is_empty() {
            return 0.0;
        }
        let missing = self.prices.iter().filter(|r| r[col].is_none()).count();
        missing as f64 / self.dates.len() as f64
    }
}

/// What ingestion removed.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct LoadReport {
    pub dropped_rows: usize,
    /// Excluded tickers with their missing-data fraction.
    pub excluded_tickers: Vec<(String, f64)>,
    /// Source-table column of each retained ticker.
    pub kept_columns: Vec<usize>,
}

/// Daily log-returns, `dates × tickers`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnPanel {
    /// Date of each return (the later of its two prices).
    pub dates: Vec<NaiveDate>,
    pub tickers: Vec<String>,
    /// Row-major `dates.len() × tickers.len()`.
    pub returns: Vec<f64>,
    pub report: LoadReport,
}

impl ReturnPanel {
    pub fn new(dates: Vec<NaiveDate>, tickers: Vec<String>, returns: Vec<f64>) -> Result<Self> {
        if returns.len() != dates.len() * tickers.len() {
            return Err(Error::LengthMismatch { left: returns.len(), right: dates.len() * tickers.len() });
        }
        if let Some(w) = dates.windows(2).find(|w| w[1] <= w[0]) {
            return Err(Error::invalid("dates", format!("{} not after {}", w[1], w[0])));
        }
        if returns.iter().any(|r| !r.is_finite()) {
            return Err(Error::invalid("returns", "non-finite return"));
        }
        Ok(Self { dates, tickers, returns, report: LoadReport::default() })
    }

    pub fn from_prices(table: &PriceTable, opts: &PanelOptions) -> Result<Self> {
        let mut report = LoadReport::default();
        let mut keep = Vec::new();
        for (col, ticker) in table.tickers.iter().enumerate() {
            let frac = table.missing_fraction(col);
            if frac > opts.max_missing_fraction {
                report.excluded_tickers.push((ticker.clone(), frac));
            } else {
                keep.push(col);
            }
        }
        if keep.is_empty() {
            return Err(Error::Empty("tickers after missing-data exclusion"));
        }

        let mut dates = Vec::new();
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (d, row) in table.dates.iter().zip(&table.prices) {
            let vals: Option<Vec<f64>> = keep.iter().map(|&c| row[c]).collect();
            match vals {
                Some(v) => {
                    dates.push(*d);
                    rows.push(v);
                }
                None => report.dropped_rows += 1,
            }
        }

        let observations = rows.len().saturating_sub(1);
        if observations < opts.min_observations {
            // Every retained ticker has the same count after listwise deletion;
            // name the one with the most missing data.
            let worst = keep
                .iter()
                .copied()
                .max_by(|&a, &b| table.missing_fraction(a).total_cmp(&table.missing_fraction(b)))
                .unwrap_or(keep[0]);
            return Err(Error::TooShortHistory {
                ticker: table.tickers[worst].clone(),
                observations,
                required: opts.min_observations,
            });
        }

        let mut returns = Vec::with_capacity(observations * keep.len());
        for w in rows.windows(2) {
            returns.extend(w[1].iter().zip(&w[0]).map(|(p1, p0)| (p1 / p0).ln()));
        }
        let tickers = keep.iter().map(|&c| table.tickers[c].clone()).collect();
        report.kept_columns = keep;
        let mut panel = Self::new(dates.split_off(1.min(dates.len())), tickers, returns)?;
        panel.report = report;
        Ok(panel)
    }

    pub fn n_dates(&self) -> usize {
        self.dates.len()
    }

    pub fn n_tickers(&self) -> usize {
        self.tickers.len()
    }

    pub fn get(&self, t: usize, col: usize) -> f64 {
        self.returns[t * self.tickers.len() + col]
    }

    /// Prices implied by the returns, starting from `initial` on the day before the first return.
    pub fn to_price_csv(&self, initial: f64) -> String {
        let mut out = String::from("date");
        for t in &self.tickers {
            out.push(',');
            out.push_str(t);
        }
        out.push('\n');
        let first = self.dates.first().map(|d| *d - chrono::Duration::days(1));
        let mut level = vec![initial; self.n_tickers()];
        let push_row = |out: &mut String, d: NaiveDate, level: &[f64]| {
            out.push_str(&d.format("%Y-%m-%d").to_string());
            for p in level {
                out.push(',');
                out.push_str(&p.to_string());
            }
            out.push('\n');
        };
        if let Some(d0) = first {
            push_row(&mut out, d0, &level);
        }
        for (t, d) in self.dates.iter().enumerate() {
            for (c, p) in level.iter_mut().enumerate() {
                *p *= self.get(t, c).exp();
            }
            push_row(&mut out, *d, &level);
        }
        out
    }
}

/// Loads one price CSV with the default options (≥ 504 returns, ≤ 5% missing).
pub fn load_price_csv(path: impl AsRef<Path>) -> Result<ReturnPanel> {
    load_price_csv_with(path, &PanelOptions::default())
}

pub fn load_price_csv_with(path: impl AsRef<Path>, opts: &PanelOptions) -> Result<ReturnPanel> {
    ReturnPanel::from_prices(&PriceTable::from_path(path)?, opts)
}

/// Drift, volatility and correlation estimates over one annual window.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowEstimate {
    pub window_start: usize,
    /// Panel columns covered, in order.
    pub columns: Vec<usize>,
    /// Drift with the Itô correction added back, day⁻¹.
    pub mu: Vec<f64>,
    /// Sample standard deviation of daily log-returns.
    pub sigma: Vec<f64>,
    pub corr: CorrelationMatrix,
    /// Mean of the strictly upper triangle over columns with non-zero variance.
    pub mean_offdiag: f64,
    /// Positions (into `columns`) with zero variance; their correlations are set to zero.
    pub zero_variance: Vec<usize>,
}

fn check_window(panel: &ReturnPanel, start: usize) -> Result<()> {
    if start + WINDOW_LEN > panel.n_dates() {
        return Err(Error::WindowOutOfRange { start, len: panel.n_dates() });
    }
    Ok(())
}

/// Window mean and sample standard deviation of one column.
fn column_moments(panel: &ReturnPanel, start: usize, col: usize) -> (f64, f64) {
    let n = WINDOW_LEN as f64;
    let mean = (start..start + WINDOW_LEN).map(|t| panel.get(t, col)).sum::<f64>() / n;
    let ss: f64 = (start..start + WINDOW_LEN).map(|t| (panel.get(t, col) - mean).powi(2)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// Per-column `(μ, σ)` over the window, with `μ = mean + σ²/2`.
pub fn window_moments(panel: &ReturnPanel, start: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    check_window(panel, start)?;
    Ok((0..panel.n_tickers())
        .map(|c| {
            let (mean, sd) = column_moments(panel, start, c);
            (mean + 0.5 * sd * sd, sd)
        })
        .unzip())
}

/// Estimates every column of the panel over `[start, start + 252)`.
pub fn estimate_window(panel: &ReturnPanel, start: usize) -> Result<WindowEstimate> {
    let cols: Vec<usize> = (0..panel.n_tickers()).collect();
    estimate_window_subset(panel, start, &cols)
}

/// Like [`estimate_window`] but only for `columns`.
pub fn estimate_window_subset(panel: &ReturnPanel, start: usize, columns: &[usize]) -> Result<WindowEstimate> {
    check_window(panel, start)?;
    if let Some(&bad) = columns.iter().find(|&&c| c >= panel.n_tickers()) {
        return Err(Error::IndexOutOfRange { index: bad, len: panel.n_tickers() });
    }
    let p = columns.len();
    let mut centered = vec![0.0; p * WINDOW_LEN];
    let mut mu = Vec::with_capacity(p);
    let mut sigma = Vec::with_capacity(p);
    let mut zero_variance = Vec::new();
    for (k, &c) in columns.iter().enumerate() {
        let (mean, sd) = column_moments(panel, start, c);
        mu.push(mean + 0.5 * sd * sd);
        sigma.push(sd);
        if sd == 0.0 {
            zero_variance.push(k);
        }
        for t in 0..WINDOW_LEN {
            centered[k * WINDOW_LEN + t] = panel.get(start + t, c) - mean;
        }
    }
    let norms: Vec<f64> = (0..p)
        .map(|k| centered[k * WINDOW_LEN..(k + 1) * WINDOW_LEN].iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();

    let mut data = vec![0.0; p * p];
    let mut sum = 0.0;
    let mut pairs = 0usize;
    for i in 0..p {
        data[i * p + i] = 1.0;
        for j in 0..i {
            if sigma[i] == 0.0 || sigma[j] == 0.0 {
                continue;
            }
            let a = &centered[i * WINDOW_LEN..(i + 1) * WINDOW_LEN];
            let b = &centered[j * WINDOW_LEN..(j + 1) * WINDOW_LEN];
            let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            let r = (dot / (norms[i] * norms[j])).clamp(-1.0, 1.0);
            data[i * p + j] = r;
            data[j * p + i] = r;
            sum += r;
            pairs += 1;
        }
    }
    Ok(WindowEstimate {
        window_start: start,
        columns: columns.to_vec(),
        mu,
        sigma,
        corr: CorrelationMatrix::dense(p, data)?,
        mean_offdiag: if pairs > 0 { sum / pairs as f64 } else { 0.0 },
        zero_variance,
    })
}

/// Where portfolios may be drawn from.
#[derive(Debug, Clone, PartialEq)]
pub enum Universe {
    /// Both portfolios from one pool, disjoint within each draw.
    Single(Vec<usize>),
    /// Portfolio 1 from the first pool, portfolio 2 from the second.
    Split(Vec<usize>, Vec<usize>),
}

impl Universe {
    pub fn filter(&self, keep: impl Fn(usize) -> bool) -> Universe {
        let f = |v: &Vec<usize>| v.iter().copied().filter(|&i| keep(i)).collect::<Vec<_>>();
        match self {
            Universe::Single(a) => Universe::Single(f(a)),
            Universe::Split(a, b) => Universe::Split(f(a), f(b)),
        }
    }
}

/// Uniform leverage bounds, `0 < low ≤ high ≤ 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LeverageBounds {
    pub low: f64,
    pub high: f64,
}

impl LeverageBounds {
    pub fn new(low: f64, high: f64) -> Result<Self> {
        if !(low > 0.0 && low <= high && high <= 1.0) {
            return Err(Error::invalid("leverage", format!("bounds ({low}, {high}) must satisfy 0 < low <= high <= 1")));
        }
        Ok(Self { low, high })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.low == self.high {
            self.low
        } else {
            rng.random_range(self.low..=self.high)
        }
    }
}

fn sample_members<R: Rng + ?Sized>(pool: &[usize], k: usize, rng: &mut R) -> Vec<usize> {
    rand::seq::index::sample(rng, pool.len(), k).into_iter().map(|i| pool[i]).collect()
}

/// Draws two disjoint portfolios of size `k` with i.i.d. uniform leverages.
///
/// `mu` and `sigma` are indexed by universe entry and give each contract's
/// drift and volatility.
pub fn draw_portfolio_pair(
    universe: &Universe,
    k: usize,
    leverage: LeverageBounds,
    mu: &[f64],
    sigma: &[f64],
    key: StreamKey,
) -> Result<(PortfolioSpec, PortfolioSpec)> {
    if k == 0 {
        return Err(Error::invalid("k", "portfolio size must be >= 1"));
    }
    let mut rng = key.rng();
    let (m1, m2) = match universe {
        Universe::Single(pool) => {
            if pool.len() < 2 * k {
                return Err(Error::InsufficientUniverse { needed: 2 * k, available: pool.len() });
            }
            let mut both = sample_members(pool, 2 * k, &mut rng);
            let second = both.split_off(k);
            (both, second)
        }
        Universe::Split(a, b) => {
            for pool in [a, b] {
                if pool.len() < k {
                    return Err(Error::InsufficientUniverse { needed: k, available: pool.len() });
                }
            }
            (sample_members(a, k, &mut rng), sample_members(b, k, &mut rng))
        }
    };
    let mut build = |members: Vec<usize>| -> Result<PortfolioSpec> {
        let contracts = members
            .iter()
            .map(|&m| {
                if m >= mu.len() || m >= sigma.len() {
                    return Err(Error::IndexOutOfRange { index: m, len: mu.len().min(sigma.len()) });
                }
                ContractParams::new(mu[m], sigma[m], leverage.sample(&mut rng))
            })
            .collect::<Result<Vec<_>>>()?;
        PortfolioSpec::new(members, contracts)
    };
    let p1 = build(m1)?;
    let p2 = build(m2)?;
    Ok((p1, p2))
}

/// Random near-equal split of `universe`; the first part gets the extra element.
pub fn partition_submarkets(universe: &[usize], key: StreamKey) -> (Vec<usize>, Vec<usize>) {
    let mut rng = key.rng();
    let mut order = sample_members(universe, universe.len(), &mut rng);
    let second = order.split_off(universe.len().div_ceil(2));
    let mut first = order;
    first.sort_unstable();
    let mut second = second;
    second.sort_unstable();
    (first, second)
}
