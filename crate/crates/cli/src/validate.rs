//! `validate-data`: ingestion report for a price CSV.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::Args;
use credlab::market_data::{PanelOptions, PriceTable, MAX_MISSING_FRACTION, MIN_OBSERVATIONS};
use credlab::ReturnPanel;

/// Reference span of the index data the presets were designed for.
const REFERENCE_START: (i32, u32, u32) = (1993, 1, 1);
const REFERENCE_END: (i32, u32, u32) = (2014, 4, 30);

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Price CSV: a `date` column followed by one column per ticker.
    pub path: PathBuf,
    /// Minimum number of daily returns after cleaning.
    #[arg(long, default_value_t = MIN_OBSERVATIONS)]
    pub min_observations: usize,
    /// Largest tolerated fraction of missing prices per ticker.
    #[arg(long, default_value_t = MAX_MISSING_FRACTION)]
    pub max_missing: f64,
}

fn ymd((y, m, d): (i32, u32, u32)) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).expect("valid reference date")
}

/// Share of the reference span covered by `[first, last]`.
pub fn coverage(first: NaiveDate, last: NaiveDate) -> f64 {
    let (lo, hi) = (ymd(REFERENCE_START), ymd(REFERENCE_END));
    let start = first.max(lo);
    let end = last.min(hi);
    if end <= start {
        return 0.0;
    }
    (end - start).num_days() as f64 / (hi - lo).num_days() as f64
}

pub fn report(table: &PriceTable, panel: &ReturnPanel) -> String {
    let mut out = String::new();
    let r = &panel.report;
    let _ = writeln!(out, "raw: {} dates x {} tickers", table.dates.len(), table.tickers.len());
    let _ = writeln!(out, "panel: {} returns x {} tickers", panel.n_dates(), panel.n_tickers());
    let _ = writeln!(out, "dropped rows: {}", r.dropped_rows);
    if r.excluded_tickers.is_empty() {
        let _ = writeln!(out, "excluded tickers: none");
    } else {
        let _ = writeln!(out, "excluded tickers: {}", r.excluded_tickers.len());
        for (t, frac) in &r.excluded_tickers {
            let _ = writeln!(out, "  {t}: {:.1}% missing", 100.0 * frac);
        }
    }
    if let (Some(first), Some(last)) = (table.dates.first(), table.dates.last()) {
        let _ = writeln!(
            out,
            "date range: {first} .. {last}, {:.1}% of {} .. {}",
            100.0 * coverage(*first, *last),
            ymd(REFERENCE_START),
            ymd(REFERENCE_END)
        );
    }
    out
}

pub fn run(args: &ValidateArgs) -> ExitCode {
    if !(0.0..=1.0).contains(&args.max_missing) {
        eprintln!("error: max-missing: must lie in [0, 1]");
        return ExitCode::from(2);
    }
    let opts = PanelOptions { min_observations: args.min_observations, max_missing_fraction: args.max_missing };
    let result = PriceTable::from_path(&args.path)
        .and_then(|t| ReturnPanel::from_prices(&t, &opts).map(|p| (t, p)));
    match result {
        Ok((table, panel)) => {
            print!("{}", report(&table, &panel));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {}: {e}", args.path.display());
            ExitCode::from(1)
        }
    }
}
