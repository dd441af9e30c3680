//! Canned studies: homogeneous and heterogeneous-volatility copulas, loss
//! correlation sweeps and the empirical window-resampling pipeline.
//!
//! Every study is split into independent work units (one per portfolio pair
//! or per window) keyed by their index. Units run on the ambient rayon pool
//! in fixed-size chunks and are folded in index order, so results do not
//! depend on the number of worker threads.

mod config;
mod empirical;
mod loss_pdf;
pub mod output;
mod study;
mod sweep;

use rayon::prelude::*;

use crate::error::Result;

pub use config::{pd_lower_bound, ExperimentConfig, Grid, Mode, Pairing, ParamSpec};
pub use empirical::{run_empirical_study, EmpiricalMarkets, EmpiricalResult};
pub use loss_pdf::{loss_pdf, LossHistogram, LossPdf};
pub use study::{run_heterogeneous_sigma_study, run_homogeneous_study, StudyResult, NEAR_ZERO_LOSS};
pub use sweep::{run_loss_corr_sweep, CurvePoint, LossCorrCurve};

// Top-level stream ids per study type.
const STREAM_HOMOGENEOUS: u64 = 1;
const STREAM_HETERO: u64 = 2;
const STREAM_SWEEP: u64 = 3;
const STREAM_EMPIRICAL: u64 = 4;
const STREAM_WINDOWS: u64 = 5;
const STREAM_PARTITION: u64 = 6;

const CHUNK: usize = 256;

/// Runs `unit(0..n)` in parallel chunks and feeds results to `sink` in index order.
fn run_units<T, F, S>(n: usize, unit: F, mut sink: S) -> Result<()>
where
    T: Send,
    F: Fn(usize) -> Result<T> + Sync,
    S: FnMut(usize, T) -> Result<()>,
{
    let mut start = 0;
    while start < n {
        let end = (start + CHUNK).min(n);
        let out: Vec<Result<T>> = (start..end).into_par_iter().map(&unit).collect();
        for (i, r) in (start..end).zip(out) {
            sink(i, r?)?;
        }
        start = end;
    }
    Ok(())
}

/// Running sum, sum of squares and count.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Moments {
    n: usize,
    sum: f64,
    sum_sq: f64,
}

impl Moments {
    fn push(&mut self, x: f64) {
        self.n += 1;
        self.sum += x;
        self.sum_sq += x * x;
    }

    fn mean(&self) -> f64 {
        if self.n == 0 {
            f64::NAN
        } else {
            self.sum / self.n as f64
        }
    }

    /// Standard error of the mean from the sample variance.
    fn stderr(&self) -> f64 {
        if self.n < 2 {
            return f64::NAN;
        }
        let n = self.n as f64;
        let var = ((self.sum_sq - self.sum * self.sum / n) / (n - 1.0)).max(0.0);
        (var / n).sqrt()
    }
}
