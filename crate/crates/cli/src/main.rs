//! `credlab` command-line front end.

mod config;
mod manifest;
mod validate;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use credlab::experiments::output::{empirical_artifacts, study_artifacts, sweep_artifacts, Artifact};
use credlab::experiments::Grid;
use credlab::market_data::{PanelOptions, PriceTable};
use credlab::synthetic::{gbm_panel, moment_matched_panel};
use credlab::{
    run_empirical_study, run_heterogeneous_sigma_study, run_homogeneous_study, run_loss_corr_sweep, CorrelationMatrix,
    EmpiricalMarkets, Error, ExperimentConfig, MarketParams, Mode, Pairing, StreamKey, TailParam,
};

use config::{Markets, Overrides};
use manifest::{ErrorRecord, Manifest};

#[derive(Debug, Parser)]
#[command(name = "credlab", version, about = "Concurrent losses of two credit portfolios under the Merton model")]
struct Cli {
    /// Worker threads for the simulation pool (default: one per core).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Copula study on a synthetic homogeneous market.
    Simulate {
        #[command(subcommand)]
        kind: SimulateKind,
    },
    /// Loss correlation against asset correlation for a list of portfolio sizes.
    Sweep(RunArgs),
    /// Window-resampling study on price data.
    Empirical(RunArgs),
    /// Checks a price CSV and reports what ingestion keeps.
    ValidateData(validate::ValidateArgs),
    /// Writes a synthetic price CSV.
    Synth(SynthArgs),
}

#[derive(Debug, Subcommand)]
enum SimulateKind {
    /// Shared drift, volatility and leverage.
    Homogeneous(RunArgs),
    /// Volatilities redrawn per pair from uniform bounds.
    HeteroSigma(RunArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Flat TOML file with ExperimentConfig keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Named parameter set, e.g. fig3-top.
    #[arg(long)]
    preset: Option<String>,
    /// Asset correlation.
    #[arg(long, allow_hyphen_values = true)]
    ca: Option<f64>,
    /// Comma-separated asset correlations.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    ca_grid: Option<Vec<f64>>,
    /// Daily drift.
    #[arg(long, allow_hyphen_values = true)]
    mu: Option<f64>,
    /// Daily volatility.
    #[arg(long)]
    sigma: Option<f64>,
    /// Uniform volatility bounds `low,high`.
    #[arg(long, value_delimiter = ',')]
    sigma_bounds: Option<Vec<f64>>,
    /// Leverage F/V0.
    #[arg(long)]
    leverage: Option<f64>,
    /// Uniform leverage bounds `low,high`.
    #[arg(long, value_delimiter = ',')]
    leverage_bounds: Option<Vec<f64>>,
    /// Portfolio size.
    #[arg(long)]
    k: Option<usize>,
    /// Comma-separated portfolio sizes.
    #[arg(long, value_delimiter = ',')]
    k_list: Option<Vec<usize>>,
    /// Fat-tail parameter N, or `inf`.
    #[arg(long)]
    tail_n: Option<TailParam>,
    #[arg(long)]
    n_pairs: Option<usize>,
    #[arg(long)]
    n_sims: Option<usize>,
    #[arg(long)]
    n_iterations: Option<usize>,
    /// Copula bins per axis.
    #[arg(long)]
    b: Option<usize>,
    /// Bins of the loss pdf.
    #[arg(long)]
    pdf_bins: Option<usize>,
    /// Price CSV of market A.
    #[arg(long)]
    market_a: Option<PathBuf>,
    /// Price CSV of market B.
    #[arg(long)]
    market_b: Option<PathBuf>,
    /// cross, within-a or within-b.
    #[arg(long)]
    pairing: Option<Pairing>,
    /// Directory searched for relative market paths and for sp500.csv / nikkei.csv.
    #[arg(long, env = "CREDLAB_DATA_DIR")]
    data_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Output CSV.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 20)]
    tickers: usize,
    /// Trading days of prices (one more than the number of returns).
    #[arg(long, default_value_t = 600)]
    days: usize,
    #[arg(long, default_value_t = 0.3, allow_hyphen_values = true)]
    ca: f64,
    #[arg(long, default_value_t = 5e-4, allow_hyphen_values = true)]
    mu: f64,
    #[arg(long, default_value_t = 0.02)]
    sigma: f64,
    #[arg(long, default_value = "inf")]
    tail_n: TailParam,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// First trading day, YYYY-MM-DD.
    #[arg(long, default_value = "1993-01-04")]
    start: chrono::NaiveDate,
    /// Repeat one whitened 252-day block so every window matches the targets exactly.
    #[arg(long)]
    moment_matched: bool,
}

/// A configuration or usage problem (exit code 2).
#[derive(Debug, Clone, PartialEq)]
pub struct UsageError {
    pub field: String,
    pub message: String,
}

impl UsageError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self { field: field.into(), message: message.into() }
    }

    pub fn from_core(e: Error) -> Self {
        match e {
            Error::Config { field, message } => Self { field, message },
            other => Self::new("config", other.to_string()),
        }
    }
}

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

enum Failure {
    Usage(UsageError),
    Runtime(anyhow::Error),
}

impl Failure {
    fn exit_code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Runtime(_) => 1,
        }
    }

    fn record(&self) -> ErrorRecord {
        match self {
            Failure::Usage(e) => ErrorRecord { kind: "config", exit_code: 2, message: e.to_string() },
            Failure::Runtime(e) => ErrorRecord { kind: "runtime", exit_code: 1, message: format!("{e:#}") },
        }
    }
}

impl From<UsageError> for Failure {
    fn from(e: UsageError) -> Self {
        Failure::Usage(e)
    }
}

/// Core errors from a run: configuration problems are usage errors, the rest runtime.
fn core_failure(e: Error) -> Failure {
    match e {
        Error::Config { .. } => Failure::Usage(UsageError::from_core(e)),
        other => Failure::Runtime(other.into()),
    }
}

fn bounds(name: &str, v: &Option<Vec<f64>>) -> Result<Option<[f64; 2]>, UsageError> {
    match v.as_deref() {
        None => Ok(None),
        Some([low, high]) => Ok(Some([*low, *high])),
        Some(other) => Err(UsageError::new(name, format!("expected `low,high`, got {} values", other.len()))),
    }
}

impl RunArgs {
    fn overrides(&self) -> Result<Overrides, UsageError> {
        let grid_f = |one: Option<f64>, many: &Option<Vec<f64>>| many.clone().map(Grid::Many).or(one.map(Grid::One));
        Ok(Overrides {
            c_a: grid_f(self.ca, &self.ca_grid),
            mu: self.mu.map(Grid::One),
            sigma: self.sigma.map(Grid::One),
            sigma_bounds: bounds("sigma-bounds", &self.sigma_bounds)?,
            leverage: self.leverage,
            leverage_bounds: bounds("leverage-bounds", &self.leverage_bounds)?,
            k: self.k_list.clone().map(Grid::Many).or(self.k.map(Grid::One)),
            tail_n: self.tail_n,
            n_pairs: self.n_pairs,
            n_sims: self.n_sims,
            n_iterations: self.n_iterations,
            b: self.b,
            pdf_bins: self.pdf_bins,
            horizon: None,
            master_seed: self.seed,
            pairing: self.pairing,
            market_a: self.market_a.clone(),
            market_b: self.market_b.clone(),
        })
    }
}

/// Market files resolved against the data directory; missing files are usage errors.
fn locate_markets(markets: &Markets, pairing: Pairing, data_dir: Option<&Path>) -> Result<Markets, UsageError> {
    let resolve = |given: &Option<PathBuf>, default_name: &str| -> Option<PathBuf> {
        match (given, data_dir) {
            (Some(p), Some(dir)) if p.is_relative() && !p.exists() => Some(dir.join(p)),
            (Some(p), _) => Some(p.clone()),
            (None, Some(dir)) => Some(dir.join(default_name)),
            (None, None) => None,
        }
    };
    let a = resolve(&markets.a, "sp500.csv");
    let b = resolve(&markets.b, "nikkei.csv");
    let need = |p: &Option<PathBuf>, field: &str| -> Result<(), UsageError> {
        match p {
            None => Err(UsageError::new(field, "no data file given (use --market-a/--market-b or --data-dir)")),
            Some(p) if !p.is_file() => Err(UsageError::new(field, format!("data file {} not found", p.display()))),
            Some(_) => Ok(()),
        }
    };
    match pairing {
        Pairing::Cross => {
            need(&a, "market_a")?;
            need(&b, "market_b")?;
            Ok(Markets { a, b })
        }
        Pairing::WithinA => need(&a, "market_a").map(|_| Markets { a, b: None }),
        Pairing::WithinB => need(&b, "market_b").map(|_| Markets { a: None, b }),
    }
}

struct Outcome {
    artifacts: Vec<Artifact>,
    work_units: usize,
}

fn execute(mode: Mode, sweep: bool, cfg: &ExperimentConfig, markets: &Markets) -> Result<Outcome, Failure> {
    let n_k = cfg.k.values().len();
    match (mode, sweep) {
        (Mode::Empirical, _) => {
            let load = |p: &Option<PathBuf>| -> Result<Option<PriceTable>, Failure> {
                p.as_ref()
                    .map(|p| PriceTable::from_path(p).with_context(|| format!("reading {}", p.display())))
                    .transpose()
                    .map_err(Failure::Runtime)
            };
            let (a, b) = (load(&markets.a)?, load(&markets.b)?);
            let (first, second) = match (a, b) {
                (Some(a), b) => (a, b),
                (None, Some(b)) => (b.clone(), Some(b)),
                (None, None) => return Err(UsageError::new("market_a", "no data").into()),
            };
            let em = EmpiricalMarkets::from_prices(&first, second.as_ref(), cfg.pairing, &PanelOptions::default(), cfg.master_seed)
                .map_err(core_failure)?;
            let r = run_empirical_study(cfg, &em).map_err(core_failure)?;
            let artifacts = empirical_artifacts(cfg, &r).map_err(core_failure)?;
            Ok(Outcome { artifacts, work_units: n_k * cfg.n_iterations })
        }
        (_, true) => {
            let curves = run_loss_corr_sweep(cfg).map_err(core_failure)?;
            let artifacts = sweep_artifacts(cfg, &curves).map_err(core_failure)?;
            Ok(Outcome { artifacts, work_units: n_k * cfg.c_a.values().len() * cfg.n_pairs })
        }
        (Mode::Homogeneous, false) => {
            let r = run_homogeneous_study(cfg).map_err(core_failure)?;
            Ok(Outcome { artifacts: study_artifacts(cfg, &r).map_err(core_failure)?, work_units: cfg.n_pairs })
        }
        (Mode::HeterogeneousSigma, false) => {
            let r = run_heterogeneous_sigma_study(cfg).map_err(core_failure)?;
            Ok(Outcome { artifacts: study_artifacts(cfg, &r).map_err(core_failure)?, work_units: cfg.n_pairs })
        }
    }
}

/// Resolves the configuration, runs the study and writes artifacts plus manifest.
fn run_study(name: &str, mode: Mode, sweep: bool, args: &RunArgs, workers: usize) -> ExitCode {
    let started = Instant::now();
    let mut manifest = Manifest {
        tool: "credlab",
        version: env!("CARGO_PKG_VERSION"),
        command: name.to_string(),
        argv: std::env::args().collect(),
        status: "ok",
        seed: None,
        config: None,
        markets: None,
        workers,
        work_units: 0,
        wall_clock_seconds: 0.0,
        artifacts: Vec::new(),
        error: None,
    };

    let result = (|| -> Result<(), Failure> {
        let flags = args.overrides()?;
        let (cfg, markets) = config::resolve(mode, args.preset.as_deref(), args.config.as_deref(), &flags)?;
        manifest.seed = Some(cfg.master_seed);
        manifest.config = Some(cfg.clone());
        let markets = if mode == Mode::Empirical {
            let located = locate_markets(&markets, cfg.pairing, args.data_dir.as_deref())?;
            manifest.markets = Some(located.clone());
            located
        } else {
            markets
        };
        let outcome = execute(mode, sweep, &cfg, &markets)?;
        manifest.work_units = outcome.work_units;
        manifest.artifacts = manifest::write_artifacts(&args.out, &outcome.artifacts)
            .with_context(|| format!("writing to {}", args.out.display()))
            .map_err(Failure::Runtime)?;
        Ok(())
    })();

    let code = match &result {
        Ok(()) => 0,
        Err(f) => {
            eprintln!("error: {}", f.record().message);
            manifest.status = "error";
            manifest.error = Some(f.record());
            f.exit_code()
        }
    };
    manifest.wall_clock_seconds = started.elapsed().as_secs_f64();
    if let Err(e) = manifest::write_manifest(&args.out, &manifest) {
        eprintln!("error: cannot write manifest to {}: {e}", args.out.display());
        return ExitCode::from(code.max(1));
    }
    if code == 0 {
        println!("{}: {} artifacts in {}", name, manifest.artifacts.len(), args.out.display());
    }
    ExitCode::from(code)
}

fn synth(args: &SynthArgs) -> anyhow::Result<()> {
    let n_returns = args.days.checked_sub(1).context("--days must be >= 1")?;
    let mu = vec![args.mu; args.tickers];
    let sigma = vec![args.sigma; args.tickers];
    let corr = CorrelationMatrix::homogeneous(args.tickers, args.ca);
    let key = StreamKey::new(args.seed, 0);
    let panel = if args.moment_matched {
        let periods = n_returns.div_ceil(credlab::market_data::WINDOW_LEN).max(1);
        moment_matched_panel(&mu, &sigma, &corr, periods, args.start, key)?
    } else {
        let market = MarketParams::new(mu, sigma, corr, args.tail_n, 1.0)?;
        gbm_panel(&market, n_returns, args.start, key)?
    };
    manifest::write_atomic(&args.out, panel.to_price_csv(100.0).as_bytes())
        .with_context(|| format!("writing {}", args.out.display()))?;
    println!("wrote {} tickers x {} returns to {}", panel.n_tickers(), panel.n_dates(), args.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.workers {
        if n == 0 {
            eprintln!("error: workers: must be >= 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start worker pool: {e}");
            return ExitCode::from(1);
        }
    }
    let workers = rayon::current_num_threads();
    match &cli.command {
        Command::Simulate { kind: SimulateKind::Homogeneous(a) } => {
            run_study("simulate homogeneous", Mode::Homogeneous, false, a, workers)
        }
        Command::Simulate { kind: SimulateKind::HeteroSigma(a) } => {
            run_study("simulate hetero-sigma", Mode::HeterogeneousSigma, false, a, workers)
        }
        Command::Sweep(a) => run_study("sweep", Mode::Homogeneous, true, a, workers),
        Command::Empirical(a) => run_study("empirical", Mode::Empirical, false, a, workers),
        Command::ValidateData(a) => validate::run(a),
        Command::Synth(a) => match synth(a) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e:#}");
                ExitCode::from(1)
            }
        },
    }
}
