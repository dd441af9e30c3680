//! Monte-Carlo laboratory for concurrent losses of two non-overlapping credit
//! portfolios under the Merton structural model.
//!
//! The crate is organised bottom-up:
//!
//! * [`rng`] - reproducible counter-based streams and correlated, optionally
//!   heavy-tailed horizon-return sampling.
//! * [`linalg`] - Cholesky factorisation of correlation matrices.
//! * [`merton`] - asset values at maturity and normalised contract/portfolio losses.
//! * [`copula`] - rank transforms, empirical and Gaussian copula histograms.
//! * [`market_data`] - price CSV ingestion, window estimation and portfolio drawing.
//! * [`synthetic`] - simulated price panels for tests and dry runs.
//! * [`experiments`] - the canned studies and their artifacts.

pub mod copula;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod market_data;
pub mod merton;
pub mod rng;
pub mod synthetic;

pub use copula::{
    average_histograms, deviation, empirical_copula, gaussian_copula, pearson_correlation,
    rank_transform, CopulaHistogram, CopulaKind, DeviationGrid,
};
pub use error::{Error, Result};
pub use experiments::{
    loss_pdf, run_empirical_study, run_heterogeneous_sigma_study, run_homogeneous_study,
    run_loss_corr_sweep, EmpiricalMarkets, EmpiricalResult, ExperimentConfig, LossCorrCurve,
    LossPdf, Mode, Pairing, StudyResult,
};
pub use linalg::{cholesky_factor, CholeskyFactor};
pub use market_data::{
    draw_portfolio_pair, estimate_window, load_price_csv, partition_submarkets, ReturnPanel,
    WindowEstimate,
};
pub use merton::{
    asset_value_at_maturity, contract_loss, portfolio_loss, simulate_loss_pairs, ContractParams,
    LossPairSample, PortfolioSpec,
};
pub use rng::{
    chi_square_sample, sample_horizon_returns, CorrelationMatrix, MarketParams, ReturnMatrix,
    StreamKey, TailParam, DEFAULT_HORIZON,
};
