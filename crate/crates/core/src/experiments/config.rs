use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market_data::LeverageBounds;
use crate::rng::{TailParam, DEFAULT_HORIZON};
use crate::copula::DEFAULT_BINS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Homogeneous,
    HeterogeneousSigma,
    Empirical,
}

/// Which markets the two portfolios of an empirical pair come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pairing {
    /// Portfolio 1 from market A, portfolio 2 from market B.
    Cross,
    /// Both from a random halving of market A.
    WithinA,
    /// Both from a random halving of market B.
    WithinB,
}

impl std::str::FromStr for Pairing {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cross" => Ok(Pairing::Cross),
            "within-a" | "within_a" | "a-a" => Ok(Pairing::WithinA),
            "within-b" | "within_b" | "b-b" => Ok(Pairing::WithinB),
            _ => Err(Error::config("pairing", format!("unknown pairing `{s}` (cross, within-a, within-b)"))),
        }
    }
}

/// One value or a list of values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Copy> Grid<T> {
    pub fn values(&self) -> Vec<T> {
        match self {
            Grid::One(v) => vec![*v],
            Grid::Many(v) => v.clone(),
        }
    }

    pub fn single(&self) -> Option<T> {
        match self {
            Grid::One(v) => Some(*v),
            Grid::Many(v) if v.len() == 1 => Some(v[0]),
            Grid::Many(_) => None,
        }
    }
}

/// A per-contract parameter: shared value, explicit list, or uniform bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamSpec {
    Scalar(f64),
    PerContract(Vec<f64>),
    Uniform { low: f64, high: f64 },
}

impl ParamSpec {
    fn check_len(&self, field: &'static str, n: usize) -> Result<()> {
        if let ParamSpec::PerContract(v) = self {
            if v.len() != n {
                return Err(Error::config(field, format!("{} values given for {n} contracts", v.len())));
            }
        }
        Ok(())
    }

    fn values(&self) -> Vec<f64> {
        match self {
            ParamSpec::Scalar(x) => vec![*x],
            ParamSpec::PerContract(v) => v.clone(),
            ParamSpec::Uniform { low, high } => vec![*low, *high],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub c_a: Grid<f64>,
    /// Drift, day⁻¹.
    pub mu: ParamSpec,
    /// Volatility, day^-1/2.
    pub sigma: ParamSpec,
    pub leverage: ParamSpec,
    #[serde(rename = "K")]
    pub k: Grid<usize>,
    pub tail_n: TailParam,
    pub n_pairs: usize,
    pub n_sims: usize,
    pub n_iterations: usize,
    pub b: usize,
    pub pdf_bins: usize,
    pub horizon: f64,
    pub master_seed: u64,
    pub pairing: Pairing,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            mode: Mode::Homogeneous,
            c_a: Grid::One(0.0),
            mu: ParamSpec::Scalar(1e-3),
            sigma: ParamSpec::Scalar(0.03),
            leverage: ParamSpec::Scalar(0.75),
            k: Grid::One(50),
            tail_n: TailParam::Infinite,
            n_pairs: 1000,
            n_sims: 10_000,
            n_iterations: 20_000,
            b: DEFAULT_BINS,
            pdf_bins: 1000,
            horizon: DEFAULT_HORIZON,
            master_seed: 1,
            pairing: Pairing::Cross,
        }
    }
}

/// Smallest homogeneous correlation that keeps a `dim × dim` matrix positive definite.
pub fn pd_lower_bound(dim: usize) -> f64 {
    if dim <= 1 {
        -1.0
    } else {
        -1.0 / (dim as f64 - 1.0)
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_sims < 2 {
            return Err(Error::config("n_sims", "must be >= 2"));
        }
        if self.n_pairs < 1 {
            return Err(Error::config("n_pairs", "must be >= 1"));
        }
        if self.mode == Mode::Empirical && self.n_iterations < 1 {
            return Err(Error::config("n_iterations", "must be >= 1"));
        }
        if self.b < 1 {
            return Err(Error::config("b", "must be >= 1"));
        }
        if self.pdf_bins < 1 {
            return Err(Error::config("pdf_bins", "must be >= 1"));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::config("horizon", "must be > 0"));
        }
        self.tail_n.validate().map_err(|e| Error::config("tail_n", e.to_string()))?;

        let ks = self.k.values();
        if ks.is_empty() {
            return Err(Error::config("K", "grid is empty"));
        }
        if ks.contains(&0) {
            return Err(Error::config("K", "portfolio size must be >= 1"));
        }
        let cas = self.c_a.values();
        if cas.is_empty() && self.mode != Mode::Empirical {
            return Err(Error::config("c_a", "grid is empty"));
        }
        if self.mode != Mode::Empirical {
            let k_max = *ks.iter().max().expect("non-empty");
            for &c in &cas {
                if !(c.is_finite() && c <= 1.0) || c <= pd_lower_bound(2 * k_max) {
                    return Err(Error::config(
                        "c_a",
                        format!(
                            "c_a = {c} with K = {k_max} leaves the positive-definite range ({}, 1]",
                            pd_lower_bound(2 * k_max)
                        ),
                    ));
                }
            }
        }

        if self.mu.values().iter().any(|m| !m.is_finite()) {
            return Err(Error::config("mu", "must be finite"));
        }
        if matches!(self.mu, ParamSpec::Uniform { .. }) {
            return Err(Error::config("mu", "uniform bounds are not supported for the drift"));
        }
        if self.sigma.values().iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(Error::config("sigma", "volatilities must be finite and >= 0"));
        }
        if let ParamSpec::Uniform { low, high } = self.sigma {
            if low > high {
                return Err(Error::config("sigma", format!("bounds ({low}, {high}) are reversed")));
            }
        }
        match self.leverage {
            ParamSpec::Uniform { low, high } => {
                LeverageBounds::new(low, high).map_err(|e| Error::config("leverage", e.to_string()))?;
            }
            _ => {
                if let Some(l) = self.leverage.values().iter().find(|l| !(**l > 0.0 && **l <= 1.0)) {
                    return Err(Error::config("leverage", format!("{l} not in (0, 1]")));
                }
            }
        }

        match self.mode {
            Mode::Homogeneous | Mode::HeterogeneousSigma => {
                for &k in &ks {
                    self.mu.check_len("mu", 2 * k)?;
                    self.sigma.check_len("sigma", 2 * k)?;
                    self.leverage.check_len("leverage", 2 * k)?;
                }
                if self.mode == Mode::HeterogeneousSigma && !matches!(self.sigma, ParamSpec::Uniform { .. }) {
                    return Err(Error::config("sigma", "heterogeneous mode needs uniform bounds"));
                }
                if self.mode == Mode::Homogeneous && matches!(self.sigma, ParamSpec::Uniform { .. }) {
                    return Err(Error::config("sigma", "uniform bounds need heterogeneous_sigma mode"));
                }
            }
            Mode::Empirical => {
                if matches!(self.leverage, ParamSpec::PerContract(_)) {
                    return Err(Error::config("leverage", "empirical mode takes a scalar or uniform bounds"));
                }
            }
        }
        Ok(())
    }

    /// Leverage as uniform bounds (a scalar becomes degenerate bounds).
    pub fn leverage_bounds(&self) -> Result<LeverageBounds> {
        match self.leverage {
            ParamSpec::Scalar(l) => LeverageBounds::new(l, l),
            ParamSpec::Uniform { low, high } => LeverageBounds::new(low, high),
            ParamSpec::PerContract(_) => Err(Error::config("leverage", "expected scalar or bounds")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid() {
        ExperimentConfig::default().validate().unwrap();
    }

    #[test]
    fn rejects_bad_counts() {
        let cfg = ExperimentConfig { n_sims: 1, ..Default::default() };
        assert!(matches!(cfg.validate(), Err(Error::Config { .. })));
        let cfg = ExperimentConfig { k: Grid::Many(vec![]), ..Default::default() };
        assert!(cfg.validate().is_err());
        let cfg = ExperimentConfig { k: Grid::One(0), ..Default::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn pd_range_uses_largest_k() {
        let cfg = ExperimentConfig { c_a: Grid::One(-0.9), k: Grid::One(50), ..Default::default() };
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("-0.9") && err.contains("50"), "{err}");
        let cfg = ExperimentConfig { c_a: Grid::One(-0.3), k: Grid::Many(vec![1, 2]), ..Default::default() };
        cfg.validate().unwrap();
        let cfg = ExperimentConfig { c_a: Grid::One(-0.3), k: Grid::Many(vec![1, 2, 3]), ..Default::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn sigma_shape_matches_mode() {
        let cfg = ExperimentConfig {
            mode: Mode::HeterogeneousSigma,
            sigma: ParamSpec::Scalar(0.02),
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = ExperimentConfig {
            mode: Mode::HeterogeneousSigma,
            sigma: ParamSpec::Uniform { low: 0.0, high: 0.25 },
            ..Default::default()
        };
        cfg.validate().unwrap();
    }

    #[test]
    fn pairing_parses() {
        assert_eq!("cross".parse::<Pairing>().unwrap(), Pairing::Cross);
        assert_eq!("within-b".parse::<Pairing>().unwrap(), Pairing::WithinB);
        assert!("sideways".parse::<Pairing>().is_err());
    }
}
