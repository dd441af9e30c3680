//! Reproducible random streams and horizon-return sampling.
//!
//! Every random quantity in the crate is drawn from a [`StreamKey`]: a master
//! seed plus a 64-bit stream id. The key seeds a ChaCha8 generator and selects
//! its stream, so any work unit can reconstruct its own sequence without
//! coordinating with other workers.
//!
//! Horizon returns follow the χ²-mixed multivariate normal: for each draw a
//! single scale `z ~ χ²_N` is shared by the whole cross-section and
//! `r ~ Normal(0, (z/N)·T·Σ)` with `Σ = σCσ`. `TailParam::Infinite` skips the
//! mixing step and gives the plain Gaussian.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
pub use crate::linalg::CorrelationMatrix;
use crate::linalg::{cholesky_factor, CholeskyFactor};

/// Trading days per year.
pub const DEFAULT_HORIZON: f64 = 252.0;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(GOLDEN);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamKey {
    pub master_seed: u64,
    pub stream_id: u64,
}

impl StreamKey {
    pub fn new(master_seed: u64, stream_id: u64) -> Self {
        Self { master_seed, stream_id }
    }

    /// Hashes a path of indices (experiment, pair, replication, ...) into a stream id.
    pub fn for_path(master_seed: u64, path: &[u64]) -> Self {
        path.iter().fold(Self::new(master_seed, splitmix(0)), |key, &i| key.child(i))
    }

    /// Derives a sub-stream; `for_path(s, &[a, b]) == for_path(s, &[a]).child(b)`.
    pub fn child(&self, index: u64) -> Self {
        Self::new(self.master_seed, splitmix(self.stream_id ^ splitmix(index)))
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

/// Fat-tail parameter `N` of the χ² mixing, or the Gaussian limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailParam {
    Finite(u32),
    Infinite,
}

impl TailParam {
    pub fn validate(&self) -> Result<()> {
        match self {
            TailParam::Finite(0) => Err(Error::invalid("tail_n", "must be >= 1 or INFINITY")),
            _ => Ok(()),
        }
    }
}

impl fmt::Display for TailParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TailParam::Finite(n) => write!(f, "{n}"),
            TailParam::Infinite => f.write_str("inf"),
        }
    }
}

impl FromStr for TailParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if matches!(t.to_ascii_lowercase().as_str(), "inf" | "infinity" | "infinite") {
            return Ok(TailParam::Infinite);
        }
        let n: u32 = t
            .parse()
            .map_err(|_| Error::invalid("tail_n", format!("expected a positive integer or `inf`, got `{s}`")))?;
        let tail = TailParam::Finite(n);
        tail.validate()?;
        Ok(tail)
    }
}

impl Serialize for TailParam {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            TailParam::Finite(n) => s.serialize_u32(*n),
            TailParam::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for TailParam {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(n) if n >= 1 && n <= u32::MAX as i64 => Ok(TailParam::Finite(n as u32)),
            Raw::Int(n) => Err(serde::de::Error::custom(format!("tail_n must be >= 1, got {n}"))),
            Raw::Text(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// Inputs to return sampling for a universe of companies.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketParams {
    /// Drifts, day⁻¹.
    pub mu: Vec<f64>,
    /// Volatilities, day^-1/2.
    pub sigma: Vec<f64>,
    pub corr: CorrelationMatrix,
    pub tail_n: TailParam,
    /// Horizon in trading days.
    pub horizon: f64,
}

impl MarketParams {
    pub fn new(
        mu: Vec<f64>,
        sigma: Vec<f64>,
        corr: CorrelationMatrix,
        tail_n: TailParam,
        horizon: f64,
    ) -> Result<Self> {
        let params = Self { mu, sigma, corr, tail_n, horizon };
        params.validate()?;
        Ok(params)
    }

    /// `dim` companies sharing drift, volatility and pairwise correlation.
    pub fn homogeneous(dim: usize, mu: f64, sigma: f64, c_a: f64, tail_n: TailParam) -> Result<Self> {
        Self::new(
            vec![mu; dim],
            vec![sigma; dim],
            CorrelationMatrix::homogeneous(dim, c_a),
            tail_n,
            DEFAULT_HORIZON,
        )
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.mu.len();
        if self.sigma.len() != n {
            return Err(Error::LengthMismatch { left: self.sigma.len(), right: n });
        }
        if self.corr.dim() != n {
            return Err(Error::LengthMismatch { left: self.corr.dim(), right: n });
        }
        if let Some(s) = self.sigma.iter().find(|s| !(s.is_finite() && **s >= 0.0)) {
            return Err(Error::invalid("sigma", format!("volatility {s} must be finite and >= 0")));
        }
        if let Some(m) = self.mu.iter().find(|m| !m.is_finite()) {
            return Err(Error::invalid("mu", format!("drift {m} must be finite")));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::invalid("horizon", format!("{} must be > 0", self.horizon)));
        }
        self.tail_n.validate()?;
        self.corr.validate()
    }
}

/// Row-major `rows × cols` matrix of sampled returns.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl ReturnMatrix {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        (0..self.rows).map(move |i| self.data[i * self.cols + j])
    }
}

/// Factored sampler for one subset of the market; reused across draws.
#[derive(Debug, Clone)]
pub struct ReturnSampler {
    factor: CholeskyFactor,
    scale: Vec<f64>,
    mixing: Option<(ChiSquared<f64>, f64)>,
    normals: Vec<f64>,
}

impl ReturnSampler {
    pub fn new(params: &MarketParams, subset: &[usize]) -> Result<Self> {
        params.validate()?;
        let corr = params.corr.subset(subset)?;
        let factor = cholesky_factor(&corr)?;
        let root_t = params.horizon.sqrt();
        let scale = subset.iter().map(|&i| params.sigma[i] * root_t).collect();
        let mixing = match params.tail_n {
            TailParam::Infinite => None,
            TailParam::Finite(n) => Some((chi_squared(n)?, n as f64)),
        };
        Ok(Self { factor, scale, mixing, normals: vec![0.0; subset.len()] })
    }

    pub fn dim(&self) -> usize {
        self.scale.len()
    }

    /// Draws one scenario into `out`. With finite `N` the χ² scale is drawn first.
    pub fn sample_into<R: Rng + ?Sized>(&mut self, rng: &mut R, out: &mut [f64]) {
        let w = match &self.mixing {
            None => 1.0,
            Some((chi, n)) => (chi.sample(rng) / n).sqrt(),
        };
        for z in self.normals.iter_mut() {
            *z = StandardNormal.sample(rng);
        }
        self.factor.apply(&self.normals, out);
        for (r, s) in out.iter_mut().zip(&self.scale) {
            *r *= s * w;
        }
    }
}

fn chi_squared(dof: u32) -> Result<ChiSquared<f64>> {
    if dof == 0 {
        return Err(Error::invalid("dof", "must be >= 1"));
    }
    ChiSquared::new(dof as f64).map_err(|e| Error::invalid("dof", e.to_string()))
}

/// Samples `n_draws` horizon-return vectors for the companies in `subset`.
pub fn sample_horizon_returns(
    params: &MarketParams,
    subset: &[usize],
    n_draws: usize,
    key: StreamKey,
) -> Result<ReturnMatrix> {
    let mut sampler = ReturnSampler::new(params, subset)?;
    let cols = subset.len();
    let mut data = vec![0.0; n_draws * cols];
    let mut rng = key.rng();
    if cols > 0 {
        for row in data.chunks_exact_mut(cols) {
            sampler.sample_into(&mut rng, row);
        }
    }
    Ok(ReturnMatrix { rows: n_draws, cols, data })
}

/// One χ²(dof) variate from the stream `key`.
pub fn chi_square_sample(dof: u32, key: StreamKey) -> Result<f64> {
    Ok(chi_squared(dof)?.sample(&mut key.rng()))
}

/// `n` consecutive χ²(dof) variates from the stream `key`.
pub fn chi_square_samples(dof: u32, n: usize, key: StreamKey) -> Result<Vec<f64>> {
    let chi = chi_squared(dof)?;
    let mut rng = key.rng();
    Ok((0..n).map(|_| chi.sample(&mut rng)).collect())
}
