//! Merton losses: asset values at maturity, contract losses and portfolio losses.
//!
//! Initial asset values are normalised to one, so a contract's face value
//! used in the default test equals its leverage `F/V₀`. Portfolio weights
//! (fractional face values) come from [`ContractParams::face_value`], which
//! defaults to the leverage.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{MarketParams, ReturnSampler, StreamKey};

const FRACTION_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContractParams {
    /// Drift, day⁻¹.
    pub mu: f64,
    /// Volatility, day^-1/2.
    pub sigma: f64,
    /// `F/V₀`, in `(0, 1]`.
    pub leverage: f64,
    /// Face value `F` used for portfolio weights.
    pub face_value: f64,
}

impl ContractParams {
    pub fn new(mu: f64, sigma: f64, leverage: f64) -> Result<Self> {
        Self::with_face_value(mu, sigma, leverage, leverage)
    }

    pub fn with_face_value(mu: f64, sigma: f64, leverage: f64, face_value: f64) -> Result<Self> {
        if !(leverage > 0.0 && leverage <= 1.0) {
            return Err(Error::invalid("leverage", format!("{leverage} not in (0, 1]")));
        }
        if !(face_value > 0.0 && face_value.is_finite()) {
            return Err(Error::invalid("face_value", format!("{face_value} must be > 0")));
        }
        if !(sigma >= 0.0 && sigma.is_finite()) || !mu.is_finite() {
            return Err(Error::invalid("sigma", format!("mu {mu}, sigma {sigma}")));
        }
        Ok(Self { mu, sigma, leverage, face_value })
    }

    /// `(μ − σ²/2)·T`, the deterministic part of the log asset value.
    pub fn drift_term(&self, horizon: f64) -> f64 {
        (self.mu - 0.5 * self.sigma * self.sigma) * horizon
    }
}

/// One credit portfolio: member companies, their contracts and weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PortfolioSpec {
    pub members: Vec<usize>,
    pub contracts: Vec<ContractParams>,
    pub fractions: Vec<f64>,
}

impl PortfolioSpec {
    /// Fractions are `F_i / ΣF_j` from the contracts' face values.
    pub fn new(members: Vec<usize>, contracts: Vec<ContractParams>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::Empty("portfolio members"));
        }
        if members.len() != contracts.len() {
            return Err(Error::LengthMismatch { left: members.len(), right: contracts.len() });
        }
        let mut seen = members.clone();
        seen.sort_unstable();
        if let Some(w) = seen.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::invalid("members", format!("company {} listed twice", w[0])));
        }
        let total: f64 = contracts.iter().map(|c| c.face_value).sum();
        let fractions = contracts.iter().map(|c| c.face_value / total).collect();
        Ok(Self { members, contracts, fractions })
    }

    /// Contracts on `members` with the market's drift and volatility for each company.
    pub fn from_market(market: &MarketParams, members: Vec<usize>, leverages: &[f64]) -> Result<Self> {
        if members.len() != leverages.len() {
            return Err(Error::LengthMismatch { left: members.len(), right: leverages.len() });
        }
        let contracts = members
            .iter()
            .zip(leverages)
            .map(|(&m, &lev)| {
                if m >= market.len() {
                    return Err(Error::IndexOutOfRange { index: m, len: market.len() });
                }
                ContractParams::new(market.mu[m], market.sigma[m], lev)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(members, contracts)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Matched portfolio-loss draws; `l1[k]` and `l2[k]` come from the same scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossPairSample {
    pub l1: Vec<f64>,
    pub l2: Vec<f64>,
}

impl LossPairSample {
    pub fn len(&self) -> usize {
        self.l1.len()
    }

    pub fn is_empty(&self) -> bool {
        self.l1.is_empty()
    }
}

/// `V(T) = V₀·exp[r + (μ − σ²/2)·T]`.
pub fn asset_value_at_maturity(r: f64, p: &ContractParams, horizon: f64, v0: f64) -> f64 {
    v0 * (r + p.drift_term(horizon)).exp()
}

/// Normalised loss `(F − V)/F` when `V < F`, else zero (the boundary `V = F` is no default).
pub fn contract_loss(v_t: f64, face: f64) -> f64 {
    if v_t < face {
        (face - v_t) / face
    } else {
        0.0
    }
}

/// `L = Σ f_i·l_i`.
pub fn portfolio_loss(losses: &[f64], fractions: &[f64]) -> Result<f64> {
    if losses.len() != fractions.len() {
        return Err(Error::LengthMismatch { left: losses.len(), right: fractions.len() });
    }
    let total: f64 = fractions.iter().sum();
    if (total - 1.0).abs() > FRACTION_EPS {
        return Err(Error::invalid("fractions", format!("sum to {total}, expected 1")));
    }
    Ok(losses.iter().zip(fractions).map(|(l, f)| l * f).sum())
}

/// Simulates `n_sims` joint scenarios and returns the two portfolio losses for each.
///
/// Both portfolios are evaluated on one correlated draw over the union of
/// their members. The union is sampled in ascending company order, so the
/// order of contracts inside a portfolio does not change the scenario each
/// company sees.
pub fn simulate_loss_pairs(
    market: &MarketParams,
    p1: &PortfolioSpec,
    p2: &PortfolioSpec,
    n_sims: usize,
    key: StreamKey,
) -> Result<LossPairSample> {
    let n = market.len();
    for &m in p1.members.iter().chain(&p2.members) {
        if m >= n {
            return Err(Error::IndexOutOfRange { index: m, len: n });
        }
    }
    if let Some(&m) = p1.members.iter().find(|m| p2.members.contains(m)) {
        return Err(Error::OverlappingPortfolios { index: m });
    }
    for p in [p1, p2] {
        let total: f64 = p.fractions.iter().sum();
        if p.fractions.len() != p.members.len() || (total - 1.0).abs() > FRACTION_EPS {
            return Err(Error::invalid("fractions", format!("sum to {total}, expected 1")));
        }
        for (&m, c) in p.members.iter().zip(&p.contracts) {
            if c.mu != market.mu[m] || c.sigma != market.sigma[m] {
                return Err(Error::invalid(
                    "contracts",
                    format!("company {m}: contract drift/volatility differ from the market's"),
                ));
            }
        }
    }

    let mut union: Vec<usize> = p1.members.iter().chain(&p2.members).copied().collect();
    union.sort_unstable();
    let position = |m: usize| union.binary_search(&m).expect("member is in union");

    // Per union slot: drift term and default threshold ln(F/V₀) = ln(leverage).
    let mut drift = vec![0.0; union.len()];
    let mut face = vec![0.0; union.len()];
    let mut book = |p: &PortfolioSpec| -> Vec<(usize, f64)> {
        p.members
            .iter()
            .zip(&p.contracts)
            .zip(&p.fractions)
            .map(|((&m, c), &f)| {
                let slot = position(m);
                drift[slot] = c.drift_term(market.horizon);
                face[slot] = c.leverage;
                (slot, f)
            })
            .collect()
    };
    let book1 = book(p1);
    let book2 = book(p2);

    let mut sampler = ReturnSampler::new(market, &union)?;
    let mut rng = key.rng();
    let mut returns = vec![0.0; union.len()];
    let mut losses = vec![0.0; union.len()];
    let mut l1 = Vec::with_capacity(n_sims);
    let mut l2 = Vec::with_capacity(n_sims);
    for _ in 0..n_sims {
        sampler.sample_into(&mut rng, &mut returns);
        for ((loss, r), (d, f)) in losses.iter_mut().zip(&returns).zip(drift.iter().zip(&face)) {
            *loss = contract_loss((r + d).exp(), *f);
        }
        l1.push(book1.iter().map(|&(slot, f)| f * losses[slot]).sum());
        l2.push(book2.iter().map(|&(slot, f)| f * losses[slot]).sum());
    }
    Ok(LossPairSample { l1, l2 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::TailParam;

    #[test]
    fn drift_cancels_at_half_sigma_squared() {
        let p = ContractParams::new(0.5 * 0.03 * 0.03, 0.03, 0.75).unwrap();
        assert!((asset_value_at_maturity(0.0, &p, 252.0, 1.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn direct_evaluation_of_maturity_value() {
        let p = ContractParams::new(1e-3, 0.03, 0.75).unwrap();
        let v = asset_value_at_maturity(0.1, &p, 252.0, 1.0);
        assert!((v - 0.2386f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn deterministic_case() {
        let p = ContractParams::new(0.0, 0.0, 0.5).unwrap();
        assert_eq!(asset_value_at_maturity(0.0, &p, 252.0, 2.5), 2.5);
    }

    #[test]
    fn contract_loss_branches() {
        assert_eq!(contract_loss(1.0, 1.0), 0.0);
        assert_eq!(contract_loss(0.5, 1.0), 0.5);
        assert_eq!(contract_loss(2.0, 1.0), 0.0);
        let tiny = contract_loss(1e-300, 1.0);
        assert!(tiny > 0.999 && tiny <= 1.0);
    }

    #[test]
    fn portfolio_loss_cases() {
        assert_eq!(portfolio_loss(&[0.0, 0.0], &[0.5, 0.5]).unwrap(), 0.0);
        assert_eq!(portfolio_loss(&[0.5, 0.0], &[0.5, 0.5]).unwrap(), 0.25);
        let f = [0.1, 0.2, 0.3, 0.4];
        assert!((portfolio_loss(&[0.37; 4], &f).unwrap() - 0.37).abs() < 1e-15);
        assert!(matches!(
            portfolio_loss(&[0.1], &[0.5, 0.5]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn fractions_follow_face_values() {
        let c = |f| ContractParams::with_face_value(0.0, 0.02, 0.8, f).unwrap();
        let p = PortfolioSpec::new(vec![0, 1, 2], vec![c(1.0), c(2.0), c(1.0)]).unwrap();
        assert_eq!(p.fractions, vec![0.25, 0.5, 0.25]);
        assert!(PortfolioSpec::new(vec![0, 0], vec![c(1.0), c(1.0)]).is_err());
    }

    #[test]
    fn leverage_outside_unit_interval_rejected() {
        assert!(ContractParams::new(0.0, 0.02, 0.0).is_err());
        assert!(ContractParams::new(0.0, 0.02, 1.2).is_err());
        assert!(ContractParams::new(0.0, 0.02, 1.0).is_ok());
    }

    #[test]
    fn perfectly_correlated_identical_contracts() {
        let market = MarketParams::homogeneous(2, 1e-3, 0.03, 1.0, TailParam::Infinite).unwrap();
        let p1 = PortfolioSpec::from_market(&market, vec![0], &[0.9]).unwrap();
        let p2 = PortfolioSpec::from_market(&market, vec![1], &[0.9]).unwrap();
        let s = simulate_loss_pairs(&market, &p1, &p2, 2000, StreamKey::new(1, 2)).unwrap();
        assert_eq!(s.l1, s.l2);
        assert!(s.l1.iter().any(|&l| l > 0.0));
    }

    #[test]
    fn overlap_and_range_errors() {
        let market = MarketParams::homogeneous(4, 0.0, 0.02, 0.0, TailParam::Infinite).unwrap();
        let p1 = PortfolioSpec::from_market(&market, vec![0, 1], &[0.7, 0.7]).unwrap();
        let p2 = PortfolioSpec::from_market(&market, vec![1, 2], &[0.7, 0.7]).unwrap();
        assert!(matches!(
            simulate_loss_pairs(&market, &p1, &p2, 10, StreamKey::new(0, 0)),
            Err(Error::OverlappingPortfolios { index: 1 })
        ));
        let small = MarketParams::homogeneous(2, 0.0, 0.02, 0.0, TailParam::Infinite).unwrap();
        let p3 = PortfolioSpec::from_market(&market, vec![3], &[0.7]).unwrap();
        let p4 = PortfolioSpec::from_market(&market, vec![0], &[0.7]).unwrap();
        assert!(matches!(
            simulate_loss_pairs(&small, &p3, &p4, 10, StreamKey::new(0, 0)),
            Err(Error::IndexOutOfRange { index: 3, .. })
        ));
    }

    #[test]
    fn losses_are_bounded() {
        let market = MarketParams::homogeneous(20, -3e-3, 0.1, 0.2, TailParam::Finite(3)).unwrap();
        let p1 = PortfolioSpec::from_market(&market, (0..10).collect(), &[1.0; 10]).unwrap();
        let p2 = PortfolioSpec::from_market(&market, (10..20).collect(), &[0.6; 10]).unwrap();
        let s = simulate_loss_pairs(&market, &p1, &p2, 5000, StreamKey::new(9, 9)).unwrap();
        assert!(s.l1.iter().chain(&s.l2).all(|&l| (0.0..1.0).contains(&l)));
    }
}
