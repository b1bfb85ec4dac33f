//! Wireless resource allocation: providers with congestion-coupled prices
//! selling to user classes under a single shared balance constraint.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::market::{BlockValues, CommodityBlock, MarketProblem, Participant, Point, PriceFn};
use crate::scalar::{Cap, ScalarCostFn};

pub type VectorFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
pub type PotentialFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// The congestion dis-utility `l_i(x)` added to every provider's base price.
#[derive(Clone)]
pub enum Congestion {
    None,
    /// `l_i(x) = coeff · Σ_k x_k` for every provider.
    Linear(f64),
    /// Arbitrary `l(x)`; the descent solvers need `potential` with
    /// `∂potential/∂x_i = l_i(x)`.
    Custom { prices: VectorFn, potential: Option<PotentialFn> },
}

impl fmt::Debug for Congestion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Congestion::None => f.write_str("None"),
            Congestion::Linear(c) => write!(f, "Linear({c})"),
            Congestion::Custom { potential, .. } => {
                write!(f, "Custom {{ potential: {} }}", potential.is_some())
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct Provider {
    pub base_price: ScalarCostFn,
    pub cap: Cap,
}

#[derive(Clone, Debug)]
pub struct UserClass {
    pub disutility: ScalarCostFn,
    pub cap: f64,
}

#[derive(Clone, Debug)]
pub struct WirelessProblem {
    providers: Vec<Provider>,
    congestion: Congestion,
    users: Vec<UserClass>,
}

impl WirelessProblem {
    pub fn new(providers: Vec<Provider>, congestion: Congestion, users: Vec<UserClass>) -> Result<Self> {
        if providers.is_empty() || users.is_empty() {
            return Err(Error::Dimension("need at least one provider and one user class".into()));
        }
        for (i, p) in providers.iter().enumerate() {
            if let Cap::Finite(a) = p.cap {
                if !(a >= 0.0) || !a.is_finite() {
                    return Err(Error::Bounds(format!("provider {i}: cap {a}")));
                }
            }
        }
        for (j, u) in users.iter().enumerate() {
            if !(u.cap >= 0.0) || !u.cap.is_finite() {
                return Err(Error::Bounds(format!("user class {j}: cap {} must be finite", u.cap)));
            }
        }
        Ok(Self { providers, congestion, users })
    }

    pub fn providers(&self) -> &[Provider] {
        &self.providers
    }

    pub fn users(&self) -> &[UserClass] {
        &self.users
    }

    pub fn congestion(&self) -> &Congestion {
        &self.congestion
    }

    pub fn dims(&self) -> Vec<(usize, usize)> {
        vec![(self.providers.len(), self.users.len())]
    }

    pub fn offer_caps_finite(&self) -> bool {
        self.providers.iter().all(|p| p.cap.is_finite())
    }

    /// Total bid capacity `Σβ_j`.
    pub fn total_demand_cap(&self) -> f64 {
        self.users.iter().map(|u| u.cap).sum()
    }

    /// Same problem with the offer caps removed.
    pub fn without_offer_caps(&self) -> Self {
        let mut me = self.clone();
        for p in &mut me.providers {
            p.cap = Cap::Infinite;
        }
        me
    }

    fn check_offers(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.providers.len() {
            return Err(Error::Dimension(format!(
                "{} offers for {} providers",
                x.len(),
                self.providers.len()
            )));
        }
        Ok(())
    }

    pub(crate) fn congestion_terms(&self, x: &[f64]) -> Vec<f64> {
        match &self.congestion {
            Congestion::None => vec![0.0; x.len()],
            Congestion::Linear(c) => vec![c * x.iter().sum::<f64>(); x.len()],
            Congestion::Custom { prices, .. } => prices(x),
        }
    }

    /// Actual provider prices `g_i(x) = b_i(x_i) + l_i(x)`.
    pub fn prices(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_offers(x)?;
        let l = self.congestion_terms(x);
        if l.len() != x.len() {
            return Err(Error::Dimension("congestion map returned wrong length".into()));
        }
        Ok(self.providers.iter().zip(x).zip(l).map(|((p, &t), l)| p.base_price.eval(t) + l).collect())
    }

    /// `μ(x) = Σ_i ∫_0^{x_i} b_i + congestion potential`, when a potential exists.
    pub fn potential(&self, x: &[f64]) -> Result<f64> {
        self.check_offers(x)?;
        let base: f64 = self.providers.iter().zip(x).map(|(p, &t)| p.base_price.primitive(t)).sum();
        let cong = match &self.congestion {
            Congestion::None => 0.0,
            Congestion::Linear(c) => {
                let s: f64 = x.iter().sum();
                0.5 * c * s * s
            }
            Congestion::Custom { potential: Some(pot), .. } => pot(x),
            Congestion::Custom { potential: None, .. } => {
                return Err(Error::Unsupported("custom congestion without a potential".into()))
            }
        };
        Ok(base + cong)
    }

    /// `g̃_i(x) = g_i(x) + τ max{x_i − α_i, 0}`, the gradient of `μ + τ·0.5Σmax{x_i−α_i,0}²`.
    pub fn penalized_gradient(&self, x: &[f64], tau: f64) -> Result<Vec<f64>> {
        if !(tau > 0.0) {
            return Err(Error::Config(format!("penalty parameter must be positive, got {tau}")));
        }
        let mut g = self.prices(x)?;
        for ((gi, p), &t) in g.iter_mut().zip(&self.providers).zip(x) {
            *gi += tau * excess(t, p.cap);
        }
        Ok(g)
    }

    /// `0.5 Σ max{x_i − α_i, 0}²`
    pub fn penalty(&self, x: &[f64]) -> f64 {
        0.5 * self.providers.iter().zip(x).map(|(p, &t)| excess(t, p.cap).powi(2)).sum::<f64>()
    }

    /// `max_i max{x_i − α_i, 0}`
    pub fn cap_violation(&self, x: &[f64]) -> f64 {
        self.providers.iter().zip(x).map(|(p, &t)| excess(t, p.cap)).fold(0.0, f64::max)
    }

    /// Single-commodity closed market: providers on `[0, α_i]`, classes on `[0, β_j]`.
    pub fn to_market(&self) -> MarketProblem {
        let block = CommodityBlock::new(
            self.providers.iter().map(|p| Participant::new(0.0, p.cap)).collect(),
            self.users.iter().map(|u| Participant::new(0.0, Cap::Finite(u.cap))).collect(),
            0.0,
        )
        .expect("zero volumes are always feasible");
        let me = Arc::new(self.clone());
        let prices: PriceFn = Arc::new(move |w: &Point| {
            let blk = &w.blocks[0];
            Point::new(vec![BlockValues {
                x: me.prices(&blk.x).expect("dimensions checked by the market"),
                y: me.users.iter().zip(&blk.y).map(|(u, &y)| u.disutility.eval(y)).collect(),
            }])
        });
        MarketProblem::new(vec![block], prices)
    }
}

pub(crate) fn excess(t: f64, cap: Cap) -> f64 {
    match cap {
        Cap::Finite(a) => (t - a).max(0.0),
        Cap::Infinite => 0.0,
    }
}

/// Penalty continuation schedule for finite offer caps.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default)]
pub struct PenaltyConfig {
    /// Strictly increasing penalty parameters.
    pub schedule: Vec<f64>,
    /// Stop once `max_i max{x_i − α_i, 0}` is at most this.
    pub violation_threshold: f64,
    /// Inner solves stop at gap `inner_gap_scale / τ`.
    pub inner_gap_scale: f64,
    /// Block-iteration budget of a single stage.
    pub max_block_iters_per_stage: u64,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        Self {
            schedule: (1..=6).map(|t| 10f64.powi(t)).collect(),
            violation_threshold: 1e-6,
            inner_gap_scale: 0.1,
            max_block_iters_per_stage: 1_000_000,
        }
    }
}

impl PenaltyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.schedule.is_empty() {
            return Err(Error::Config("empty penalty schedule".into()));
        }
        if self.schedule[0] <= 0.0 || self.schedule.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("penalty schedule must be positive and strictly increasing".into()));
        }
        if !(self.violation_threshold >= 0.0) || !(self.inner_gap_scale > 0.0) || self.max_block_iters_per_stage == 0 {
            return Err(Error::Config("bad penalty thresholds".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::verify_equilibrium;

    /// Two providers `b = 1 + x_i`, `2 + x_i`, congestion 0.5, one class `h = 20 − y`.
    fn sample() -> WirelessProblem {
        WirelessProblem::new(
            vec![
                Provider { base_price: ScalarCostFn::affine(1.0, 1.0), cap: Cap::Infinite },
                Provider { base_price: ScalarCostFn::affine(2.0, 1.0), cap: Cap::Finite(1.0) },
            ],
            Congestion::Linear(0.5),
            vec![UserClass { disutility: ScalarCostFn::affine(20.0, -1.0), cap: 30.0 }],
        )
        .unwrap()
    }

    #[test]
    fn market_shape() {
        let p = WirelessProblem::new(
            vec![
                Provider { base_price: ScalarCostFn::constant(1.0), cap: Cap::Infinite },
                Provider { base_price: ScalarCostFn::constant(2.0), cap: Cap::Infinite },
            ],
            Congestion::None,
            (0..3)
                .map(|_| UserClass { disutility: ScalarCostFn::affine(5.0, -1.0), cap: 1.0 })
                .collect(),
        )
        .unwrap();
        let m = p.to_market();
        assert_eq!(m.dims(), vec![(2, 3)]);
        assert_eq!(m.blocks()[0].excess_demand(), 0.0);
    }

    #[test]
    fn penalized_gradient_examples() {
        let p = sample();
        let x = [0.5, 0.5];
        assert_eq!(p.penalized_gradient(&x, 10.0).unwrap(), p.prices(&x).unwrap());
        let x = [0.0, 3.0];
        let g = p.prices(&x).unwrap();
        let gt = p.penalized_gradient(&x, 10.0).unwrap();
        assert_eq!(gt[0], g[0]);
        assert_eq!(gt[1], g[1] + 10.0 * 2.0);
        assert!(p.penalized_gradient(&x, 0.0).is_err());
    }

    #[test]
    fn hand_built_equilibrium_verifies() {
        // uncapped: 1 + x1 + 0.5 S = 2 + x2 + 0.5 S = 20 − S, S = x1 + x2
        // x1 = x2 + 1, λ = 1 + x1 + 0.5 S; S = 2 x2 + 1; λ = 20 − S
        // 2 + x2 + 0.5(2 x2 + 1) = 19 − 2 x2  =>  4 x2 = 16.5
        let p = sample().without_offer_caps();
        let x2 = 16.5 / 4.0;
        let x1 = x2 + 1.0;
        let w = Point::new(vec![BlockValues::new(vec![x1, x2], vec![x1 + x2])]);
        let v = verify_equilibrium(&p.to_market(), &w, 1e-9).unwrap();
        let lam = 20.0 - (x1 + x2);
        assert!(v.intervals().unwrap()[0].contains(lam, 1e-9));
    }

    #[test]
    fn penalty_schedule_validation() {
        assert!(PenaltyConfig::default().validate().is_ok());
        let bad = PenaltyConfig { schedule: vec![10.0, 10.0], ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
