//! JSON instance and point files.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{CommodityBlock, MarketProblem, Participant, Point};
use crate::network::{ArcCosts, Buyer, Network, NetworkProblem, OdPair};
use crate::scalar::{Cap, ScalarCostFn};
use crate::wireless::{Congestion, Provider, UserClass, WirelessProblem};

/// Serializable scalar function. Custom callables have no file form.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "lowercase")]
pub enum CostSpec {
    Affine { c0: f64, c1: f64 },
    Power { c0: f64, c1: f64, exponent: f64 },
}

impl CostSpec {
    pub fn build(&self) -> ScalarCostFn {
        match *self {
            CostSpec::Affine { c0, c1 } => ScalarCostFn::Affine { c0, c1 },
            CostSpec::Power { c0, c1, exponent } => ScalarCostFn::Power { c0, c1, exponent },
        }
    }

    pub fn from_fn(f: &ScalarCostFn) -> Result<Self> {
        match *f {
            ScalarCostFn::Affine { c0, c1 } => Ok(CostSpec::Affine { c0, c1 }),
            ScalarCostFn::Power { c0, c1, exponent } => Ok(CostSpec::Power { c0, c1, exponent }),
            ScalarCostFn::Custom(_) => Err(Error::Format("custom cost functions cannot be written to a file".into())),
        }
    }

    fn check(&self) -> Result<()> {
        let ok = match *self {
            CostSpec::Affine { c0, c1 } => c0.is_finite() && c1.is_finite(),
            CostSpec::Power { c0, c1, exponent } => {
                c0.is_finite() && c1.is_finite() && exponent.is_finite() && exponent > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Format(format!("bad cost coefficients {self:?}")))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArcSpec {
    pub from: usize,
    pub to: usize,
    pub cost: CostSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BuyerSpec {
    pub disutility: CostSpec,
    pub cap: Cap,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OdSpec {
    pub origin: usize,
    pub destination: usize,
    /// Arc ids along each path, in walk order.
    pub paths: Vec<Vec<usize>>,
    pub buyers: Vec<BuyerSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub nodes: usize,
    pub arcs: Vec<ArcSpec>,
    pub od_pairs: Vec<OdSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProviderSpec {
    pub base_price: CostSpec,
    pub cap: Cap,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UserSpec {
    pub disutility: CostSpec,
    pub cap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "lowercase")]
pub enum CongestionSpec {
    None,
    Linear { coeff: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WirelessSpec {
    pub providers: Vec<ProviderSpec>,
    pub congestion: CongestionSpec,
    pub users: Vec<UserSpec>,
}

/// One commodity of a market with separable prices.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarketBlockSpec {
    pub traders: Vec<Participant>,
    pub buyers: Vec<Participant>,
    pub excess_demand: f64,
    pub trader_prices: Vec<CostSpec>,
    pub buyer_prices: Vec<CostSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarketSpec {
    pub blocks: Vec<MarketBlockSpec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum InstanceBody {
    Network(NetworkSpec),
    Wireless(WirelessSpec),
    Market(MarketSpec),
}

/// Seed and parameters of a generated instance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorInfo {
    pub seed: u64,
    pub params: serde_json::Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceFile {
    #[serde(flatten)]
    pub body: InstanceBody,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generator: Option<GeneratorInfo>,
}

/// A loaded problem.
#[derive(Clone, Debug)]
pub enum Instance {
    Network(NetworkProblem),
    Wireless(WirelessProblem),
    Market(MarketProblem),
}

impl Instance {
    pub fn dims(&self) -> Vec<(usize, usize)> {
        match self {
            Instance::Network(p) => p.dims(),
            Instance::Wireless(p) => p.dims(),
            Instance::Market(p) => p.dims(),
        }
    }

    pub fn to_market(&self) -> MarketProblem {
        match self {
            Instance::Network(p) => p.to_market(),
            Instance::Wireless(p) => p.to_market(),
            Instance::Market(p) => p.clone(),
        }
    }
}

impl InstanceFile {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn render(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        Ok(std::fs::write(path, self.render()?)?)
    }

    pub fn from_network(problem: &NetworkProblem) -> Result<Self> {
        let net = problem.network();
        let costs = match net.costs() {
            ArcCosts::Separable(c) => c,
            ArcCosts::Joint(_) => {
                return Err(Error::Format("joint arc cost maps cannot be written to a file".into()))
            }
        };
        let arcs = net
            .arcs()
            .iter()
            .zip(costs)
            .map(|(e, c)| Ok(ArcSpec { from: e.from, to: e.to, cost: CostSpec::from_fn(c)? }))
            .collect::<Result<_>>()?;
        let od_pairs = problem
            .od_pairs()
            .iter()
            .map(|od| {
                Ok(OdSpec {
                    origin: od.origin,
                    destination: od.destination,
                    paths: od.paths.clone(),
                    buyers: od
                        .buyers
                        .iter()
                        .map(|b| Ok(BuyerSpec { disutility: CostSpec::from_fn(&b.disutility)?, cap: b.cap }))
                        .collect::<Result<_>>()?,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self { body: InstanceBody::Network(NetworkSpec { nodes: net.num_nodes(), arcs, od_pairs }), generator: None })
    }

    pub fn from_wireless(problem: &WirelessProblem) -> Result<Self> {
        let congestion = match problem.congestion() {
            Congestion::None => CongestionSpec::None,
            Congestion::Linear(c) => CongestionSpec::Linear { coeff: *c },
            Congestion::Custom { .. } => {
                return Err(Error::Format("custom congestion cannot be written to a file".into()))
            }
        };
        let providers = problem
            .providers()
            .iter()
            .map(|p| Ok(ProviderSpec { base_price: CostSpec::from_fn(&p.base_price)?, cap: p.cap }))
            .collect::<Result<_>>()?;
        let users = problem
            .users()
            .iter()
            .map(|u| Ok(UserSpec { disutility: CostSpec::from_fn(&u.disutility)?, cap: u.cap }))
            .collect::<Result<_>>()?;
        Ok(Self { body: InstanceBody::Wireless(WirelessSpec { providers, congestion, users }), generator: None })
    }

    pub fn with_generator(mut self, seed: u64, params: serde_json::Value) -> Self {
        self.generator = Some(GeneratorInfo { seed, params });
        self
    }

    /// Validates and builds the problem.
    pub fn build(&self) -> Result<Instance> {
        match &self.body {
            InstanceBody::Network(spec) => build_network(spec).map(Instance::Network),
            InstanceBody::Wireless(spec) => build_wireless(spec).map(Instance::Wireless),
            InstanceBody::Market(spec) => build_market(spec).map(Instance::Market),
        }
    }
}

fn build_network(spec: &NetworkSpec) -> Result<NetworkProblem> {
    let mut arcs = Vec::with_capacity(spec.arcs.len());
    for a in &spec.arcs {
        a.cost.check()?;
        arcs.push((a.from, a.to, a.cost.build()));
    }
    let net = Network::separable(spec.nodes, arcs)?;
    let mut pairs = Vec::with_capacity(spec.od_pairs.len());
    for od in &spec.od_pairs {
        let mut buyers = Vec::with_capacity(od.buyers.len());
        for b in &od.buyers {
            b.disutility.check()?;
            buyers.push(Buyer::new(b.disutility.build(), b.cap));
        }
        pairs.push(OdPair { origin: od.origin, destination: od.destination, paths: od.paths.clone(), buyers });
    }
    NetworkProblem::new(net, pairs)
}

fn build_wireless(spec: &WirelessSpec) -> Result<WirelessProblem> {
    let mut providers = Vec::with_capacity(spec.providers.len());
    for p in &spec.providers {
        p.base_price.check()?;
        providers.push(Provider { base_price: p.base_price.build(), cap: p.cap });
    }
    let mut users = Vec::with_capacity(spec.users.len());
    for u in &spec.users {
        u.disutility.check()?;
        users.push(UserClass { disutility: u.disutility.build(), cap: u.cap });
    }
    let congestion = match spec.congestion {
        CongestionSpec::None => Congestion::None,
        CongestionSpec::Linear { coeff } if coeff.is_finite() => Congestion::Linear(coeff),
        CongestionSpec::Linear { coeff } => return Err(Error::Format(format!("congestion coefficient {coeff}"))),
    };
    WirelessProblem::new(providers, congestion, users)
}

fn build_market(spec: &MarketSpec) -> Result<MarketProblem> {
    let mut blocks = Vec::with_capacity(spec.blocks.len());
    let mut tp = Vec::with_capacity(spec.blocks.len());
    let mut bp = Vec::with_capacity(spec.blocks.len());
    for b in &spec.blocks {
        for c in b.trader_prices.iter().chain(&b.buyer_prices) {
            c.check()?;
        }
        blocks.push(CommodityBlock::new(b.traders.clone(), b.buyers.clone(), b.excess_demand)?);
        tp.push(b.trader_prices.iter().map(CostSpec::build).collect());
        bp.push(b.buyer_prices.iter().map(CostSpec::build).collect());
    }
    MarketProblem::separable(blocks, tp, bp)
}

/// Reads a point file `{"blocks": [{"x": [..], "y": [..]}, ..]}`.
pub fn load_point(path: impl AsRef<Path>) -> Result<Point> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

pub fn save_point(point: &Point, path: impl AsRef<Path>) -> Result<()> {
    let mut s = serde_json::to_string_pretty(point)?;
    s.push('\n');
    Ok(std::fs::write(path, s)?)
}
