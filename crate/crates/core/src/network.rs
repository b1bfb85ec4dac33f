//! Elastic-demand network equilibrium with several buyer pairs per O/D pair.
//!
//! Traders are the paths of an O/D pair, buyers are its user pairs, and the
//! balance per pair is `Σ_p x_p = Σ_j y_j`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{
    verify_equilibrium, CommodityBlock, MarketProblem, Participant, Point, PriceFn,
    PriceInterval, Verdict, Violation, ACTIVE_TOL,
};
use crate::scalar::{Cap, ScalarCostFn};

/// Path flows and demands, one block per O/D pair.
pub type FlowPoint = Point;

/// Joint arc cost map `f -> (c_a(f))_a`.
pub type JointCostFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArcEnds {
    pub from: usize,
    pub to: usize,
}

#[derive(Clone)]
pub enum ArcCosts {
    /// `c_a(f) = c_a(f_a)`
    Separable(Vec<ScalarCostFn>),
    /// `c_a(f)` depends on the whole arc flow vector; no potential is assumed.
    Joint(JointCostFn),
}

impl fmt::Debug for ArcCosts {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ArcCosts::Separable(c) => f.debug_tuple("Separable").field(c).finish(),
            ArcCosts::Joint(_) => f.write_str("Joint(..)"),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Network {
    num_nodes: usize,
    arcs: Vec<ArcEnds>,
    costs: ArcCosts,
}

impl Network {
    pub fn new(num_nodes: usize, arcs: Vec<ArcEnds>, costs: ArcCosts) -> Result<Self> {
        for (a, e) in arcs.iter().enumerate() {
            if e.from >= num_nodes || e.to >= num_nodes {
                return Err(Error::Network(format!(
                    "arc {a} ({} -> {}) references a node outside 0..{num_nodes}",
                    e.from, e.to
                )));
            }
        }
        if let ArcCosts::Separable(c) = &costs {
            if c.len() != arcs.len() {
                return Err(Error::Dimension(format!(
                    "{} arc cost functions for {} arcs",
                    c.len(),
                    arcs.len()
                )));
            }
        }
        Ok(Self { num_nodes, arcs, costs })
    }

    /// Separable network from `(from, to, cost)` triples.
    pub fn separable(num_nodes: usize, arcs: Vec<(usize, usize, ScalarCostFn)>) -> Result<Self> {
        let (ends, costs): (Vec<_>, Vec<_>) =
            arcs.into_iter().map(|(from, to, c)| (ArcEnds { from, to }, c)).unzip();
        Self::new(num_nodes, ends, ArcCosts::Separable(costs))
    }

    pub fn num_nodes(&self) -> usize {
        self.num_nodes
    }

    pub fn arcs(&self) -> &[ArcEnds] {
        &self.arcs
    }

    pub fn costs(&self) -> &ArcCosts {
        &self.costs
    }

    /// `c_a(f)` for every arc.
    pub fn arc_costs(&self, flows: &[f64]) -> Vec<f64> {
        match &self.costs {
            ArcCosts::Separable(c) => c.iter().zip(flows).map(|(c, &f)| c.eval(f)).collect(),
            ArcCosts::Joint(j) => j(flows),
        }
    }
}

/// User pair with its dis-utility (inverse demand) function and demand cap `γ_j`.
#[derive(Clone, Debug)]
pub struct Buyer {
    pub disutility: ScalarCostFn,
    pub cap: Cap,
}

impl Buyer {
    pub fn new(disutility: ScalarCostFn, cap: Cap) -> Self {
        Self { disutility, cap }
    }
}

#[derive(Clone, Debug)]
pub struct OdPair {
    pub origin: usize,
    pub destination: usize,
    /// Each path is a list of arc ids walking from origin to destination.
    pub paths: Vec<Vec<usize>>,
    pub buyers: Vec<Buyer>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EquilibriumForm {
    /// Price conditions with a recovered per-pair price.
    Kkt,
    /// Pairwise path/buyer complementarity.
    Complementarity,
    /// Pairwise implication form.
    Implication,
}

impl std::str::FromStr for EquilibriumForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "kkt" => Ok(Self::Kkt),
            "complementarity" => Ok(Self::Complementarity),
            "implication" => Ok(Self::Implication),
            other => Err(Error::Config(format!("unknown equilibrium form `{other}`"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct NetworkProblem {
    network: Network,
    od_pairs: Vec<OdPair>,
    /// Distinct arcs of each path, per pair: the 0/1 incidence.
    incidence: Vec<Vec<Vec<usize>>>,
}

impl NetworkProblem {
    pub fn new(network: Network, od_pairs: Vec<OdPair>) -> Result<Self> {
        let mut incidence = Vec::with_capacity(od_pairs.len());
        for (s, od) in od_pairs.iter().enumerate() {
            if od.origin >= network.num_nodes || od.destination >= network.num_nodes {
                return Err(Error::Network(format!("O/D pair {s}: unknown node")));
            }
            if od.paths.is_empty() {
                return Err(Error::Network(format!("O/D pair {s} has no path")));
            }
            if od.buyers.is_empty() {
                return Err(Error::Network(format!("O/D pair {s} has no buyer")));
            }
            for (j, b) in od.buyers.iter().enumerate() {
                if let Cap::Finite(g) = b.cap {
                    if !(g >= 0.0) || !g.is_finite() {
                        return Err(Error::Bounds(format!("O/D pair {s}, buyer {j}: cap {g}")));
                    }
                }
            }
            let mut pair_inc = Vec::with_capacity(od.paths.len());
            for (p, path) in od.paths.iter().enumerate() {
                check_walk(&network, od, path).map_err(|msg| {
                    Error::Network(format!("O/D pair {s}, path {p}: {msg}"))
                })?;
                let mut arcs = path.clone();
                arcs.sort_unstable();
                arcs.dedup();
                pair_inc.push(arcs);
            }
            incidence.push(pair_inc);
        }
        Ok(Self { network, od_pairs, incidence })
    }

    pub fn network(&self) -> &Network {
        &self.network
    }

    pub fn od_pairs(&self) -> &[OdPair] {
        &self.od_pairs
    }

    /// Distinct arcs of path `p` in pair `s`.
    pub fn path_arcs(&self, s: usize, p: usize) -> &[usize] {
        &self.incidence[s][p]
    }

    pub fn dims(&self) -> Vec<(usize, usize)> {
        self.od_pairs.iter().map(|od| (od.paths.len(), od.buyers.len())).collect()
    }

    pub fn all_caps_finite(&self) -> bool {
        self.od_pairs.iter().all(|od| od.buyers.iter().all(|b| b.cap.is_finite()))
    }

    pub fn check_dims(&self, w: &FlowPoint) -> Result<()> {
        let dims = self.dims();
        if w.dims() != dims {
            return Err(Error::Dimension(format!(
                "flow point has block shape {:?}, problem expects {:?}",
                w.dims(),
                dims
            )));
        }
        Ok(())
    }

    /// `f_a = Σ_s Σ_p α_pa x_p`
    pub fn arc_flows(&self, w: &FlowPoint) -> Result<Vec<f64>> {
        self.check_dims(w)?;
        let mut f = vec![0.0; self.network.arcs.len()];
        for (s, blk) in w.blocks.iter().enumerate() {
            self.add_block_flows(s, &blk.x, 1.0, &mut f);
        }
        Ok(f)
    }

    pub(crate) fn add_block_flows(&self, s: usize, x: &[f64], scale: f64, out: &mut [f64]) {
        for (arcs, &xp) in self.incidence[s].iter().zip(x) {
            if xp == 0.0 {
                continue;
            }
            let v = scale * xp;
            for &a in arcs {
                out[a] += v;
            }
        }
    }

    /// `g_p = Σ_a α_pa c_a(f)` for the paths of pair `s`, given arc costs.
    pub(crate) fn block_path_costs(&self, s: usize, arc_costs: &[f64]) -> Vec<f64> {
        self.incidence[s].iter().map(|arcs| arcs.iter().map(|&a| arc_costs[a]).sum()).collect()
    }

    /// Path costs `g_p(x)` for every pair.
    pub fn path_costs(&self, w: &FlowPoint) -> Result<Vec<Vec<f64>>> {
        let flows = self.arc_flows(w)?;
        let costs = self.network.arc_costs(&flows);
        if costs.len() != flows.len() {
            return Err(Error::Dimension("joint cost map returned wrong length".into()));
        }
        if let Some(a) = costs.iter().position(|c| !c.is_finite()) {
            return Err(Error::NonFinite(format!("cost of arc {a} at flow {}", flows[a])));
        }
        Ok((0..self.od_pairs.len()).map(|s| self.block_path_costs(s, &costs)).collect())
    }

    /// Buyer dis-utilities `h_j(y_j)` for every pair.
    pub fn buyer_prices(&self, w: &FlowPoint) -> Result<Vec<Vec<f64>>> {
        self.check_dims(w)?;
        Ok(self
            .od_pairs
            .iter()
            .zip(&w.blocks)
            .map(|(od, blk)| {
                od.buyers.iter().zip(&blk.y).map(|(b, &y)| b.disutility.eval(y)).collect()
            })
            .collect())
    }

    fn market_blocks(&self) -> Vec<CommodityBlock> {
        self.od_pairs
            .iter()
            .map(|od| {
                CommodityBlock::new(
                    vec![Participant::new(0.0, Cap::Infinite); od.paths.len()],
                    od.buyers.iter().map(|b| Participant::new(0.0, b.cap)).collect(),
                    0.0,
                )
                .expect("zero demand is always feasible")
            })
            .collect()
    }

    /// The network as a two-sided market: one commodity per O/D pair, paths
    /// as traders on `[0, ∞)`, buyers on `[0, γ_j]`, closed markets.
    pub fn to_market(&self) -> MarketProblem {
        let me = Arc::new(self.clone());
        let prices: PriceFn = Arc::new(move |w: &Point| {
            let g = me.path_costs(w).expect("dimensions checked by the market");
            let h = me.buyer_prices(w).expect("dimensions checked by the market");
            Point::new(
                g.into_iter()
                    .zip(h)
                    .map(|(x, y)| crate::market::BlockValues { x, y })
                    .collect(),
            )
        });
        MarketProblem::new(self.market_blocks(), prices)
    }

    pub fn infeasibility(&self, w: &FlowPoint) -> Result<f64> {
        self.check_dims(w)?;
        let blocks = self.market_blocks();
        Ok(blocks.iter().zip(&w.blocks).map(|(b, v)| b.infeasibility(v)).fold(0.0, f64::max))
    }

    /// Checks one of the three equilibrium characterizations at `w`.
    pub fn check_equilibrium(&self, w: &FlowPoint, tol: f64, form: EquilibriumForm) -> Result<Verdict> {
        self.check_dims(w)?;
        match form {
            EquilibriumForm::Kkt => verify_equilibrium(&self.to_market(), w, tol),
            EquilibriumForm::Complementarity | EquilibriumForm::Implication => {
                let blocks = self.market_blocks();
                for (s, (b, v)) in blocks.iter().zip(&w.blocks).enumerate() {
                    let amount = b.infeasibility(v);
                    let scale = 1.0 + v.x.iter().map(|t| t.abs()).sum::<f64>();
                    if amount > tol.max(1e-10) * scale {
                        return Ok(Verdict::Violated(Violation::Infeasible { block: s, amount }));
                    }
                }
                let g = self.path_costs(w)?;
                let h = self.buyer_prices(w)?;
                let positive = |t: f64| t > ACTIVE_TOL + tol;
                let mut intervals = Vec::with_capacity(self.od_pairs.len());
                for (s, blk) in w.blocks.iter().enumerate() {
                    let mut any_positive_pair = false;
                    for (p, (&gp, &xp)) in g[s].iter().zip(&blk.x).enumerate() {
                        for (j, (&hj, &yj)) in h[s].iter().zip(&blk.y).enumerate() {
                            let d = gp - hj;
                            let both = positive(xp) && positive(yj);
                            any_positive_pair |= both;
                            let bad = match form {
                                EquilibriumForm::Complementarity => {
                                    if both {
                                        d.abs() > tol
                                    } else {
                                        d < -tol
                                    }
                                }
                                // d > 0 ⇒ x_p = 0 or y_j = 0; d ≥ 0 for all feasible pairs
                                _ => (d > tol && both) || d < -tol,
                            };
                            if bad {
                                return Ok(Verdict::Violated(Violation::PairConflict {
                                    block: s,
                                    path: p,
                                    buyer: j,
                                    margin: d,
                                }));
                            }
                        }
                    }
                    let min_g = g[s].iter().copied().fold(f64::INFINITY, f64::min);
                    let max_h = h[s].iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    intervals.push(if any_positive_pair {
                        PriceInterval { lo: max_h.min(min_g), hi: min_g }
                    } else {
                        PriceInterval { lo: max_h, hi: min_g }
                    });
                }
                Ok(Verdict::Equilibrium(intervals))
            }
        }
    }
}

fn check_walk(net: &Network, od: &OdPair, path: &[usize]) -> std::result::Result<(), String> {
    let first = path.first().ok_or("empty path")?;
    let mut at = od.origin;
    for &a in path {
        let e = net.arcs.get(a).ok_or_else(|| format!("unknown arc {a}"))?;
        if e.from != at {
            return Err(format!("arc {a} starts at node {} but the walk is at {at}", e.from));
        }
        at = e.to;
    }
    if at != od.destination {
        return Err(format!(
            "walk starting with arc {first} ends at node {at}, not {}",
            od.destination
        ));
    }
    Ok(())
}

/// Two parallel arcs `c1 = 1 + f`, `c2 = 2 + f` and one buyer `h(y) = 10 − y`, `γ = 10`.
///
/// Its equilibrium is `x = (10/3, 7/3)`, `y = 17/3`, price `13/3`.
pub fn two_route_instance() -> NetworkProblem {
    let net = Network::separable(
        2,
        vec![(0, 1, ScalarCostFn::affine(1.0, 1.0)), (0, 1, ScalarCostFn::affine(2.0, 1.0))],
    )
    .expect("valid arcs");
    NetworkProblem::new(
        net,
        vec![OdPair {
            origin: 0,
            destination: 1,
            paths: vec![vec![0], vec![1]],
            buyers: vec![Buyer::new(ScalarCostFn::affine(10.0, -1.0), Cap::Finite(10.0))],
        }],
    )
    .expect("valid pair")
}
