//! Seeded random instances.

use std::collections::{BTreeSet, VecDeque};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::InstanceFile;
use crate::network::{Buyer, Network, NetworkProblem, OdPair};
use crate::scalar::{Cap, ScalarCostFn};
use crate::wireless::{Congestion, Provider, UserClass, WirelessProblem};

/// Partial paths the enumeration may expand per O/D pair.
const MAX_EXPANSIONS: usize = 200_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostFamily {
    /// `c_a = c0 + c1 f`, `h = h0 − h1 y` with coefficients drawn uniformly.
    Random,
    /// `c_a = 1 + f`; buyers alternate `30 − 0.5 y` and `28 − 0.3 y`.
    Reference,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkGenParams {
    pub nodes: usize,
    pub arcs: usize,
    pub od_pairs: usize,
    pub paths_per_pair: usize,
    pub buyers_per_pair: usize,
    pub costs: CostFamily,
}

impl Default for NetworkGenParams {
    fn default() -> Self {
        Self { nodes: 20, arcs: 114, od_pairs: 10, paths_per_pair: 4, buyers_per_pair: 2, costs: CostFamily::Random }
    }
}

fn random_buyer(rng: &mut ChaCha8Rng) -> Buyer {
    let h0 = rng.gen_range(20.0..=40.0);
    let h1 = rng.gen_range(0.1..=1.0);
    Buyer::new(ScalarCostFn::affine(h0, -h1), Cap::Finite(h0 / h1))
}

fn reference_buyer(j: usize) -> Buyer {
    let (h0, h1) = if j % 2 == 0 { (30.0, 0.5) } else { (28.0, 0.3) };
    Buyer::new(ScalarCostFn::affine(h0, -h1), Cap::Finite(h0 / h1))
}

/// Random strongly connected digraph with O/D pairs and explicit simple paths.
///
/// A Hamiltonian cycle over a random node order guarantees strong
/// connectivity; the remaining arcs join distinct random node pairs.
pub fn generate_network(seed: u64, params: &NetworkGenParams) -> Result<NetworkProblem> {
    let n = params.nodes;
    if n < 2 {
        return Err(Error::Generation("need at least two nodes".into()));
    }
    let max_arcs = n * (n - 1);
    if params.arcs < n || params.arcs > max_arcs {
        return Err(Error::Generation(format!("arc count must lie in [{n}, {max_arcs}], got {}", params.arcs)));
    }
    if params.od_pairs == 0 || params.od_pairs > max_arcs {
        return Err(Error::Generation(format!("O/D pair count must lie in [1, {max_arcs}]")));
    }
    if params.paths_per_pair == 0 || params.buyers_per_pair == 0 {
        return Err(Error::Generation("need at least one path and one buyer per pair".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut arcs: Vec<(usize, usize)> = (0..n).map(|i| (order[i], order[(i + 1) % n])).collect();
    let mut used: BTreeSet<(usize, usize)> = arcs.iter().copied().collect();
    let mut free: Vec<(usize, usize)> =
        (0..n).flat_map(|u| (0..n).map(move |v| (u, v))).filter(|&(u, v)| u != v && !used.contains(&(u, v))).collect();
    free.shuffle(&mut rng);
    for e in free.into_iter().take(params.arcs - n) {
        used.insert(e);
        arcs.push(e);
    }

    let costs: Vec<ScalarCostFn> = arcs
        .iter()
        .map(|_| match params.costs {
            CostFamily::Random => ScalarCostFn::affine(rng.gen_range(1.0..=10.0), rng.gen_range(0.5..=2.0)),
            CostFamily::Reference => ScalarCostFn::affine(1.0, 1.0),
        })
        .collect();

    let mut candidates: Vec<(usize, usize)> =
        (0..n).flat_map(|u| (0..n).map(move |v| (u, v))).filter(|&(u, v)| u != v).collect();
    candidates.shuffle(&mut rng);
    let mut pairs = Vec::with_capacity(params.od_pairs);
    for &(o, d) in &candidates {
        if pairs.len() == params.od_pairs {
            break;
        }
        let paths = simple_paths(n, &arcs, o, d, params.paths_per_pair);
        if paths.is_empty() {
            continue;
        }
        let buyers = (0..params.buyers_per_pair)
            .map(|j| match params.costs {
                CostFamily::Random => random_buyer(&mut rng),
                CostFamily::Reference => reference_buyer(j),
            })
            .collect();
        pairs.push(OdPair { origin: o, destination: d, paths, buyers });
    }
    if pairs.len() < params.od_pairs {
        return Err(Error::Generation(format!("only {} connected O/D pairs found", pairs.len())));
    }
    let net = Network::separable(n, arcs.into_iter().zip(costs).map(|((u, v), c)| (u, v, c)).collect())?;
    NetworkProblem::new(net, pairs)
}

/// Up to `limit` simple paths from `o` to `d`, fewest arcs first.
fn simple_paths(n: usize, arcs: &[(usize, usize)], o: usize, d: usize, limit: usize) -> Vec<Vec<usize>> {
    let mut out_arcs = vec![Vec::new(); n];
    for (a, &(u, _)) in arcs.iter().enumerate() {
        out_arcs[u].push(a);
    }
    let mut found = Vec::new();
    let mut queue: VecDeque<(usize, Vec<usize>)> = VecDeque::from([(o, Vec::new())]);
    let mut expansions = 0;
    while let Some((node, path)) = queue.pop_front() {
        expansions += 1;
        if expansions > MAX_EXPANSIONS {
            break;
        }
        for &a in &out_arcs[node] {
            let next = arcs[a].1;
            if next == o || path.iter().any(|&b| arcs[b].1 == next) {
                continue;
            }
            let mut p = path.clone();
            p.push(a);
            if next == d {
                found.push(p);
                if found.len() == limit {
                    return found;
                }
            } else {
                queue.push_back((next, p));
            }
        }
    }
    found
}

pub fn network_instance_file(seed: u64, params: &NetworkGenParams) -> Result<InstanceFile> {
    let problem = generate_network(seed, params)?;
    Ok(InstanceFile::from_network(&problem)?.with_generator(seed, serde_json::to_value(params)?))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WirelessGenParams {
    pub providers: usize,
    pub users: usize,
    pub congestion: f64,
    /// The first `capped_providers` providers get a finite offer cap drawn from `[1, 5]`.
    pub capped_providers: usize,
}

impl Default for WirelessGenParams {
    fn default() -> Self {
        Self { providers: 3, users: 2, congestion: 0.1, capped_providers: 0 }
    }
}

pub fn generate_wireless(seed: u64, params: &WirelessGenParams) -> Result<WirelessProblem> {
    if params.providers == 0 || params.users == 0 {
        return Err(Error::Generation("need at least one provider and one user class".into()));
    }
    if params.capped_providers > params.providers {
        return Err(Error::Generation("more capped providers than providers".into()));
    }
    if !(params.congestion >= 0.0) {
        return Err(Error::Generation("congestion coefficient must be non-negative".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let providers = (0..params.providers)
        .map(|i| {
            let base_price = ScalarCostFn::affine(rng.gen_range(1.0..=10.0), rng.gen_range(0.5..=2.0));
            let cap = if i < params.capped_providers { Cap::Finite(rng.gen_range(1.0..=5.0)) } else { Cap::Infinite };
            Provider { base_price, cap }
        })
        .collect();
    let users = (0..params.users)
        .map(|_| {
            let h0 = rng.gen_range(20.0..=40.0);
            let h1 = rng.gen_range(0.1..=1.0);
            UserClass { disutility: ScalarCostFn::affine(h0, -h1), cap: h0 / h1 }
        })
        .collect();
    let congestion = if params.congestion == 0.0 { Congestion::None } else { Congestion::Linear(params.congestion) };
    WirelessProblem::new(providers, congestion, users)
}

pub fn wireless_instance_file(seed: u64, params: &WirelessGenParams) -> Result<InstanceFile> {
    let problem = generate_wireless(seed, params)?;
    Ok(InstanceFile::from_wireless(&problem)?.with_generator(seed, serde_json::to_value(params)?))
}
