//! General multi-commodity two-sided market: feasible sets, the variational
//! inequality residual and equilibrium verification with price recovery.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{Cap, ScalarCostFn};

/// Relative tolerance used to decide that a variable sits on one of its bounds.
pub const ACTIVE_TOL: f64 = 1e-8;

/// Offer volumes `x` and bid volumes `y` of one commodity block.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BlockValues {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl BlockValues {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        Self { x, y }
    }

    pub fn zeros(nx: usize, ny: usize) -> Self {
        Self { x: vec![0.0; nx], y: vec![0.0; ny] }
    }

    /// `Σx − Σy`
    pub fn imbalance(&self) -> f64 {
        self.x.iter().sum::<f64>() - self.y.iter().sum::<f64>()
    }
}

/// A full point `w = (x, y)` laid out block by block.
///
/// The same layout carries price vectors: trader prices in `x`, buyer prices in `y`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub blocks: Vec<BlockValues>,
}

impl Point {
    pub fn new(blocks: Vec<BlockValues>) -> Self {
        Self { blocks }
    }

    pub fn zeros(dims: &[(usize, usize)]) -> Self {
        Self { blocks: dims.iter().map(|&(nx, ny)| BlockValues::zeros(nx, ny)).collect() }
    }

    pub fn dims(&self) -> Vec<(usize, usize)> {
        self.blocks.iter().map(|b| (b.x.len(), b.y.len())).collect()
    }

    /// `self + t * (other - self)`
    pub fn lerp(&self, other: &Point, t: f64) -> Point {
        let blocks = self
            .blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| BlockValues {
                x: a.x.iter().zip(&b.x).map(|(u, v)| u + t * (v - u)).collect(),
                y: a.y.iter().zip(&b.y).map(|(u, v)| u + t * (v - u)).collect(),
            })
            .collect();
        Point { blocks }
    }

    /// `self + t * dir`
    pub fn add_scaled(&self, dir: &Point, t: f64) -> Point {
        let blocks = self
            .blocks
            .iter()
            .zip(&dir.blocks)
            .map(|(a, d)| BlockValues {
                x: a.x.iter().zip(&d.x).map(|(u, v)| u + t * v).collect(),
                y: a.y.iter().zip(&d.y).map(|(u, v)| u + t * v).collect(),
            })
            .collect();
        Point { blocks }
    }

    pub fn max_abs_diff(&self, other: &Point) -> f64 {
        self.blocks
            .iter()
            .zip(&other.blocks)
            .flat_map(|(a, b)| {
                a.x.iter().zip(&b.x).chain(a.y.iter().zip(&b.y)).map(|(u, v)| (u - v).abs())
            })
            .fold(0.0, f64::max)
    }
}

/// Capacity segment of one trader or buyer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Participant {
    pub lower: f64,
    pub upper: Cap,
}

impl Participant {
    pub fn new(lower: f64, upper: Cap) -> Self {
        Self { lower, upper }
    }

    fn at_lower(&self, v: f64, tol: f64) -> bool {
        v - self.lower <= active_band(self.lower, tol)
    }

    fn at_upper(&self, v: f64, tol: f64) -> bool {
        match self.upper {
            Cap::Finite(u) => u - v <= active_band(u, tol),
            Cap::Infinite => false,
        }
    }

    fn clamp(&self, v: f64) -> f64 {
        v.max(self.lower).min(self.upper.as_f64())
    }
}

fn active_band(bound: f64, tol: f64) -> f64 {
    ACTIVE_TOL * (1.0 + bound.abs()) + tol
}

/// One commodity: its traders, buyers and external excess demand `b_s`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommodityBlock {
    traders: Vec<Participant>,
    buyers: Vec<Participant>,
    excess_demand: f64,
}

impl CommodityBlock {
    /// Validates bounds and nonemptiness of `{Σx − Σy = b}` within the boxes.
    pub fn new(traders: Vec<Participant>, buyers: Vec<Participant>, excess_demand: f64) -> Result<Self> {
        for (role, list) in [("trader", &traders), ("buyer", &buyers)] {
            for (i, p) in list.iter().enumerate() {
                if !p.lower.is_finite() {
                    return Err(Error::Bounds(format!("{role} {i}: lower bound must be finite")));
                }
                if let Cap::Finite(u) = p.upper {
                    if !u.is_finite() || u < p.lower {
                        return Err(Error::Bounds(format!(
                            "{role} {i}: upper bound {u} below lower bound {}",
                            p.lower
                        )));
                    }
                }
            }
        }
        let sum_lo = |v: &[Participant]| v.iter().map(|p| p.lower).sum::<f64>();
        let sum_hi = |v: &[Participant]| v.iter().map(|p| p.upper.as_f64()).sum::<f64>();
        let min_net = sum_lo(&traders) - sum_hi(&buyers);
        let max_net = sum_hi(&traders) - sum_lo(&buyers);
        let slack = 1e-12 * (1.0 + excess_demand.abs());
        if !(min_net <= excess_demand + slack && excess_demand <= max_net + slack) {
            return Err(Error::Infeasible(format!(
                "balance Σx − Σy = {excess_demand} unreachable: range [{min_net}, {max_net}]"
            )));
        }
        Ok(Self { traders, buyers, excess_demand })
    }

    pub fn traders(&self) -> &[Participant] {
        &self.traders
    }

    pub fn buyers(&self) -> &[Participant] {
        &self.buyers
    }

    pub fn excess_demand(&self) -> f64 {
        self.excess_demand
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.traders.len(), self.buyers.len())
    }

    fn check_dims(&self, v: &BlockValues) -> Result<()> {
        if v.x.len() != self.traders.len() || v.y.len() != self.buyers.len() {
            return Err(Error::Dimension(format!(
                "block expects ({}, {}) values, got ({}, {})",
                self.traders.len(),
                self.buyers.len(),
                v.x.len(),
                v.y.len()
            )));
        }
        Ok(())
    }

    /// Largest bound or balance violation of `v` (0 when feasible).
    pub fn infeasibility(&self, v: &BlockValues) -> f64 {
        let box_viol = |p: &Participant, t: f64| {
            (p.lower - t).max(t - p.upper.as_f64()).max(0.0)
        };
        let bounds = self
            .traders
            .iter()
            .zip(&v.x)
            .chain(self.buyers.iter().zip(&v.y))
            .map(|(p, &t)| box_viol(p, t))
            .fold(0.0, f64::max);
        bounds.max((v.imbalance() - self.excess_demand).abs())
    }

    fn scale(&self, v: &BlockValues) -> f64 {
        1.0 + self.excess_demand.abs() + v.x.iter().map(|t| t.abs()).sum::<f64>()
    }
}

/// Evaluates every trader price `g_is(w)` and buyer price `h_js(w)` at a full point.
pub type PriceFn = Arc<dyn Fn(&Point) -> Point + Send + Sync>;

/// Market with an arbitrary (possibly fully cross-dependent) price evaluator.
#[derive(Clone)]
pub struct MarketProblem {
    blocks: Vec<CommodityBlock>,
    prices: PriceFn,
}

impl fmt::Debug for MarketProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MarketProblem").field("blocks", &self.blocks).finish_non_exhaustive()
    }
}

impl MarketProblem {
    pub fn new(blocks: Vec<CommodityBlock>, prices: PriceFn) -> Self {
        Self { blocks, prices }
    }

    /// Market whose prices each depend only on the participant's own volume.
    pub fn separable(
        blocks: Vec<CommodityBlock>,
        trader_prices: Vec<Vec<ScalarCostFn>>,
        buyer_prices: Vec<Vec<ScalarCostFn>>,
    ) -> Result<Self> {
        if trader_prices.len() != blocks.len() || buyer_prices.len() != blocks.len() {
            return Err(Error::Dimension("one price list per commodity expected".into()));
        }
        for (s, b) in blocks.iter().enumerate() {
            if trader_prices[s].len() != b.traders.len() || buyer_prices[s].len() != b.buyers.len() {
                return Err(Error::Dimension(format!("commodity {s}: price count mismatch")));
            }
        }
        let prices: PriceFn = Arc::new(move |w: &Point| Point {
            blocks: w
                .blocks
                .iter()
                .enumerate()
                .map(|(s, v)| BlockValues {
                    x: v.x.iter().zip(&trader_prices[s]).map(|(&t, g)| g.eval(t)).collect(),
                    y: v.y.iter().zip(&buyer_prices[s]).map(|(&t, h)| h.eval(t)).collect(),
                })
                .collect(),
        });
        Ok(Self { blocks, prices })
    }

    pub fn blocks(&self) -> &[CommodityBlock] {
        &self.blocks
    }

    pub fn dims(&self) -> Vec<(usize, usize)> {
        self.blocks.iter().map(CommodityBlock::dims).collect()
    }

    pub fn check_dims(&self, w: &Point) -> Result<()> {
        if w.blocks.len() != self.blocks.len() {
            return Err(Error::Dimension(format!(
                "expected {} commodity blocks, got {}",
                self.blocks.len(),
                w.blocks.len()
            )));
        }
        self.blocks.iter().zip(&w.blocks).try_for_each(|(b, v)| b.check_dims(v))
    }

    pub fn prices(&self, w: &Point) -> Result<Point> {
        self.check_dims(w)?;
        let p = (self.prices)(w);
        self.check_dims(&p)?;
        Ok(p)
    }

    /// Largest bound or balance violation over all blocks.
    pub fn infeasibility(&self, w: &Point) -> Result<f64> {
        self.check_dims(w)?;
        Ok(self.blocks.iter().zip(&w.blocks).map(|(b, v)| b.infeasibility(v)).fold(0.0, f64::max))
    }
}

/// Euclidean projection of `candidate` onto `{box, Σx − Σy = b}`.
///
/// The minimizer is `x_i = clamp(cx_i − ν)`, `y_j = clamp(cy_j + ν)` for the
/// multiplier `ν` zeroing the balance residual; `ν` is bracketed, bisected and
/// then fixed exactly on the final linear piece.
pub fn project_to_block(block: &CommodityBlock, candidate: &BlockValues) -> Result<BlockValues> {
    block.check_dims(candidate)?;
    let at = |nu: f64| BlockValues {
        x: block.traders.iter().zip(&candidate.x).map(|(p, &c)| p.clamp(c - nu)).collect(),
        y: block.buyers.iter().zip(&candidate.y).map(|(p, &c)| p.clamp(c + nu)).collect(),
    };
    let residual = |nu: f64| at(nu).imbalance() - block.excess_demand;

    if block.traders.is_empty() && block.buyers.is_empty() {
        return Ok(BlockValues::default());
    }

    // residual is non-increasing in ν
    let mut lo = -1.0;
    let mut hi = 1.0;
    let mut guard = 0;
    while residual(lo) < 0.0 && guard < 2100 {
        lo *= 2.0;
        guard += 1;
    }
    while residual(hi) > 0.0 && guard < 2100 {
        hi *= 2.0;
        guard += 1;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if residual(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut nu = 0.5 * (lo + hi);
    // exact solve on the linear piece containing ν
    let r = residual(nu);
    let trial = at(nu);
    let free = block
        .traders
        .iter()
        .zip(&trial.x)
        .filter(|(p, &v)| v > p.lower && v < p.upper.as_f64())
        .count()
        + block
            .buyers
            .iter()
            .zip(&trial.y)
            .filter(|(p, &v)| v > p.lower && v < p.upper.as_f64())
            .count();
    if free > 0 {
        let refined = nu + r / free as f64;
        if residual(refined).abs() <= r.abs() {
            nu = refined;
        }
    }
    let mut out = at(nu);
    absorb_residual(block, &mut out);
    Ok(out)
}

/// Pushes any leftover balance residual into variables that have room.
fn absorb_residual(block: &CommodityBlock, v: &mut BlockValues) {
    let mut r = v.imbalance() - block.excess_demand;
    // r > 0: lower some x or raise some y; r < 0: the reverse
    for (p, t) in block.traders.iter().zip(v.x.iter_mut()) {
        if r == 0.0 {
            return;
        }
        let target = p.clamp(*t - r);
        r -= *t - target;
        *t = target;
    }
    for (p, t) in block.buyers.iter().zip(v.y.iter_mut()) {
        if r == 0.0 {
            return;
        }
        let target = p.clamp(*t + r);
        r -= target - *t;
        *t = target;
    }
}

/// `Σ_s [Σ_i g_is(w)(probe_x − w_x) − Σ_j h_js(w)(probe_y − w_y)]`.
pub fn vi_residual(problem: &MarketProblem, w: &Point, probe: &Point) -> Result<f64> {
    problem.check_dims(probe)?;
    let prices = problem.prices(w)?;
    let mut total = 0.0;
    for ((pr, a), b) in prices.blocks.iter().zip(&w.blocks).zip(&probe.blocks) {
        for ((g, wa), pb) in pr.x.iter().zip(&a.x).zip(&b.x) {
            total += g * (pb - wa);
        }
        for ((h, wa), pb) in pr.y.iter().zip(&a.y).zip(&b.y) {
            total -= h * (pb - wa);
        }
    }
    Ok(total)
}

/// Closed interval of admissible clearing prices for one commodity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriceInterval {
    pub lo: f64,
    pub hi: f64,
}

impl PriceInterval {
    pub fn contains(&self, p: f64, tol: f64) -> bool {
        p >= self.lo - tol && p <= self.hi + tol
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Role {
    Trader,
    Buyer,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParticipantId {
    pub role: Role,
    pub index: usize,
}

impl fmt::Display for ParticipantId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.role {
            Role::Trader => write!(f, "trader {}", self.index),
            Role::Buyer => write!(f, "buyer {}", self.index),
        }
    }
}

/// Why a point failed an equilibrium check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Violation {
    /// Bounds or balance violated by more than the tolerance.
    Infeasible { block: usize, amount: f64 },
    /// `price_floor` (from `floor_by`) exceeds `price_ceiling` (from `ceiling_by`).
    PriceConflict {
        block: usize,
        floor_by: ParticipantId,
        ceiling_by: ParticipantId,
        margin: f64,
    },
    /// Pairwise path/buyer condition failed (network forms).
    PairConflict { block: usize, path: usize, buyer: usize, margin: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Infeasible { block, amount } => {
                write!(f, "block {block}: infeasible by {amount:e}")
            }
            Violation::PriceConflict { block, floor_by, ceiling_by, margin } => write!(
                f,
                "block {block}: price floor set by {floor_by} exceeds ceiling set by {ceiling_by} by {margin:e}"
            ),
            Violation::PairConflict { block, path, buyer, margin } => write!(
                f,
                "block {block}: path {path} / buyer {buyer} violate the pairwise condition by {margin:e}"
            ),
        }
    }
}

/// Outcome of an equilibrium check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Verdict {
    Equilibrium(Vec<PriceInterval>),
    Violated(Violation),
}

impl Verdict {
    pub fn is_equilibrium(&self) -> bool {
        matches!(self, Verdict::Equilibrium(_))
    }

    pub fn intervals(&self) -> Option<&[PriceInterval]> {
        match self {
            Verdict::Equilibrium(v) => Some(v),
            Verdict::Violated(_) => None,
        }
    }
}

/// Checks the per-commodity clearing conditions and recovers the price interval.
///
/// Bound-active variables constrain the price from one side, interior ones from both.
pub fn verify_equilibrium(problem: &MarketProblem, w: &Point, tol: f64) -> Result<Verdict> {
    problem.check_dims(w)?;
    for (s, (b, v)) in problem.blocks.iter().zip(&w.blocks).enumerate() {
        let amount = b.infeasibility(v);
        if amount > tol.max(1e-10) * b.scale(v) {
            return Ok(Verdict::Violated(Violation::Infeasible { block: s, amount }));
        }
    }
    let prices = problem.prices(w)?;
    let mut intervals = Vec::with_capacity(problem.blocks.len());
    for (s, ((b, v), pr)) in problem.blocks.iter().zip(&w.blocks).zip(&prices.blocks).enumerate() {
        let mut floor = (f64::NEG_INFINITY, None);
        let mut ceiling = (f64::INFINITY, None);
        let mut raise = |p: f64, id: ParticipantId| {
            if p > floor.0 {
                floor = (p, Some(id));
            }
        };
        let mut lower = |p: f64, id: ParticipantId| {
            if p < ceiling.0 {
                ceiling = (p, Some(id));
            }
        };
        for (i, ((part, &t), &g)) in b.traders.iter().zip(&v.x).zip(&pr.x).enumerate() {
            let id = ParticipantId { role: Role::Trader, index: i };
            let at_lo = part.at_lower(t, tol);
            let at_hi = part.at_upper(t, tol);
            // trader: g >= λ at lower, g <= λ at upper
            if !at_hi {
                lower(g, id);
            }
            if !at_lo {
                raise(g, id);
            }
        }
        for (j, ((part, &t), &h)) in b.buyers.iter().zip(&v.y).zip(&pr.y).enumerate() {
            let id = ParticipantId { role: Role::Buyer, index: j };
            let at_lo = part.at_lower(t, tol);
            let at_hi = part.at_upper(t, tol);
            // buyer: h <= λ at lower, h >= λ at upper
            if !at_hi {
                raise(h, id);
            }
            if !at_lo {
                lower(h, id);
            }
        }
        if floor.0 > ceiling.0 + tol {
            return Ok(Verdict::Violated(Violation::PriceConflict {
                block: s,
                floor_by: floor.1.expect("finite floor has a source"),
                ceiling_by: ceiling.1.expect("finite ceiling has a source"),
                margin: floor.0 - ceiling.0,
            }));
        }
        intervals.push(PriceInterval { lo: floor.0, hi: ceiling.0 });
    }
    Ok(Verdict::Equilibrium(intervals))
}
