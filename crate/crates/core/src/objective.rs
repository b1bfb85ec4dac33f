//! Objective assembly for the integrable case.
//!
//! Both models minimize `f(w) = μ(A x) + Σ_s Σ_j η̃_j(y_j)` over a product of
//! blocks `{x_s ≥ 0, 0 ≤ y_s ≤ cap, Σx_s = Σy_s}`, where `A` is a linear map
//! (arc incidence for networks, identity for wireless) and
//! `η̃_j(y) = −∫_0^y h_j` is convex for non-increasing `h_j`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{BlockValues, Point};
use crate::network::{ArcCosts, NetworkProblem};
use crate::scalar::{Cap, ScalarCostFn};
use crate::wireless::{excess, Congestion, WirelessProblem};

/// A separable-in-demand, block-structured convex problem.
pub trait SeparableModel {
    /// `(#offer variables, #bid variables)` per block.
    fn block_dims(&self) -> Vec<(usize, usize)>;

    /// Length of the image `A x` the smooth part depends on.
    fn image_len(&self) -> usize;

    /// `out += scale · A_s x_s`
    fn add_image(&self, block: usize, x: &[f64], scale: f64, out: &mut [f64]);

    /// `μ(image)`
    fn smooth_value(&self, image: &[f64]) -> f64;

    /// `μ(image + t·dir) − μ(image)`, evaluated without cancellation where possible.
    fn smooth_increment(&self, image: &[f64], dir: &[f64], t: f64) -> f64;

    /// `∇μ(image)`
    fn image_gradient(&self, image: &[f64]) -> Vec<f64>;

    /// `A_s^T grad`, the offer-price vector of block `s`.
    fn pull_gradient(&self, block: usize, grad: &[f64]) -> Vec<f64>;

    /// Offer prices of block `s` at `image`; models can skip the parts of
    /// the gradient the block does not touch.
    fn block_prices(&self, block: usize, image: &[f64]) -> Vec<f64> {
        self.pull_gradient(block, &self.image_gradient(image))
    }

    /// Dis-utility function and finite cap of buyer `j` in block `s`.
    fn buyer(&self, block: usize, j: usize) -> (&ScalarCostFn, f64);

    /// Checks the assumptions of the descent solvers: finite caps, monotone
    /// prices, an available potential.
    fn validate_for_solver(&self) -> Result<()>;

    fn image(&self, w: &Point) -> Vec<f64> {
        let mut out = vec![0.0; self.image_len()];
        for (s, blk) in w.blocks.iter().enumerate() {
            self.add_image(s, &blk.x, 1.0, &mut out);
        }
        out
    }

    /// `η̃_s(y_s)`
    fn demand_value(&self, block: usize, y: &[f64]) -> f64 {
        y.iter()
            .enumerate()
            .map(|(j, &v)| -self.buyer(block, j).0.primitive(v))
            .sum()
    }
}

/// `f(w)` split into its smooth and demand parts.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveValue {
    pub total: f64,
    /// `μ(A x)`
    pub smooth: f64,
    /// `Σ η̃_j(y_j) = −Σ ∫_0^{y_j} h_j`
    pub demand: f64,
}

impl ObjectiveValue {
    /// Total consumer utility `Σ ∫_0^{y_j} h_j`, i.e. the demand part with its usual sign.
    pub fn utility(&self) -> f64 {
        -self.demand
    }
}

fn check_point<M: SeparableModel + ?Sized>(model: &M, w: &Point) -> Result<()> {
    let dims = model.block_dims();
    if w.dims() != dims {
        return Err(Error::Dimension(format!(
            "point has block shape {:?}, problem expects {:?}",
            w.dims(),
            dims
        )));
    }
    Ok(())
}

/// `f(w) = μ(A x) + Σ η̃(y)`.
pub fn objective<M: SeparableModel + ?Sized>(model: &M, w: &Point) -> Result<ObjectiveValue> {
    check_point(model, w)?;
    let smooth = model.smooth_value(&model.image(w));
    let demand: f64 = w.blocks.iter().enumerate().map(|(s, b)| model.demand_value(s, &b.y)).sum();
    let total = smooth + demand;
    if !total.is_finite() {
        return Err(Error::NonFinite(format!("objective (smooth {smooth}, demand {demand})")));
    }
    Ok(ObjectiveValue { total, smooth, demand })
}

/// `∂μ/∂w_(s)`: offer prices in `x`, zeros for the demand variables.
pub fn block_gradient<M: SeparableModel + ?Sized>(model: &M, w: &Point, s: usize) -> Result<BlockValues> {
    check_point(model, w)?;
    if s >= w.blocks.len() {
        return Err(Error::Dimension(format!("block {s} out of range")));
    }
    let grad = model.image_gradient(&model.image(w));
    Ok(BlockValues { x: model.pull_gradient(s, &grad), y: vec![0.0; w.blocks[s].y.len()] })
}

fn finite_cap(cap: Cap) -> f64 {
    // solver validation rejects infinite caps before this is relied upon
    cap.finite().unwrap_or(f64::INFINITY)
}

impl SeparableModel for NetworkProblem {
    fn block_dims(&self) -> Vec<(usize, usize)> {
        self.dims()
    }

    fn image_len(&self) -> usize {
        self.network().arcs().len()
    }

    fn add_image(&self, block: usize, x: &[f64], scale: f64, out: &mut [f64]) {
        self.add_block_flows(block, x, scale, out);
    }

    fn smooth_value(&self, flows: &[f64]) -> f64 {
        match self.network().costs() {
            ArcCosts::Separable(c) => c.iter().zip(flows).map(|(c, &f)| c.primitive(f)).sum(),
            ArcCosts::Joint(_) => f64::NAN,
        }
    }

    fn smooth_increment(&self, flows: &[f64], dir: &[f64], t: f64) -> f64 {
        match self.network().costs() {
            ArcCosts::Separable(c) => c
                .iter()
                .zip(flows)
                .zip(dir)
                .filter(|(_, &d)| d != 0.0)
                .map(|((c, &f), &d)| c.integral_from(f, t * d))
                .sum(),
            ArcCosts::Joint(_) => f64::NAN,
        }
    }

    fn image_gradient(&self, flows: &[f64]) -> Vec<f64> {
        self.network().arc_costs(flows)
    }

    fn pull_gradient(&self, block: usize, grad: &[f64]) -> Vec<f64> {
        self.block_path_costs(block, grad)
    }

    fn block_prices(&self, block: usize, flows: &[f64]) -> Vec<f64> {
        match self.network().costs() {
            ArcCosts::Separable(c) => (0..self.od_pairs()[block].paths.len())
                .map(|p| self.path_arcs(block, p).iter().map(|&a| c[a].eval(flows[a])).sum())
                .collect(),
            ArcCosts::Joint(_) => self.pull_gradient(block, &self.image_gradient(flows)),
        }
    }

    fn buyer(&self, block: usize, j: usize) -> (&ScalarCostFn, f64) {
        let b = &self.od_pairs()[block].buyers[j];
        (&b.disutility, finite_cap(b.cap))
    }

    fn validate_for_solver(&self) -> Result<()> {
        let costs = match self.network().costs() {
            ArcCosts::Separable(c) => c,
            ArcCosts::Joint(_) => {
                return Err(Error::Unsupported("joint arc costs have no potential".into()))
            }
        };
        let mut total_cap = 0.0;
        for (s, od) in self.od_pairs().iter().enumerate() {
            for (j, b) in od.buyers.iter().enumerate() {
                let cap = b.cap.finite().ok_or_else(|| {
                    Error::Unsupported(format!("O/D pair {s}, buyer {j}: demand cap must be finite"))
                })?;
                b.disutility
                    .check_monotone(0.0, cap, false)
                    .map_err(|e| Error::NotMonotone(format!("O/D pair {s}, buyer {j}: {e}")))?;
                total_cap += cap;
            }
        }
        for (a, c) in costs.iter().enumerate() {
            c.check_monotone(0.0, total_cap, true)
                .map_err(|e| Error::NotMonotone(format!("arc {a}: {e}")))?;
        }
        Ok(())
    }
}

fn wireless_smooth_increment(p: &WirelessProblem, x: &[f64], d: &[f64], t: f64) -> f64 {
    let base: f64 = p
        .providers()
        .iter()
        .zip(x)
        .zip(d)
        .filter(|(_, &di)| di != 0.0)
        .map(|((pr, &xi), &di)| pr.base_price.integral_from(xi, t * di))
        .sum();
    let cong = match p.congestion() {
        Congestion::None => 0.0,
        Congestion::Linear(c) => {
            let s: f64 = x.iter().sum();
            let ds: f64 = t * d.iter().sum::<f64>();
            c * ds * (s + 0.5 * ds)
        }
        Congestion::Custom { potential: Some(pot), .. } => {
            let moved: Vec<f64> = x.iter().zip(d).map(|(a, b)| a + t * b).collect();
            pot(&moved) - pot(x)
        }
        Congestion::Custom { potential: None, .. } => f64::NAN,
    };
    base + cong
}

fn validate_wireless(p: &WirelessProblem) -> Result<()> {
    let total = p.total_demand_cap();
    for (i, pr) in p.providers().iter().enumerate() {
        pr.base_price
            .check_monotone(0.0, total, true)
            .map_err(|e| Error::NotMonotone(format!("provider {i}: {e}")))?;
    }
    for (j, u) in p.users().iter().enumerate() {
        u.disutility
            .check_monotone(0.0, u.cap, false)
            .map_err(|e| Error::NotMonotone(format!("user class {j}: {e}")))?;
    }
    match p.congestion() {
        Congestion::Linear(c) if *c < 0.0 => {
            Err(Error::NotMonotone(format!("negative congestion coefficient {c}")))
        }
        Congestion::Custom { potential: None, .. } => Err(Error::Unsupported(
            "custom congestion needs a matching potential for the descent solvers".into(),
        )),
        _ => Ok(()),
    }
}

impl SeparableModel for WirelessProblem {
    fn block_dims(&self) -> Vec<(usize, usize)> {
        self.dims()
    }

    fn image_len(&self) -> usize {
        self.providers().len()
    }

    fn add_image(&self, _block: usize, x: &[f64], scale: f64, out: &mut [f64]) {
        for (o, &v) in out.iter_mut().zip(x) {
            *o += scale * v;
        }
    }

    fn smooth_value(&self, x: &[f64]) -> f64 {
        self.potential(x).unwrap_or(f64::NAN)
    }

    fn smooth_increment(&self, x: &[f64], dir: &[f64], t: f64) -> f64 {
        wireless_smooth_increment(self, x, dir, t)
    }

    fn image_gradient(&self, x: &[f64]) -> Vec<f64> {
        self.prices(x).unwrap_or_else(|_| vec![f64::NAN; x.len()])
    }

    fn pull_gradient(&self, _block: usize, grad: &[f64]) -> Vec<f64> {
        grad.to_vec()
    }

    fn buyer(&self, _block: usize, j: usize) -> (&ScalarCostFn, f64) {
        let u = &self.users()[j];
        (&u.disutility, u.cap)
    }

    fn validate_for_solver(&self) -> Result<()> {
        if !self.providers().iter().all(|p| p.cap == Cap::Infinite) {
            return Err(Error::Unsupported(
                "finite offer caps need the penalty loop (solve_penalized)".into(),
            ));
        }
        validate_wireless(self)
    }
}

/// `Φ(w, τ) = μ(x) + τ·0.5 Σ max{x_i − α_i, 0}² + η̃(y)` over the set without offer caps.
#[derive(Clone, Copy, Debug)]
pub struct Penalized<'a> {
    pub problem: &'a WirelessProblem,
    pub tau: f64,
}

impl SeparableModel for Penalized<'_> {
    fn block_dims(&self) -> Vec<(usize, usize)> {
        self.problem.dims()
    }

    fn image_len(&self) -> usize {
        self.problem.providers().len()
    }

    fn add_image(&self, block: usize, x: &[f64], scale: f64, out: &mut [f64]) {
        self.problem.add_image(block, x, scale, out);
    }

    fn smooth_value(&self, x: &[f64]) -> f64 {
        self.problem.smooth_value(x) + self.tau * self.problem.penalty(x)
    }

    fn smooth_increment(&self, x: &[f64], dir: &[f64], t: f64) -> f64 {
        let pen: f64 = self
            .problem
            .providers()
            .iter()
            .zip(x)
            .zip(dir)
            .filter(|(_, &d)| d != 0.0)
            .map(|((p, &xi), &d)| {
                let before = excess(xi, p.cap);
                let after = excess(xi + t * d, p.cap);
                if before > 0.0 && after > 0.0 {
                    // both past the cap: the excess moves by exactly t·d
                    0.5 * t * d * (2.0 * before + t * d)
                } else {
                    0.5 * (after - before) * (after + before)
                }
            })
            .sum();
        wireless_smooth_increment(self.problem, x, dir, t) + self.tau * pen
    }

    fn image_gradient(&self, x: &[f64]) -> Vec<f64> {
        self.problem
            .penalized_gradient(x, self.tau)
            .unwrap_or_else(|_| vec![f64::NAN; x.len()])
    }

    fn pull_gradient(&self, _block: usize, grad: &[f64]) -> Vec<f64> {
        grad.to_vec()
    }

    fn buyer(&self, block: usize, j: usize) -> (&ScalarCostFn, f64) {
        self.problem.buyer(block, j)
    }

    fn validate_for_solver(&self) -> Result<()> {
        if !(self.tau > 0.0) {
            return Err(Error::Config(format!("penalty parameter must be positive, got {}", self.tau)));
        }
        validate_wireless(self.problem)
    }
}
