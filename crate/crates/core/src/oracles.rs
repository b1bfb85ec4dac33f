//! Exact solutions of the partially linearized block subproblems.
//!
//! With the smooth part linearized at `w`, the block subproblem
//! `min ⟨g, x⟩ + Σ η̃_j(y_j)` over `{x ≥ 0, 0 ≤ y ≤ cap, Σx = Σy}` is solved by
//! routing all offer volume through the cheapest offer `q` at price
//! `λ̃ = g_q` and letting each buyer respond to `λ̃` on its own.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{BlockValues, Point};
use crate::network::NetworkProblem;
use crate::objective::{Penalized, SeparableModel};
use crate::scalar::ScalarCostFn;
use crate::wireless::WirelessProblem;

const ROOT_TOL: f64 = 1e-10;
const MAX_BISECTIONS: usize = 200;

/// Solution of one block subproblem and the block gap `φ_s(w)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockDirection {
    pub block: usize,
    /// The subproblem minimizer `v_(s)`.
    pub target: BlockValues,
    /// `φ_s(w) ≥ 0`
    pub gap: f64,
    /// Index of the cheapest path / provider.
    pub cheapest: usize,
    /// `λ̃ = min_p g_p`
    pub price: f64,
}

/// Solves `h(y) = target` on `[0, cap]` for non-increasing `h` with
/// `h(0) ≥ target ≥ h(cap)`.
pub fn scalar_root(h: &ScalarCostFn, target: f64, cap: f64) -> Result<f64> {
    let tol = ROOT_TOL * (1.0 + target.abs());
    let h0 = h.eval(0.0);
    let hc = h.eval(cap);
    if !(h0 >= target - tol && hc <= target + tol) {
        return Err(Error::RootBracket(format!(
            "need h(0) = {h0} >= {target} >= h({cap}) = {hc}"
        )));
    }
    if (h0 - target).abs() <= tol {
        return Ok(0.0);
    }
    if (hc - target).abs() <= tol {
        return Ok(cap);
    }
    match *h {
        ScalarCostFn::Affine { c0, c1 } if c1 != 0.0 => Ok(((target - c0) / c1).clamp(0.0, cap)),
        ScalarCostFn::Power { c0, c1, exponent } if c1 != 0.0 => {
            Ok(((target - c0) / c1).max(0.0).powf(1.0 / exponent).clamp(0.0, cap))
        }
        _ => {
            let (mut lo, mut hi) = (0.0, cap);
            let mut mid = 0.5 * (lo + hi);
            for _ in 0..MAX_BISECTIONS {
                mid = 0.5 * (lo + hi);
                let v = h.eval(mid);
                if (v - target).abs() <= tol || mid <= lo || mid >= hi {
                    break;
                }
                if v > target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            Ok(mid)
        }
    }
}

/// Optimal demand of one buyer facing price `price`: zero when `h(0) ≤ price`,
/// the cap when `h(cap) ≥ price`, the root of `h(y) = price` otherwise.
pub fn demand_response(h: &ScalarCostFn, cap: f64, price: f64) -> Result<f64> {
    if h.eval(0.0) <= price {
        Ok(0.0)
    } else if h.eval(cap) >= price {
        Ok(cap)
    } else {
        scalar_root(h, price, cap)
    }
}

/// Solves block `s` given its offer prices `prices` (the block gradient at `w`).
pub(crate) fn solve_with_prices<M: SeparableModel + ?Sized>(
    model: &M,
    w: &BlockValues,
    s: usize,
    prices: &[f64],
) -> Result<BlockDirection> {
    let (cheapest, price) = prices
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |best, (i, g)| if g < best.1 { (i, g) } else { best });
    if !price.is_finite() {
        return Err(Error::NonFinite(format!("block {s}: offer prices {prices:?}")));
    }
    let mut target = BlockValues::zeros(w.x.len(), w.y.len());
    for j in 0..w.y.len() {
        let (h, cap) = model.buyer(s, j);
        let y = demand_response(h, cap, price)?;
        target.y[j] = y;
        target.x[cheapest] += y;
    }
    let gap = block_gap(model, w, s, prices, &target);
    Ok(BlockDirection { block: s, target, gap, cheapest, price })
}

/// `⟨w_x − v_x, g⟩ + η̃(w_y) − η̃(v_y)`, clipped at zero.
pub(crate) fn block_gap<M: SeparableModel + ?Sized>(
    model: &M,
    w: &BlockValues,
    s: usize,
    prices: &[f64],
    v: &BlockValues,
) -> f64 {
    let linear: f64 = prices.iter().zip(&w.x).zip(&v.x).map(|((g, a), b)| g * (a - b)).sum();
    // η̃(a) − η̃(b) = ∫_a^b h
    let demand: f64 = w
        .y
        .iter()
        .zip(&v.y)
        .enumerate()
        .map(|(j, (&a, &b))| model.buyer(s, j).0.integral(a, b))
        .sum();
    (linear + demand).max(0.0)
}

/// Direction for block `s` of `model` at `w`.
pub fn solve_block<M: SeparableModel + ?Sized>(model: &M, w: &Point, s: usize) -> Result<BlockDirection> {
    if w.dims() != model.block_dims() {
        return Err(Error::Dimension(format!(
            "point has block shape {:?}, problem expects {:?}",
            w.dims(),
            model.block_dims()
        )));
    }
    let blk = w.blocks.get(s).ok_or_else(|| Error::Dimension(format!("block {s} out of range")))?;
    let grad = model.image_gradient(&model.image(w));
    let prices = model.pull_gradient(s, &grad);
    solve_with_prices(model, blk, s, &prices)
}

/// Network subproblem for O/D pair `s`: cheapest path plus per-buyer demand response.
pub fn solve_block_network(problem: &NetworkProblem, w: &Point, s: usize) -> Result<BlockDirection> {
    let od = problem
        .od_pairs()
        .get(s)
        .ok_or_else(|| Error::Dimension(format!("O/D pair {s} out of range")))?;
    if let Some(j) = od.buyers.iter().position(|b| !b.cap.is_finite()) {
        return Err(Error::Unsupported(format!("O/D pair {s}, buyer {j}: demand cap must be finite")));
    }
    solve_block(problem, w, s)
}

/// Wireless subproblem: cheapest provider (by `g̃_i` when `tau` is given) plus
/// per-class demand response.
pub fn solve_block_wireless(problem: &WirelessProblem, w: &Point, tau: Option<f64>) -> Result<BlockDirection> {
    match tau {
        Some(tau) => {
            if !(tau > 0.0) {
                return Err(Error::Config(format!("penalty parameter must be positive, got {tau}")));
            }
            solve_block(&Penalized { problem, tau }, w, 0)
        }
        None => solve_block(problem, w, 0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::two_route_instance;
    use crate::scalar::Cap;
    use crate::wireless::{Congestion, Provider, UserClass};
    use std::sync::atomic::{AtomicUsize, Ordering};
    use std::sync::Arc;

    #[test]
    fn root_examples() {
        assert_eq!(scalar_root(&ScalarCostFn::affine(30.0, -0.5), 25.0, 100.0).unwrap(), 10.0);
        assert_eq!(scalar_root(&ScalarCostFn::affine(28.0, -0.3), 28.0, 50.0).unwrap(), 0.0);
        assert!(matches!(
            scalar_root(&ScalarCostFn::affine(28.0, -0.3), 29.0, 50.0),
            Err(Error::RootBracket(_))
        ));

        let calls = Arc::new(AtomicUsize::new(0));
        let counter = calls.clone();
        let h = ScalarCostFn::custom(move |y: f64| {
            counter.fetch_add(1, Ordering::Relaxed);
            20.0 * (-0.1 * y).exp()
        });
        let y = scalar_root(&h, 5.0, 40.0).unwrap();
        assert!((h.eval(y) - 5.0).abs() <= 1e-10 * 6.0);
        assert!((y - 10.0 * 4f64.ln()).abs() < 1e-9);
        // two endpoint evaluations, at most 60 bisection steps, one check above
        assert!(calls.load(Ordering::Relaxed) <= 63, "{}", calls.load(Ordering::Relaxed));
    }

    #[test]
    fn demand_response_tie_rules() {
        let h = ScalarCostFn::affine(10.0, -1.0);
        assert_eq!(demand_response(&h, 10.0, 10.0).unwrap(), 0.0);
        assert_eq!(demand_response(&h, 4.0, 6.0).unwrap(), 4.0);
        assert_eq!(demand_response(&h, 10.0, 1.0).unwrap(), 9.0);
        assert_eq!(demand_response(&h, 10.0, -3.0).unwrap(), 10.0);
    }

    /// Dense grid minimization of the linearized subproblem over the block.
    fn grid_subproblem(prices: &[f64; 2], h0: f64, h1: f64, cap: f64, steps: usize) -> (f64, f64, f64) {
        let mut best = (f64::INFINITY, 0.0, 0.0, 0.0);
        for a in 0..=steps {
            let y = cap * a as f64 / steps as f64;
            for b in 0..=steps {
                let x1 = y * b as f64 / steps as f64;
                let x2 = y - x1;
                let val = prices[0] * x1 + prices[1] * x2 - (h0 * y - 0.5 * h1 * y * y);
                if val < best.0 {
                    best = (val, x1, x2, y);
                }
            }
        }
        (best.1, best.2, best.3)
    }

    #[test]
    fn two_route_first_direction() {
        let t1 = two_route_instance();
        let w0 = Point::zeros(&t1.dims());
        let d = solve_block_network(&t1, &w0, 0).unwrap();
        assert_eq!(d.price, 1.0);
        assert_eq!(d.cheapest, 0);
        assert_eq!(d.target, BlockValues::new(vec![9.0, 0.0], vec![9.0]));
        assert_eq!(d.gap, 40.5);
        let (x1, x2, y) = grid_subproblem(&[1.0, 2.0], 10.0, 1.0, 10.0, 400);
        assert!((x1 - 9.0).abs() < 0.05 && x2.abs() < 0.05 && (y - 9.0).abs() < 0.05);
    }

    #[test]
    fn gap_vanishes_at_equilibrium() {
        let t1 = two_route_instance();
        let eq = Point::new(vec![BlockValues::new(vec![10.0 / 3.0, 7.0 / 3.0], vec![17.0 / 3.0])]);
        let d = solve_block_network(&t1, &eq, 0).unwrap();
        assert!(d.gap < 1e-12, "{}", d.gap);
        assert!((d.target.y[0] - 17.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn wireless_examples() {
        let p = WirelessProblem::new(
            vec![
                Provider { base_price: ScalarCostFn::constant(3.0), cap: Cap::Infinite },
                Provider { base_price: ScalarCostFn::constant(5.0), cap: Cap::Infinite },
                Provider { base_price: ScalarCostFn::constant(4.0), cap: Cap::Infinite },
            ],
            Congestion::None,
            vec![
                UserClass { disutility: ScalarCostFn::affine(30.0, -0.5), cap: 100.0 },
                UserClass { disutility: ScalarCostFn::affine(13.0, -1.0), cap: 10.0 },
            ],
        )
        .unwrap();
        let w = Point::zeros(&p.dims());
        let d = solve_block_wireless(&p, &w, None).unwrap();
        assert_eq!((d.cheapest, d.price), (0, 3.0));
        assert_eq!(d.target.y, vec![54.0, 10.0]);
        assert_eq!(d.target.x, vec![64.0, 0.0, 0.0]);

        // class 1 with h(β) equal to the price takes its cap
        let p2 = WirelessProblem::new(
            vec![Provider { base_price: ScalarCostFn::constant(25.0), cap: Cap::Infinite }],
            Congestion::None,
            vec![UserClass { disutility: ScalarCostFn::affine(30.0, -0.5), cap: 10.0 }],
        )
        .unwrap();
        let d = solve_block_wireless(&p2, &Point::zeros(&p2.dims()), None).unwrap();
        assert_eq!(d.target.y, vec![10.0]);
    }

    #[test]
    fn penalized_direction_avoids_overfull_provider() {
        let p = WirelessProblem::new(
            vec![
                Provider { base_price: ScalarCostFn::constant(1.0), cap: Cap::Finite(1.0) },
                Provider { base_price: ScalarCostFn::constant(2.0), cap: Cap::Infinite },
            ],
            Congestion::None,
            vec![UserClass { disutility: ScalarCostFn::affine(10.0, -1.0), cap: 10.0 }],
        )
        .unwrap();
        let w = Point::new(vec![BlockValues::new(vec![3.0, 0.0], vec![3.0])]);
        assert_eq!(solve_block_wireless(&p, &w, Some(0.1)).unwrap().cheapest, 0);
        let d = solve_block_wireless(&p, &w, Some(10.0)).unwrap();
        assert_eq!(d.cheapest, 1);
        assert_eq!(d.price, 2.0);
    }

    #[test]
    fn infinite_caps_rejected_by_network_oracle() {
        let mut t1 = two_route_instance();
        let net = t1.network().clone();
        let mut pairs = t1.od_pairs().to_vec();
        pairs[0].buyers[0].cap = Cap::Infinite;
        t1 = NetworkProblem::new(net, pairs).unwrap();
        let w0 = Point::zeros(&t1.dims());
        assert!(matches!(solve_block_network(&t1, &w0, 0), Err(Error::Unsupported(_))));
    }
}
