//! Partial linearization descent: the plain method (PL), the adaptive cyclic
//! block method (CPL) and the penalty continuation for finite offer caps.
//!
//! Both methods count *block iterations*: the number of block directions a
//! line search was run along. PL spends `n` of them per iteration, CPL one per
//! accepted block step.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::market::{BlockValues, Point};
use crate::objective::{objective, ObjectiveValue, Penalized, SeparableModel};
use crate::oracles::{solve_with_prices, BlockDirection};
use crate::wireless::{PenaltyConfig, WirelessProblem};

/// Recompute the cached image `A x` from scratch after this many steps.
const IMAGE_REFRESH: u64 = 1024;

/// Tolerance schedule `δ_l` for CPL restarts.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeltaRule {
    /// `δ_1 = δ_0`, `δ_{l+1} = δ_l / 2`
    Halve,
    /// `δ_l = δ_0 / l`
    Harmonic,
}

impl std::str::FromStr for DeltaRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "halve" => Ok(Self::Halve),
            "harmonic" => Ok(Self::Harmonic),
            other => Err(Error::Config(format!("unknown delta rule `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Pl,
    Cpl,
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pl" => Ok(Self::Pl),
            "cpl" => Ok(Self::Cpl),
            other => Err(Error::Config(format!("unknown method `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Armijo sufficient-decrease factor, in (0, 1).
    pub beta: f64,
    /// Armijo backtracking factor, in (0, 1).
    pub theta: f64,
    /// Initial CPL tolerance `δ_0`.
    pub delta0: f64,
    pub delta_rule: DeltaRule,
    /// Stop once the total gap `Δ = Σ_s φ_s` is at most this.
    pub accuracy: f64,
    pub max_block_iters: u64,
    pub max_armijo_trials: u32,
    /// Keep one trace event per accepted step.
    pub record_steps: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            beta: 0.5,
            theta: 0.5,
            delta0: 10.0,
            delta_rule: DeltaRule::Harmonic,
            accuracy: 1e-6,
            max_block_iters: 10_000_000,
            max_armijo_trials: 60,
            record_steps: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| v > 0.0 && v < 1.0;
        if !unit(self.beta) || !unit(self.theta) {
            return Err(Error::Config(format!(
                "beta and theta must lie in (0, 1), got {} and {}",
                self.beta, self.theta
            )));
        }
        if !(self.delta0 > 0.0) || !self.delta0.is_finite() {
            return Err(Error::Config(format!("delta0 must be positive, got {}", self.delta0)));
        }
        if !(self.accuracy >= 0.0) {
            return Err(Error::Config(format!("accuracy must be non-negative, got {}", self.accuracy)));
        }
        if self.max_armijo_trials == 0 {
            return Err(Error::Config("max_armijo_trials must be positive".into()));
        }
        Ok(())
    }

    /// `δ_l` for stage `l ≥ 1`.
    pub fn delta(&self, stage: u64) -> f64 {
        let l = stage.max(1);
        match self.delta_rule {
            DeltaRule::Harmonic => self.delta0 / l as f64,
            DeltaRule::Halve => self.delta0 * 0.5f64.powf((l - 1) as f64),
        }
    }

    /// Smallest stage after `stage` whose tolerance is at most `gap`.
    fn next_stage_below(&self, stage: u64, gap: f64) -> Option<u64> {
        let mut next = stage + 1;
        if self.delta(next) <= gap {
            return Some(next);
        }
        let guess = match self.delta_rule {
            DeltaRule::Harmonic => (self.delta0 / gap).ceil(),
            DeltaRule::Halve => 1.0 + (self.delta0 / gap).log2().ceil(),
        };
        if !(guess < 1e15) {
            return None;
        }
        next = next.max(guess as u64);
        while self.delta(next) > gap {
            next += 1;
        }
        while next > stage + 1 && self.delta(next - 1) <= gap {
            next -= 1;
        }
        Some(next)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    BudgetExhausted,
    /// Penalty schedule ran out with offer caps still violated beyond the threshold.
    ViolationAboveThreshold,
    /// No Armijo step found while the gap was at rounding level; the accuracy
    /// asked for is below what floating point can resolve here.
    Stalled,
}

/// One trace record. `block_iters` is the cumulative block-iteration count.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum TraceEvent {
    /// Total gap `Δ` evaluated at the current iterate.
    Accuracy { block_iters: u64, delta: f64 },
    /// Accepted line-search step; `block` is `None` for a full PL direction.
    Step {
        block_iters: u64,
        block: Option<usize>,
        gap: f64,
        step: f64,
        objective: f64,
        decrease: f64,
    },
    /// CPL restart after a sweep without steps; `delta` is the sweep's total gap.
    /// Stages between `stage` and `next_stage` would repeat the same sweep and are skipped.
    Restart { block_iters: u64, stage: u64, tolerance: f64, next_stage: u64, delta: f64 },
    /// End of one penalty stage.
    PenaltyStage { block_iters: u64, tau: f64, violation: f64, gap: f64 },
}

impl TraceEvent {
    pub fn block_iters(&self) -> u64 {
        match self {
            TraceEvent::Accuracy { block_iters, .. }
            | TraceEvent::Step { block_iters, .. }
            | TraceEvent::Restart { block_iters, .. }
            | TraceEvent::PenaltyStage { block_iters, .. } => *block_iters,
        }
    }

    /// The total gap measured by this event, if it measures one.
    pub fn measured_gap(&self) -> Option<f64> {
        match self {
            TraceEvent::Accuracy { delta, .. } | TraceEvent::Restart { delta, .. } => Some(*delta),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveTrace {
    pub method: Method,
    pub events: Vec<TraceEvent>,
    pub status: Status,
    pub block_iters: u64,
    /// Last measured total gap.
    pub final_gap: f64,
}

impl SolveTrace {
    /// Block iterations spent when the total gap first dropped to `threshold`.
    pub fn block_iters_to(&self, threshold: f64) -> Option<u64> {
        self.events
            .iter()
            .find(|e| e.measured_gap().is_some_and(|d| d <= threshold))
            .map(TraceEvent::block_iters)
    }

    /// Serializes the events as JSON lines.
    pub fn to_json_lines(&self) -> Result<String> {
        let mut out = String::new();
        for e in &self.events {
            out.push_str(&serde_json::to_string(e)?);
            out.push('\n');
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Solution {
    pub point: Point,
    pub objective: ObjectiveValue,
    pub trace: SolveTrace,
}

/// Current point with its cached image `A x` and running objective.
struct Iterate {
    point: Point,
    image: Vec<f64>,
    objective: f64,
    steps: u64,
}

impl Iterate {
    fn new<M: SeparableModel + ?Sized>(model: &M, point: Point) -> Result<Self> {
        let objective = objective(model, &point)?.total;
        let image = model.image(&point);
        Ok(Self { point, image, objective, steps: 0 })
    }

    fn block_prices<M: SeparableModel + ?Sized>(&self, model: &M, s: usize) -> Vec<f64> {
        model.block_prices(s, &self.image)
    }

    fn after_step<M: SeparableModel + ?Sized>(&mut self, model: &M) {
        self.steps += 1;
        if self.steps % IMAGE_REFRESH == 0 {
            self.image = model.image(&self.point);
        }
    }
}

/// Backtracking on a line: smallest `j < max_trials` with `inc(θ^j) ≤ −β θ^j gap`.
///
/// `inc(t)` is `f(w + t p) − f(w)`. Returns the step and its increment.
pub fn armijo_search<F>(inc: F, gap: f64, beta: f64, theta: f64, max_trials: u32) -> Result<(f64, f64)>
where
    F: Fn(f64) -> f64,
{
    armijo_search_from(inc, gap, beta, theta, max_trials, 0).map(|(t, d, _)| (t, d))
}

/// [`armijo_search`] starting the scan at trial `hint` (typically the previous
/// step's `j`) and walking down or up from there. For convex `inc` the
/// accepted steps form an interval `(0, t̄]`, so this finds the same `j` as a
/// scan from zero. Falls back to the full scan when the walk up fails.
/// Returns the step, its increment and `j`.
pub fn armijo_search_from<F>(
    inc: F,
    gap: f64,
    beta: f64,
    theta: f64,
    max_trials: u32,
    hint: u32,
) -> Result<(f64, f64, u32)>
where
    F: Fn(f64) -> f64,
{
    let trial = |j: u32| {
        let t = theta.powi(j as i32);
        let d = inc(t);
        (d <= -beta * t * gap).then_some((t, d, j))
    };
    let hint = hint.min(max_trials.saturating_sub(1));
    if hint > 0 {
        if let Some(mut best) = trial(hint) {
            for j in (0..hint).rev() {
                match trial(j) {
                    Some(r) => best = r,
                    None => return Ok(best),
                }
            }
            return Ok(best);
        }
        for j in hint + 1..max_trials {
            if let Some(r) = trial(j) {
                return Ok(r);
            }
        }
    }
    (0..max_trials)
        .find_map(trial)
        .ok_or(Error::LineSearch { trials: max_trials, gap })
}

/// Gaps this small relative to the objective cannot be resolved by the line search.
fn at_rounding_level(gap: f64, objective: f64) -> bool {
    gap <= 1e-10 * (1.0 + objective.abs())
}

/// `armijo_search_from`, with a failure at a rounding-level gap reported as `None`.
fn line_search<F>(inc: F, gap: f64, objective: f64, config: &SolverConfig, hint: &mut u32) -> Result<Option<(f64, f64)>>
where
    F: Fn(f64) -> f64,
{
    match armijo_search_from(inc, gap, config.beta, config.theta, config.max_armijo_trials, *hint) {
        Ok((t, d, j)) => {
            *hint = j;
            Ok(Some((t, d)))
        }
        Err(Error::LineSearch { .. }) if at_rounding_level(gap, objective) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Armijo step along `direction` from `w` for an arbitrary objective evaluator.
///
/// Returns the accepted step `θ^j` and the new point `w + θ^j · direction`.
pub fn armijo_step<F>(
    f: F,
    w: &Point,
    direction: &Point,
    gap: f64,
    beta: f64,
    theta: f64,
    max_trials: u32,
) -> Result<(f64, Point)>
where
    F: Fn(&Point) -> f64,
{
    if !(gap > 0.0) {
        return Err(Error::Config(format!("line search needs a positive gap, got {gap}")));
    }
    let f0 = f(w);
    let (step, _) = armijo_search(|t| f(&w.add_scaled(direction, t)) - f0, gap, beta, theta, max_trials)?;
    Ok((step, w.add_scaled(direction, step)))
}

/// `η̃(y + t·dy) − η̃(y)` summed over the block.
fn demand_increment<M: SeparableModel + ?Sized>(model: &M, s: usize, y: &[f64], dy: &[f64], t: f64) -> f64 {
    y.iter()
        .zip(dy)
        .enumerate()
        .filter(|(_, (_, &d))| d != 0.0)
        .map(|(j, (&a, &d))| -model.buyer(s, j).0.integral_from(a, t * d))
        .sum()
}

/// `out = v − w`, reusing `out`'s storage.
fn block_delta(w: &BlockValues, v: &BlockValues, out: &mut BlockValues) {
    out.x.clear();
    out.x.extend(v.x.iter().zip(&w.x).map(|(a, b)| a - b));
    out.y.clear();
    out.y.extend(v.y.iter().zip(&w.y).map(|(a, b)| a - b));
}

/// `w + t (v − w)`, landing exactly on `v` for a unit step. Rounding drift in
/// the balance is moved onto the largest offer.
fn move_block(w: &mut BlockValues, v: &BlockValues, t: f64) {
    if t == 1.0 {
        w.x.clone_from(&v.x);
        w.y.clone_from(&v.y);
        return;
    }
    for (a, b) in w.x.iter_mut().zip(&v.x) {
        *a += t * (b - *a);
    }
    for (a, b) in w.y.iter_mut().zip(&v.y) {
        *a += t * (b - *a);
    }
    let drift = w.imbalance();
    if drift != 0.0 {
        if let Some(k) = (0..w.x.len()).max_by(|&i, &j| w.x[i].total_cmp(&w.x[j])) {
            w.x[k] = (w.x[k] - drift).max(0.0);
        }
    }
}

fn start<M: SeparableModel + ?Sized>(model: &M, config: &SolverConfig, initial: Option<Point>) -> Result<Iterate> {
    config.validate()?;
    model.validate_for_solver()?;
    let point = initial.unwrap_or_else(|| Point::zeros(&model.block_dims()));
    if point.dims() != model.block_dims() {
        return Err(Error::Dimension(format!(
            "initial point has block shape {:?}, problem expects {:?}",
            point.dims(),
            model.block_dims()
        )));
    }
    Iterate::new(model, point)
}

fn finish<M: SeparableModel + ?Sized>(
    model: &M,
    it: Iterate,
    method: Method,
    events: Vec<TraceEvent>,
    status: Status,
    block_iters: u64,
    final_gap: f64,
) -> Result<Solution> {
    let objective = objective(model, &it.point)?;
    Ok(Solution {
        point: it.point,
        objective,
        trace: SolveTrace { method, events, status, block_iters, final_gap },
    })
}

/// Plain partial linearization from the zero point.
pub fn solve_pl<M: SeparableModel + ?Sized>(model: &M, config: &SolverConfig) -> Result<Solution> {
    solve_pl_from(model, config, None)
}

/// Plain partial linearization: every iteration solves all block subproblems
/// and line-searches along the joint direction.
pub fn solve_pl_from<M: SeparableModel + ?Sized>(
    model: &M,
    config: &SolverConfig,
    initial: Option<Point>,
) -> Result<Solution> {
    let mut it = start(model, config, initial)?;
    let n = model.block_dims().len() as u64;
    let mut events = Vec::new();
    let mut block_iters = 0u64;
    let mut dimage = vec![0.0; model.image_len()];
    let mut hint = 0u32;
    let mut moves = vec![BlockValues::default(); n as usize];
    let (status, final_gap) = loop {
        let grad = model.image_gradient(&it.image);
        let dirs = it
            .point
            .blocks
            .iter()
            .enumerate()
            .map(|(s, blk)| solve_with_prices(model, blk, s, &model.pull_gradient(s, &grad)))
            .collect::<Result<Vec<BlockDirection>>>()?;
        let delta: f64 = dirs.iter().map(|d| d.gap).sum();
        events.push(TraceEvent::Accuracy { block_iters, delta });
        if delta <= config.accuracy {
            break (Status::Converged, delta);
        }
        if block_iters + n > config.max_block_iters {
            break (Status::BudgetExhausted, delta);
        }

        for ((d, w), m) in dirs.iter().zip(&it.point.blocks).zip(moves.iter_mut()) {
            block_delta(w, &d.target, m);
        }
        dimage.iter_mut().for_each(|v| *v = 0.0);
        for (s, m) in moves.iter().enumerate() {
            model.add_image(s, &m.x, 1.0, &mut dimage);
        }
        let line = |t: f64| {
            model.smooth_increment(&it.image, &dimage, t)
                + it.point
                    .blocks
                    .iter()
                    .zip(&moves)
                    .enumerate()
                    .map(|(s, (w, m))| demand_increment(model, s, &w.y, &m.y, t))
                    .sum::<f64>()
        };
        let Some((step, decrease)) = line_search(line, delta, it.objective, config, &mut hint)? else {
            break (Status::Stalled, delta);
        };
        block_iters += n;
        for (w, d) in it.point.blocks.iter_mut().zip(&dirs) {
            move_block(w, &d.target, step);
        }
        for (c, d) in it.image.iter_mut().zip(&dimage) {
            *c += step * d;
        }
        it.objective += decrease;
        it.after_step(model);
        if config.record_steps {
            events.push(TraceEvent::Step {
                block_iters,
                block: None,
                gap: delta,
                step,
                objective: it.objective,
                decrease,
            });
        }
    };
    finish(model, it, Method::Pl, events, status, block_iters, final_gap)
}

/// Adaptive cyclic partial linearization from the zero point.
pub fn solve_cpl<M: SeparableModel + ?Sized>(model: &M, config: &SolverConfig) -> Result<Solution> {
    solve_cpl_from(model, config, None)
}

/// Adaptive cyclic partial linearization.
///
/// Blocks are visited cyclically; a block whose gap reaches the current
/// tolerance `δ_l` takes an Armijo step, otherwise it is skipped. After `n`
/// consecutive skips the total gap is known at the current point; the method
/// stops if it meets the accuracy and otherwise restarts with a smaller `δ`.
pub fn solve_cpl_from<M: SeparableModel + ?Sized>(
    model: &M,
    config: &SolverConfig,
    initial: Option<Point>,
) -> Result<Solution> {
    let mut it = start(model, config, initial)?;
    let n = model.block_dims().len();
    let mut events = Vec::new();
    let mut block_iters = 0u64;
    let mut gaps = vec![0.0; n];
    let mut hints = vec![0u32; n];
    let mut m = BlockValues::default();

    // initial total gap, for reporting only
    let grad = model.image_gradient(&it.image);
    let mut delta0 = 0.0;
    for (s, blk) in it.point.blocks.iter().enumerate() {
        delta0 += solve_with_prices(model, blk, s, &model.pull_gradient(s, &grad))?.gap;
    }
    events.push(TraceEvent::Accuracy { block_iters, delta: delta0 });
    if delta0 <= config.accuracy {
        return finish(model, it, Method::Cpl, events, Status::Converged, 0, delta0);
    }

    let mut stage = 1u64;
    let mut tolerance = config.delta(stage);
    let mut dimage = vec![0.0; model.image_len()];
    let (status, final_gap) = 'stages: loop {
        let mut skipped = 0usize;
        let mut s = 0usize;
        loop {
            let dir = solve_with_prices(model, &it.point.blocks[s], s, &it.block_prices(model, s))?;
            gaps[s] = dir.gap;
            if dir.gap >= tolerance {
                if block_iters >= config.max_block_iters {
                    break 'stages (Status::BudgetExhausted, gaps.iter().sum());
                }
                let w = &it.point.blocks[s];
                block_delta(w, &dir.target, &mut m);
                let m = &m;
                dimage.iter_mut().for_each(|v| *v = 0.0);
                model.add_image(s, &m.x, 1.0, &mut dimage);
                let line = |t: f64| {
                    model.smooth_increment(&it.image, &dimage, t) + demand_increment(model, s, &w.y, &m.y, t)
                };
                let Some((step, decrease)) = line_search(line, dir.gap, it.objective, config, &mut hints[s])? else {
                    break 'stages (Status::Stalled, gaps.iter().sum());
                };
                block_iters += 1;
                move_block(&mut it.point.blocks[s], &dir.target, step);
                for (c, d) in it.image.iter_mut().zip(&dimage) {
                    *c += step * d;
                }
                it.objective += decrease;
                it.after_step(model);
                if config.record_steps {
                    events.push(TraceEvent::Step {
                        block_iters,
                        block: Some(s),
                        gap: dir.gap,
                        step,
                        objective: it.objective,
                        decrease,
                    });
                }
                skipped = 0;
            } else {
                skipped += 1;
                if skipped == n {
                    let delta: f64 = gaps.iter().sum();
                    let largest = gaps.iter().copied().fold(0.0, f64::max);
                    let next = if delta <= config.accuracy {
                        stage + 1
                    } else {
                        match config.next_stage_below(stage, largest) {
                            Some(l) => l,
                            None => {
                                events.push(TraceEvent::Restart {
                                    block_iters,
                                    stage,
                                    tolerance,
                                    next_stage: stage,
                                    delta,
                                });
                                break 'stages (Status::BudgetExhausted, delta);
                            }
                        }
                    };
                    events.push(TraceEvent::Restart { block_iters, stage, tolerance, next_stage: next, delta });
                    if delta <= config.accuracy {
                        break 'stages (Status::Converged, delta);
                    }
                    stage = next;
                    tolerance = config.delta(stage);
                    continue 'stages;
                }
            }
            s = (s + 1) % n;
        }
    };
    finish(model, it, Method::Cpl, events, status, block_iters, final_gap)
}

/// Runs `method` from the zero point.
pub fn solve<M: SeparableModel + ?Sized>(model: &M, method: Method, config: &SolverConfig) -> Result<Solution> {
    match method {
        Method::Pl => solve_pl(model, config),
        Method::Cpl => solve_cpl(model, config),
    }
}

/// Result of the penalty continuation.
#[derive(Clone, Debug, PartialEq)]
pub struct PenaltySolution {
    pub point: Point,
    /// Objective of the original (unpenalized) problem at `point`.
    pub objective: ObjectiveValue,
    /// Last penalty parameter used.
    pub tau: f64,
    /// `max_i max{x_i − α_i, 0}` after each stage.
    pub violations: Vec<f64>,
    pub trace: SolveTrace,
}

/// Handles finite offer caps by PL on `Φ(·, τ)` over an increasing `τ` schedule,
/// warm-starting each stage from the previous one.
///
/// A stage that spends its own block-iteration budget without reaching its
/// gap target hands its point to the next stage; the run then reports
/// `BudgetExhausted` even if the violation ends below the threshold.
pub fn solve_penalized(
    problem: &WirelessProblem,
    config: &SolverConfig,
    penalty: &PenaltyConfig,
) -> Result<PenaltySolution> {
    config.validate()?;
    penalty.validate()?;
    let mut point = Point::zeros(&problem.dims());
    let mut events = Vec::new();
    let mut block_iters = 0u64;
    let mut violations = Vec::new();
    let mut status = Status::ViolationAboveThreshold;
    let mut final_gap = f64::INFINITY;
    let mut tau = penalty.schedule[0];
    for &t in &penalty.schedule {
        tau = t;
        let model = Penalized { problem, tau };
        let remaining = config.max_block_iters - block_iters;
        let inner = SolverConfig {
            accuracy: penalty.inner_gap_scale / tau,
            max_block_iters: remaining.min(penalty.max_block_iters_per_stage),
            ..config.clone()
        };
        let sol = solve_pl_from(&model, &inner, Some(point))?;
        events.extend(sol.trace.events.into_iter().map(|e| shift(e, block_iters)));
        block_iters += sol.trace.block_iters;
        final_gap = sol.trace.final_gap;
        point = sol.point;
        let violation = problem.cap_violation(&point.blocks[0].x);
        violations.push(violation);
        events.push(TraceEvent::PenaltyStage { block_iters, tau, violation, gap: final_gap });
        let inner_done = sol.trace.status == Status::Converged;
        if violation <= penalty.violation_threshold {
            status = if inner_done { Status::Converged } else { Status::BudgetExhausted };
            break;
        }
        if !inner_done && inner.max_block_iters == remaining {
            status = Status::BudgetExhausted;
            break;
        }
    }
    let objective = objective(&problem.without_offer_caps(), &point)?;
    Ok(PenaltySolution {
        point,
        objective,
        tau,
        violations,
        trace: SolveTrace { method: Method::Pl, events, status, block_iters, final_gap },
    })
}

fn shift(e: TraceEvent, by: u64) -> TraceEvent {
    match e {
        TraceEvent::Accuracy { block_iters, delta } => TraceEvent::Accuracy { block_iters: block_iters + by, delta },
        TraceEvent::Step { block_iters, block, gap, step, objective, decrease } => {
            TraceEvent::Step { block_iters: block_iters + by, block, gap, step, objective, decrease }
        }
        TraceEvent::Restart { block_iters, stage, tolerance, next_stage, delta } => {
            TraceEvent::Restart { block_iters: block_iters + by, stage, tolerance, next_stage, delta }
        }
        TraceEvent::PenaltyStage { block_iters, tau, violation, gap } => {
            TraceEvent::PenaltyStage { block_iters: block_iters + by, tau, violation, gap }
        }
    }
}
