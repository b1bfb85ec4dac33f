//! Acceptance criteria. One PASS/FAIL line per criterion; exits non-zero when
//! a hard criterion fails.

use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use market_equil::experiment::{run_experiment, ExperimentSpec, InstanceSource, MethodRun};
use market_equil::generate::{generate_network, network_instance_file, CostFamily, NetworkGenParams};
use market_equil::network::{two_route_instance, Buyer, Network, OdPair};
use market_equil::objective::block_gradient;
use market_equil::oracles::solve_block;
use market_equil::solvers::{solve_penalized, SolveTrace, TraceEvent};
use market_equil::{
    objective, solve, BlockValues, Cap, Congestion, EquilibriumForm, Method, NetworkProblem, PenaltyConfig, Point,
    Provider, ScalarCostFn, SolverConfig, Status, UserClass, Verdict, WirelessProblem,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

// ---------------------------------------------------------------------------
// Independent model of small affine instances, used by the grid oracle.

#[derive(Clone, Copy, Debug)]
struct Affine {
    c0: f64,
    c1: f64,
}

impl Affine {
    /// `∫_0^t (c0 + c1 s) ds`
    fn area(self, t: f64) -> f64 {
        self.c0 * t + 0.5 * self.c1 * t * t
    }
}

#[derive(Clone, Debug)]
struct DemandSide {
    /// `h(y) = h0 − h1 y` on `[0, cap]`
    h0: f64,
    h1: f64,
    cap: f64,
}

impl DemandSide {
    fn area(&self, y: f64) -> f64 {
        self.h0 * y - 0.5 * self.h1 * y * y
    }
}

#[derive(Clone, Debug)]
struct TinyBlock {
    paths: Vec<Vec<usize>>,
    buyers: Vec<DemandSide>,
}

#[derive(Clone, Debug)]
enum Tiny {
    Network { nodes: usize, ends: Vec<(usize, usize)>, arcs: Vec<Affine>, od: Vec<(usize, usize)>, blocks: Vec<TinyBlock> },
    Wireless { providers: Vec<Affine>, caps: Vec<Option<f64>>, congestion: f64, users: Vec<DemandSide> },
}

impl Tiny {
    fn blocks(&self) -> Vec<(usize, usize)> {
        match self {
            Tiny::Network { blocks, .. } => blocks.iter().map(|b| (b.paths.len(), b.buyers.len())).collect(),
            Tiny::Wireless { providers, users, .. } => vec![(providers.len(), users.len())],
        }
    }

    fn demand(&self, s: usize) -> &[DemandSide] {
        match self {
            Tiny::Network { blocks, .. } => &blocks[s].buyers,
            Tiny::Wireless { users, .. } => users,
        }
    }

    /// `Σ_a ∫_0^{f_a} c_a − Σ_j ∫_0^{y_j} h_j`, written out from scratch.
    fn objective(&self, w: &[(Vec<f64>, Vec<f64>)]) -> f64 {
        let demand: f64 = w
            .iter()
            .enumerate()
            .map(|(s, (_, y))| self.demand(s).iter().zip(y).map(|(d, &v)| d.area(v)).sum::<f64>())
            .sum();
        let supply = match self {
            Tiny::Network { arcs, blocks, .. } => {
                let mut flow = vec![0.0; arcs.len()];
                for (b, (x, _)) in blocks.iter().zip(w) {
                    for (path, &xp) in b.paths.iter().zip(x) {
                        let mut seen = Vec::new();
                        for &a in path {
                            if !seen.contains(&a) {
                                seen.push(a);
                                flow[a] += xp;
                            }
                        }
                    }
                }
                arcs.iter().zip(&flow).map(|(c, &f)| c.area(f)).sum::<f64>()
            }
            Tiny::Wireless { providers, congestion, .. } => {
                let x = &w[0].0;
                let total: f64 = x.iter().sum();
                providers.iter().zip(x).map(|(c, &v)| c.area(v)).sum::<f64>() + 0.5 * congestion * total * total
            }
        };
        supply - demand
    }

    fn network(&self) -> NetworkProblem {
        let Tiny::Network { nodes, ends, arcs, od, blocks } = self else { panic!("not a network") };
        let net = Network::separable(
            *nodes,
            ends.iter().zip(arcs).map(|(&(u, v), c)| (u, v, ScalarCostFn::affine(c.c0, c.c1))).collect(),
        )
        .unwrap();
        let pairs = od
            .iter()
            .zip(blocks)
            .map(|(&(o, d), b)| OdPair {
                origin: o,
                destination: d,
                paths: b.paths.clone(),
                buyers: b
                    .buyers
                    .iter()
                    .map(|h| Buyer::new(ScalarCostFn::affine(h.h0, -h.h1), Cap::Finite(h.cap)))
                    .collect(),
            })
            .collect();
        NetworkProblem::new(net, pairs).unwrap()
    }

    fn wireless(&self) -> WirelessProblem {
        let Tiny::Wireless { providers, caps, congestion, users } = self else { panic!("not wireless") };
        WirelessProblem::new(
            providers
                .iter()
                .zip(caps)
                .map(|(c, cap)| Provider {
                    base_price: ScalarCostFn::affine(c.c0, c.c1),
                    cap: cap.map_or(Cap::Infinite, Cap::Finite),
                })
                .collect(),
            if *congestion == 0.0 { Congestion::None } else { Congestion::Linear(*congestion) },
            users.iter().map(|h| UserClass { disutility: ScalarCostFn::affine(h.h0, -h.h1), cap: h.cap }).collect(),
        )
        .unwrap()
    }

    fn solve(&self, method: Method, cfg: &SolverConfig) -> (Vec<(Vec<f64>, Vec<f64>)>, SolveTrace) {
        let sol = match self {
            Tiny::Network { .. } => solve(&self.network(), method, cfg).unwrap(),
            Tiny::Wireless { .. } => solve(&self.wireless(), method, cfg).unwrap(),
        };
        (sol.point.blocks.into_iter().map(|b| (b.x, b.y)).collect(), sol.trace)
    }

    /// Grid coordinates: per block, the offers when there is one buyer
    /// (its bid is their sum), else the bids (the single offer is their sum).
    fn decode(&self, z: &[f64]) -> Option<Vec<(Vec<f64>, Vec<f64>)>> {
        let mut out = Vec::new();
        let mut k = 0;
        for (s, (nx, ny)) in self.blocks().into_iter().enumerate() {
            let caps: Vec<f64> = self.demand(s).iter().map(|d| d.cap).collect();
            if ny == 1 {
                let x = z[k..k + nx].to_vec();
                k += nx;
                let y: f64 = x.iter().sum();
                if y > caps[0] {
                    return None;
                }
                out.push((x, vec![y]));
            } else {
                assert_eq!(nx, 1);
                let y = z[k..k + ny].to_vec();
                k += ny;
                out.push((vec![y.iter().sum()], y));
            }
        }
        if let Tiny::Wireless { caps, .. } = self {
            if out[0].0.iter().zip(caps).any(|(&x, c)| c.is_some_and(|c| x > c)) {
                return None;
            }
        }
        Some(out)
    }

    fn grid_box(&self) -> Vec<f64> {
        let mut hi = Vec::new();
        for (s, (nx, ny)) in self.blocks().into_iter().enumerate() {
            let caps: Vec<f64> = self.demand(s).iter().map(|d| d.cap).collect();
            if ny == 1 {
                hi.extend(std::iter::repeat(caps[0]).take(nx));
            } else {
                hi.extend(caps);
            }
        }
        hi
    }
}

/// Coarse-to-fine grid minimization over `[0, hi]` until the spacing is below `resolution`.
fn grid_minimize(tiny: &Tiny, resolution: f64) -> Vec<(Vec<f64>, Vec<f64>)> {
    let hi = tiny.grid_box();
    let d = hi.len();
    let mut lo_box = vec![0.0; d];
    let mut hi_box = hi.clone();
    let n: usize = if d <= 2 { 201 } else { 41 };
    let mut best_z = vec![0.0; d];
    loop {
        let steps: Vec<f64> = (0..d).map(|i| (hi_box[i] - lo_box[i]) / (n - 1) as f64).collect();
        let mut best = f64::INFINITY;
        let total = n.pow(d as u32);
        let mut z = vec![0.0; d];
        for idx in 0..total {
            let mut r = idx;
            for i in 0..d {
                z[i] = lo_box[i] + (r % n) as f64 * steps[i];
                r /= n;
            }
            if let Some(w) = tiny.decode(&z) {
                let f = tiny.objective(&w);
                if f < best {
                    best = f;
                    best_z.clone_from(&z);
                }
            }
        }
        let widest = steps.iter().copied().fold(0.0, f64::max);
        if widest < resolution {
            return tiny.decode(&best_z).unwrap();
        }
        for i in 0..d {
            lo_box[i] = (best_z[i] - 3.0 * steps[i]).max(0.0);
            hi_box[i] = (best_z[i] + 3.0 * steps[i]).min(hi[i]);
        }
    }
}

fn max_diff(a: &[(Vec<f64>, Vec<f64>)], b: &[(Vec<f64>, Vec<f64>)]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|((ax, ay), (bx, by))| ax.iter().zip(bx).chain(ay.iter().zip(by)).map(|(u, v)| (u - v).abs()))
        .fold(0.0, f64::max)
}

fn affine(rng: &mut ChaCha8Rng) -> Affine {
    Affine { c0: rng.gen_range(1.0..=10.0), c1: rng.gen_range(0.5..=2.0) }
}

fn demand(rng: &mut ChaCha8Rng) -> DemandSide {
    let h0 = rng.gen_range(20.0..=40.0);
    let h1 = rng.gen_range(0.1..=1.0);
    DemandSide { h0, h1, cap: h0 / h1 }
}

/// Random instance with at most four variables; `family` picks the shape.
fn tiny_instance(family: usize, seed: u64) -> Tiny {
    let mut rng = ChaCha8Rng::seed_from_u64(1000 * family as u64 + seed);
    match family {
        // two parallel routes, one buyer
        0 => Tiny::Network {
            nodes: 2,
            ends: vec![(0, 1), (0, 1)],
            arcs: vec![affine(&mut rng), affine(&mut rng)],
            od: vec![(0, 1)],
            blocks: vec![TinyBlock { paths: vec![vec![0], vec![1]], buyers: vec![demand(&mut rng)] }],
        },
        // one route, two buyers
        1 => Tiny::Network {
            nodes: 2,
            ends: vec![(0, 1)],
            arcs: vec![affine(&mut rng)],
            od: vec![(0, 1)],
            blocks: vec![TinyBlock { paths: vec![vec![0]], buyers: vec![demand(&mut rng), demand(&mut rng)] }],
        },
        // two O/D pairs sharing arc 1 on a chain 0 -> 1 -> 2
        2 => Tiny::Network {
            nodes: 3,
            ends: vec![(0, 1), (1, 2)],
            arcs: vec![affine(&mut rng), affine(&mut rng)],
            od: vec![(0, 2), (1, 2)],
            blocks: vec![
                TinyBlock { paths: vec![vec![0, 1]], buyers: vec![demand(&mut rng)] },
                TinyBlock { paths: vec![vec![1]], buyers: vec![demand(&mut rng)] },
            ],
        },
        // two providers with congestion, one class
        3 => Tiny::Wireless {
            providers: vec![affine(&mut rng), affine(&mut rng)],
            caps: vec![None, None],
            congestion: rng.gen_range(0.0..=0.5),
            users: vec![demand(&mut rng)],
        },
        // three providers, one class
        _ => Tiny::Wireless {
            providers: vec![affine(&mut rng), affine(&mut rng), affine(&mut rng)],
            caps: vec![None, None, None],
            congestion: rng.gen_range(0.0..=0.5),
            users: vec![demand(&mut rng)],
        },
    }
}

// ---------------------------------------------------------------------------
// Criteria

fn two_route_oracle() -> Outcome {
    // Stationarity: 1 + x1 = 2 + x2 = 10 − (x1 + x2)  =>  x = (10/3, 7/3), y = 17/3, λ = 13/3.
    let (x1, x2, y, lam) = (10.0 / 3.0, 7.0 / 3.0, 17.0 / 3.0, 13.0 / 3.0);
    let t1 = two_route_instance();
    let cfg = SolverConfig { accuracy: 1e-6, record_steps: false, ..Default::default() };
    let mut pass = true;
    let mut detail = String::new();
    for method in [Method::Pl, Method::Cpl] {
        let start = Instant::now();
        let sol = solve(&t1, method, &cfg).unwrap();
        let elapsed = start.elapsed();
        let b = &sol.point.blocks[0];
        let err = (b.x[0] - x1).abs().max((b.x[1] - x2).abs()).max((b.y[0] - y).abs());
        let lam_err = match t1.check_equilibrium(&sol.point, 1e-2, EquilibriumForm::Kkt).unwrap() {
            Verdict::Equilibrium(iv) => (iv[0].lo - lam).max(lam - iv[0].hi).max(0.0),
            Verdict::Violated(_) => f64::INFINITY,
        };
        let ok = sol.trace.status == Status::Converged && err <= 1e-4 && lam_err <= 1e-4 && elapsed < Duration::from_secs(1);
        pass &= ok;
        detail += &format!(
            "{method:?}: Δ={:.1e} after {} block iters, max|w−w*|={err:.2e}, λ dist={lam_err:.2e}, {:.2}s; ",
            sol.trace.final_gap,
            sol.trace.block_iters,
            elapsed.as_secs_f64()
        );
    }
    outcome(pass, detail)
}

fn grid_oracle() -> Outcome {
    let cfg = SolverConfig { accuracy: 1e-10, max_block_iters: 25_000_000, record_steps: false, ..Default::default() };
    let mut worst: f64 = 0.0;
    let mut fails = Vec::new();
    let mut count = 0;
    for family in 0..5 {
        for seed in 0..5 {
            let tiny = tiny_instance(family, seed);
            let oracle = grid_minimize(&tiny, 1e-6);
            for method in [Method::Pl, Method::Cpl] {
                let (w, _) = tiny.solve(method, &cfg);
                let d = max_diff(&w, &oracle);
                worst = worst.max(d);
                if d > 1e-3 {
                    fails.push(format!("family {family} seed {seed} {method:?}: {d:.2e}"));
                }
            }
            count += 1;
        }
    }
    outcome(
        fails.is_empty(),
        format!("{count} instances x {{PL, CPL}}, worst max-norm distance {worst:.2e}; failures: {fails:?}"),
    )
}

fn small_networks(n: u64) -> Vec<NetworkProblem> {
    (0..n)
        .map(|seed| {
            let p = NetworkGenParams { nodes: 6, arcs: 14, od_pairs: 3, paths_per_pair: 3, ..Default::default() };
            generate_network(seed, &p).unwrap()
        })
        .collect()
}

fn invariants() -> Outcome {
    let mut problems = Vec::new();
    let nets = small_networks(6);

    // monotone descent with the Armijo bound on every accepted step
    let mut steps = 0usize;
    for net in &nets {
        for method in [Method::Pl, Method::Cpl] {
            let cfg = SolverConfig { accuracy: 1e-2, ..Default::default() };
            let sol = solve(net, method, &cfg).unwrap();
            let f0 = objective(net, &Point::zeros(&net.dims())).unwrap().total;
            let mut prev = f0;
            for e in &sol.trace.events {
                if let TraceEvent::Step { step, gap, decrease, objective: f, .. } = *e {
                    steps += 1;
                    if decrease > -cfg.beta * step * gap + 1e-12 * (1.0 + prev.abs()) || f > prev {
                        problems.push(format!("descent violated: decrease {decrease}, bound {}", -cfg.beta * step * gap));
                    }
                    prev = f;
                }
            }
            let exact = sol.objective.total;
            if (exact - prev).abs() > 1e-7 * (1.0 + exact.abs()) {
                problems.push(format!("running objective {prev} vs recomputed {exact}"));
            }
        }
    }

    // gap nonnegativity: unclipped gap at random feasible points, from scratch
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut min_gap = f64::INFINITY;
    for net in &nets {
        for _ in 0..20 {
            let w = random_feasible(net, &mut rng);
            let costs = net.path_costs(&w).unwrap();
            for s in 0..net.od_pairs().len() {
                let v = solve_block(net, &w, s).unwrap().target;
                let wb = &w.blocks[s];
                let lin: f64 = costs[s].iter().zip(&wb.x).zip(&v.x).map(|((g, a), b)| g * (a - b)).sum();
                let dem: f64 = net.od_pairs()[s]
                    .buyers
                    .iter()
                    .zip(&wb.y)
                    .zip(&v.y)
                    .map(|((b, &a), &c)| {
                        let (h0, h1) = match b.disutility {
                            ScalarCostFn::Affine { c0, c1 } => (c0, -c1),
                            _ => unreachable!(),
                        };
                        (h0 * c - 0.5 * h1 * c * c) - (h0 * a - 0.5 * h1 * a * a)
                    })
                    .sum();
                // η̃(w_y) − η̃(v_y) = ∫_{w_y}^{v_y} h
                let gap = lin + dem;
                min_gap = min_gap.min(gap);
                if gap < -1e-9 * (1.0 + lin.abs()) {
                    problems.push(format!("negative gap {gap}"));
                }
            }
        }
    }

    // exact feasibility of iterates at several budgets
    let mut worst_balance: f64 = 0.0;
    let big = generate_network(1, &NetworkGenParams { costs: CostFamily::Reference, ..Default::default() }).unwrap();
    for net in nets.iter().chain(std::iter::once(&big)) {
        for budget in [1u64, 10, 100, 1000, 20_000] {
            for method in [Method::Pl, Method::Cpl] {
                let cfg = SolverConfig { accuracy: 0.0, max_block_iters: budget, record_steps: false, ..Default::default() };
                let sol = solve(net, method, &cfg).unwrap();
                for (blk, od) in sol.point.blocks.iter().zip(net.od_pairs()) {
                    worst_balance = worst_balance.max(blk.imbalance().abs());
                    let bad_box = blk.x.iter().any(|&v| v < 0.0)
                        || blk.y.iter().zip(&od.buyers).any(|(&v, b)| v < 0.0 || v > b.cap.as_f64());
                    if bad_box {
                        problems.push("iterate left its bounds".into());
                    }
                }
            }
        }
    }
    if worst_balance > 1e-10 {
        problems.push(format!("balance error {worst_balance:e}"));
    }

    // gradient against central differences at 100 random points
    let mut worst_rel: f64 = 0.0;
    for k in 0..100 {
        let net = &nets[k % nets.len()];
        let w = random_feasible(net, &mut rng);
        let s = k % net.od_pairs().len();
        let g = block_gradient(net, &w, s).unwrap();
        for p in 0..w.blocks[s].x.len() {
            let h = 1e-5 * (1.0 + w.blocks[s].x[p].abs());
            let mut plus = w.clone();
            let mut minus = w.clone();
            plus.blocks[s].x[p] += h;
            minus.blocks[s].x[p] -= h;
            let fd = (objective(net, &plus).unwrap().total - objective(net, &minus).unwrap().total) / (2.0 * h);
            worst_rel = worst_rel.max((fd - g.x[p]).abs() / g.x[p].abs().max(1.0));
        }
        for (j, b) in net.od_pairs()[s].buyers.iter().enumerate() {
            let y = w.blocks[s].y[j];
            let h = 1e-5 * (1.0 + y.abs());
            let mut plus = w.clone();
            let mut minus = w.clone();
            plus.blocks[s].y[j] += h;
            minus.blocks[s].y[j] -= h;
            let fd = (objective(net, &plus).unwrap().total - objective(net, &minus).unwrap().total) / (2.0 * h);
            let exact = -b.disutility.eval(y);
            worst_rel = worst_rel.max((fd - exact).abs() / exact.abs().max(1.0));
        }
    }
    if worst_rel >= 1e-6 {
        problems.push(format!("gradient rel. error {worst_rel:e}"));
    }

    // equilibrium forms agree on uncapped instances: converged solver points,
    // the exact two-route equilibrium, and points away from equilibrium
    let forms = [EquilibriumForm::Kkt, EquilibriumForm::Complementarity, EquilibriumForm::Implication];
    let mut agree = 0;
    let mut cases: Vec<(NetworkProblem, Point, f64, Option<bool>)> = Vec::new();
    for net in &nets {
        let cfg = SolverConfig { accuracy: 1e-5, record_steps: false, ..Default::default() };
        let sol = solve(net, Method::Cpl, &cfg).unwrap();
        let uncapped = drop_caps(net);
        cases.push((uncapped.clone(), sol.point, 5e-2, Some(true)));
        cases.push((uncapped.clone(), Point::zeros(&net.dims()), 5e-2, Some(false)));
        cases.push((uncapped, random_feasible(net, &mut rng), 5e-2, None));
    }
    let t1 = drop_caps(&two_route_instance());
    let star = |dx: f64| Point::new(vec![BlockValues::new(vec![10.0 / 3.0 + dx, 7.0 / 3.0], vec![17.0 / 3.0 + dx])]);
    cases.push((t1.clone(), star(0.0), 1e-9, Some(true)));
    cases.push((t1, star(0.1), 1e-9, Some(false)));
    for (i, (net, w, tol, expected)) in cases.iter().enumerate() {
        let full: Vec<Verdict> = forms.iter().map(|&f| net.check_equilibrium(w, *tol, f).unwrap()).collect();
        let verdicts: Vec<bool> = full.iter().map(Verdict::is_equilibrium).collect();
        let consistent = verdicts.iter().all(|&v| v == verdicts[0]) && expected.is_none_or(|e| e == verdicts[0]);
        if consistent {
            agree += 1;
        } else {
            problems.push(format!("case {i}: forms disagree or unexpected verdict: {full:?}"));
        }
    }

    // determinism of traces
    let cfg = SolverConfig { accuracy: 1e-2, ..Default::default() };
    for method in [Method::Pl, Method::Cpl] {
        let a = solve(&nets[0], method, &cfg).unwrap().trace.to_json_lines().unwrap();
        let b = solve(&nets[0], method, &cfg).unwrap().trace.to_json_lines().unwrap();
        if a != b {
            problems.push(format!("{method:?} trace not deterministic"));
        }
    }
    let p = NetworkGenParams::default();
    if network_instance_file(9, &p).unwrap().render().unwrap() != network_instance_file(9, &p).unwrap().render().unwrap() {
        problems.push("generator not deterministic".into());
    }

    outcome(
        problems.is_empty(),
        format!(
            "{steps} Armijo steps checked, min gap {min_gap:.1e}, balance error {worst_balance:.1e}, FD rel. error {worst_rel:.1e}, {agree} form checks agree; problems: {problems:?}"
        ),
    )
}

fn random_feasible(net: &NetworkProblem, rng: &mut ChaCha8Rng) -> Point {
    let blocks = net
        .od_pairs()
        .iter()
        .map(|od| {
            let y: Vec<f64> = od.buyers.iter().map(|b| rng.gen_range(0.0..b.cap.as_f64())).collect();
            let total: f64 = y.iter().sum();
            let mut share: Vec<f64> = od.paths.iter().map(|_| rng.gen_range(0.0..1.0)).collect();
            let norm: f64 = share.iter().sum();
            share.iter_mut().for_each(|v| *v *= total / norm);
            // put the rounding remainder on the first path
            let rest = total - share.iter().sum::<f64>();
            share[0] += rest;
            BlockValues::new(share, y)
        })
        .collect();
    Point::new(blocks)
}

fn drop_caps(net: &NetworkProblem) -> NetworkProblem {
    let pairs = net
        .od_pairs()
        .iter()
        .map(|od| OdPair {
            buyers: od.buyers.iter().map(|b| Buyer::new(b.disutility.clone(), Cap::Infinite)).collect(),
            ..od.clone()
        })
        .collect();
    NetworkProblem::new(net.network().clone(), pairs).unwrap()
}

fn reference_spec(seed: u64) -> ExperimentSpec {
    ExperimentSpec {
        instance: InstanceSource::GenerateNetwork {
            seed,
            params: NetworkGenParams { costs: CostFamily::Reference, ..Default::default() },
        },
        methods: vec![
            MethodRun { label: None, method: Method::Pl, config: SolverConfig { record_steps: false, ..Default::default() } },
            MethodRun { label: None, method: Method::Cpl, config: SolverConfig { record_steps: false, ..Default::default() } },
        ],
        thresholds: vec![0.2, 0.1, 0.05],
    }
}

fn protocol_table() -> Outcome {
    let start = Instant::now();
    let spec = reference_spec(1);
    let inst = spec.load_instance(std::path::Path::new(".")).unwrap();
    let shape = match &inst {
        market_equil::Instance::Network(n) => {
            (n.network().num_nodes(), n.network().arcs().len(), n.od_pairs().len(), n.od_pairs()[0].buyers.len())
        }
        _ => unreachable!(),
    };
    let result = run_experiment(&spec, &inst).unwrap();
    let elapsed = start.elapsed();
    let csv = result.to_csv();
    let rows = csv.lines().count() - 1;
    let monotone = result
        .methods
        .iter()
        .all(|m| m.counts.windows(2).all(|w| matches!((w[0], w[1]), (Some(a), Some(b)) if a <= b)));
    let pass = shape == (20, 114, 10, 2) && rows == 3 && monotone && elapsed < Duration::from_secs(60);
    outcome(pass, format!("shape {shape:?}, {:.1}s, table: {}", elapsed.as_secs_f64(), csv.replace('\n', " | ")))
}

fn cpl_preference() -> Outcome {
    let thresholds = [0.2, 0.1, 0.05];
    let cfg = SolverConfig { accuracy: 0.05, record_steps: false, ..Default::default() };
    let mut wins = 0;
    let mut cells = 0;
    let mut majority = 0;
    let mut runs = 0;
    for seed in 0..30u64 {
        let p = if seed < 15 {
            NetworkGenParams { nodes: 6, arcs: 14, od_pairs: 3, paths_per_pair: 3, ..Default::default() }
        } else {
            NetworkGenParams { nodes: 12, arcs: 36, od_pairs: 6, paths_per_pair: 4, ..Default::default() }
        };
        let net = generate_network(seed, &p).unwrap();
        let pl = solve(&net, Method::Pl, &cfg).unwrap().trace;
        let cpl = solve(&net, Method::Cpl, &cfg).unwrap().trace;
        let mut w = 0;
        for &t in &thresholds {
            if let (Some(a), Some(b)) = (pl.block_iters_to(t), cpl.block_iters_to(t)) {
                cells += 1;
                if b < a {
                    wins += 1;
                    w += 1;
                }
            }
        }
        runs += 1;
        if 2 * w > thresholds.len() {
            majority += 1;
        }
    }
    let rate = wins as f64 / cells as f64;
    outcome(
        2 * wins > cells,
        format!("CPL fewer block iterations in {wins}/{cells} (instance, threshold) cells ({:.0}%), majority of thresholds on {majority}/{runs} instances", 100.0 * rate),
    )
}

fn penalty_convergence() -> Outcome {
    let mut problems = Vec::new();
    let mut worst: f64 = 0.0;
    let mut shown = Vec::new();
    let mut done = 0;
    let mut seed = 0;
    while done < 4 {
        seed += 1;
        let mut tiny = tiny_instance(3, 100 + seed);
        let free = grid_minimize(&tiny, 1e-6);
        let x0 = free[0].0[0];
        if x0 < 1.0 {
            continue;
        }
        let alpha = 0.5 * x0;
        if let Tiny::Wireless { caps, .. } = &mut tiny {
            caps[0] = Some(alpha);
        }
        let oracle = grid_minimize(&tiny, 1e-6);
        let penalty = PenaltyConfig { violation_threshold: 0.0, ..Default::default() };
        let cfg = SolverConfig { record_steps: false, ..Default::default() };
        let sol = solve_penalized(&tiny.wireless(), &cfg, &penalty).unwrap();
        let w: Vec<_> = sol.point.blocks.iter().map(|b| (b.x.clone(), b.y.clone())).collect();
        let d = max_diff(&w, &oracle);
        worst = worst.max(d);
        if sol.tau != 1e6 || d > 1e-2 {
            problems.push(format!("seed {seed}: τ={} distance {d:.2e}", sol.tau));
        }
        if sol.violations.windows(2).any(|v| v[1] > v[0]) {
            problems.push(format!("seed {seed}: violations {:?}", sol.violations));
        }
        shown.push(format!("{:.1e}", sol.violations.last().unwrap()));
        done += 1;
    }
    outcome(
        problems.is_empty(),
        format!("4 instances with a binding cap, worst distance at τ=1e6 {worst:.2e}, final violations {shown:?}; problems: {problems:?}"),
    )
}

fn main() {
    let criteria: [(&str, bool, fn() -> Outcome); 6] = [
        ("tiny-instance oracle equivalence (two routes)", true, two_route_oracle),
        ("grid-oracle equivalence", true, grid_oracle),
        ("invariant suite", true, invariants),
        ("experiment protocol table, reference shape", true, protocol_table),
        ("CPL vs PL block iterations (informational)", false, cpl_preference),
        ("penalty convergence", true, penalty_convergence),
    ];
    // `ACCEPTANCE_ONLY=<substring>` runs the matching criteria only
    let only = std::env::var("ACCEPTANCE_ONLY").ok();
    let mut failed = 0;
    for (name, hard, check) in criteria {
        if only.as_deref().is_some_and(|o| !name.contains(o)) {
            continue;
        }
        let start = Instant::now();
        let o = check();
        let tag = match (o.pass, hard) {
            (true, _) => "PASS",
            (false, true) => "FAIL",
            (false, false) => "FAIL (soft)",
        };
        println!("{tag} [{name}] ({:.1}s) {}", start.elapsed().as_secs_f64(), o.detail);
        if !o.pass && hard {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("{failed} hard acceptance criteria failed");
        std::process::exit(1);
    }
}
