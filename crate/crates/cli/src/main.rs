//! market-equil command line.
//!
//! Exit codes: 0 success or equilibrium verified, 1 accuracy not reached (budget
//! exhausted, caps still violated, or stalled at rounding level), 2 verification failed, 3 input or solver error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use market_equil::experiment::{run_experiment, ExperimentSpec};
use market_equil::generate::{
    network_instance_file, wireless_instance_file, CostFamily, NetworkGenParams, WirelessGenParams,
};
use market_equil::instance::{load_point, save_point};
use market_equil::solvers::{solve, solve_penalized, SolveTrace};
use market_equil::{
    verify_equilibrium, DeltaRule, EquilibriumForm, Instance, InstanceFile, Method, PenaltyConfig, SolverConfig,
    Status, Verdict,
};

const EXIT_BUDGET: u8 = 1;
const EXIT_VERIFY: u8 = 2;
const EXIT_INPUT: u8 = 3;

#[derive(Parser)]
#[command(name = "market-equil", version, about = "Two-sided market equilibria by partial linearization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve an instance and print a JSON summary.
    Solve(SolveArgs),
    /// Write a random instance.
    Generate(GenerateArgs),
    /// Check a point against the equilibrium conditions.
    Verify(VerifyArgs),
    /// Block iterations needed per accuracy threshold, as a CSV table
    /// (columns: threshold, then one per method; NA = not reached).
    Experiment(ExperimentArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Pl,
    Cpl,
}

#[derive(Clone, Copy, ValueEnum)]
enum RuleArg {
    Halve,
    Harmonic,
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Network,
    Wireless,
}

#[derive(Clone, Copy, ValueEnum)]
enum CostsArg {
    Random,
    Reference,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormArg {
    Kkt,
    Complementarity,
    Implication,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long, value_enum, default_value = "cpl")]
    method: MethodArg,
    #[arg(long, default_value_t = 0.5)]
    beta: f64,
    #[arg(long, default_value_t = 0.5)]
    theta: f64,
    #[arg(long, default_value_t = 10.0)]
    delta0: f64,
    #[arg(long, value_enum, default_value = "harmonic")]
    delta_rule: RuleArg,
    #[arg(long, default_value_t = 1e-6)]
    accuracy: f64,
    #[arg(long, default_value_t = 10_000_000)]
    max_block_iters: u64,
    /// Per-stage budget of the penalty loop (wireless instances with offer caps).
    #[arg(long, default_value_t = 1_000_000)]
    penalty_stage_iters: u64,
    /// Trace as JSON lines (events: accuracy, step, restart, penalty_stage).
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Write the final point here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, value_enum, default_value = "network")]
    kind: KindArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    nodes: usize,
    #[arg(long, default_value_t = 114)]
    arcs: usize,
    #[arg(long, default_value_t = 10)]
    od_pairs: usize,
    #[arg(long, default_value_t = 4)]
    paths_per_pair: usize,
    #[arg(long, default_value_t = 2)]
    buyers_per_pair: usize,
    #[arg(long, value_enum, default_value = "random")]
    costs: CostsArg,
    #[arg(long, default_value_t = 3)]
    providers: usize,
    #[arg(long, default_value_t = 2)]
    users: usize,
    #[arg(long, default_value_t = 0.1)]
    congestion: f64,
    #[arg(long, default_value_t = 0)]
    capped_providers: usize,
    /// Defaults to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    point: PathBuf,
    /// Network instances only; other kinds always use the market conditions.
    #[arg(long, value_enum, default_value = "kkt")]
    form: FormArg,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    spec: PathBuf,
    /// Defaults to stdout.
    #[arg(long)]
    out_table: Option<PathBuf>,
    /// All traces as JSON lines, each tagged with its method label.
    #[arg(long)]
    traces: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Solve(a) => run_solve(a),
        Command::Generate(a) => run_generate(a),
        Command::Verify(a) => run_verify(a),
        Command::Experiment(a) => run_experiment_cmd(a),
    };
    match res {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}

fn load_instance(path: &Path) -> Result<Instance> {
    let file = InstanceFile::load(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(file.build().with_context(|| format!("building {}", path.display()))?)
}

fn write_trace(path: &Path, trace: &SolveTrace) -> Result<()> {
    std::fs::write(path, trace.to_json_lines()?).with_context(|| format!("writing {}", path.display()))
}

fn status_code(status: Status) -> u8 {
    match status {
        Status::Converged => 0,
        Status::BudgetExhausted | Status::ViolationAboveThreshold | Status::Stalled => EXIT_BUDGET,
    }
}

fn run_solve(a: SolveArgs) -> Result<u8> {
    let inst = load_instance(&a.instance)?;
    let config = SolverConfig {
        beta: a.beta,
        theta: a.theta,
        delta0: a.delta0,
        delta_rule: match a.delta_rule {
            RuleArg::Halve => DeltaRule::Halve,
            RuleArg::Harmonic => DeltaRule::Harmonic,
        },
        accuracy: a.accuracy,
        max_block_iters: a.max_block_iters,
        record_steps: a.trace.is_some(),
        ..Default::default()
    };
    let method = match a.method {
        MethodArg::Pl => Method::Pl,
        MethodArg::Cpl => Method::Cpl,
    };
    let (point, trace, objective, extra) = match &inst {
        Instance::Network(p) => {
            let s = solve(p, method, &config)?;
            (s.point, s.trace, s.objective, json!({}))
        }
        Instance::Wireless(p) if p.providers().iter().all(|q| !q.cap.is_finite()) => {
            let s = solve(p, method, &config)?;
            (s.point, s.trace, s.objective, json!({}))
        }
        Instance::Wireless(p) => {
            let penalty = PenaltyConfig { max_block_iters_per_stage: a.penalty_stage_iters, ..Default::default() };
            let s = solve_penalized(p, &config, &penalty)?;
            (s.point, s.trace, s.objective, json!({"tau": s.tau, "violations": s.violations}))
        }
        Instance::Market(_) => bail!("general market instances can be verified but not solved"),
    };
    if let Some(path) = &a.trace {
        write_trace(path, &trace)?;
    }
    if let Some(path) = &a.out {
        save_point(&point, path).with_context(|| format!("writing {}", path.display()))?;
    }
    let summary = json!({
        "status": trace.status,
        "method": trace.method,
        "block_iters": trace.block_iters,
        "final_gap": trace.final_gap,
        "objective": objective.total,
        "penalty": extra,
        "point": point,
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(status_code(trace.status))
}

fn run_generate(a: GenerateArgs) -> Result<u8> {
    let file = match a.kind {
        KindArg::Network => {
            let params = NetworkGenParams {
                nodes: a.nodes,
                arcs: a.arcs,
                od_pairs: a.od_pairs,
                paths_per_pair: a.paths_per_pair,
                buyers_per_pair: a.buyers_per_pair,
                costs: match a.costs {
                    CostsArg::Random => CostFamily::Random,
                    CostsArg::Reference => CostFamily::Reference,
                },
            };
            network_instance_file(a.seed, &params)?
        }
        KindArg::Wireless => {
            let params = WirelessGenParams {
                providers: a.providers,
                users: a.users,
                congestion: a.congestion,
                capped_providers: a.capped_providers,
            };
            wireless_instance_file(a.seed, &params)?
        }
    };
    match &a.out {
        Some(path) => file.save(path).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{}", file.render()?),
    }
    Ok(0)
}

fn run_verify(a: VerifyArgs) -> Result<u8> {
    let inst = load_instance(&a.instance)?;
    let point = load_point(&a.point).with_context(|| format!("reading {}", a.point.display()))?;
    let verdict = match &inst {
        Instance::Network(p) => {
            let form = match a.form {
                FormArg::Kkt => EquilibriumForm::Kkt,
                FormArg::Complementarity => EquilibriumForm::Complementarity,
                FormArg::Implication => EquilibriumForm::Implication,
            };
            p.check_equilibrium(&point, a.tol, form)?
        }
        other => verify_equilibrium(&other.to_market(), &point, a.tol)?,
    };
    match &verdict {
        Verdict::Equilibrium(intervals) => {
            let prices: Vec<_> = intervals.iter().map(|i| json!([i.lo, i.hi])).collect();
            println!("{}", serde_json::to_string_pretty(&json!({"equilibrium": true, "price_intervals": prices}))?);
            Ok(0)
        }
        Verdict::Violated(v) => {
            println!("{}", serde_json::to_string_pretty(&json!({"equilibrium": false, "violation": format!("{v:?}")}))?);
            Ok(EXIT_VERIFY)
        }
    }
}

fn run_experiment_cmd(a: ExperimentArgs) -> Result<u8> {
    let spec = ExperimentSpec::load(&a.spec).with_context(|| format!("reading {}", a.spec.display()))?;
    let base = a.spec.parent().unwrap_or(Path::new("."));
    let inst = spec.load_instance(base)?;
    let result = run_experiment(&spec, &inst)?;
    let table = result.to_csv();
    match &a.out_table {
        Some(path) => std::fs::write(path, &table).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{table}"),
    }
    if let Some(path) = &a.traces {
        std::fs::write(path, result.traces_json_lines()?).with_context(|| format!("writing {}", path.display()))?;
    }
    for m in result.methods.iter().filter(|m| m.partial()) {
        eprintln!("warning: {} stopped before reaching every threshold", m.label);
    }
    Ok(if result.methods.iter().any(|m| m.partial()) { EXIT_BUDGET } else { 0 })
}
