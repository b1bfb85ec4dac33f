//! Python bindings. Points cross the boundary as lists of `(x, y)` tuples, one per block.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use market_equil::generate::{self, CostFamily, NetworkGenParams, WirelessGenParams};
use market_equil::instance::{Instance, InstanceFile};
use market_equil::solvers::{self, SolveTrace};
use market_equil::{
    network, objective, verify_equilibrium, BlockValues, DeltaRule, EquilibriumForm, Error, Method, PenaltyConfig,
    Point, SolverConfig, Verdict,
};

type PyPoint = Vec<(Vec<f64>, Vec<f64>)>;

fn err(e: Error) -> PyErr {
    match e {
        Error::LineSearch { .. } | Error::Io(_) => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn to_point(p: PyPoint) -> Point {
    Point::new(p.into_iter().map(|(x, y)| BlockValues::new(x, y)).collect())
}

fn from_point(p: Point) -> PyPoint {
    p.blocks.into_iter().map(|b| (b.x, b.y)).collect()
}

fn config(method: &str, accuracy: f64, max_block_iters: u64, beta: f64, theta: f64, delta0: f64, delta_rule: &str) -> PyResult<(Method, SolverConfig)> {
    let method: Method = method.parse().map_err(err)?;
    let delta_rule: DeltaRule = delta_rule.parse().map_err(err)?;
    Ok((method, SolverConfig { beta, theta, delta0, delta_rule, accuracy, max_block_iters, ..Default::default() }))
}

fn status_name(trace: &SolveTrace) -> String {
    serde_json::to_value(trace.status).ok().and_then(|v| v.as_str().map(String::from)).unwrap_or_default()
}

/// Verdict as `(True, [(lo, hi), ...])` or `(False, description)`.
fn verdict(v: Verdict, py: Python<'_>) -> PyResult<(bool, Py<PyAny>)> {
    Ok(match v {
        Verdict::Equilibrium(iv) => {
            let pairs: Vec<(f64, f64)> = iv.iter().map(|i| (i.lo, i.hi)).collect();
            (true, pairs.into_pyobject(py)?.into_any().unbind())
        }
        Verdict::Violated(viol) => (false, format!("{viol:?}").into_pyobject(py)?.into_any().unbind()),
    })
}

#[pyclass(frozen)]
pub struct Solution {
    #[pyo3(get)]
    point: PyPoint,
    #[pyo3(get)]
    status: String,
    #[pyo3(get)]
    block_iters: u64,
    #[pyo3(get)]
    final_gap: f64,
    #[pyo3(get)]
    objective: f64,
    trace: SolveTrace,
}

#[pymethods]
impl Solution {
    /// Trace events as JSON lines.
    fn trace_json_lines(&self) -> PyResult<String> {
        self.trace.to_json_lines().map_err(err)
    }

    /// Block iterations when the total gap first reached `threshold`.
    fn block_iters_to(&self, threshold: f64) -> Option<u64> {
        self.trace.block_iters_to(threshold)
    }

    fn __repr__(&self) -> String {
        format!("Solution(status={:?}, block_iters={}, final_gap={:e})", self.status, self.block_iters, self.final_gap)
    }
}

#[pyclass(name = "NetworkProblem", frozen)]
pub struct PyNetworkProblem {
    inner: network::NetworkProblem,
}

#[pymethods]
impl PyNetworkProblem {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        match InstanceFile::parse(text).and_then(|f| f.build()).map_err(err)? {
            Instance::Network(inner) => Ok(Self { inner }),
            _ => Err(PyValueError::new_err("not a network instance")),
        }
    }

    /// Two parallel arcs `1 + f`, `2 + f` and one buyer `10 − y`.
    #[staticmethod]
    fn two_route() -> Self {
        Self { inner: network::two_route_instance() }
    }

    fn to_json(&self) -> PyResult<String> {
        InstanceFile::from_network(&self.inner).and_then(|f| f.render()).map_err(err)
    }

    fn dims(&self) -> Vec<(usize, usize)> {
        self.inner.dims()
    }

    fn arc_flows(&self, point: PyPoint) -> PyResult<Vec<f64>> {
        self.inner.arc_flows(&to_point(point)).map_err(err)
    }

    fn path_costs(&self, point: PyPoint) -> PyResult<Vec<Vec<f64>>> {
        self.inner.path_costs(&to_point(point)).map_err(err)
    }

    fn objective(&self, point: PyPoint) -> PyResult<f64> {
        objective(&self.inner, &to_point(point)).map(|o| o.total).map_err(err)
    }

    #[pyo3(signature = (method="cpl", accuracy=1e-6, max_block_iters=10_000_000, beta=0.5, theta=0.5, delta0=10.0, delta_rule="harmonic"))]
    #[allow(clippy::too_many_arguments)]
    fn solve(
        &self,
        py: Python<'_>,
        method: &str,
        accuracy: f64,
        max_block_iters: u64,
        beta: f64,
        theta: f64,
        delta0: f64,
        delta_rule: &str,
    ) -> PyResult<Solution> {
        let (method, cfg) = config(method, accuracy, max_block_iters, beta, theta, delta0, delta_rule)?;
        let sol = py.detach(|| solvers::solve(&self.inner, method, &cfg)).map_err(err)?;
        Ok(Solution {
            status: status_name(&sol.trace),
            block_iters: sol.trace.block_iters,
            final_gap: sol.trace.final_gap,
            objective: sol.objective.total,
            point: from_point(sol.point),
            trace: sol.trace,
        })
    }

    #[pyo3(signature = (point, tol=1e-6, form="kkt"))]
    fn check_equilibrium(&self, py: Python<'_>, point: PyPoint, tol: f64, form: &str) -> PyResult<(bool, Py<PyAny>)> {
        let form: EquilibriumForm = form.parse().map_err(err)?;
        verdict(self.inner.check_equilibrium(&to_point(point), tol, form).map_err(err)?, py)
    }

    fn __repr__(&self) -> String {
        format!(
            "NetworkProblem(nodes={}, arcs={}, od_pairs={})",
            self.inner.network().num_nodes(),
            self.inner.network().arcs().len(),
            self.inner.od_pairs().len()
        )
    }
}

#[pyclass(name = "WirelessProblem", frozen)]
pub struct PyWirelessProblem {
    inner: market_equil::WirelessProblem,
}

#[pymethods]
impl PyWirelessProblem {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        match InstanceFile::parse(text).and_then(|f| f.build()).map_err(err)? {
            Instance::Wireless(inner) => Ok(Self { inner }),
            _ => Err(PyValueError::new_err("not a wireless instance")),
        }
    }

    fn to_json(&self) -> PyResult<String> {
        InstanceFile::from_wireless(&self.inner).and_then(|f| f.render()).map_err(err)
    }

    fn prices(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.prices(&x).map_err(err)
    }

    fn cap_violation(&self, x: Vec<f64>) -> f64 {
        self.inner.cap_violation(&x)
    }

    /// Uses the penalty continuation when any provider has a finite cap.
    #[pyo3(signature = (method="cpl", accuracy=1e-6, max_block_iters=10_000_000, beta=0.5, theta=0.5, delta0=10.0, delta_rule="harmonic", stage_iters=1_000_000))]
    #[allow(clippy::too_many_arguments)]
    fn solve(
        &self,
        py: Python<'_>,
        method: &str,
        accuracy: f64,
        max_block_iters: u64,
        beta: f64,
        theta: f64,
        delta0: f64,
        delta_rule: &str,
        stage_iters: u64,
    ) -> PyResult<Solution> {
        let (method, cfg) = config(method, accuracy, max_block_iters, beta, theta, delta0, delta_rule)?;
        let penalty = PenaltyConfig { max_block_iters_per_stage: stage_iters, ..Default::default() };
        let capped = self.inner.providers().iter().any(|p| p.cap.is_finite());
        let (point, trace, obj) = py
            .detach(|| {
                if capped {
                    solvers::solve_penalized(&self.inner, &cfg, &penalty)
                        .map(|s| (s.point, s.trace, s.objective))
                } else {
                    solvers::solve(&self.inner, method, &cfg).map(|s| (s.point, s.trace, s.objective))
                }
            })
            .map_err(err)?;
        Ok(Solution {
            status: status_name(&trace),
            block_iters: trace.block_iters,
            final_gap: trace.final_gap,
            objective: obj.total,
            point: from_point(point),
            trace,
        })
    }

    #[pyo3(signature = (point, tol=1e-6))]
    fn verify(&self, py: Python<'_>, point: PyPoint, tol: f64) -> PyResult<(bool, Py<PyAny>)> {
        verdict(verify_equilibrium(&self.inner.to_market(), &to_point(point), tol).map_err(err)?, py)
    }
}

#[pyfunction]
#[pyo3(signature = (seed, nodes=20, arcs=114, od_pairs=10, paths_per_pair=4, buyers_per_pair=2, reference_costs=false))]
fn generate_network(
    seed: u64,
    nodes: usize,
    arcs: usize,
    od_pairs: usize,
    paths_per_pair: usize,
    buyers_per_pair: usize,
    reference_costs: bool,
) -> PyResult<PyNetworkProblem> {
    let params = NetworkGenParams {
        nodes,
        arcs,
        od_pairs,
        paths_per_pair,
        buyers_per_pair,
        costs: if reference_costs { CostFamily::Reference } else { CostFamily::Random },
    };
    generate::generate_network(seed, &params).map(|inner| PyNetworkProblem { inner }).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (seed, providers=3, users=2, congestion=0.1, capped_providers=0))]
fn generate_wireless(
    seed: u64,
    providers: usize,
    users: usize,
    congestion: f64,
    capped_providers: usize,
) -> PyResult<PyWirelessProblem> {
    let params = WirelessGenParams { providers, users, congestion, capped_providers };
    generate::generate_wireless(seed, &params).map(|inner| PyWirelessProblem { inner }).map_err(err)
}

#[pymodule]
fn market_equil_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyNetworkProblem>()?;
    m.add_class::<PyWirelessProblem>()?;
    m.add_class::<Solution>()?;
    m.add_function(wrap_pyfunction!(generate_network, m)?)?;
    m.add_function(wrap_pyfunction!(generate_wireless, m)?)?;
    Ok(())
}
