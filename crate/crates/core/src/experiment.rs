//! Block-iteration counts needed to reach a list of accuracy thresholds.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::generate::{generate_network, generate_wireless, NetworkGenParams, WirelessGenParams};
use crate::instance::{Instance, InstanceFile};
use crate::objective::SeparableModel;
use crate::solvers::{solve, Method, SolveTrace, SolverConfig, Status};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceSource {
    /// Instance file, relative to the spec file's directory.
    Path(PathBuf),
    Inline(InstanceFile),
    GenerateNetwork { seed: u64, #[serde(default)] params: NetworkGenParams },
    GenerateWireless { seed: u64, #[serde(default)] params: WirelessGenParams },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodRun {
    #[serde(default)]
    pub label: Option<String>,
    pub method: Method,
    #[serde(default)]
    pub config: SolverConfig,
}

impl MethodRun {
    pub fn label(&self) -> String {
        self.label.clone().unwrap_or_else(|| format!("{:?}", self.method).to_uppercase())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub instance: InstanceSource,
    pub methods: Vec<MethodRun>,
    /// Strictly decreasing.
    pub thresholds: Vec<f64>,
}

impl ExperimentSpec {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let spec: Self = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::Config("experiment needs at least one method".into()));
        }
        if self.thresholds.is_empty() || self.thresholds.iter().any(|t| !(*t >= 0.0)) {
            return Err(Error::Config("thresholds must be a non-empty list of non-negative numbers".into()));
        }
        if self.thresholds.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::Config("thresholds must be strictly decreasing".into()));
        }
        for m in &self.methods {
            m.config.validate()?;
        }
        Ok(())
    }

    pub fn load_instance(&self, base: &Path) -> Result<Instance> {
        match &self.instance {
            InstanceSource::Path(p) => InstanceFile::load(base.join(p))?.build(),
            InstanceSource::Inline(f) => f.build(),
            InstanceSource::GenerateNetwork { seed, params } => generate_network(*seed, params).map(Instance::Network),
            InstanceSource::GenerateWireless { seed, params } => {
                generate_wireless(*seed, params).map(Instance::Wireless)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodOutcome {
    pub label: String,
    /// Block iterations per threshold; `None` when the budget ran out first.
    pub counts: Vec<Option<u64>>,
    pub trace: SolveTrace,
}

impl MethodOutcome {
    /// The run stopped before reaching the tightest threshold.
    pub fn partial(&self) -> bool {
        self.counts.iter().any(Option::is_none)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub thresholds: Vec<f64>,
    pub methods: Vec<MethodOutcome>,
}

impl ExperimentResult {
    /// CSV with one row per threshold and one column per method; `NA` marks
    /// thresholds not reached within the budget.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("threshold");
        for m in &self.methods {
            out.push(',');
            out.push_str(&m.label);
        }
        out.push('\n');
        for (i, t) in self.thresholds.iter().enumerate() {
            let _ = write!(out, "{t}");
            for m in &self.methods {
                match m.counts[i] {
                    Some(c) => {
                        let _ = write!(out, ",{c}");
                    }
                    None => out.push_str(",NA"),
                }
            }
            out.push('\n');
        }
        out
    }

    /// JSON lines: every trace event tagged with its method label.
    pub fn traces_json_lines(&self) -> Result<String> {
        let mut out = String::new();
        for m in &self.methods {
            for e in &m.trace.events {
                let mut v = serde_json::to_value(e)?;
                v["method"] = serde_json::Value::String(m.label.clone());
                out.push_str(&serde_json::to_string(&v)?);
                out.push('\n');
            }
        }
        Ok(out)
    }
}

/// Runs every method on the instance; methods run on separate threads.
pub fn run_experiment(spec: &ExperimentSpec, instance: &Instance) -> Result<ExperimentResult> {
    spec.validate()?;
    let model: &(dyn SeparableModel + Sync) = match instance {
        Instance::Network(p) => p,
        Instance::Wireless(p) => p,
        Instance::Market(_) => {
            return Err(Error::Unsupported("experiments need a network or wireless instance".into()))
        }
    };
    let tightest = *spec.thresholds.last().expect("validated");
    let results: Vec<Result<MethodOutcome>> = std::thread::scope(|scope| {
        let handles: Vec<_> = spec
            .methods
            .iter()
            .map(|run| {
                scope.spawn(move || {
                    let config = SolverConfig { accuracy: tightest, ..run.config.clone() };
                    let sol = solve(model, run.method, &config)?;
                    let counts = spec.thresholds.iter().map(|&t| sol.trace.block_iters_to(t)).collect();
                    Ok(MethodOutcome { label: run.label(), counts, trace: sol.trace })
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("solver thread panicked")).collect()
    });
    let methods = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(ExperimentResult { thresholds: spec.thresholds.clone(), methods })
}

/// True when every method reached every threshold.
pub fn all_reached(result: &ExperimentResult) -> bool {
    result.methods.iter().all(|m| !m.partial() && m.trace.status == Status::Converged)
}
