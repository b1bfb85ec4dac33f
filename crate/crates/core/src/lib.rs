//! Two-sided market equilibria: network and wireless models, partial
//! linearization solvers and instance tooling.

pub mod error;
pub mod experiment;
pub mod generate;
pub mod instance;
pub mod market;
pub mod network;
pub mod objective;
pub mod oracles;
pub mod scalar;
pub mod solvers;
pub mod wireless;

pub use error::{Error, Result};
pub use market::{
    project_to_block, verify_equilibrium, vi_residual, BlockValues, CommodityBlock, MarketProblem, Participant,
    Point, PriceInterval, Verdict, Violation,
};
pub use network::{EquilibriumForm, Network, NetworkProblem, OdPair};
pub use objective::{objective, ObjectiveValue, SeparableModel};
pub use scalar::{Cap, ScalarCostFn};
pub use solvers::{solve, solve_cpl, solve_penalized, solve_pl, DeltaRule, Method, SolveTrace, SolverConfig, Status};
pub use wireless::{Congestion, PenaltyConfig, Provider, UserClass, WirelessProblem};
pub use instance::{Instance, InstanceFile};
