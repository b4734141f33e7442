//! Primal-dual solvers for convex-concave saddle-point problems whose
//! coupling is linear in the dual variable,
//!
//! ```text
//!     min_{x in X} max_{y in Y}  <y, f(x)> - psi(y) + phi(x),
//! ```
//!
//! with convex components f_j, mu-strongly convex phi, and nu-strongly
//! convex psi. Three instantiations of one template update are provided:
//! a deterministic full-vector method, a variance-reduced stochastic
//! method over component blocks, and a block-coordinate method for
//! dual-separable objectives. Each ships with step-size schedules whose
//! validity is checked by explicit certificates, and gap oracles that
//! verify the certificates at run time.

pub mod error;
pub mod gap;
pub mod geometry;
pub mod linalg;
pub mod problem;
pub mod schedule;
pub mod solver;

pub use error::{Error, Result};
pub use gap::{best_response_gap, gap, saddle_oracle, Comparator, Provenance};
pub use geometry::{anchor_aggregate, divergence, prox_multi, AnchorSet, GeometryKind};
pub use problem::{
    block_gradient, block_values, build_problem, evaluate_lagrangian, spot_check_block_bounds,
    BlockEval, BlockPartition, ComponentKind, ComponentOracle, ComponentSpec, Domain,
    OracleCounter, PartitionSpec, ProblemSpec, ProxFriendly, SaddleProblem,
};
pub use schedule::{
    certify_schedule, make_plan, make_schedule, CertifyReport, CertifySource, Regime, Sampling,
    SamplingPlan, Schedule, SolverKind, ViolationSite,
};
pub use solver::full::{full_primal_extrapolate, full_step, run_full, FullState};
pub use solver::stochastic::{
    run_stochastic, step_oracle_cost, stoch_dual_estimate, stoch_primal_estimate, stoch_step,
    table_refresh, table_refresh_dual, table_refresh_primal, ComparisonTables, DrawRecord,
    DualRefresh, RandomStream, StochasticState,
};
pub use solver::{Diagnostics, WeightedAverage};
