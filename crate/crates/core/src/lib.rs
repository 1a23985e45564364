//! Multi-robot target coverage planning and risk-aware path assignment.
//!
//! Modules:
//! - [`world`]: grid worlds, target density fields, log-odds occupancy fusion.
//! - [`team`]: robots, motion primitives, communication graphs, the coverage objective.
//! - [`planners`]: random, exhaustive, centralized, decentralized and sequential greedy.
//! - [`risk`]: empirical CVaR and the sequential greedy risk-aware assignment.
//! - [`costmap`]: stochastic label maps, risk cost maps, A*, clearance switching.
//! - [`harness`]: seeded Monte Carlo runs and the assignment demo.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod costmap;
pub mod error;
pub mod fixtures;
pub mod harness;
pub mod planners;
pub mod risk;
pub mod team;
pub mod world;

pub use costmap::{
    astar, build_risk_map, candidate_paths, cell_uncertainty, clearance_check, predicted_label, sct, surprise, Cell,
    ClearanceStatus, LabelCosts, Path, PlannerChoice, RiskCostMap, StochasticLabelMap, SwitchFilter,
};
pub use error::{Error, Result};
pub use harness::{run_assignment_demo, run_coverage_trial, run_monte_carlo, AggregateTable, BenchConfig, TrialRecord};
pub use planners::Planner;
pub use risk::{
    assign_risk_aware, cvar, AssignmentProblem, AssignmentSet, AssignmentTriple, CVaRConfig, EmpiricalDist,
    RiskAwareAssignment,
};
pub use team::{CommGraph, JointAction, MotionPrimitive, PrimitiveKind, Robot};
pub use world::{fuse_occupancy_logodds, DensityField, GridWorld, LogOddsMap, Point, Target};
