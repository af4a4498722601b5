//! Uncertainty-driven exploration.
//!
//! - [`bounds`]: the stagewise error bound `E^h_k(s, a)` and its greedy policy.
//! - [`policy_set`]: plausibly optimal policies and the constrained
//!   occupancy LP that bounds their uncertainty.
//! - [`ace`]: the Frank-Wolfe planner for the next exploration policy.
//! - [`run`]: the exploration loop and its configuration/result types.

pub mod ace;
pub mod bounds;
pub mod policy_set;
pub mod run;

pub use ace::{solve_ace, solve_ace_with, AceSettings, AceSolution};
pub use bounds::{compute_eb1, greedy_exploration_policy, BoundKind, ErrorBoundTable};
pub use policy_set::{
    inner_max, planned_uncertainty, planned_uncertainty_with, policy_set_epsilon, PolicySet,
};
pub use run::{
    aceirl_run, aceirl_run_observed, Algorithm, Checkpoint, IterationView, RunConfig, RunResult,
};
