//! Active exploration for inverse reinforcement learning on finite-horizon
//! tabular MDPs.
//!
//! The crate is organised bottom-up:
//!
//! - [`mdp`]: MDP, reward and policy tables, backward induction, occupancy
//!   measures, rollouts and the normalized-regret metric.
//! - [`estimation`]: visit counts, empirical model estimates and the
//!   reward-uncertainty widths `C^h_k(s, a)`.
//! - [`feasible`]: the feasible reward set (membership, explicit
//!   construction, error propagation) and the IRL subroutine.
//! - [`explore`]: error-bound recursions, the plausibly-optimal policy set,
//!   the constrained occupancy LP, the Frank-Wolfe exploration planner and
//!   the main exploration loop.
//! - [`baselines`]: uniform sampling with a generative model, random
//!   exploration and the reward-free variants.
//! - [`envs`]: the benchmark environments.
//! - [`experiment`]: seeded experiment grids, CSV/JSON output and
//!   sample-complexity summaries.

pub mod baselines;
pub mod envs;
pub mod error;
pub mod estimation;
pub mod experiment;
pub mod explore;
pub mod feasible;
pub mod mdp;
pub mod parallel;

pub use error::{Error, Result};
