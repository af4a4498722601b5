//! Finite-horizon tabular MDPs without reward, reward tables, stage policies
//! and the planning routines built on them.
//!
//! All tables are dense `ndarray` arrays. Stage-indexed tables put the step
//! `h` first: rewards and policies are `[H, S, A]`, value tables carry an
//! extra terminal stage so that `V_H = 0` and `Q_H = 0` are stored
//! explicitly.

mod occupancy;
mod planning;
mod regret;
mod simulate;

use ndarray::{Array2, Array3, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{config, Result};

pub(crate) use occupancy::{dot3, occupancy_of_actions, occupancy_of_probs};
pub use occupancy::{occupancy, occupancy_from_start, OccupancyMeasure, Start};
pub use planning::{backward_induction, evaluate_policy, ValueTables};
pub(crate) use planning::{expected_next, optimal_plan};
pub use regret::normalized_regret;
pub use simulate::{rollout, sample_index, simulate_episode, Step, Trajectory};

/// Tolerance on probability rows.
pub const PROB_TOL: f64 = 1e-9;

/// An MDP without reward: `(S, A, P, H, s0)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TabularMdp {
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    initial_state: usize,
    /// `P(s' | s, a)` stored as `[S, A, S]`.
    transitions: Array3<f64>,
}

impl TabularMdp {
    /// Builds an MDP, checking that every row of `transitions` (shape
    /// `[S, A, S]`) is a distribution within [`PROB_TOL`]. Rows are
    /// renormalized exactly once, here.
    pub fn new(transitions: Array3<f64>, horizon: usize, initial_state: usize) -> Result<Self> {
        let (s, a, s2) = transitions.dim();
        if s == 0 || a == 0 || horizon == 0 {
            return config("MDP needs at least one state, one action and horizon >= 1");
        }
        if s2 != s {
            return config(format!(
                "transition table must be [S, A, S], got [{s}, {a}, {s2}]"
            ));
        }
        if initial_state >= s {
            return config(format!(
                "initial state {initial_state} out of range for S = {s}"
            ));
        }
        let mut transitions = transitions;
        for si in 0..s {
            for ai in 0..a {
                let mut row = transitions.slice_mut(ndarray::s![si, ai, ..]);
                if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                    return config(format!("P(.|{si},{ai}) has a negative or non-finite entry"));
                }
                let total: f64 = row.sum();
                if (total - 1.0).abs() > PROB_TOL {
                    return config(format!("P(.|{si},{ai}) sums to {total}"));
                }
                row.mapv_inplace(|p| p / total);
            }
        }
        if !transitions.is_standard_layout() {
            transitions = transitions.as_standard_layout().to_owned();
        }
        Ok(Self {
            num_states: s,
            num_actions: a,
            horizon,
            initial_state,
            transitions,
        })
    }

    /// Same horizon and initial state, different dynamics.
    pub fn with_transitions(&self, transitions: Array3<f64>) -> Result<Self> {
        Self::new(transitions, self.horizon, self.initial_state)
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn initial_state(&self) -> usize {
        self.initial_state
    }

    pub fn transitions(&self) -> &Array3<f64> {
        &self.transitions
    }

    pub fn transition_row(&self, state: usize, action: usize) -> ArrayView1<'_, f64> {
        self.transitions.slice(ndarray::s![state, action, ..])
    }

    /// Flat `P` in `[s][a][s']` order.
    pub(crate) fn flat_transitions(&self) -> &[f64] {
        self.transitions
            .as_slice()
            .expect("transitions are kept in standard layout")
    }

    pub(crate) fn check_stage_table(&self, what: &str, dim: (usize, usize, usize)) -> Result<()> {
        let want = (self.horizon, self.num_states, self.num_actions);
        if dim != want {
            return config(format!(
                "{what} has shape {dim:?}, expected [H, S, A] = {want:?}"
            ));
        }
        Ok(())
    }
}

/// Time-indexed reward `r_h(s, a)`.
///
/// A clipped table satisfies `0 <= r <= r_max`. Signed tables (negated
/// rewards, explicit feasible-set constructions) are flagged `unclipped` and
/// only need finite entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RewardTable {
    values: Array3<f64>,
    r_max: f64,
    unclipped: bool,
}

impl RewardTable {
    /// A reward in `[0, r_max]`, shape `[H, S, A]`.
    pub fn new(values: Array3<f64>, r_max: f64) -> Result<Self> {
        if !(r_max > 0.0 && r_max.is_finite()) {
            return config(format!("r_max must be positive, got {r_max}"));
        }
        let slack = 1e-12 * r_max;
        if let Some(v) = values
            .iter()
            .find(|v| !v.is_finite() || **v < -slack || **v > r_max + slack)
        {
            return config(format!("reward entry {v} outside [0, {r_max}]"));
        }
        let values = values.mapv(|v| v.clamp(0.0, r_max));
        Ok(Self {
            values,
            r_max,
            unclipped: false,
        })
    }

    /// A signed reward. `r_max` is kept as the nominal scale of the problem.
    pub fn unclipped(values: Array3<f64>, r_max: f64) -> Result<Self> {
        if !(r_max > 0.0 && r_max.is_finite()) {
            return config(format!("r_max must be positive, got {r_max}"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return config("reward table has non-finite entries");
        }
        Ok(Self {
            values: values.as_standard_layout().to_owned(),
            r_max,
            unclipped: true,
        })
    }

    pub fn zeros(
        horizon: usize,
        num_states: usize,
        num_actions: usize,
        r_max: f64,
    ) -> Result<Self> {
        Self::new(Array3::zeros((horizon, num_states, num_actions)), r_max)
    }

    /// `-r`, as an unclipped table.
    pub fn negated(&self) -> Self {
        Self {
            values: self.values.mapv(|v| -v),
            r_max: self.r_max,
            unclipped: true,
        }
    }

    pub fn values(&self) -> &Array3<f64> {
        &self.values
    }

    pub fn get(&self, h: usize, s: usize, a: usize) -> f64 {
        self.values[[h, s, a]]
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn is_unclipped(&self) -> bool {
        self.unclipped
    }

    pub fn horizon(&self) -> usize {
        self.values.dim().0
    }
}

/// Time-indexed stochastic policy `pi_h(a | s)`, shape `[H, S, A]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StagePolicy {
    probs: Array3<f64>,
}

impl StagePolicy {
    pub fn new(probs: Array3<f64>) -> Result<Self> {
        let (h, s, a) = probs.dim();
        if h == 0 || s == 0 || a == 0 {
            return config("policy table must be non-empty");
        }
        for hi in 0..h {
            for si in 0..s {
                let row = probs.slice(ndarray::s![hi, si, ..]);
                if row.iter().any(|p| !p.is_finite() || *p < 0.0) {
                    return config(format!("pi_{hi}(.|{si}) has a negative entry"));
                }
                let total = row.sum();
                if (total - 1.0).abs() > PROB_TOL {
                    return config(format!("pi_{hi}(.|{si}) sums to {total}"));
                }
            }
        }
        Ok(Self { probs })
    }

    pub fn uniform(horizon: usize, num_states: usize, num_actions: usize) -> Self {
        Self {
            probs: Array3::from_elem((horizon, num_states, num_actions), 1.0 / num_actions as f64),
        }
    }

    /// Deterministic policy from an `[H, S]` table of action indices.
    pub fn deterministic(actions: &Array2<usize>, num_actions: usize) -> Result<Self> {
        let (h, s) = actions.dim();
        let mut probs = Array3::zeros((h, s, num_actions));
        for ((hi, si), &a) in actions.indexed_iter() {
            if a >= num_actions {
                return config(format!("action {a} out of range for A = {num_actions}"));
            }
            probs[[hi, si, a]] = 1.0;
        }
        Self::new(probs)
    }

    /// Normalizes each `(h, s)` row of nonnegative weights; all-zero rows
    /// become uniform.
    pub fn from_weights(weights: &Array3<f64>) -> Self {
        let (h, s, a) = weights.dim();
        let mut probs = Array3::zeros((h, s, a));
        for hi in 0..h {
            for si in 0..s {
                let row = weights.slice(ndarray::s![hi, si, ..]);
                let total: f64 = row.iter().map(|w| w.max(0.0)).sum();
                for ai in 0..a {
                    probs[[hi, si, ai]] = if total > 0.0 {
                        row[ai].max(0.0) / total
                    } else {
                        1.0 / a as f64
                    };
                }
            }
        }
        Self { probs }
    }

    pub fn probs(&self) -> &Array3<f64> {
        &self.probs
    }

    pub fn prob(&self, h: usize, s: usize, a: usize) -> f64 {
        self.probs[[h, s, a]]
    }

    pub fn row(&self, h: usize, s: usize) -> ArrayView1<'_, f64> {
        self.probs.slice(ndarray::s![h, s, ..])
    }

    pub fn dim(&self) -> (usize, usize, usize) {
        self.probs.dim()
    }

    pub fn is_deterministic(&self) -> bool {
        self.probs.iter().all(|&p| p == 0.0 || p == 1.0)
    }

    /// Most likely action at `(h, s)`, lowest index on ties.
    pub fn mode(&self, h: usize, s: usize) -> usize {
        argmax_first(self.row(h, s).iter().copied())
    }
}

/// Index of the first maximal element.
pub(crate) fn argmax_first(values: impl Iterator<Item = f64>) -> usize {
    let mut best = f64::NEG_INFINITY;
    let mut idx = 0;
    for (i, v) in values.enumerate() {
        if v > best {
            best = v;
            idx = i;
        }
    }
    idx
}
