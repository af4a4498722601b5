use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

use super::{RewardTable, StagePolicy, TabularMdp};
use crate::error::Result;

/// Relative tolerance under which two action values count as tied.
const TIE_TOL: f64 = 1e-12;

/// `Q`, `V` and advantage tables of one policy.
///
/// `q` and `v` include the terminal stage `H` (all zeros); `advantage` is
/// `[H, S, A]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueTables {
    pub q: Array3<f64>,
    pub v: Array2<f64>,
    pub advantage: Array3<f64>,
}

impl ValueTables {
    pub fn value_at(&self, h: usize, s: usize) -> f64 {
        self.v[[h, s]]
    }
}

/// Optimal values plus the lowest-index greedy action table.
#[derive(Clone, Debug)]
pub(crate) struct Plan {
    /// `[H + 1, S]`
    pub values: Array2<f64>,
    /// `[H, S]`
    pub actions: Array2<usize>,
}

impl Plan {
    pub fn start_value(&self, mdp: &TabularMdp) -> f64 {
        self.values[[0, mdp.initial_state()]]
    }
}

#[inline]
pub(crate) fn expected_next(p: &[f64], num_states: usize, row: usize, next_values: &[f64]) -> f64 {
    let base = row * num_states;
    p[base..base + num_states]
        .iter()
        .zip(next_values)
        .map(|(p, v)| p * v)
        .sum()
}

/// Backward induction on a raw `[H, S, A]` reward without validation.
/// Ties resolve to the lowest action index.
pub(crate) fn optimal_plan(mdp: &TabularMdp, reward: &Array3<f64>) -> Plan {
    let (ns, na, horizon) = (mdp.num_states(), mdp.num_actions(), mdp.horizon());
    let p = mdp.flat_transitions();
    let r = reward.as_slice().expect("standard layout reward");
    let mut values = Array2::<f64>::zeros((horizon + 1, ns));
    let mut actions = Array2::<usize>::zeros((horizon, ns));
    let mut q = vec![0.0; na];
    for h in (0..horizon).rev() {
        let (mut head, tail) = values.view_mut().split_at(ndarray::Axis(0), h + 1);
        let next = tail.row(0);
        let next = next.as_slice().expect("contiguous value row");
        let mut current = head.row_mut(h);
        for s in 0..ns {
            let mut best = f64::NEG_INFINITY;
            for a in 0..na {
                let qa = r[(h * ns + s) * na + a] + expected_next(p, ns, s * na + a, next);
                q[a] = qa;
                best = best.max(qa);
            }
            let tol = TIE_TOL * best.abs().max(1.0);
            let choice = q.iter().position(|&qa| qa >= best - tol).unwrap_or(0);
            actions[[h, s]] = choice;
            current[s] = q[choice];
        }
    }
    Plan { values, actions }
}

/// Optimal `Q`, `V`, advantage and the deterministic greedy policy
/// (lowest-index tie-break) for `mdp` under `reward`.
pub fn backward_induction(
    mdp: &TabularMdp,
    reward: &RewardTable,
) -> Result<(ValueTables, StagePolicy)> {
    mdp.check_stage_table("reward", reward.values().dim())?;
    let reward = reward.values().as_standard_layout().to_owned();
    let plan = optimal_plan(mdp, &reward);
    let policy = StagePolicy::deterministic(&plan.actions, mdp.num_actions())?;
    let tables = q_tables(mdp, &reward, &plan.values, |h, s, q| {
        q[plan.actions[[h, s]]]
    });
    Ok((tables, policy))
}

/// Exact finite-horizon evaluation of `policy`.
pub fn evaluate_policy(
    mdp: &TabularMdp,
    reward: &RewardTable,
    policy: &StagePolicy,
) -> Result<ValueTables> {
    mdp.check_stage_table("reward", reward.values().dim())?;
    mdp.check_stage_table("policy", policy.dim())?;
    let reward = reward.values().as_standard_layout().to_owned();
    let values = policy_values(mdp, &reward, policy.probs());
    Ok(q_tables(mdp, &reward, &values, |h, s, q| {
        q.iter()
            .enumerate()
            .map(|(a, qa)| policy.prob(h, s, a) * qa)
            .sum()
    }))
}

/// `V^pi` as an `[H + 1, S]` table, raw reward and policy arrays.
pub(crate) fn policy_values(
    mdp: &TabularMdp,
    reward: &Array3<f64>,
    policy: &Array3<f64>,
) -> Array2<f64> {
    let (ns, na, horizon) = (mdp.num_states(), mdp.num_actions(), mdp.horizon());
    let p = mdp.flat_transitions();
    let mut values = Array2::<f64>::zeros((horizon + 1, ns));
    for h in (0..horizon).rev() {
        let next = values.row(h + 1).to_vec();
        for s in 0..ns {
            let mut v = 0.0;
            for a in 0..na {
                let w = policy[[h, s, a]];
                if w != 0.0 {
                    v += w * (reward[[h, s, a]] + expected_next(p, ns, s * na + a, &next));
                }
            }
            values[[h, s]] = v;
        }
    }
    values
}

fn q_tables(
    mdp: &TabularMdp,
    reward: &Array3<f64>,
    values: &Array2<f64>,
    state_value: impl Fn(usize, usize, &[f64]) -> f64,
) -> ValueTables {
    let (ns, na, horizon) = (mdp.num_states(), mdp.num_actions(), mdp.horizon());
    let p = mdp.flat_transitions();
    let mut q = Array3::<f64>::zeros((horizon + 1, ns, na));
    let mut v = Array2::<f64>::zeros((horizon + 1, ns));
    let mut advantage = Array3::<f64>::zeros((horizon, ns, na));
    let mut row = vec![0.0; na];
    for h in (0..horizon).rev() {
        let next = values.row(h + 1).to_vec();
        for s in 0..ns {
            for (a, slot) in row.iter_mut().enumerate() {
                *slot = reward[[h, s, a]] + expected_next(p, ns, s * na + a, &next);
                q[[h, s, a]] = *slot;
            }
            let vs = state_value(h, s, &row);
            v[[h, s]] = vs;
            for a in 0..na {
                advantage[[h, s, a]] = row[a] - vs;
            }
        }
    }
    ValueTables { q, v, advantage }
}
