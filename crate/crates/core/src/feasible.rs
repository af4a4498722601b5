//! The feasible reward set of an IRL problem `(M, pi^E)`: every reward under
//! which the expert is optimal.
//!
//! A reward is feasible iff the expert's advantage vanishes on its support
//! and is non-positive elsewhere; equivalently iff it can be written as
//!
//! ```text
//! r_h(s, a) = -A_h(s, a) 1{pi^E_h(a|s) = 0} + V_h(s) - sum_s' P(s'|s, a) V_{h+1}(s')
//! ```
//!
//! for some `A >= 0` and shaping values `V` (with `V_H = 0`).

use ndarray::{Array2, Array3, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{config, Result};
use crate::mdp::{backward_induction, evaluate_policy, RewardTable, StagePolicy, TabularMdp};

/// Default tolerance for [`is_feasible`].
pub const FEASIBILITY_TOL: f64 = 1e-8;

/// The `(A, V)` pair parameterising a feasible reward.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeasibleParams {
    /// `[H, S, A]`, non-negative.
    advantage_margin: Array3<f64>,
    /// `[H, S]`; `V_H` is implicitly zero.
    value_shape: Array2<f64>,
}

impl FeasibleParams {
    pub fn new(advantage_margin: Array3<f64>, value_shape: Array2<f64>) -> Result<Self> {
        let (h, s, _) = advantage_margin.dim();
        if value_shape.dim() != (h, s) {
            return config(format!(
                "value shaping table is {:?}, expected ({h}, {s})",
                value_shape.dim()
            ));
        }
        if advantage_margin
            .iter()
            .any(|&x| !(x >= 0.0) || !x.is_finite())
        {
            return config("advantage margins must be finite and non-negative");
        }
        if value_shape.iter().any(|x| !x.is_finite()) {
            return config("value shaping table has non-finite entries");
        }
        Ok(Self {
            advantage_margin,
            value_shape,
        })
    }

    pub fn zeros(horizon: usize, num_states: usize, num_actions: usize) -> Self {
        Self {
            advantage_margin: Array3::zeros((horizon, num_states, num_actions)),
            value_shape: Array2::zeros((horizon, num_states)),
        }
    }

    /// Recovers `(A, V)` from a feasible reward: `V = V^{pi^E}` and
    /// `A = V - Q^{pi^E}`, clamped at zero to absorb round-off.
    pub fn from_reward(
        mdp: &TabularMdp,
        expert: &StagePolicy,
        reward: &RewardTable,
    ) -> Result<Self> {
        let tables = evaluate_policy(mdp, reward, expert)?;
        let horizon = mdp.horizon();
        let value_shape = tables.v.slice(ndarray::s![..horizon, ..]).to_owned();
        let advantage_margin = tables.advantage.mapv(|x| (-x).max(0.0));
        Self::new(advantage_margin, value_shape)
    }

    pub fn advantage_margin(&self) -> &Array3<f64> {
        &self.advantage_margin
    }

    pub fn value_shape(&self) -> &Array2<f64> {
        &self.value_shape
    }

    /// `V_h(s)` with `V_H = 0`.
    pub fn value(&self, h: usize, s: usize) -> f64 {
        if h >= self.value_shape.dim().0 {
            0.0
        } else {
            self.value_shape[[h, s]]
        }
    }

    fn dim(&self) -> (usize, usize, usize) {
        self.advantage_margin.dim()
    }
}

/// Whether the expert is optimal for `reward` in `mdp`.
///
/// Compares the expert's `Q` against the optimal `V`: the gap must lie in
/// `[-tol, tol]` where the expert acts and be at most `tol` elsewhere.
pub fn is_feasible(
    mdp: &TabularMdp,
    expert: &StagePolicy,
    reward: &RewardTable,
    tol: f64,
) -> Result<bool> {
    mdp.check_stage_table("expert", expert.dim())?;
    let (optimal, _) = backward_induction(mdp, reward)?;
    let expert_values = evaluate_policy(mdp, reward, expert)?;
    let (horizon, ns, na) = expert.dim();
    for h in 0..horizon {
        for s in 0..ns {
            let v_star = optimal.v[[h, s]];
            for a in 0..na {
                let gap = expert_values.q[[h, s, a]] - v_star;
                if gap > tol || (expert.prob(h, s, a) > 0.0 && gap < -tol) {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

/// The reward `-A 1{pi^E = 0} + V_h - P V_{h+1}`, returned unclipped.
pub fn construct_feasible(
    mdp: &TabularMdp,
    expert: &StagePolicy,
    params: &FeasibleParams,
) -> Result<RewardTable> {
    mdp.check_stage_table("expert", expert.dim())?;
    mdp.check_stage_table("advantage margin", params.dim())?;
    let (horizon, ns, na) = params.dim();
    let p = mdp.transitions();
    let mut r = Array3::<f64>::zeros((horizon, ns, na));
    for h in 0..horizon {
        for s in 0..ns {
            for a in 0..na {
                let next: f64 = (0..ns).map(|t| p[[s, a, t]] * params.value(h + 1, t)).sum();
                let penalty = if expert.prob(h, s, a) == 0.0 {
                    params.advantage_margin[[h, s, a]]
                } else {
                    0.0
                };
                r[[h, s, a]] = -penalty + params.value(h, s) - next;
            }
        }
    }
    let scale = r.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    RewardTable::unclipped(r, if scale > 0.0 { scale } else { 1.0 })
}

/// Elementwise reward-error bound between the feasible sets of two problems:
///
/// ```text
/// A_h(s, a) |pi^E_h(a|s) - pihat^E_h(a|s)| + sum_s' |V_{h+1}(s')| |P(s'|s, a) - Phat(s'|s, a)|
/// ```
///
/// It bounds `|r - rhat|` for `rhat = construct_feasible(Mhat, pihat^E, params)`
/// whenever the two experts have the same support (in particular when both
/// are deterministic and agree).
pub fn error_propagation_rhs(
    params: &FeasibleParams,
    expert: &StagePolicy,
    est_expert: &StagePolicy,
    transitions: &Array3<f64>,
    est_transitions: &Array3<f64>,
) -> Result<Array3<f64>> {
    let (horizon, ns, na) = params.dim();
    if expert.dim() != params.dim() || est_expert.dim() != params.dim() {
        return config("expert policies do not match the parameter shape");
    }
    if transitions.dim() != (ns, na, ns) || est_transitions.dim() != (ns, na, ns) {
        return config("transition tables do not match the parameter shape");
    }
    let mut rhs = Array3::<f64>::zeros((horizon, ns, na));
    for h in 0..horizon {
        for s in 0..ns {
            for a in 0..na {
                let policy_term = params.advantage_margin[[h, s, a]]
                    * (expert.prob(h, s, a) - est_expert.prob(h, s, a)).abs();
                let model_term: f64 = (0..ns)
                    .map(|t| {
                        params.value(h + 1, t).abs()
                            * (transitions[[s, a, t]] - est_transitions[[s, a, t]]).abs()
                    })
                    .sum();
                rhs[[h, s, a]] = policy_term + model_term;
            }
        }
    }
    Ok(rhs)
}

/// The IRL subroutine that picks one reward from the recovered feasible set.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IrlMethod {
    /// `r_max` on every action the estimated expert takes, zero elsewhere.
    /// Always feasible for the estimated problem.
    #[default]
    Indicator,
    /// Maximum-entropy IRL on the estimated MDP (not guaranteed feasible).
    MaxEnt,
}

impl std::str::FromStr for IrlMethod {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "indicator" => Ok(Self::Indicator),
            "maxent" => Ok(Self::MaxEnt),
            other => config(format!(
                "unknown IRL method '{other}' (expected indicator | maxent)"
            )),
        }
    }
}

impl IrlMethod {
    pub fn recover(
        self,
        est_mdp: &TabularMdp,
        est_expert: &StagePolicy,
        r_max: f64,
    ) -> Result<RewardTable> {
        match self {
            Self::Indicator => irl_subroutine(est_mdp, est_expert, r_max),
            Self::MaxEnt => maxent_irl(est_mdp, est_expert, r_max, &MaxEntConfig::default()),
        }
    }
}

/// Indicator IRL: `rhat_h(s, a) = r_max 1{pihat^E_h(a|s) > 0}`.
pub fn irl_subroutine(
    est_mdp: &TabularMdp,
    est_expert: &StagePolicy,
    r_max: f64,
) -> Result<RewardTable> {
    est_mdp.check_stage_table("estimated expert", est_expert.dim())?;
    let values = est_expert
        .probs()
        .mapv(|p| if p > 0.0 { r_max } else { 0.0 });
    RewardTable::new(values, r_max)
}

/// Hyperparameters of [`maxent_irl`].
#[derive(Clone, Debug, PartialEq)]
pub struct MaxEntConfig {
    pub learning_rate: f64,
    pub steps: usize,
}

impl Default for MaxEntConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            steps: 200,
        }
    }
}

/// Maximum-entropy IRL with one-hot, time-invariant state-action features.
///
/// Gradient ascent on the log-likelihood matches the soft-optimal policy's
/// expected state-action visitations (under `est_mdp`, from `s0`) to those
/// of `est_expert`. The learned weights are min-max rescaled to `[0, r_max]`.
pub fn maxent_irl(
    est_mdp: &TabularMdp,
    est_expert: &StagePolicy,
    r_max: f64,
    cfg: &MaxEntConfig,
) -> Result<RewardTable> {
    est_mdp.check_stage_table("estimated expert", est_expert.dim())?;
    let (horizon, ns, na) = est_expert.dim();
    let target = crate::mdp::occupancy_from_start(est_mdp, est_expert)?
        .into_rho()
        .sum_axis(ndarray::Axis(0));
    let mut theta = Array2::<f64>::zeros((ns, na));
    for _ in 0..cfg.steps {
        let policy = soft_policy(est_mdp, &theta);
        let visits = crate::mdp::occupancy_from_start(est_mdp, &policy)?
            .into_rho()
            .sum_axis(ndarray::Axis(0));
        Zip::from(&mut theta)
            .and(&target)
            .and(&visits)
            .for_each(|w, &t, &v| *w += cfg.learning_rate * (t - v));
    }
    let lo = theta.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = theta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    let scaled = theta.mapv(|w| {
        if span > 0.0 {
            r_max * (w - lo) / span
        } else {
            r_max
        }
    });
    let values = Array3::from_shape_fn((horizon, ns, na), |(_, s, a)| scaled[[s, a]]);
    RewardTable::new(values, r_max)
}

/// Finite-horizon soft value iteration with reward `theta(s, a)`.
fn soft_policy(mdp: &TabularMdp, theta: &Array2<f64>) -> StagePolicy {
    let (ns, na, horizon) = (mdp.num_states(), mdp.num_actions(), mdp.horizon());
    let p = mdp.flat_transitions();
    let mut next_v = vec![0.0; ns];
    let mut probs = Array3::<f64>::zeros((horizon, ns, na));
    for h in (0..horizon).rev() {
        let mut v = vec![0.0; ns];
        for s in 0..ns {
            let q: Vec<f64> = (0..na)
                .map(|a| {
                    let row = &p[(s * na + a) * ns..(s * na + a + 1) * ns];
                    theta[[s, a]] + row.iter().zip(&next_v).map(|(p, v)| p * v).sum::<f64>()
                })
                .collect();
            let m = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = q.iter().map(|x| (x - m).exp()).sum();
            v[s] = m + z.ln();
            for a in 0..na {
                probs[[h, s, a]] = (q[a] - v[s]).exp();
            }
        }
        next_v = v;
    }
    StagePolicy::from_weights(&probs)
}
