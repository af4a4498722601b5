use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::estimation::{log_factor, width_value, ConfidenceTable, VisitCounts, WidthKind};
use crate::mdp::{
    dot3, expected_next, occupancy_of_actions, optimal_plan, OccupancyMeasure, RewardTable,
    StagePolicy, TabularMdp,
};

/// Policies whose value under an anchor reward is within `gap` of optimal:
/// `{pi : V*(s0) - V^pi(s0) <= gap}` in the anchor MDP.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolicySet {
    anchor_reward: RewardTable,
    anchor_mdp: TabularMdp,
    gap: f64,
    optimal_value: f64,
}

impl PolicySet {
    pub fn new(anchor_mdp: TabularMdp, anchor_reward: RewardTable, gap: f64) -> Result<Self> {
        anchor_mdp.check_stage_table("anchor reward", anchor_reward.values().dim())?;
        if !(gap >= 0.0) {
            return config(format!("policy-set gap must be non-negative, got {gap}"));
        }
        let optimal_value =
            optimal_plan(&anchor_mdp, anchor_reward.values()).start_value(&anchor_mdp);
        Ok(Self {
            anchor_reward,
            anchor_mdp,
            gap,
            optimal_value,
        })
    }

    /// The set of all policies.
    pub fn unrestricted(mdp: &TabularMdp, r_max: f64) -> Result<Self> {
        let reward = RewardTable::zeros(mdp.horizon(), mdp.num_states(), mdp.num_actions(), r_max)?;
        Self::new(mdp.clone(), reward, f64::INFINITY)
    }

    pub fn anchor_reward(&self) -> &RewardTable {
        &self.anchor_reward
    }

    pub fn anchor_mdp(&self) -> &TabularMdp {
        &self.anchor_mdp
    }

    pub fn gap(&self) -> f64 {
        self.gap
    }

    /// `V*(s0)` of the anchor problem.
    pub fn optimal_value(&self) -> f64 {
        self.optimal_value
    }

    /// `V*(s0) - V^pi(s0)` in the anchor problem.
    pub fn suboptimality(&self, policy: &StagePolicy) -> Result<f64> {
        let values = crate::mdp::evaluate_policy(&self.anchor_mdp, &self.anchor_reward, policy)?;
        Ok(self.optimal_value - values.value_at(0, self.anchor_mdp.initial_state()))
    }

    pub fn contains(&self, policy: &StagePolicy) -> Result<bool> {
        let tol = 1e-9 * self.optimal_value.abs().max(1.0);
        Ok(self.suboptimality(policy)? <= self.gap + tol)
    }

    /// Optimal anchor value in `mdp`, reusing the cached value when `mdp`
    /// is the anchor MDP.
    fn optimal_value_in(&self, mdp: &TabularMdp) -> f64 {
        if mdp == &self.anchor_mdp {
            self.optimal_value
        } else {
            optimal_plan(mdp, self.anchor_reward.values()).start_value(mdp)
        }
    }
}

/// Widths expected after `n_e` further episodes with visitation `mu`:
/// `(H - h) r_max min(1, 2 sqrt(2 l / max(1, n + n_e mu)))`, with the log
/// factor `l` frozen at the current counts.
pub fn planned_uncertainty(
    counts: &VisitCounts,
    mu: &OccupancyMeasure,
    n_e: usize,
    delta: f64,
    r_max: f64,
) -> Result<ConfidenceTable> {
    planned_uncertainty_with(counts, mu, n_e, delta, r_max, WidthKind::Irl)
}

pub fn planned_uncertainty_with(
    counts: &VisitCounts,
    mu: &OccupancyMeasure,
    n_e: usize,
    delta: f64,
    r_max: f64,
    kind: WidthKind,
) -> Result<ConfidenceTable> {
    crate::estimation::check_delta(delta)?;
    let (horizon, ns, na) = (counts.horizon(), counts.num_states(), counts.num_actions());
    if mu.rho().dim() != (horizon, ns, na) {
        return config(format!(
            "occupancy is {:?}, counts are ({horizon}, {ns}, {na})",
            mu.rho().dim()
        ));
    }
    let n = counts.sa_counts();
    let mut widths = Array3::<f64>::zeros((horizon, ns, na));
    let mut ell = Array3::<f64>::zeros((horizon, ns, na));
    for ((h, s, a), &count) in n.indexed_iter() {
        let l = log_factor(ns, na, horizon, count, delta);
        ell[[h, s, a]] = l;
        let planned = (count as f64 + n_e as f64 * mu.get(h, s, a)).max(1.0);
        widths[[h, s, a]] = width_value((horizon - h) as f64 * r_max, kind.factor(), l, planned);
    }
    Ok(ConfidenceTable::from_parts(widths, ell, delta, r_max))
}

/// `max_{pi in set} sum rho^pi_h(s, a) C^h(s, a)` over the occupancy
/// polytope of `est_mdp`; see [`inner_max`].
pub fn policy_set_epsilon(
    prev_set: &PolicySet,
    widths: &ConfidenceTable,
    est_mdp: &TabularMdp,
) -> Result<f64> {
    Ok(inner_max(prev_set, widths, est_mdp)?.0)
}

/// Maximises `<mu, C>` over occupancy measures `mu` of `est_mdp` subject to
/// `<mu, r_anchor> >= V*_anchor(s0) - gap`, where `V*_anchor` is the
/// optimal anchor value in `est_mdp`. Returns the optimal value and a
/// maximiser (a mixture of at most two deterministic-policy occupancies).
pub fn inner_max(
    policy_set: &PolicySet,
    widths: &ConfidenceTable,
    est_mdp: &TabularMdp,
) -> Result<(f64, OccupancyMeasure)> {
    est_mdp.check_stage_table("confidence widths", widths.widths().dim())?;
    est_mdp.check_stage_table("anchor reward", policy_set.anchor_reward.values().dim())?;
    let sol = constrained_max(policy_set, widths.widths(), est_mdp)?;
    Ok((sol.value, OccupancyMeasure::from_raw(sol.rho, 0)))
}

pub(crate) struct LpSolution {
    pub value: f64,
    pub rho: Array3<f64>,
}

struct Vertex {
    /// `<mu, c>`
    a: f64,
    /// `<mu, r> - threshold`
    b: f64,
    rho: Array3<f64>,
}

const MAX_CUTS: usize = 500;

/// Lagrangian cutting plane on `g(l) = max_mu <mu, c + l r> - l t`.
///
/// `g` is the upper envelope of the lines `a_mu + l b_mu`, one per
/// deterministic policy; its minimum over `l >= 0` is the LP value. Two
/// supporting vertices, one infeasible (`b < 0`) and one feasible, bracket
/// the minimiser; each step plans at the intersection of their lines and
/// either certifies optimality or replaces one of them.
pub(crate) fn constrained_max(
    policy_set: &PolicySet,
    c: &Array3<f64>,
    mdp: &TabularMdp,
) -> Result<LpSolution> {
    let r = policy_set.anchor_reward.values();
    let threshold = policy_set.optimal_value_in(mdp) - policy_set.gap;
    let scale = c.iter().chain(r.iter()).fold(1.0f64, |m, x| m.max(x.abs())) * mdp.horizon() as f64;
    let tol = 1e-10 * scale;

    let vertex = |rho: Array3<f64>| Vertex {
        a: dot3(&rho, c),
        b: dot3(&rho, r) - threshold,
        rho,
    };

    let mut lo = vertex(occupancy_of_actions(mdp, &optimal_plan(mdp, c).actions));
    if lo.b >= -tol {
        return Ok(LpSolution {
            value: lo.a,
            rho: lo.rho,
        });
    }
    let mut hi = vertex(occupancy_of_actions(mdp, &lexicographic_actions(mdp, r, c)));
    if hi.b < -tol {
        return Err(Error::Numerical(format!(
            "constrained occupancy LP is infeasible: best anchor value misses the threshold by {}",
            -hi.b
        )));
    }
    if hi.b <= tol {
        return Ok(LpSolution {
            value: hi.a,
            rho: hi.rho,
        });
    }
    for _ in 0..MAX_CUTS {
        let lambda = ((lo.a - hi.a) / (hi.b - lo.b)).max(0.0);
        let line = lo.a + lambda * lo.b;
        let combined = c + &(r * lambda);
        let x = vertex(occupancy_of_actions(
            mdp,
            &optimal_plan(mdp, &combined).actions,
        ));
        let envelope = x.a + lambda * x.b;
        if envelope <= line + tol {
            let theta = hi.b / (hi.b - lo.b);
            let rho = &lo.rho * theta + &hi.rho * (1.0 - theta);
            return Ok(LpSolution {
                value: theta * lo.a + (1.0 - theta) * hi.a,
                rho,
            });
        }
        if x.b >= 0.0 {
            hi = x;
        } else {
            lo = x;
        }
    }
    Err(Error::Numerical(format!(
        "constrained occupancy LP did not converge in {MAX_CUTS} cuts (bracket a = [{}, {}], b = [{}, {}])",
        lo.a, hi.a, lo.b, hi.b
    )))
}

/// Deterministic policy maximising `primary`, then `secondary` among the
/// primary-optimal actions.
fn lexicographic_actions(
    mdp: &TabularMdp,
    primary: &Array3<f64>,
    secondary: &Array3<f64>,
) -> Array2<usize> {
    let (ns, na, horizon) = (mdp.num_states(), mdp.num_actions(), mdp.horizon());
    let p = mdp.flat_transitions();
    let mut vp = vec![0.0; ns];
    let mut vs = vec![0.0; ns];
    let mut actions = Array2::<usize>::zeros((horizon, ns));
    let mut qp = vec![0.0; na];
    let mut qs = vec![0.0; na];
    for h in (0..horizon).rev() {
        let mut np = vec![0.0; ns];
        let mut nsv = vec![0.0; ns];
        for s in 0..ns {
            for a in 0..na {
                qp[a] = primary[[h, s, a]] + expected_next(p, ns, s * na + a, &vp);
                qs[a] = secondary[[h, s, a]] + expected_next(p, ns, s * na + a, &vs);
            }
            let best = qp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let tol = 1e-9 * best.abs().max(1.0);
            let mut choice = None::<usize>;
            for a in 0..na {
                if qp[a] >= best - tol && choice.is_none_or(|c| qs[a] > qs[c]) {
                    choice = Some(a);
                }
            }
            let a = choice.unwrap_or(0);
            actions[[h, s]] = a;
            np[s] = qp[a];
            nsv[s] = qs[a];
        }
        vp = np;
        vs = nsv;
    }
    actions
}
