use super::planning::{optimal_plan, policy_values};
use super::{RewardTable, StagePolicy, TabularMdp};
use crate::error::{config, Result};

/// Normalized regret at `(s0, h = 0)`:
/// `(V^{pi*} - V^{pi_hat}) / (V^{pi*} - V^{pi_bar})`, clipped to `[0, 1]`.
///
/// `pi_hat` is optimal for `candidate_reward` in `candidate_mdp`, `pi_bar` is
/// optimal for `-true_reward` in `mdp`; every value is evaluated in `mdp`
/// under `true_reward`. Returns 0 when the denominator is below `1e-12`.
pub fn normalized_regret(
    mdp: &TabularMdp,
    true_reward: &RewardTable,
    candidate_reward: &RewardTable,
    candidate_mdp: &TabularMdp,
) -> Result<f64> {
    mdp.check_stage_table("true reward", true_reward.values().dim())?;
    candidate_mdp.check_stage_table("candidate reward", candidate_reward.values().dim())?;
    if (
        candidate_mdp.num_states(),
        candidate_mdp.num_actions(),
        candidate_mdp.horizon(),
    ) != (mdp.num_states(), mdp.num_actions(), mdp.horizon())
    {
        return config("candidate MDP shape differs from the true MDP");
    }
    let s0 = mdp.initial_state();
    let truth = true_reward.values();
    let best = optimal_plan(mdp, truth);
    let worst = optimal_plan(mdp, &truth.mapv(|v| -v));
    let candidate = optimal_plan(candidate_mdp, candidate_reward.values());

    let value_of = |actions: &ndarray::Array2<usize>| -> Result<f64> {
        let pi = StagePolicy::deterministic(actions, mdp.num_actions())?;
        Ok(policy_values(mdp, truth, pi.probs())[[0, s0]])
    };
    let v_star = best.values[[0, s0]];
    let v_hat = value_of(&candidate.actions)?;
    let v_bar = value_of(&worst.actions)?;
    let denom = v_star - v_bar;
    if denom < 1e-12 {
        return Ok(0.0);
    }
    Ok(((v_star - v_hat) / denom).clamp(0.0, 1.0))
}
