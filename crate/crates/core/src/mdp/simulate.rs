use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{StagePolicy, TabularMdp};

/// One transition `(h, s, a, s')`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step {
    pub h: usize,
    pub state: usize,
    pub action: usize,
    pub next_state: usize,
}

/// An episode of length `H` plus one expert action sampled at every visited
/// state.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trajectory {
    pub steps: Vec<Step>,
    pub expert_actions: Vec<usize>,
}

/// Draws an index from a discrete distribution given as weights summing to
/// one. Falls back to the last positive entry on round-off.
pub fn sample_index<R: Rng + ?Sized>(probs: impl IntoIterator<Item = f64>, rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, p) in probs.into_iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

/// Samples an episode under `behavior`, querying `expert` once per visited
/// state.
pub fn simulate_episode<R: Rng + ?Sized>(
    mdp: &TabularMdp,
    behavior: &StagePolicy,
    expert: &StagePolicy,
    rng: &mut R,
) -> Trajectory {
    let mut steps = Vec::with_capacity(mdp.horizon());
    let mut expert_actions = Vec::with_capacity(mdp.horizon());
    let mut state = mdp.initial_state();
    for h in 0..mdp.horizon() {
        expert_actions.push(sample_index(expert.row(h, state).iter().copied(), rng));
        let step = advance(mdp, behavior, h, state, rng);
        state = step.next_state;
        steps.push(step);
    }
    Trajectory {
        steps,
        expert_actions,
    }
}

/// Transitions only, for exploration without an expert.
pub fn rollout<R: Rng + ?Sized>(
    mdp: &TabularMdp,
    behavior: &StagePolicy,
    rng: &mut R,
) -> Vec<Step> {
    let mut steps = Vec::with_capacity(mdp.horizon());
    let mut state = mdp.initial_state();
    for h in 0..mdp.horizon() {
        let step = advance(mdp, behavior, h, state, rng);
        state = step.next_state;
        steps.push(step);
    }
    steps
}

fn advance<R: Rng + ?Sized>(
    mdp: &TabularMdp,
    behavior: &StagePolicy,
    h: usize,
    state: usize,
    rng: &mut R,
) -> Step {
    let action = sample_index(behavior.row(h, state).iter().copied(), rng);
    let next_state = sample_index(mdp.transition_row(state, action).iter().copied(), rng);
    Step {
        h,
        state,
        action,
        next_state,
    }
}
