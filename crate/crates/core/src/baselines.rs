//! Reference strategies sharing [`RunResult`]: uniform sampling with a
//! generative model, uniformly random exploration, and two reward-free
//! explorers (greedy on the error bound, and planned-uncertainty).

use crate::error::{config, Result};
use crate::estimation::{estimated_problem, reward_uncertainty, VisitCounts};
use crate::explore::run::{check_expert, explore_loop, trajectory_rng, Explorer};
use crate::explore::{aceirl_run, Algorithm, Checkpoint, RunConfig, RunResult};
use crate::mdp::{normalized_regret, sample_index, RewardTable, StagePolicy, Step, TabularMdp};

/// Uniform sampling with a generative model: every iteration queries each
/// `(s, a, h)` `ceil(n_max / (S A H))` times, observing a next state and an
/// expert action. Stops once `H max C <= epsilon / 2`.
pub fn uniform_generative_run(
    env: &TabularMdp,
    true_reward: &RewardTable,
    expert: &StagePolicy,
    cfg: &RunConfig,
    n_max: usize,
) -> Result<RunResult> {
    cfg.validate()?;
    if n_max == 0 {
        return config("n_max must be positive");
    }
    check_expert(env, true_reward, expert)?;
    let (ns, na, horizon) = (env.num_states(), env.num_actions(), env.horizon());
    let s0 = env.initial_state();
    let r_max = true_reward.r_max();
    let cells = ns * na * horizon;
    let per_cell = n_max.div_ceil(cells);
    let per_iter = (per_cell * cells) as u64;

    let mut rng = trajectory_rng(cfg.seed);
    let mut counts = VisitCounts::for_mdp(env);
    let (est_mdp, est_expert) = estimated_problem(&counts, s0)?;
    let mut reward = cfg.irl.recover(&est_mdp, &est_expert, r_max)?;
    let mut regret = normalized_regret(env, true_reward, &reward, &est_mdp)?;
    // H max C before any sample, i.e. H^2 r_max
    let mut epsilon = horizon as f64 * horizon as f64 * r_max;
    let mut checkpoints = vec![Checkpoint {
        iteration: 0,
        samples: 0,
        expert_queries: 0,
        epsilon,
        normalized_regret: regret,
    }];
    let mut k = 0usize;
    let mut timed_out = false;
    loop {
        if 2.0 * epsilon <= cfg.epsilon || cfg.stop_regret.is_some_and(|t| regret < t) {
            break;
        }
        if k >= cfg.max_iterations {
            timed_out = true;
            break;
        }
        for h in 0..horizon {
            for s in 0..ns {
                for a in 0..na {
                    for _ in 0..per_cell {
                        let next_state =
                            sample_index(env.transition_row(s, a).iter().copied(), &mut rng);
                        counts.record_transition(Step {
                            h,
                            state: s,
                            action: a,
                            next_state,
                        })?;
                        let ae = sample_index(expert.row(h, s).iter().copied(), &mut rng);
                        counts.record_expert(h, s, ae)?;
                    }
                }
            }
        }
        k += 1;
        let (est_mdp, est_expert) = estimated_problem(&counts, s0)?;
        let widths = reward_uncertainty(&counts, cfg.delta, r_max)?;
        reward = cfg.irl.recover(&est_mdp, &est_expert, r_max)?;
        let max_width = widths.widths().iter().copied().fold(0.0, f64::max);
        epsilon = epsilon.min(horizon as f64 * max_width);
        regret = normalized_regret(env, true_reward, &reward, &est_mdp)?;
        checkpoints.push(Checkpoint {
            iteration: k,
            samples: k as u64 * per_iter,
            expert_queries: k as u64 * per_iter,
            epsilon,
            normalized_regret: regret,
        });
    }
    Ok(RunResult {
        algorithm: Algorithm::UniformGenerative,
        stop_iteration: k,
        total_samples: k as u64 * per_iter,
        expert_queries: k as u64 * per_iter,
        checkpoints,
        timed_out,
        final_reward: reward,
        final_counts: counts,
    })
}

/// Active IRL loop with the uniformly random policy every iteration.
pub fn random_exploration_run(
    env: &TabularMdp,
    true_reward: &RewardTable,
    expert: &StagePolicy,
    cfg: &RunConfig,
) -> Result<RunResult> {
    explore_loop(
        env,
        true_reward,
        Some(expert),
        cfg,
        Explorer::Uniform,
        |_| {},
    )
}

/// Reward-free exploration, greedy on the transition-only error bound.
pub fn rf_ucrl_run(
    env: &TabularMdp,
    true_reward: &RewardTable,
    cfg: &RunConfig,
) -> Result<RunResult> {
    explore_loop(env, true_reward, None, cfg, Explorer::Greedy, |_| {})
}

/// Reward-free exploration minimising the planned transition-only
/// uncertainty over all policies.
pub fn ace_rf_run(
    env: &TabularMdp,
    true_reward: &RewardTable,
    cfg: &RunConfig,
) -> Result<RunResult> {
    explore_loop(env, true_reward, None, cfg, Explorer::Ace, |_| {})
}

/// Dispatches on `cfg.algorithm`.
pub fn run_algorithm(
    env: &TabularMdp,
    true_reward: &RewardTable,
    expert: &StagePolicy,
    cfg: &RunConfig,
) -> Result<RunResult> {
    match cfg.algorithm {
        Algorithm::AceirlFull | Algorithm::AceirlGreedy => {
            aceirl_run(env, true_reward, expert, cfg)
        }
        Algorithm::Random => random_exploration_run(env, true_reward, expert, cfg),
        Algorithm::UniformGenerative => {
            let n_max = cfg
                .n_max
                .unwrap_or(env.num_states() * env.num_actions() * env.horizon());
            uniform_generative_run(env, true_reward, expert, cfg, n_max)
        }
        Algorithm::RfUcrl => rf_ucrl_run(env, true_reward, cfg),
        Algorithm::AceRf => ace_rf_run(env, true_reward, cfg),
    }
}
