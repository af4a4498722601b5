use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ace::{solve_ace_with, AceSettings};
use super::bounds::{compute_eb1, greedy_exploration_policy};
use super::policy_set::{policy_set_epsilon, PolicySet};
use crate::error::{config, Error, Result};
use crate::estimation::{
    estimated_problem, uncertainty_with, ConfidenceTable, VisitCounts, WidthKind,
};
use crate::feasible::{is_feasible, IrlMethod, FEASIBILITY_TOL};
use crate::mdp::{
    normalized_regret, rollout, simulate_episode, RewardTable, StagePolicy, TabularMdp,
};

/// Exploration strategies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    AceirlFull,
    AceirlGreedy,
    Random,
    UniformGenerative,
    RfUcrl,
    AceRf,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::AceirlFull,
        Algorithm::AceirlGreedy,
        Algorithm::Random,
        Algorithm::UniformGenerative,
        Algorithm::RfUcrl,
        Algorithm::AceRf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::AceirlFull => "aceirl_full",
            Algorithm::AceirlGreedy => "aceirl_greedy",
            Algorithm::Random => "random",
            Algorithm::UniformGenerative => "uniform_generative",
            Algorithm::RfUcrl => "rf_ucrl",
            Algorithm::AceRf => "ace_rf",
        }
    }

    /// Reward-free strategies never see the expert while exploring.
    pub fn is_reward_free(self) -> bool {
        matches!(self, Algorithm::RfUcrl | Algorithm::AceRf)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Algorithm::ALL.iter().map(|a| a.name()).collect();
                Error::Config(format!(
                    "unknown algorithm '{s}' (expected one of: {})",
                    names.join(", ")
                ))
            })
    }
}

/// Parameters of one exploration run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Target accuracy; the loop stops once `4 eps_k <= epsilon`.
    pub epsilon: f64,
    pub delta: f64,
    /// Episodes `N_E` per iteration.
    pub episodes_per_iter: usize,
    pub max_iterations: usize,
    pub seed: u64,
    pub algorithm: Algorithm,
    pub irl: IrlMethod,
    /// Per-iteration query budget of uniform sampling; defaults to `S A H`.
    pub n_max: Option<usize>,
    /// Also stop as soon as the normalized regret drops below this value.
    pub stop_regret: Option<f64>,
}

impl RunConfig {
    pub const DEFAULT_MAX_ITERATIONS: usize = 10_000;

    pub fn new(
        algorithm: Algorithm,
        epsilon: f64,
        delta: f64,
        episodes_per_iter: usize,
        seed: u64,
    ) -> Result<Self> {
        let cfg = Self {
            epsilon,
            delta,
            episodes_per_iter,
            max_iterations: Self::DEFAULT_MAX_ITERATIONS,
            seed,
            algorithm,
            irl: IrlMethod::default(),
            n_max: None,
            stop_regret: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return config(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return config(format!("delta must lie in (0, 1), got {}", self.delta));
        }
        if self.episodes_per_iter == 0 {
            return config("episodes per iteration must be at least 1");
        }
        if self.max_iterations == 0 {
            return config("max_iterations must be positive");
        }
        if self.n_max == Some(0) {
            return config("n_max must be positive");
        }
        if let Some(t) = self.stop_regret {
            if !(t > 0.0 && t <= 1.0) {
                return config(format!("regret threshold must lie in (0, 1], got {t}"));
            }
        }
        Ok(())
    }
}

/// State after iteration `iteration`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub iteration: usize,
    /// Transition samples so far.
    pub samples: u64,
    pub expert_queries: u64,
    pub epsilon: f64,
    /// Normalized regret of the reward recovered at this iteration (the
    /// reward snapshot is identified by `iteration`).
    pub normalized_regret: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunResult {
    pub algorithm: Algorithm,
    pub stop_iteration: usize,
    pub total_samples: u64,
    pub expert_queries: u64,
    pub checkpoints: Vec<Checkpoint>,
    /// `max_iterations` was reached before any stopping rule fired.
    pub timed_out: bool,
    pub final_reward: RewardTable,
    pub final_counts: VisitCounts,
}

impl RunResult {
    /// Samples at the first checkpoint with regret below `threshold`.
    pub fn samples_to_regret(&self, threshold: f64) -> Option<u64> {
        self.checkpoints
            .iter()
            .find(|c| c.normalized_regret < threshold)
            .map(|c| c.samples)
    }
}

/// Everything the loop knows after an update, for observers.
pub struct IterationView<'a> {
    pub iteration: usize,
    pub counts: &'a VisitCounts,
    pub est_mdp: &'a TabularMdp,
    pub est_expert: &'a StagePolicy,
    pub widths: &'a ConfidenceTable,
    pub reward: &'a RewardTable,
    /// The plausibly-optimal set used for the next exploration step.
    pub policy_set: &'a PolicySet,
    /// Accuracy after the running minimum.
    pub epsilon: f64,
    /// The stopping quantity before the running minimum.
    pub raw_epsilon: f64,
}

/// Runs active IRL exploration (`aceirl_full` or `aceirl_greedy`).
pub fn aceirl_run(
    env: &TabularMdp,
    true_reward: &RewardTable,
    expert: &StagePolicy,
    cfg: &RunConfig,
) -> Result<RunResult> {
    aceirl_run_observed(env, true_reward, expert, cfg, |_| {})
}

pub fn aceirl_run_observed(
    env: &TabularMdp,
    true_reward: &RewardTable,
    expert: &StagePolicy,
    cfg: &RunConfig,
    observer: impl FnMut(&IterationView<'_>),
) -> Result<RunResult> {
    let explorer = match cfg.algorithm {
        Algorithm::AceirlFull => Explorer::Ace,
        Algorithm::AceirlGreedy => Explorer::Greedy,
        other => return config(format!("aceirl_run cannot execute '{other}'")),
    };
    explore_loop(env, true_reward, Some(expert), cfg, explorer, observer)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Explorer {
    /// Planned uncertainty over the plausibly-optimal set.
    Ace,
    /// Greedy on the error bound.
    Greedy,
    Uniform,
}

pub(crate) fn trajectory_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

pub(crate) fn check_expert(
    env: &TabularMdp,
    true_reward: &RewardTable,
    expert: &StagePolicy,
) -> Result<()> {
    if !is_feasible(env, expert, true_reward, FEASIBILITY_TOL)? {
        return config("expert policy is not optimal for the true reward");
    }
    Ok(())
}

/// The shared exploration loop. With `expert = None` the run is reward-free:
/// no expert actions are observed, widths cover transitions only and regret
/// is measured for the true reward planned in the estimated model.
pub(crate) fn explore_loop(
    env: &TabularMdp,
    true_reward: &RewardTable,
    expert: Option<&StagePolicy>,
    cfg: &RunConfig,
    explorer: Explorer,
    mut observer: impl FnMut(&IterationView<'_>),
) -> Result<RunResult> {
    cfg.validate()?;
    env.check_stage_table("true reward", true_reward.values().dim())?;
    if let Some(expert) = expert {
        check_expert(env, true_reward, expert)?;
    }
    let (horizon, s0) = (env.horizon(), env.initial_state());
    let r_max = true_reward.r_max();
    let width = if expert.is_some() {
        WidthKind::Irl
    } else {
        WidthKind::TransitionOnly
    };
    let ace = AceSettings {
        width,
        ..AceSettings::default()
    };
    let recover = |est_mdp: &TabularMdp, est_expert: &StagePolicy| -> Result<RewardTable> {
        match expert {
            Some(_) => cfg.irl.recover(est_mdp, est_expert, r_max),
            None => Ok(true_reward.clone()),
        }
    };
    let restricted = explorer == Explorer::Ace && expert.is_some();
    let make_set = |est_mdp: &TabularMdp, reward: &RewardTable, eps: f64| -> Result<PolicySet> {
        if restricted {
            PolicySet::new(est_mdp.clone(), reward.clone(), 10.0 * eps)
        } else {
            PolicySet::unrestricted(est_mdp, r_max)
        }
    };

    let mut rng = trajectory_rng(cfg.seed);
    let mut counts = VisitCounts::for_mdp(env);
    let (mut est_mdp, mut est_expert) = estimated_problem(&counts, s0)?;
    let mut widths = uncertainty_with(&counts, cfg.delta, r_max, width)?;
    let mut reward = recover(&est_mdp, &est_expert)?;
    let mut epsilon = horizon as f64 / 10.0;
    let mut set = make_set(&est_mdp, &reward, epsilon)?;
    let mut regret = normalized_regret(env, true_reward, &reward, &est_mdp)?;

    let per_iter = (cfg.episodes_per_iter * horizon) as u64;
    let queries_per_iter = if expert.is_some() { per_iter } else { 0 };
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
        if 4.0 * epsilon <= cfg.epsilon || cfg.stop_regret.is_some_and(|t| regret < t) {
            break;
        }
        if k >= cfg.max_iterations {
            timed_out = true;
            break;
        }
        let policy = match explorer {
            Explorer::Ace => {
                solve_ace_with(
                    &counts,
                    &set,
                    &est_mdp,
                    cfg.episodes_per_iter,
                    cfg.delta,
                    r_max,
                    &ace,
                )?
                .policy
            }
            Explorer::Greedy => greedy_exploration_policy(&widths, &est_mdp)?,
            Explorer::Uniform => StagePolicy::uniform(horizon, env.num_states(), env.num_actions()),
        };
        for _ in 0..cfg.episodes_per_iter {
            match expert {
                Some(expert) => {
                    let traj = simulate_episode(env, &policy, expert, &mut rng);
                    counts.record_trajectory(&traj)?;
                }
                None => {
                    for step in rollout(env, &policy, &mut rng) {
                        counts.record_transition(step)?;
                    }
                }
            }
        }
        k += 1;

        (est_mdp, est_expert) = estimated_problem(&counts, s0)?;
        widths = uncertainty_with(&counts, cfg.delta, r_max, width)?;
        reward = recover(&est_mdp, &est_expert)?;
        let raw_epsilon = if restricted {
            policy_set_epsilon(&set, &widths, &est_mdp)?
        } else {
            compute_eb1(&widths, &est_mdp)?.root_max(s0)
        };
        epsilon = epsilon.min(raw_epsilon);
        set = make_set(&est_mdp, &reward, epsilon)?;
        regret = normalized_regret(env, true_reward, &reward, &est_mdp)?;

        observer(&IterationView {
            iteration: k,
            counts: &counts,
            est_mdp: &est_mdp,
            est_expert: &est_expert,
            widths: &widths,
            reward: &reward,
            policy_set: &set,
            epsilon,
            raw_epsilon,
        });
        checkpoints.push(Checkpoint {
            iteration: k,
            samples: k as u64 * per_iter,
            expert_queries: k as u64 * queries_per_iter,
            epsilon,
            normalized_regret: regret,
        });
    }

    Ok(RunResult {
        algorithm: cfg.algorithm,
        stop_iteration: k,
        total_samples: k as u64 * per_iter,
        expert_queries: k as u64 * queries_per_iter,
        checkpoints,
        timed_out,
        final_reward: reward,
        final_counts: counts,
    })
}
