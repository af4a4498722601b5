//! Property checks on seeded random instances. Each returns the first
//! violation it finds; the unit-level test targets and the acceptance gate
//! both drive them.

use aceirl_core::estimation::{estimated_problem, reward_uncertainty, VisitCounts};
use aceirl_core::explore::{
    aceirl_run_observed, inner_max, solve_ace, Algorithm, IterationView, PolicySet, RunConfig,
};
use aceirl_core::feasible::{
    construct_feasible, error_propagation_rhs, is_feasible, FeasibleParams, FEASIBILITY_TOL,
};
use aceirl_core::mdp::{
    backward_induction, evaluate_policy, occupancy, sample_index, RewardTable, StagePolicy, Start,
    Step, TabularMdp,
};
use ndarray::{Array2, Array3};
use rand::Rng;

use super::*;

pub type Check = Result<(), String>;

pub const TOL: f64 = 1e-8;
pub const DELTA: f64 = 0.1;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn instance(seed: u64) -> (TabularMdp, rand_chacha::ChaCha8Rng) {
    let mut rng = rng(seed);
    let mdp = random_mdp(&mut rng, 5, 3, 4);
    (mdp, rng)
}

fn occ_dot(mdp: &TabularMdp, pi: &StagePolicy, start: Start, h: usize, r: &Array3<f64>) -> f64 {
    occupancy(mdp, pi, start, h).unwrap().dot(r)
}

/// Same transitions as a fresh random MDP, same initial state as `like`.
fn other_dynamics(rng: &mut impl Rng, like: &TabularMdp) -> TabularMdp {
    let (ns, na, horizon) = (like.num_states(), like.num_actions(), like.horizon());
    let p = random_mdp(rng, ns, na, horizon).transitions().clone();
    TabularMdp::new(p, horizon, like.initial_state()).unwrap()
}

/// `V` and `Q` equal occupancy-weighted reward sums, and the occupancy
/// matches a brute-force forward pass.
pub fn occupancy_identity(seed: u64) -> Check {
    let (mdp, mut rng) = instance(seed);
    let (horizon, ns, na) = (mdp.horizon(), mdp.num_states(), mdp.num_actions());
    let reward = random_reward(&mut rng, horizon, ns, na);
    let pi = random_policy(&mut rng, horizon, ns, na);
    let tables = evaluate_policy(&mdp, &reward, &pi).unwrap();
    for h in 0..horizon {
        for s in 0..ns {
            let via_occ = occ_dot(&mdp, &pi, Start::State(s), h, reward.values());
            ensure!(
                (tables.v[[h, s]] - via_occ).abs() <= TOL,
                "V({h}, {s}): {} vs {via_occ}",
                tables.v[[h, s]]
            );
            let rho = occupancy(&mdp, &pi, Start::State(s), h).unwrap();
            let brute = brute_occupancy(&mdp, pi.probs(), h, s);
            ensure!(
                rho.rho()
                    .iter()
                    .zip(brute.iter())
                    .all(|(x, y)| (x - y).abs() <= TOL),
                "occupancy from ({h}, {s}) differs from the forward pass"
            );
            for a in 0..na {
                let via_occ = occ_dot(&mdp, &pi, Start::StateAction(s, a), h, reward.values());
                ensure!(
                    (tables.q[[h, s, a]] - via_occ).abs() <= TOL,
                    "Q({h}, {s}, {a})"
                );
            }
        }
    }
    Ok(())
}

/// `Q^{pi*}_r - Q^{pihat*}_rhat <= <rho^{pi*}, r - rhat>`, for `V` and `Q`.
pub fn one_sided_bound(seed: u64) -> Check {
    let (mdp, mut rng) = instance(seed);
    let (horizon, ns, na) = (mdp.horizon(), mdp.num_states(), mdp.num_actions());
    let r = random_reward(&mut rng, horizon, ns, na);
    let rhat = random_reward(&mut rng, horizon, ns, na);
    let diff = r.values() - rhat.values();
    let (opt, pi_star) = backward_induction(&mdp, &r).unwrap();
    let (opt_hat, _) = backward_induction(&mdp, &rhat).unwrap();
    for h in 0..horizon {
        for s in 0..ns {
            let bound = occ_dot(&mdp, &pi_star, Start::State(s), h, &diff);
            ensure!(
                opt.v[[h, s]] - opt_hat.v[[h, s]] <= bound + TOL,
                "V at ({h}, {s})"
            );
            for a in 0..na {
                let bound = occ_dot(&mdp, &pi_star, Start::StateAction(s, a), h, &diff);
                ensure!(
                    opt.q[[h, s, a]] - opt_hat.q[[h, s, a]] <= bound + TOL,
                    "Q at ({h}, {s}, {a})"
                );
            }
        }
    }
    Ok(())
}

/// `0 <= Q^{pi*}_r - Q^{pihat*}_r <= <rho^{pi*} - rho^{pihat*}, r - rhat>`.
pub fn two_policy_bound(seed: u64) -> Check {
    let (mdp, mut rng) = instance(seed);
    let (horizon, ns, na) = (mdp.horizon(), mdp.num_states(), mdp.num_actions());
    let r = random_reward(&mut rng, horizon, ns, na);
    let rhat = random_reward(&mut rng, horizon, ns, na);
    let diff = r.values() - rhat.values();
    let (opt, pi_star) = backward_induction(&mdp, &r).unwrap();
    let (_, pi_hat) = backward_induction(&mdp, &rhat).unwrap();
    let q_hat = evaluate_policy(&mdp, &r, &pi_hat).unwrap().q;
    for h in 0..horizon {
        for s in 0..ns {
            for a in 0..na {
                let start = Start::StateAction(s, a);
                let bound = occ_dot(&mdp, &pi_star, start, h, &diff)
                    - occ_dot(&mdp, &pi_hat, start, h, &diff);
                let lhs = opt.q[[h, s, a]] - q_hat[[h, s, a]];
                ensure!(
                    lhs >= -TOL && lhs <= bound + TOL,
                    "({h}, {s}, {a}): {lhs} vs {bound}"
                );
            }
        }
    }
    Ok(())
}

/// Value difference between two dynamics as a sum of one-step model errors
/// along the second model's occupancy.
pub fn dynamics_identity(seed: u64) -> Check {
    let (m1, mut rng) = instance(seed);
    let (horizon, ns, na) = (m1.horizon(), m1.num_states(), m1.num_actions());
    let m2 = other_dynamics(&mut rng, &m1);
    let r = random_reward(&mut rng, horizon, ns, na);
    let pi = random_policy(&mut rng, horizon, ns, na);
    let v1 = evaluate_policy(&m1, &r, &pi).unwrap().v;
    let v2 = evaluate_policy(&m2, &r, &pi).unwrap().v;
    let (p1, p2) = (m1.transitions(), m2.transitions());
    for h in 0..horizon {
        for s in 0..ns {
            let rho2 = occupancy(&m2, &pi, Start::State(s), h).unwrap();
            let mut total = 0.0;
            for hp in h..horizon {
                for sp in 0..ns {
                    for a in 0..na {
                        for t in 0..ns {
                            total += rho2.get(hp, sp, a)
                                * (p2[[sp, a, t]] - p1[[sp, a, t]])
                                * v1[[hp + 1, t]];
                        }
                    }
                }
            }
            let gap = v2[[h, s]] - v1[[h, s]];
            ensure!((gap - total).abs() <= TOL, "({h}, {s}): {gap} vs {total}");
        }
    }
    Ok(())
}

pub fn simulation_identities(seed: u64) -> Check {
    occupancy_identity(seed)?;
    one_sided_bound(seed)?;
    two_policy_bound(seed)?;
    dynamics_identity(seed)
}

/// Explicit construction is feasible and gives the expert exactly the
/// prescribed `Q`; any optimal-expert reward is rebuilt from its own
/// parameters.
pub fn feasible_round_trip(seed: u64) -> Check {
    let (mdp, mut rng) = instance(seed);
    let (horizon, ns, na) = (mdp.horizon(), mdp.num_states(), mdp.num_actions());
    let expert = if rng.gen_bool(0.5) {
        random_policy(&mut rng, horizon, ns, na)
    } else {
        random_deterministic(&mut rng, horizon, ns, na)
    };
    let margin = Array3::from_shape_fn((horizon, ns, na), |_| rng.gen::<f64>() * 2.0);
    let value = Array2::from_shape_fn((horizon, ns), |_| rng.gen::<f64>() * 4.0 - 2.0);
    let params = FeasibleParams::new(margin, value).unwrap();
    let r = construct_feasible(&mdp, &expert, &params).unwrap();
    ensure!(
        is_feasible(&mdp, &expert, &r, FEASIBILITY_TOL).unwrap(),
        "constructed reward is infeasible"
    );
    let q = evaluate_policy(&mdp, &r, &expert).unwrap().q;
    for ((h, s, a), &qv) in q.slice(ndarray::s![..horizon, .., ..]).indexed_iter() {
        let penalty = if expert.prob(h, s, a) == 0.0 {
            params.advantage_margin()[[h, s, a]]
        } else {
            0.0
        };
        ensure!(
            (qv - (params.value(h, s) - penalty)).abs() <= TOL,
            "Q({h}, {s}, {a})"
        );
    }

    let reward = random_reward(&mut rng, horizon, ns, na);
    let (_, optimal) = backward_induction(&mdp, &reward).unwrap();
    let params = FeasibleParams::from_reward(&mdp, &optimal, &reward).unwrap();
    let rebuilt = construct_feasible(&mdp, &optimal, &params).unwrap();
    ensure!(
        rebuilt
            .values()
            .iter()
            .zip(reward.values())
            .all(|(x, y)| (x - y).abs() <= TOL),
        "reward not recovered from its parameters"
    );
    Ok(())
}

/// `|r - rhat|` is within the error-propagation bound when the experts share
/// their support.
pub fn error_propagation(seed: u64) -> Check {
    let (mdp, mut rng) = instance(seed);
    let (horizon, ns, na) = (mdp.horizon(), mdp.num_states(), mdp.num_actions());
    let est = other_dynamics(&mut rng, &mdp);
    let expert = random_policy(&mut rng, horizon, ns, na);
    let est_expert = StagePolicy::from_weights(&expert.probs().mapv(|p| {
        if p > 0.0 {
            p + rng.gen::<f64>()
        } else {
            0.0
        }
    }));
    let margin = Array3::from_shape_fn((horizon, ns, na), |_| rng.gen::<f64>());
    let value = Array2::from_shape_fn((horizon, ns), |_| rng.gen::<f64>() * 2.0 - 1.0);
    let params = FeasibleParams::new(margin, value).unwrap();
    let r = construct_feasible(&mdp, &expert, &params).unwrap();
    let rhat = construct_feasible(&est, &est_expert, &params).unwrap();
    let rhs = error_propagation_rhs(
        &params,
        &expert,
        &est_expert,
        mdp.transitions(),
        est.transitions(),
    )
    .unwrap();
    for ((x, y), b) in r.values().iter().zip(rhat.values()).zip(&rhs) {
        ensure!((x - y).abs() <= b + TOL, "|{x} - {y}| > {b}");
    }
    Ok(())
}

/// Width recomputed from its definition, independently of the crate.
pub fn width_oracle(ns: usize, na: usize, horizon: usize, h: usize, n: u64, delta: f64) -> f64 {
    let n_plus = n.max(1) as f64;
    let ell = (24.0 * (ns * na * horizon) as f64 * n_plus * n_plus / delta).ln();
    (horizon - h) as f64 * (2.0 * (2.0 * ell / n_plus).sqrt()).min(1.0)
}

/// Widths agree with their definition and never grow as counts accumulate.
pub fn widths_shrink(seed: u64) -> Check {
    let mut rng = rng(seed);
    let (ns, na, horizon) = (
        rng.gen_range(1..5),
        rng.gen_range(1..4),
        rng.gen_range(1..6),
    );
    let delta = rng.gen_range(0.01..0.9);
    let mut counts = VisitCounts::new(ns, na, horizon);
    let mut last = reward_uncertainty(&counts, delta, 1.0)
        .unwrap()
        .widths()
        .clone();
    for _ in 0..400 {
        let step = Step {
            h: rng.gen_range(0..horizon),
            state: rng.gen_range(0..ns),
            action: rng.gen_range(0..na),
            next_state: rng.gen_range(0..ns),
        };
        counts.record_transition(step).unwrap();
        let table = reward_uncertainty(&counts, delta, 1.0).unwrap();
        for ((h, s, a), &w) in table.widths().indexed_iter() {
            let expected = width_oracle(ns, na, horizon, h, counts.sa_count(h, s, a), delta);
            ensure!(
                (w - expected).abs() <= 1e-12,
                "width ({h}, {s}, {a}): {w} vs {expected}"
            );
            ensure!(w <= last[[h, s, a]], "width ({h}, {s}, {a}) grew");
        }
        last = table.widths().clone();
    }
    Ok(())
}

/// `r` and `rhat` built from the same `(A, V)` in the true and estimated
/// problems.
fn matched_rewards(
    mdp: &TabularMdp,
    expert: &StagePolicy,
    reward: &RewardTable,
    est_mdp: &TabularMdp,
    est_expert: &StagePolicy,
) -> (Array3<f64>, Array3<f64>) {
    let params = FeasibleParams::from_reward(mdp, expert, reward).unwrap();
    let r = construct_feasible(mdp, expert, &params).unwrap();
    let rhat = construct_feasible(est_mdp, est_expert, &params).unwrap();
    (r.values().clone(), rhat.values().clone())
}

fn max_violation(r: &Array3<f64>, rhat: &Array3<f64>, widths: &Array3<f64>) -> f64 {
    r.iter()
        .zip(rhat)
        .zip(widths)
        .map(|((x, y), c)| (x - y).abs() - c)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// A stochastic expert randomising over the optimal actions of a reward with
/// deliberate ties at the last stage.
fn tied_problem(seed: u64) -> (TabularMdp, RewardTable, StagePolicy) {
    let mut rng = rng(seed);
    let mdp = random_mdp(&mut rng, 3, 3, 3);
    let mut values = random_reward(&mut rng, 3, 3, 3).values().clone();
    for s in 0..3 {
        values[[2, s, 1]] = values[[2, s, 0]];
    }
    let reward = RewardTable::new(values, 1.0).unwrap();
    let (opt, _) = backward_induction(&mdp, &reward).unwrap();
    let weights = Array3::from_shape_fn((3, 3, 3), |(h, s, a)| {
        ((opt.q[[h, s, a]] - opt.v[[h, s]]).abs() <= 1e-12) as u8 as f64
    });
    (mdp, reward, StagePolicy::from_weights(&weights))
}

/// Runs uniform exploration with its own sampler and reports whether
/// `|r - rhat| <= C` failed at any of eight checkpoints.
pub fn good_event_fails(run: u64) -> bool {
    let (mdp, reward, expert) = tied_problem(11);
    let (ns, na, horizon) = (mdp.num_states(), mdp.num_actions(), mdp.horizon());
    let mut rng = rng(1000 + run);
    let mut counts = VisitCounts::for_mdp(&mdp);
    let mut failed = false;
    for _checkpoint in 0..8 {
        for _ in 0..15 {
            let mut s = mdp.initial_state();
            for h in 0..horizon {
                let a = rng.gen_range(0..na);
                let a_e = sample_index(expert.row(h, s).iter().copied(), &mut rng);
                counts.record_expert(h, s, a_e).unwrap();
                let next_state = sample_index(mdp.transition_row(s, a).iter().copied(), &mut rng);
                counts
                    .record_transition(Step {
                        h,
                        state: s,
                        action: a,
                        next_state,
                    })
                    .unwrap();
                s = next_state;
            }
        }
        let (est_mdp, est_expert) = estimated_problem(&counts, mdp.initial_state()).unwrap();
        let (r, rhat) = matched_rewards(&mdp, &expert, &reward, &est_mdp, &est_expert);
        let widths = Array3::from_shape_fn((horizon, ns, na), |(h, s, a)| {
            width_oracle(ns, na, horizon, h, counts.sa_count(h, s, a), DELTA)
        });
        failed |= max_violation(&r, &rhat, &widths) > 1e-9;
    }
    failed
}

/// `delta` plus three binomial standard errors over `runs`.
pub fn rate_limit(runs: usize) -> f64 {
    DELTA + 3.0 * (DELTA * (1.0 - DELTA) / runs as f64).sqrt()
}

struct Tracker<'a> {
    mdp: &'a TabularMdp,
    reward: &'a RewardTable,
    expert: &'a StagePolicy,
    good_so_far: bool,
    monotone: bool,
    last_epsilon: f64,
    /// Worst `realized - 4 eps` seen while the good event held.
    worst_slack: f64,
}

impl Tracker<'_> {
    fn observe(&mut self, view: &IterationView<'_>) {
        self.monotone &=
            view.epsilon <= self.last_epsilon + 1e-12 && view.epsilon <= view.raw_epsilon + 1e-12;
        self.last_epsilon = view.epsilon;

        let (r, rhat) = matched_rewards(
            self.mdp,
            self.expert,
            self.reward,
            view.est_mdp,
            view.est_expert,
        );
        self.good_so_far &= max_violation(&r, &rhat, view.widths.widths()) <= 1e-9;
        if !self.good_so_far {
            return;
        }
        // plan the matched estimate in the estimated model, act in the true one
        let rhat = RewardTable::unclipped(rhat, 1.0).unwrap();
        let (_, plan) = backward_induction(view.est_mdp, &rhat).unwrap();
        let (opt, _) = backward_induction(self.mdp, self.reward).unwrap();
        let achieved = evaluate_policy(self.mdp, self.reward, &plan).unwrap();
        let s0 = self.mdp.initial_state();
        let realized = (0..self.mdp.num_actions())
            .map(|a| (opt.q[[0, s0, a]] - achieved.q[[0, s0, a]]).abs())
            .fold(opt.v[[0, s0]] - achieved.v[[0, s0]], f64::max);
        self.worst_slack = self.worst_slack.max(realized - 4.0 * view.epsilon);
    }
}

/// Outcome of one exploration run on a 2x2x2 instance.
pub struct StoppingRun {
    /// The accuracy never increased between iterations.
    pub monotone: bool,
    /// The accuracy dropped below its initial value `H / 10`.
    pub shrunk: bool,
    /// Realized error exceeded `4 eps` at a checkpoint covered by the good event.
    pub exceeded: bool,
}

pub fn stopping_run(algorithm: Algorithm, seed: u64) -> StoppingRun {
    let mut rng = rng(seed);
    // small enough that the widths leave their caps within the budget
    let mdp = random_mdp(&mut rng, 2, 2, 2);
    let reward = random_reward(&mut rng, 2, 2, 2);
    let (_, expert) = backward_induction(&mdp, &reward).unwrap();
    let mut cfg = RunConfig::new(algorithm, 0.05, DELTA, 4000, seed).unwrap();
    cfg.max_iterations = 40;
    let mut tracker = Tracker {
        mdp: &mdp,
        reward: &reward,
        expert: &expert,
        good_so_far: true,
        monotone: true,
        last_epsilon: f64::INFINITY,
        worst_slack: f64::NEG_INFINITY,
    };
    let res = aceirl_run_observed(&mdp, &reward, &expert, &cfg, |v| tracker.observe(v)).unwrap();
    let checkpoints_monotone = res
        .checkpoints
        .windows(2)
        .all(|w| w[1].epsilon <= w[0].epsilon);
    StoppingRun {
        monotone: tracker.monotone && checkpoints_monotone,
        shrunk: tracker.last_epsilon < 0.2,
        exceeded: tracker.worst_slack > 1e-9,
    }
}

/// The planned-uncertainty solution is a flow-feasible occupancy no worse
/// than the greedy starting point.
pub fn ace_solution(seed: u64) -> Check {
    let mut rng = rng(seed);
    let (ns, na, horizon) = (4, 2, 4);
    let mdp = random_mdp(&mut rng, ns, na, horizon);
    let mut counts = VisitCounts::new(ns, na, horizon);
    for h in 0..horizon {
        for s in 0..ns {
            for a in 0..na {
                for _ in 0..[0, 10, 200, 2000][rng.gen_range(0..4)] {
                    let next_state =
                        sample_index(mdp.transition_row(s, a).iter().copied(), &mut rng);
                    counts
                        .record_transition(Step {
                            h,
                            state: s,
                            action: a,
                            next_state,
                        })
                        .unwrap();
                }
            }
        }
    }
    let (est, _) = estimated_problem(&counts, mdp.initial_state()).unwrap();
    let set = if seed % 2 == 0 {
        PolicySet::unrestricted(&est, 1.0).unwrap()
    } else {
        PolicySet::new(est.clone(), random_reward(&mut rng, horizon, ns, na), 0.3).unwrap()
    };
    let sol = solve_ace(&counts, &set, &est, 50, DELTA, 1.0).unwrap();
    ensure!(
        sol.objective <= sol.greedy_objective + 1e-3 * horizon as f64,
        "objective {} above greedy {}",
        sol.objective,
        sol.greedy_objective
    );
    flow_feasible(&est, sol.occupancy.rho(), 1e-6)
}

pub fn flow_feasible(mdp: &TabularMdp, rho: &Array3<f64>, tol: f64) -> Check {
    let (ns, na, horizon) = (mdp.num_states(), mdp.num_actions(), mdp.horizon());
    let p = mdp.transitions();
    for h in 0..horizon {
        for t in 0..ns {
            let inflow = if h == 0 {
                (t == mdp.initial_state()) as u8 as f64
            } else {
                (0..ns)
                    .flat_map(|s| (0..na).map(move |a| (s, a)))
                    .map(|(s, a)| rho[[h - 1, s, a]] * p[[s, a, t]])
                    .sum()
            };
            let outflow: f64 = (0..na).map(|a| rho[[h, t, a]]).sum();
            ensure!(
                (inflow - outflow).abs() <= tol,
                "flow at ({h}, {t}): in {inflow}, out {outflow}"
            );
            ensure!(
                (0..na).all(|a| rho[[h, t, a]] >= -1e-12),
                "negative mass at ({h}, {t})"
            );
        }
    }
    Ok(())
}

const LP_NS: usize = 4;
const LP_NA: usize = 2;
const LP_H: usize = 3;

fn lp_counts(rng: &mut impl Rng) -> VisitCounts {
    let mut counts = VisitCounts::new(LP_NS, LP_NA, LP_H);
    for h in 0..LP_H {
        for s in 0..LP_NS {
            for a in 0..LP_NA {
                // spread over capped and uncapped widths
                for _ in 0..[0, 3, 40, 400, 4000][rng.gen_range(0..5)] {
                    let step = Step {
                        h,
                        state: s,
                        action: a,
                        next_state: rng.gen_range(0..LP_NS),
                    };
                    counts.record_transition(step).unwrap();
                }
            }
        }
    }
    counts
}

/// `inner_max` against the vertex-enumeration oracle on a 4-state
/// instance. `gap_fraction` scales the set's gap by the anchor value range;
/// with `separate_anchor` the set is anchored in a different model.
pub fn inner_max_matches_oracle(seed: u64, gap_fraction: f64, separate_anchor: bool) -> Check {
    let mut rng = rng(seed);
    let est = random_mdp(&mut rng, LP_NS, LP_NA, LP_H);
    let anchor = if separate_anchor {
        other_dynamics(&mut rng, &est)
    } else {
        est.clone()
    };
    let reward = random_reward(&mut rng, LP_H, LP_NS, LP_NA);
    let widths = reward_uncertainty(&lp_counts(&mut rng), DELTA, 1.0).unwrap();

    let r = reward.values();
    let values: Vec<f64> = all_deterministic(LP_H, LP_NS, LP_NA)
        .iter()
        .map(|pi| {
            dot(
                &brute_occupancy(&est, &one_hot(pi, LP_NA), 0, est.initial_state()),
                r,
            )
        })
        .collect();
    let v_star = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let v_min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let gap = gap_fraction * (v_star - v_min);

    let set = PolicySet::new(anchor, reward.clone(), gap).unwrap();
    let (value, rho) = inner_max(&set, &widths, &est).unwrap();
    let oracle = constrained_lp_oracle(&est, widths.widths(), r, v_star - gap).unwrap();
    ensure!(
        (value - oracle).abs() <= 1e-6,
        "inner_max {value} vs oracle {oracle}"
    );
    ensure!(
        (dot(rho.rho(), widths.widths()) - value).abs() <= 1e-6,
        "maximiser does not attain the value"
    );
    ensure!(
        dot(rho.rho(), r) >= v_star - gap - 1e-6,
        "maximiser violates the constraint"
    );
    flow_feasible(&est, rho.rho(), 1e-6)
}
