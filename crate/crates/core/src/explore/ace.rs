//! Choosing the next exploration policy by minimising the planned
//! uncertainty of plausibly optimal policies.
//!
//! The objective over exploration occupancies `mu` is
//!
//! ```text
//! F(mu) = max_{rho in set} <rho, Chat(mu)>
//! ```
//!
//! where `Chat(mu)` are the widths expected after `N_E` episodes with
//! visitation `mu`. Frank-Wolfe descends a smooth convex surrogate of `F`
//! (widths `W / sqrt(n+ + N_E mu)`, i.e. without the `min(1, .)` cap) whose
//! linear oracle is one backward-induction solve, and keeps the iterate with
//! the lowest true `F`, ties broken by the surrogate.

use ndarray::Array3;

use super::bounds::greedy_exploration_policy;
use super::policy_set::{constrained_max, planned_uncertainty_with, PolicySet};
use crate::error::Result;
use crate::estimation::{log_factor, uncertainty_with, VisitCounts, WidthKind};
use crate::mdp::{
    dot3, occupancy_of_actions, occupancy_of_probs, optimal_plan, OccupancyMeasure, StagePolicy,
    TabularMdp,
};

#[derive(Clone, Debug, PartialEq)]
pub struct AceSettings {
    pub width: WidthKind,
    pub max_iterations: usize,
    /// Stop once the Frank-Wolfe gap is below `gap_tolerance * H * r_max`.
    pub gap_tolerance: f64,
}

impl Default for AceSettings {
    fn default() -> Self {
        Self {
            width: WidthKind::Irl,
            max_iterations: 50,
            gap_tolerance: 1e-3,
        }
    }
}

#[derive(Clone, Debug)]
pub struct AceSolution {
    pub policy: StagePolicy,
    /// Planned occupancy `mu*` in the estimated MDP.
    pub occupancy: OccupancyMeasure,
    /// `F(mu*)`.
    pub objective: f64,
    /// `F` at the occupancy of the greedy (EB1) policy, the starting point.
    pub greedy_objective: f64,
    pub iterations: usize,
    pub fw_gap: f64,
    pub converged: bool,
}

/// Exploration policy for the next `n_e` episodes.
pub fn solve_ace(
    counts: &VisitCounts,
    policy_set: &PolicySet,
    est_mdp: &TabularMdp,
    n_e: usize,
    delta: f64,
    r_max: f64,
) -> Result<AceSolution> {
    solve_ace_with(
        counts,
        policy_set,
        est_mdp,
        n_e,
        delta,
        r_max,
        &AceSettings::default(),
    )
}

pub fn solve_ace_with(
    counts: &VisitCounts,
    policy_set: &PolicySet,
    est_mdp: &TabularMdp,
    n_e: usize,
    delta: f64,
    r_max: f64,
    settings: &AceSettings,
) -> Result<AceSolution> {
    let current = uncertainty_with(counts, delta, r_max, settings.width)?;
    est_mdp.check_stage_table("counts", current.widths().dim())?;
    let (horizon, ns, na) = current.widths().dim();
    let n_e_f = n_e as f64;

    // surrogate widths W / sqrt(n+ + N_E mu)
    let n_plus = counts.sa_counts().mapv(|n| n.max(1) as f64);
    let weight = Array3::from_shape_fn((horizon, ns, na), |(h, s, a)| {
        let n = counts.sa_count(h, s, a);
        let l = log_factor(ns, na, horizon, n, delta);
        settings.width.factor() * (horizon - h) as f64 * r_max * (2.0 * l).sqrt()
    });
    let denominators = |mu: &Array3<f64>| &n_plus + &(mu * n_e_f);

    let true_objective = |mu: &Array3<f64>| -> Result<f64> {
        let occ = OccupancyMeasure::from_raw(mu.clone(), 0);
        let widths = planned_uncertainty_with(counts, &occ, n_e, delta, r_max, settings.width)?;
        Ok(constrained_max(policy_set, widths.widths(), est_mdp)?.value)
    };

    let greedy = greedy_exploration_policy(&current, est_mdp)?;
    let mut mu = occupancy_of_probs(est_mdp, greedy.probs());
    let greedy_objective = true_objective(&mu)?;

    let scale = horizon as f64 * r_max;
    let tie = 1e-12 * scale;
    let mut best = (greedy_objective, f64::INFINITY, mu.clone());
    let mut fw_gap = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;

    for t in 0..settings.max_iterations {
        iterations = t + 1;
        let denom = denominators(&mu);
        let surrogate_widths = ndarray::Zip::from(&weight)
            .and(&denom)
            .map_collect(|w, d| w / d.sqrt());
        let inner = constrained_max(policy_set, &surrogate_widths, est_mdp)?;
        let f_true = if t == 0 {
            greedy_objective
        } else {
            true_objective(&mu)?
        };
        if f_true < best.0 - tie || (f_true <= best.0 + tie && inner.value < best.1) {
            best = (f_true, inner.value, mu.clone());
        }

        // -dF/dmu by Danskin: rho* * 0.5 W N_E (n+ + N_E mu)^{-3/2}
        let descent = ndarray::Zip::from(&inner.rho)
            .and(&weight)
            .and(&denom)
            .map_collect(|rho, w, d| rho * 0.5 * w * n_e_f * d.powf(-1.5));
        let vertex = occupancy_of_actions(est_mdp, &optimal_plan(est_mdp, &descent).actions);
        fw_gap = dot3(&vertex, &descent) - dot3(&mu, &descent);
        if fw_gap <= settings.gap_tolerance * scale {
            converged = true;
            break;
        }
        let step = 2.0 / (t as f64 + 2.0);
        mu = &mu * (1.0 - step) + &(vertex * step);
    }
    if !converged {
        let f_true = true_objective(&mu)?;
        if f_true < best.0 - tie {
            best = (f_true, f64::INFINITY, mu.clone());
        }
        log::warn!(
            "Frank-Wolfe stopped after {iterations} iterations with gap {fw_gap:.3e}; using the best iterate"
        );
    }

    let (objective, _, mu) = best;
    Ok(AceSolution {
        policy: StagePolicy::from_weights(&mu),
        occupancy: OccupancyMeasure::from_raw(mu, 0),
        objective,
        greedy_objective,
        iterations,
        fw_gap,
        converged,
    })
}
