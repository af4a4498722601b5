use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

use super::{StagePolicy, TabularMdp};
use crate::error::{config, Result};

/// Where an occupancy measure is conditioned.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Start {
    State(usize),
    /// The action is taken at the start step regardless of the policy.
    StateAction(usize, usize),
}

/// Per-stage state-action visitation probabilities `rho_h(s, a)`, `[H, S, A]`.
/// Stages before `start_step` are zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OccupancyMeasure {
    rho: Array3<f64>,
    start_step: usize,
}

impl OccupancyMeasure {
    pub(crate) fn from_raw(rho: Array3<f64>, start_step: usize) -> Self {
        Self { rho, start_step }
    }

    pub fn rho(&self) -> &Array3<f64> {
        &self.rho
    }

    pub fn into_rho(self) -> Array3<f64> {
        self.rho
    }

    pub fn get(&self, h: usize, s: usize, a: usize) -> f64 {
        self.rho[[h, s, a]]
    }

    pub fn start_step(&self) -> usize {
        self.start_step
    }

    /// `sum_{s,a} rho_h(s, a)`.
    pub fn stage_mass(&self, h: usize) -> f64 {
        self.rho.index_axis(ndarray::Axis(0), h).sum()
    }

    /// `sum_{h,s,a} rho_h(s, a) w_h(s, a)` for an `[H, S, A]` weight table.
    pub fn dot(&self, weights: &Array3<f64>) -> f64 {
        dot3(&self.rho, weights)
    }
}

pub(crate) fn dot3(x: &Array3<f64>, y: &Array3<f64>) -> f64 {
    debug_assert_eq!(x.dim(), y.dim());
    x.iter().zip(y.iter()).map(|(a, b)| a * b).sum()
}

/// Forward recursion for the visitation frequencies of `policy` started at
/// `start` on step `h0`.
pub fn occupancy(
    mdp: &TabularMdp,
    policy: &StagePolicy,
    start: Start,
    h0: usize,
) -> Result<OccupancyMeasure> {
    mdp.check_stage_table("policy", policy.dim())?;
    let (ns, na, horizon) = (mdp.num_states(), mdp.num_actions(), mdp.horizon());
    if h0 >= horizon {
        return config(format!(
            "start step {h0} must be below the horizon {horizon}"
        ));
    }
    let mut rho = Array3::<f64>::zeros((horizon, ns, na));
    match start {
        Start::State(s) => {
            if s >= ns {
                return config(format!("start state {s} out of range"));
            }
            for a in 0..na {
                rho[[h0, s, a]] = policy.prob(h0, s, a);
            }
        }
        Start::StateAction(s, a) => {
            if s >= ns || a >= na {
                return config(format!("start pair ({s}, {a}) out of range"));
            }
            rho[[h0, s, a]] = 1.0;
        }
    }
    propagate(mdp, &mut rho, h0, |h, s, a| policy.prob(h, s, a));
    Ok(OccupancyMeasure {
        rho,
        start_step: h0,
    })
}

/// Occupancy of `policy` from the MDP's initial state at step 0.
pub fn occupancy_from_start(mdp: &TabularMdp, policy: &StagePolicy) -> Result<OccupancyMeasure> {
    occupancy(mdp, policy, Start::State(mdp.initial_state()), 0)
}

/// Raw occupancy from `s0` for an `[H, S, A]` probability table.
pub(crate) fn occupancy_of_probs(mdp: &TabularMdp, policy: &Array3<f64>) -> Array3<f64> {
    let (ns, na, horizon) = (mdp.num_states(), mdp.num_actions(), mdp.horizon());
    let mut rho = Array3::<f64>::zeros((horizon, ns, na));
    let s0 = mdp.initial_state();
    for a in 0..na {
        rho[[0, s0, a]] = policy[[0, s0, a]];
    }
    propagate(mdp, &mut rho, 0, |h, s, a| policy[[h, s, a]]);
    rho
}

/// Raw occupancy from `s0` for a deterministic `[H, S]` action table.
pub(crate) fn occupancy_of_actions(mdp: &TabularMdp, actions: &Array2<usize>) -> Array3<f64> {
    let (ns, na, horizon) = (mdp.num_states(), mdp.num_actions(), mdp.horizon());
    let p = mdp.flat_transitions();
    let mut rho = Array3::<f64>::zeros((horizon, ns, na));
    let mut dist = vec![0.0; ns];
    dist[mdp.initial_state()] = 1.0;
    let mut next = vec![0.0; ns];
    for h in 0..horizon {
        next.iter_mut().for_each(|x| *x = 0.0);
        for s in 0..ns {
            let mass = dist[s];
            if mass == 0.0 {
                continue;
            }
            let a = actions[[h, s]];
            rho[[h, s, a]] = mass;
            let base = (s * na + a) * ns;
            for (t, slot) in next.iter_mut().enumerate() {
                *slot += mass * p[base + t];
            }
        }
        std::mem::swap(&mut dist, &mut next);
    }
    rho
}

/// Fills stages `h0 + 1 ..` of `rho` given stage `h0`.
fn propagate(
    mdp: &TabularMdp,
    rho: &mut Array3<f64>,
    h0: usize,
    pi: impl Fn(usize, usize, usize) -> f64,
) {
    let (ns, na, horizon) = (mdp.num_states(), mdp.num_actions(), mdp.horizon());
    let p = mdp.flat_transitions();
    let mut dist = vec![0.0; ns];
    for h in h0..horizon.saturating_sub(1) {
        dist.iter_mut().for_each(|x| *x = 0.0);
        for s in 0..ns {
            for a in 0..na {
                let mass = rho[[h, s, a]];
                if mass == 0.0 {
                    continue;
                }
                let base = (s * na + a) * ns;
                for (t, slot) in dist.iter_mut().enumerate() {
                    *slot += mass * p[base + t];
                }
            }
        }
        for (s, &mass) in dist.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            for a in 0..na {
                rho[[h + 1, s, a]] = mass * pi(h + 1, s, a);
            }
        }
    }
}
