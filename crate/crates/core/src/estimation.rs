//! Visit counts, empirical estimates of the transition model and expert
//! policy, and the reward-uncertainty widths `C^h_k(s, a)`.

use ndarray::{Array3, Array4};
use serde::{Deserialize, Serialize};

use crate::error::{config, Error, Result};
use crate::mdp::{StagePolicy, Step, TabularMdp, Trajectory};

/// Transition counts `n^h(s, a, s')` and expert-action counts `n_E^h(s, a)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VisitCounts {
    /// `[H, S, A, S]`
    transitions: Array4<u64>,
    /// `[H, S, A]`, expert action `a` observed at state `s` on step `h`.
    expert: Array3<u64>,
}

impl VisitCounts {
    pub fn new(num_states: usize, num_actions: usize, horizon: usize) -> Self {
        Self {
            transitions: Array4::zeros((horizon, num_states, num_actions, num_states)),
            expert: Array3::zeros((horizon, num_states, num_actions)),
        }
    }

    pub fn for_mdp(mdp: &TabularMdp) -> Self {
        Self::new(mdp.num_states(), mdp.num_actions(), mdp.horizon())
    }

    pub fn horizon(&self) -> usize {
        self.transitions.dim().0
    }

    pub fn num_states(&self) -> usize {
        self.transitions.dim().1
    }

    pub fn num_actions(&self) -> usize {
        self.transitions.dim().2
    }

    pub fn transitions(&self) -> &Array4<u64> {
        &self.transitions
    }

    pub fn expert(&self) -> &Array3<u64> {
        &self.expert
    }

    pub fn record_transition(&mut self, step: Step) -> Result<()> {
        let (h, s, a, _) = self.transitions.dim();
        if step.h >= h || step.state >= s || step.action >= a || step.next_state >= s {
            return Err(Error::Data(format!("transition {step:?} out of range")));
        }
        self.transitions[[step.h, step.state, step.action, step.next_state]] += 1;
        Ok(())
    }

    pub fn record_expert(&mut self, h: usize, state: usize, action: usize) -> Result<()> {
        let (hh, s, a) = self.expert.dim();
        if h >= hh || state >= s || action >= a {
            return Err(Error::Data(format!(
                "expert sample (h={h}, s={state}, a={action}) out of range"
            )));
        }
        self.expert[[h, state, action]] += 1;
        Ok(())
    }

    /// Adds every step of `traj` and the expert action sampled at each
    /// visited state. Nothing is recorded if any index is out of range.
    pub fn record_trajectory(&mut self, traj: &Trajectory) -> Result<()> {
        let (h, s, a, _) = self.transitions.dim();
        let bad_step = traj
            .steps
            .iter()
            .any(|st| st.h >= h || st.state >= s || st.action >= a || st.next_state >= s);
        if bad_step || traj.expert_actions.len() > traj.steps.len() {
            return Err(Error::Data("trajectory index out of range".into()));
        }
        if traj.expert_actions.iter().any(|&ae| ae >= a) {
            return Err(Error::Data("expert action out of range".into()));
        }
        for (i, step) in traj.steps.iter().enumerate() {
            self.transitions[[step.h, step.state, step.action, step.next_state]] += 1;
            if let Some(&ae) = traj.expert_actions.get(i) {
                self.expert[[step.h, step.state, ae]] += 1;
            }
        }
        Ok(())
    }

    /// `n^h(s, a) = sum_{s'} n^h(s, a, s')`.
    pub fn sa_count(&self, h: usize, s: usize, a: usize) -> u64 {
        self.transitions
            .slice(ndarray::s![h, s, a, ..])
            .iter()
            .sum()
    }

    /// `n^h(s) = sum_a n_E^h(s, a)`, the number of expert queries at `(h, s)`.
    pub fn state_count(&self, h: usize, s: usize) -> u64 {
        self.expert.slice(ndarray::s![h, s, ..]).iter().sum()
    }

    /// `[H, S, A]` table of `n^h(s, a)`.
    pub fn sa_counts(&self) -> Array3<u64> {
        self.transitions.sum_axis(ndarray::Axis(3))
    }

    pub fn total_transitions(&self) -> u64 {
        self.transitions.iter().sum()
    }
}

/// Returns `counts` with `traj` added.
pub fn update_counts(counts: &VisitCounts, traj: &Trajectory) -> Result<VisitCounts> {
    let mut next = counts.clone();
    next.record_trajectory(traj)?;
    Ok(next)
}

/// Empirical transition model (pooled over steps) and per-step expert policy.
/// Unvisited `(s, a)` rows are uniform over states, unvisited `(h, s)` rows
/// uniform over actions.
pub fn estimate_model(counts: &VisitCounts) -> (Array3<f64>, StagePolicy) {
    let (horizon, ns, na, _) = counts.transitions.dim();
    let pooled = counts.transitions.sum_axis(ndarray::Axis(0));
    let mut p_hat = Array3::<f64>::zeros((ns, na, ns));
    for s in 0..ns {
        for a in 0..na {
            let row = pooled.slice(ndarray::s![s, a, ..]);
            let total: u64 = row.iter().sum();
            for t in 0..ns {
                p_hat[[s, a, t]] = if total == 0 {
                    1.0 / ns as f64
                } else {
                    row[t] as f64 / total as f64
                };
            }
        }
    }
    let mut pi_hat = Array3::<f64>::zeros((horizon, ns, na));
    for h in 0..horizon {
        for s in 0..ns {
            let total = counts.state_count(h, s);
            for a in 0..na {
                pi_hat[[h, s, a]] = if total == 0 {
                    1.0 / na as f64
                } else {
                    counts.expert[[h, s, a]] as f64 / total as f64
                };
            }
        }
    }
    (p_hat, StagePolicy::from_weights(&pi_hat))
}

/// The estimated MDP with the given initial state, plus the estimated expert.
pub fn estimated_problem(
    counts: &VisitCounts,
    initial_state: usize,
) -> Result<(TabularMdp, StagePolicy)> {
    let (p_hat, pi_hat) = estimate_model(counts);
    Ok((
        TabularMdp::new(p_hat, counts.horizon(), initial_state)?,
        pi_hat,
    ))
}

/// Which terms of the reward error a width covers.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum WidthKind {
    /// Expert-policy plus transition terms: `2 sqrt(2 l / n)`.
    #[default]
    Irl,
    /// Transition term only, `sqrt(2 l / n)`, for reward-free exploration.
    TransitionOnly,
}

impl WidthKind {
    pub(crate) fn factor(self) -> f64 {
        match self {
            WidthKind::Irl => 2.0,
            WidthKind::TransitionOnly => 1.0,
        }
    }
}

/// Reward-uncertainty widths `C^h(s, a)` and the log factors `l^h(s, a)`
/// they were built from, `[H, S, A]` each. `C^H` is implicitly zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceTable {
    widths: Array3<f64>,
    log_factor: Array3<f64>,
    delta: f64,
    r_max: f64,
}

impl ConfidenceTable {
    pub fn widths(&self) -> &Array3<f64> {
        &self.widths
    }

    pub fn log_factor(&self) -> &Array3<f64> {
        &self.log_factor
    }

    /// `C^h(s, a)`, zero at `h = H`.
    pub fn width(&self, h: usize, s: usize, a: usize) -> f64 {
        if h >= self.widths.dim().0 {
            0.0
        } else {
            self.widths[[h, s, a]]
        }
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn horizon(&self) -> usize {
        self.widths.dim().0
    }

    pub(crate) fn from_parts(
        widths: Array3<f64>,
        log_factor: Array3<f64>,
        delta: f64,
        r_max: f64,
    ) -> Self {
        Self {
            widths,
            log_factor,
            delta,
            r_max,
        }
    }
}

pub(crate) fn check_delta(delta: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 1.0) {
        return config(format!("delta must lie in (0, 1), got {delta}"));
    }
    Ok(())
}

/// `l = log(24 S A H (n+)^2 / delta)` with `n+ = max(1, n)`.
pub fn log_factor(
    num_states: usize,
    num_actions: usize,
    horizon: usize,
    count: u64,
    delta: f64,
) -> f64 {
    let n = count.max(1) as f64;
    (24.0 * (num_states * num_actions * horizon) as f64 * n * n / delta).ln()
}

/// `(H - h) r_max min(1, factor sqrt(2 l / n_eff))`.
pub(crate) fn width_value(
    stage_scale: f64,
    factor: f64,
    log_factor: f64,
    effective_count: f64,
) -> f64 {
    stage_scale * (factor * (2.0 * log_factor / effective_count).sqrt()).min(1.0)
}

/// `C^h(s, a) = (H - h) r_max min(1, 2 sqrt(2 l^h(s, a) / n+))`.
pub fn reward_uncertainty(counts: &VisitCounts, delta: f64, r_max: f64) -> Result<ConfidenceTable> {
    uncertainty_with(counts, delta, r_max, WidthKind::Irl)
}

/// Widths with the chosen error terms.
pub fn uncertainty_with(
    counts: &VisitCounts,
    delta: f64,
    r_max: f64,
    kind: WidthKind,
) -> Result<ConfidenceTable> {
    check_delta(delta)?;
    if !(r_max > 0.0 && r_max.is_finite()) {
        return config(format!("r_max must be positive, got {r_max}"));
    }
    let (horizon, ns, na, _) = counts.transitions.dim();
    let n = counts.sa_counts();
    let mut widths = Array3::<f64>::zeros((horizon, ns, na));
    let mut ell = Array3::<f64>::zeros((horizon, ns, na));
    for ((h, s, a), &count) in n.indexed_iter() {
        let l = log_factor(ns, na, horizon, count, delta);
        ell[[h, s, a]] = l;
        let scale = (horizon - h) as f64 * r_max;
        widths[[h, s, a]] = width_value(scale, kind.factor(), l, count.max(1) as f64);
    }
    Ok(ConfidenceTable::from_parts(widths, ell, delta, r_max))
}
