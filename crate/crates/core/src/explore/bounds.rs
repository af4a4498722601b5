use ndarray::{Array2, Array3};
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::estimation::ConfidenceTable;
use crate::mdp::{expected_next, optimal_plan, StagePolicy, TabularMdp};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundKind {
    /// Maximum over all actions at the next state.
    Eb1,
    /// Maximum over plausibly optimal policies only.
    Eb2,
}

/// Error bounds `E^h(s, a)`, `[H + 1, S, A]` with `E^H = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorBoundTable {
    values: Array3<f64>,
    kind: BoundKind,
}

impl ErrorBoundTable {
    pub fn values(&self) -> &Array3<f64> {
        &self.values
    }

    pub fn kind(&self) -> BoundKind {
        self.kind
    }

    pub fn get(&self, h: usize, s: usize, a: usize) -> f64 {
        self.values[[h, s, a]]
    }

    /// `max_a E^0(s, a)`.
    pub fn root_max(&self, state: usize) -> f64 {
        self.values
            .slice(ndarray::s![0, state, ..])
            .iter()
            .copied()
            .fold(0.0, f64::max)
    }

    /// Lowest-index argmax of `E^h(s, .)` for every `(h, s)`, `h < H`.
    pub fn greedy_actions(&self) -> Array2<usize> {
        let (h1, ns, _) = self.values.dim();
        Array2::from_shape_fn((h1 - 1, ns), |(h, s)| {
            let row = self.values.slice(ndarray::s![h, s, ..]);
            let best = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let tol = 1e-12 * best.abs().max(1.0);
            row.iter().position(|&e| e >= best - tol).unwrap_or(0)
        })
    }
}

/// `E^h = min((H - h) r_max, C^h + sum_s' Phat(s'|s, a) max_a' E^{h+1}(s', a'))`.
pub fn compute_eb1(widths: &ConfidenceTable, est_mdp: &TabularMdp) -> Result<ErrorBoundTable> {
    est_mdp.check_stage_table("confidence widths", widths.widths().dim())?;
    let (ns, na, horizon) = (
        est_mdp.num_states(),
        est_mdp.num_actions(),
        est_mdp.horizon(),
    );
    let r_max = widths.r_max();
    let p = est_mdp.flat_transitions();
    let c = widths.widths();
    let mut e = Array3::<f64>::zeros((horizon + 1, ns, na));
    let mut next_max = vec![0.0; ns];
    for h in (0..horizon).rev() {
        let cap = (horizon - h) as f64 * r_max;
        for s in 0..ns {
            for a in 0..na {
                let base = (s * na + a) * ns;
                let future: f64 = p[base..base + ns]
                    .iter()
                    .zip(&next_max)
                    .map(|(p, m)| p * m)
                    .sum();
                e[[h, s, a]] = cap.min(c[[h, s, a]] + future);
            }
        }
        for (s, m) in next_max.iter_mut().enumerate() {
            *m = e
                .slice(ndarray::s![h, s, ..])
                .iter()
                .copied()
                .fold(0.0, f64::max);
        }
    }
    Ok(ErrorBoundTable {
        values: e,
        kind: BoundKind::Eb1,
    })
}

/// The policy that acts greedily on `E^h(s, .)`.
///
/// While counts are small every `E` sits at its cap `(H - h) r_max`, so the
/// argmax is a large tie. Ties are broken by the uncapped action values of
/// the estimated MDP with reward `C` (the planning problem the greedy rule
/// relaxes); whatever is still tied after that gets equal probability, so
/// unexplored actions are not biased towards low indices.
pub fn greedy_exploration_policy(
    widths: &ConfidenceTable,
    est_mdp: &TabularMdp,
) -> Result<StagePolicy> {
    let e = compute_eb1(widths, est_mdp)?;
    let (ns, na, horizon) = (
        est_mdp.num_states(),
        est_mdp.num_actions(),
        est_mdp.horizon(),
    );
    let c = widths.widths();
    let plan = optimal_plan(est_mdp, c);
    let p = est_mdp.flat_transitions();
    let mut weights = Array3::<f64>::zeros((horizon, ns, na));
    for h in 0..horizon {
        let next = plan.values.row(h + 1);
        let next = next.as_slice().expect("standard layout values");
        for s in 0..ns {
            let row = e.values.slice(ndarray::s![h, s, ..]);
            let best = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let tol = 1e-12 * best.abs().max(1.0);
            let candidates: Vec<(usize, f64)> = (0..na)
                .filter(|&a| row[a] >= best - tol)
                .map(|a| (a, c[[h, s, a]] + expected_next(p, ns, s * na + a, next)))
                .collect();
            let top = candidates
                .iter()
                .map(|x| x.1)
                .fold(f64::NEG_INFINITY, f64::max);
            let tol = 1e-12 * top.abs().max(1.0);
            for &(a, q) in &candidates {
                if q >= top - tol {
                    weights[[h, s, a]] = 1.0;
                }
            }
        }
    }
    Ok(StagePolicy::from_weights(&weights))
}
