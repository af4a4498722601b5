//! Random instances and brute-force oracles shared by the integration tests.
//! The oracles deliberately avoid the crate's planning and occupancy code.
#![allow(dead_code)]

pub mod checks;

use aceirl_core::mdp::{RewardTable, StagePolicy, TabularMdp};
use ndarray::{Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn simplex_row(rng: &mut impl Rng, n: usize, sparse: bool) -> Vec<f64> {
    let mut w: Vec<f64> = (0..n)
        .map(|_| {
            if sparse && rng.gen_bool(0.4) {
                0.0
            } else {
                rng.gen::<f64>() + 1e-3
            }
        })
        .collect();
    if w.iter().all(|&x| x == 0.0) {
        w[rng.gen_range(0..n)] = 1.0;
    }
    let z: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= z);
    w
}

pub fn random_mdp(rng: &mut impl Rng, ns: usize, na: usize, horizon: usize) -> TabularMdp {
    let mut p = Array3::<f64>::zeros((ns, na, ns));
    for s in 0..ns {
        for a in 0..na {
            for (t, w) in simplex_row(rng, ns, true).into_iter().enumerate() {
                p[[s, a, t]] = w;
            }
        }
    }
    TabularMdp::new(p, horizon, rng.gen_range(0..ns)).unwrap()
}

pub fn random_reward(rng: &mut impl Rng, horizon: usize, ns: usize, na: usize) -> RewardTable {
    RewardTable::new(
        Array3::from_shape_fn((horizon, ns, na), |_| rng.gen::<f64>()),
        1.0,
    )
    .unwrap()
}

pub fn random_policy(rng: &mut impl Rng, horizon: usize, ns: usize, na: usize) -> StagePolicy {
    let mut probs = Array3::<f64>::zeros((horizon, ns, na));
    for h in 0..horizon {
        for s in 0..ns {
            for (a, w) in simplex_row(rng, na, true).into_iter().enumerate() {
                probs[[h, s, a]] = w;
            }
        }
    }
    StagePolicy::new(probs).unwrap()
}

pub fn random_deterministic(
    rng: &mut impl Rng,
    horizon: usize,
    ns: usize,
    na: usize,
) -> StagePolicy {
    let actions = Array2::from_shape_fn((horizon, ns), |_| rng.gen_range(0..na));
    StagePolicy::deterministic(&actions, na).unwrap()
}

/// Occupancy of `policy` started at `(h0, s0)` by explicit forward sums.
pub fn brute_occupancy(
    mdp: &TabularMdp,
    policy: &Array3<f64>,
    h0: usize,
    s0: usize,
) -> Array3<f64> {
    let (ns, na, horizon) = (mdp.num_states(), mdp.num_actions(), mdp.horizon());
    let p = mdp.transitions();
    let mut rho = Array3::<f64>::zeros((horizon, ns, na));
    let mut dist = vec![0.0; ns];
    dist[s0] = 1.0;
    for h in h0..horizon {
        let mut next = vec![0.0; ns];
        for s in 0..ns {
            for a in 0..na {
                let m = dist[s] * policy[[h, s, a]];
                rho[[h, s, a]] = m;
                for t in 0..ns {
                    next[t] += m * p[[s, a, t]];
                }
            }
        }
        dist = next;
    }
    rho
}

/// Every deterministic policy, as `[H, S]` action tables.
pub fn all_deterministic(horizon: usize, ns: usize, na: usize) -> Vec<Array2<usize>> {
    let cells = horizon * ns;
    let total = na.pow(cells as u32);
    (0..total)
        .map(|mut code| {
            Array2::from_shape_fn((horizon, ns), |_| {
                let a = code % na;
                code /= na;
                a
            })
        })
        .collect()
}

pub fn one_hot(actions: &Array2<usize>, na: usize) -> Array3<f64> {
    let (horizon, ns) = actions.dim();
    Array3::from_shape_fn((horizon, ns, na), |(h, s, a)| {
        if actions[[h, s]] == a {
            1.0
        } else {
            0.0
        }
    })
}

pub fn dot(x: &Array3<f64>, y: &Array3<f64>) -> f64 {
    x.iter().zip(y.iter()).map(|(a, b)| a * b).sum()
}

/// Exact `max <rho, c>` over occupancies from `s0` subject to
/// `<rho, r> >= threshold`, by enumerating deterministic policies. With one
/// linear side constraint an optimal vertex mixes at most two of them.
pub fn constrained_lp_oracle(
    mdp: &TabularMdp,
    c: &Array3<f64>,
    r: &Array3<f64>,
    threshold: f64,
) -> Option<f64> {
    let (ns, na, horizon) = (mdp.num_states(), mdp.num_actions(), mdp.horizon());
    let s0 = mdp.initial_state();
    let points: Vec<(f64, f64)> = all_deterministic(horizon, ns, na)
        .iter()
        .map(|pi| {
            let rho = brute_occupancy(mdp, &one_hot(pi, na), 0, s0);
            (dot(&rho, c), dot(&rho, r) - threshold)
        })
        .collect();
    let feasible: Vec<_> = points.iter().filter(|p| p.1 >= 0.0).collect();
    let infeasible: Vec<_> = points.iter().filter(|p| p.1 < 0.0).collect();
    let mut best = feasible
        .iter()
        .map(|p| p.0)
        .fold(f64::NEG_INFINITY, f64::max);
    if !best.is_finite() {
        return None;
    }
    for &&(a_in, b_in) in &feasible {
        for &&(a_out, b_out) in &infeasible {
            // theta * b_in + (1 - theta) * b_out = 0
            let theta = -b_out / (b_in - b_out);
            best = best.max(theta * a_in + (1.0 - theta) * a_out);
        }
    }
    Some(best)
}
