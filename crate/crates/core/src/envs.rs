//! Benchmark environments. Each constructor returns the MDP, the true
//! reward (`r_max = 1`) and a deterministic expert computed by backward
//! induction.
//!
//! Environments with a random start use an extra auxiliary initial state
//! whose every action leads to the start distribution; its reward is zero.

use std::fmt;
use std::str::FromStr;

use ndarray::Array3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{backward_induction, RewardTable, StagePolicy, TabularMdp};

#[derive(Clone, Debug)]
pub struct Environment {
    pub kind: EnvKind,
    pub mdp: TabularMdp,
    pub reward: RewardTable,
    pub expert: StagePolicy,
}

impl Environment {
    fn new(kind: EnvKind, mdp: TabularMdp, reward: RewardTable) -> Result<Self> {
        let (_, expert) = backward_induction(&mdp, &reward)?;
        Ok(Self {
            kind,
            mdp,
            reward,
            expert,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvKind {
    FourPaths,
    DoubleChain,
    Chain,
    Gridworld,
    RandomMdp,
}

impl EnvKind {
    pub const ALL: [EnvKind; 5] = [
        EnvKind::FourPaths,
        EnvKind::DoubleChain,
        EnvKind::Chain,
        EnvKind::Gridworld,
        EnvKind::RandomMdp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EnvKind::FourPaths => "four_paths",
            EnvKind::DoubleChain => "double_chain",
            EnvKind::Chain => "chain",
            EnvKind::Gridworld => "gridworld",
            EnvKind::RandomMdp => "random_mdp",
        }
    }

    /// Builds the environment; randomised ones draw from `seed`.
    pub fn build(self, seed: u64) -> Result<Environment> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        match self {
            EnvKind::FourPaths => make_four_paths(&mut rng),
            EnvKind::DoubleChain => make_double_chain(DOUBLE_CHAIN_LENGTH),
            EnvKind::Chain => make_chain(),
            EnvKind::Gridworld => make_gridworld(),
            EnvKind::RandomMdp => make_random_mdp(&mut rng),
        }
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnvKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EnvKind::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = EnvKind::ALL.iter().map(|e| e.name()).collect();
                Error::Config(format!(
                    "unknown environment '{s}' (expected one of: {})",
                    names.join(", ")
                ))
            })
    }
}

pub const DOUBLE_CHAIN_LENGTH: usize = 31;

const PATH_LEN: usize = 10;

/// Index of position `pos` (1-based) on path `path`; position 0 is the centre.
fn path_state(path: usize, pos: usize) -> usize {
    if pos == 0 {
        0
    } else {
        1 + path * PATH_LEN + (pos - 1)
    }
}

/// A centre state with four paths of ten states. Action `i` heads along
/// path `i` (outwards on path `i`, inwards on the opposite path) and fails
/// with probability `p_i ~ U(0, 0.3)`, moving the opposite way; at the
/// centre a failure steps onto the opposite path. Sideways actions keep the
/// agent in place. A random path end is the goal, H = 20.
pub fn make_four_paths<R: Rng + ?Sized>(rng: &mut R) -> Result<Environment> {
    let fail: [f64; 4] = std::array::from_fn(|_| rng.gen_range(0.0..0.3));
    let goal_path = rng.gen_range(0..4);
    four_paths_with(fail, goal_path)
}

/// Four Paths with explicit failure probabilities and goal path.
pub fn four_paths_with(fail: [f64; 4], goal_path: usize) -> Result<Environment> {
    let ns = 1 + 4 * PATH_LEN;
    let mut p = Array3::<f64>::zeros((ns, 4, ns));
    // moving in direction d from (path, pos)
    let step = |path: usize, pos: usize, d: usize| -> usize {
        if pos == 0 {
            path_state(d, 1)
        } else if d == path {
            path_state(path, (pos + 1).min(PATH_LEN))
        } else if d == (path + 2) % 4 {
            path_state(path, pos - 1)
        } else {
            path_state(path, pos)
        }
    };
    for s in 0..ns {
        let (path, pos) = if s == 0 {
            (0, 0)
        } else {
            ((s - 1) / PATH_LEN, (s - 1) % PATH_LEN + 1)
        };
        for a in 0..4 {
            let opposite = (a + 2) % 4;
            p[[s, a, step(path, pos, a)]] += 1.0 - fail[a];
            p[[s, a, step(path, pos, opposite)]] += fail[a];
        }
    }
    let mdp = TabularMdp::new(p, 20, 0)?;
    let goal = path_state(goal_path, PATH_LEN);
    let reward = state_reward(20, ns, 4, |s| if s == goal { 1.0 } else { 0.0 })?;
    Environment::new(EnvKind::FourPaths, mdp, reward)
}

/// `length` states in a line, actions left/right that slip to the other
/// direction with probability 0.1, reward at the right end, start in the
/// middle, H = 20.
pub fn make_double_chain(length: usize) -> Result<Environment> {
    if length < 3 || length % 2 == 0 {
        return Err(Error::Config(format!(
            "chain length must be odd and at least 3, got {length}"
        )));
    }
    let mut p = Array3::<f64>::zeros((length, 2, length));
    for s in 0..length {
        let left = s.saturating_sub(1);
        let right = (s + 1).min(length - 1);
        p[[s, 0, left]] += 0.9;
        p[[s, 0, right]] += 0.1;
        p[[s, 1, right]] += 0.9;
        p[[s, 1, left]] += 0.1;
    }
    let mdp = TabularMdp::new(p, 20, (length - 1) / 2)?;
    let reward = state_reward(20, length, 2, |s| if s == length - 1 { 1.0 } else { 0.0 })?;
    Environment::new(EnvKind::DoubleChain, mdp, reward)
}

/// Five chain states plus an absorbing-ish state `s_u` (index 5), ten
/// actions and an auxiliary start (index 6) leading uniformly to the six
/// states. The last action moves right w.p. 0.7 (else to `s_u`); the others
/// w.p. 0.3. From `s_u` the last action returns to `s_1` w.p. 0.05, the
/// others w.p. 0.01. Reward 1 outside `s_u`, H = 10.
pub fn make_chain() -> Result<Environment> {
    const CHAIN: usize = 5;
    let su = CHAIN;
    let aux = CHAIN + 1;
    let (ns, na) = (CHAIN + 2, 10);
    let mut p = Array3::<f64>::zeros((ns, na, ns));
    for a in 0..na {
        let best = a == na - 1;
        for s in 0..CHAIN {
            let right = (s + 1).min(CHAIN - 1);
            let forward = if best { 0.7 } else { 0.3 };
            p[[s, a, right]] += forward;
            p[[s, a, su]] += 1.0 - forward;
        }
        let back = if best { 0.05 } else { 0.01 };
        p[[su, a, 0]] = back;
        p[[su, a, su]] = 1.0 - back;
        for t in 0..=su {
            p[[aux, a, t]] = 1.0 / (su + 1) as f64;
        }
    }
    let mdp = TabularMdp::new(p, 10, aux)?;
    let reward = state_reward(10, ns, na, |s| if s < CHAIN { 1.0 } else { 0.0 })?;
    Environment::new(EnvKind::Chain, mdp, reward)
}

/// Row-major 3x3 grid (cell `3 row + col`), actions up/right/down/left.
/// With probability 0.3 the move goes in a uniformly random direction.
/// Off-grid moves stay put; a rightward move out of the centre obstacle
/// stays there w.p. 0.8. The goal is the right cell of the middle row.
/// The auxiliary start (index 9) leads uniformly to the eight non-goal
/// cells. H = 10.
pub fn make_gridworld() -> Result<Environment> {
    const OBSTACLE: usize = 4;
    const GOAL: usize = 5;
    const AUX: usize = 9;
    let (ns, na) = (10, 4);
    let moves: [(i64, i64); 4] = [(-1, 0), (0, 1), (1, 0), (0, -1)];
    let mut p = Array3::<f64>::zeros((ns, na, ns));
    for cell in 0..9 {
        let (row, col) = ((cell / 3) as i64, (cell % 3) as i64);
        for a in 0..na {
            for (d, &(dr, dc)) in moves.iter().enumerate() {
                let prob = if d == a { 0.7 } else { 0.0 } + 0.3 / 4.0;
                let (r2, c2) = (row + dr, col + dc);
                let target = if (0..3).contains(&r2) && (0..3).contains(&c2) {
                    (r2 * 3 + c2) as usize
                } else {
                    cell
                };
                if cell == OBSTACLE && d == 1 {
                    p[[cell, a, cell]] += 0.8 * prob;
                    p[[cell, a, target]] += 0.2 * prob;
                } else {
                    p[[cell, a, target]] += prob;
                }
            }
        }
    }
    for a in 0..na {
        for cell in (0..9).filter(|&c| c != GOAL) {
            p[[AUX, a, cell]] = 1.0 / 8.0;
        }
    }
    let mdp = TabularMdp::new(p, 10, AUX)?;
    let reward = state_reward(10, ns, na, |s| if s == GOAL { 1.0 } else { 0.0 })?;
    Environment::new(EnvKind::Gridworld, mdp, reward)
}

/// Nine states, four actions, H = 10; transition rows and the start
/// distribution are uniform draws normalised to one, rewards `U(0, 1)` per
/// state-action. The start distribution hangs off auxiliary state 9.
pub fn make_random_mdp<R: Rng + ?Sized>(rng: &mut R) -> Result<Environment> {
    const N: usize = 9;
    let (ns, na, horizon) = (N + 1, 4, 10);
    let mut p = Array3::<f64>::zeros((ns, na, ns));
    for s in 0..N {
        for a in 0..na {
            let row: Vec<f64> = (0..N).map(|_| rng.gen_range(f64::EPSILON..1.0)).collect();
            let total: f64 = row.iter().sum();
            for (t, w) in row.into_iter().enumerate() {
                p[[s, a, t]] = w / total;
            }
        }
    }
    let start: Vec<f64> = (0..N).map(|_| rng.gen_range(f64::EPSILON..1.0)).collect();
    let total: f64 = start.iter().sum();
    for a in 0..na {
        for (t, w) in start.iter().enumerate() {
            p[[N, a, t]] = w / total;
        }
    }
    let r: Vec<f64> = (0..N * na).map(|_| rng.gen_range(0.0..1.0)).collect();
    let values = Array3::from_shape_fn(
        (horizon, ns, na),
        |(_, s, a)| if s < N { r[s * na + a] } else { 0.0 },
    );
    let mdp = TabularMdp::new(p, horizon, N)?;
    Environment::new(EnvKind::RandomMdp, mdp, RewardTable::new(values, 1.0)?)
}

fn state_reward(
    horizon: usize,
    ns: usize,
    na: usize,
    f: impl Fn(usize) -> f64,
) -> Result<RewardTable> {
    RewardTable::new(
        Array3::from_shape_fn((horizon, ns, na), |(_, s, _)| f(s)),
        1.0,
    )
}
