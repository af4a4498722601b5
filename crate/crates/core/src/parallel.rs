//! Seed-level parallelism. Runs are independent, so a seed sweep is a plain
//! data-parallel map; with the `parallel` feature disabled (or when
//! [`Execution::Sequential`] is requested) it runs on the calling thread.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Execution {
    #[default]
    Parallel,
    Sequential,
}

impl Execution {
    /// Whether parallel execution is compiled in.
    pub const fn parallel_available() -> bool {
        cfg!(feature = "parallel")
    }
}

/// Applies `f` to every seed, preserving order.
pub fn map_seeds<T, F>(seeds: &[u64], execution: Execution, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync + Send,
{
    match execution {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            seeds.par_iter().map(|&s| f(s)).collect()
        }
        _ => seeds.iter().map(|&s| f(s)).collect(),
    }
}
