//! Seeded experiment grids and their on-disk results.
//!
//! An experiment directory holds
//!
//! - `experiment.json`: the [`ExperimentSpec`] that produced it;
//! - `seeds/seed_<n>.csv`: one checkpoint table per seed;
//! - `checkpoints.csv`: all seeds merged, in seed order;
//! - `summary.json`: the [`Summary`] of samples needed to reach the regret
//!   threshold.
//!
//! Checkpoint tables have the columns `seed, iteration, samples, epsilon_k,
//! normalized_regret`. Summaries can be recomputed from them alone with
//! [`summarize`].

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::baselines::run_algorithm;
use crate::envs::EnvKind;
use crate::error::{config, Error, Result};
use crate::explore::{Algorithm, RunConfig, RunResult};
use crate::feasible::IrlMethod;
use crate::parallel::{map_seeds, Execution};

pub const DEFAULT_REGRET_THRESHOLD: f64 = 0.4;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub env: EnvKind,
    pub algorithm: Algorithm,
    pub epsilon: f64,
    pub delta: f64,
    pub episodes_per_iter: usize,
    pub max_iterations: usize,
    pub seeds: Vec<u64>,
    pub regret_threshold: f64,
    /// Write every `checkpoint_every`-th iteration (the last is always kept).
    pub checkpoint_every: usize,
    /// End each run once it crosses the regret threshold.
    pub stop_at_threshold: bool,
    pub irl: IrlMethod,
    pub n_max: Option<usize>,
    pub output_dir: PathBuf,
    #[serde(skip)]
    pub execution: Execution,
}

impl ExperimentSpec {
    pub fn new(
        env: EnvKind,
        algorithm: Algorithm,
        seeds: Vec<u64>,
        output_dir: impl Into<PathBuf>,
    ) -> Self {
        Self {
            env,
            algorithm,
            epsilon: 0.1,
            delta: 0.1,
            episodes_per_iter: 50,
            max_iterations: RunConfig::DEFAULT_MAX_ITERATIONS,
            seeds,
            regret_threshold: DEFAULT_REGRET_THRESHOLD,
            checkpoint_every: 1,
            stop_at_threshold: true,
            irl: IrlMethod::default(),
            n_max: None,
            output_dir: output_dir.into(),
            execution: Execution::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return config("at least one seed is required");
        }
        if !(self.regret_threshold > 0.0 && self.regret_threshold < 1.0) {
            return config(format!(
                "regret threshold must lie in (0, 1), got {}",
                self.regret_threshold
            ));
        }
        if self.checkpoint_every == 0 {
            return config("checkpoint_every must be at least 1");
        }
        self.run_config(0).validate()
    }

    pub fn run_config(&self, seed: u64) -> RunConfig {
        RunConfig {
            epsilon: self.epsilon,
            delta: self.delta,
            episodes_per_iter: self.episodes_per_iter,
            max_iterations: self.max_iterations,
            seed,
            algorithm: self.algorithm,
            irl: self.irl,
            n_max: self.n_max,
            stop_regret: self.stop_at_threshold.then_some(self.regret_threshold),
        }
    }
}

/// One row of a checkpoint table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointRow {
    pub seed: u64,
    pub iteration: usize,
    pub samples: u64,
    pub epsilon_k: f64,
    pub normalized_regret: f64,
}

/// Samples needed to reach the regret threshold, one cell of the grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub env: String,
    pub algo: String,
    pub ne: usize,
    pub mean_samples: f64,
    pub stderr_samples: f64,
    pub num_seeds: usize,
    /// Seeds that never reached the threshold; they count with their final
    /// sample number.
    pub num_timeouts: usize,
}

/// Builds one environment per seed, runs the algorithm and writes the
/// experiment directory.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Summary> {
    spec.validate()?;
    let results = map_seeds(&spec.seeds, spec.execution, |seed| -> Result<RunResult> {
        let env = spec.env.build(seed)?;
        run_algorithm(&env.mdp, &env.reward, &env.expert, &spec.run_config(seed))
    });
    let results = results.into_iter().collect::<Result<Vec<_>>>()?;

    let dir = &spec.output_dir;
    let seed_dir = dir.join("seeds");
    fs::create_dir_all(&seed_dir)?;
    fs::write(
        dir.join("experiment.json"),
        serde_json::to_string_pretty(spec)?,
    )?;

    let mut merged = Vec::new();
    for (&seed, result) in spec.seeds.iter().zip(&results) {
        let rows = checkpoint_rows(seed, result, spec.checkpoint_every);
        write_rows(&seed_dir.join(format!("seed_{seed}.csv")), &rows)?;
        merged.extend(rows);
    }
    write_rows(&dir.join("checkpoints.csv"), &merged)?;

    let summary = summarize_rows(spec, &merged);
    fs::write(
        dir.join("summary.json"),
        serde_json::to_string_pretty(&summary)?,
    )?;
    Ok(summary)
}

fn checkpoint_rows(seed: u64, result: &RunResult, every: usize) -> Vec<CheckpointRow> {
    let last = result.checkpoints.len().saturating_sub(1);
    result
        .checkpoints
        .iter()
        .enumerate()
        .filter(|(i, c)| c.iteration % every == 0 || *i == last)
        .map(|(_, c)| CheckpointRow {
            seed,
            iteration: c.iteration,
            samples: c.samples,
            epsilon_k: c.epsilon,
            normalized_regret: c.normalized_regret,
        })
        .collect()
}

fn write_rows(path: &Path, rows: &[CheckpointRow]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_rows(path: &Path) -> Result<Vec<CheckpointRow>> {
    if !path.is_file() {
        return Err(Error::Data(format!(
            "missing checkpoint file {}",
            path.display()
        )));
    }
    let mut reader = csv::Reader::from_path(path)?;
    Ok(reader
        .deserialize()
        .collect::<std::result::Result<Vec<_>, _>>()?)
}

/// First-crossing sample counts for a set of checkpoint rows.
fn summarize_rows(spec: &ExperimentSpec, rows: &[CheckpointRow]) -> Summary {
    let mut per_seed: BTreeMap<u64, Vec<&CheckpointRow>> = BTreeMap::new();
    for row in rows {
        per_seed.entry(row.seed).or_default().push(row);
    }
    let mut samples = Vec::with_capacity(per_seed.len());
    let mut timeouts = 0;
    for seed_rows in per_seed.values() {
        match seed_rows
            .iter()
            .find(|r| r.normalized_regret < spec.regret_threshold)
        {
            Some(r) => samples.push(r.samples as f64),
            None => {
                timeouts += 1;
                samples.push(seed_rows.iter().map(|r| r.samples).max().unwrap_or(0) as f64);
            }
        }
    }
    let (mean, stderr) = mean_and_stderr(&samples);
    Summary {
        env: spec.env.name().to_string(),
        algo: spec.algorithm.name().to_string(),
        ne: spec.episodes_per_iter,
        mean_samples: mean,
        stderr_samples: stderr,
        num_seeds: samples.len(),
        num_timeouts: timeouts,
    }
}

/// Sample mean and standard error of the mean (`n - 1` variance).
pub fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Recomputes the summary of every experiment directory under `dir` from
/// its spec and merged checkpoints. An empty directory yields an empty grid.
pub fn summarize(dir: &Path) -> Result<Vec<Summary>> {
    if !dir.is_dir() {
        return Err(Error::Data(format!("{} is not a directory", dir.display())));
    }
    let mut specs = Vec::new();
    find_specs(dir, &mut specs)?;
    specs.sort();
    let mut grid = Vec::with_capacity(specs.len());
    for spec_path in specs {
        let spec: ExperimentSpec = serde_json::from_str(&fs::read_to_string(&spec_path)?)?;
        let exp_dir = spec_path.parent().unwrap_or(dir);
        let rows = read_rows(&exp_dir.join("checkpoints.csv"))?;
        grid.push(summarize_rows(&spec, &rows));
    }
    grid.sort_by(|a, b| (&a.env, &a.algo, a.ne).cmp(&(&b.env, &b.algo, b.ne)));
    Ok(grid)
}

fn find_specs(dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            find_specs(&path, out)?;
        } else if path.file_name().is_some_and(|n| n == "experiment.json") {
            out.push(path);
        }
    }
    Ok(())
}
