use std::path::PathBuf;

use aceirl_core::envs::EnvKind;
use aceirl_core::experiment::{
    run_experiment, summarize, ExperimentSpec, Summary, DEFAULT_REGRET_THRESHOLD,
};
use aceirl_core::explore::Algorithm;
use aceirl_core::feasible::IrlMethod;
use aceirl_core::parallel::Execution;
use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "aceirl",
    version,
    about = "Active exploration for inverse RL: experiment runner"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one (environment, algorithm) cell over a range of seeds.
    Run(RunArgs),
    /// Print the samples-to-threshold grid of every experiment under a directory.
    Summarize {
        #[arg(long = "in")]
        input: PathBuf,
        /// Emit one JSON object per line instead of a table.
        #[arg(long)]
        json: bool,
    },
}

#[derive(clap::Args)]
struct RunArgs {
    /// four_paths | double_chain | chain | gridworld | random_mdp
    #[arg(long)]
    env: EnvKind,
    /// aceirl_full | aceirl_greedy | uniform_generative | random | rf_ucrl | ace_rf
    #[arg(long)]
    algo: Algorithm,
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.1)]
    delta: f64,
    /// Episodes per iteration.
    #[arg(long, default_value_t = 50)]
    ne: usize,
    /// `a..b`, `a..=b` or a comma-separated list.
    #[arg(long, default_value = "0..50", value_parser = parse_seeds)]
    seeds: Seeds,
    #[arg(long, default_value_t = DEFAULT_REGRET_THRESHOLD)]
    threshold: f64,
    #[arg(long)]
    out: PathBuf,
    /// Keep running after the threshold is crossed (full regret curves).
    #[arg(long)]
    full_curves: bool,
    #[arg(long, default_value_t = 1)]
    checkpoint_every: usize,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Generative-model budget per iteration (uniform_generative only).
    #[arg(long)]
    n_max: Option<usize>,
    /// indicator | maxent
    #[arg(long, default_value = "indicator")]
    irl: IrlMethod,
    /// Run seeds on the calling thread.
    #[arg(long)]
    sequential: bool,
}

#[derive(Clone)]
struct Seeds(Vec<u64>);

fn parse_seeds(text: &str) -> Result<Seeds> {
    let text = text.trim();
    let seeds: Vec<u64> = if let Some((a, b)) = text.split_once("..=") {
        (a.trim().parse()?..=b.trim().parse()?).collect()
    } else if let Some((a, b)) = text.split_once("..") {
        (a.trim().parse()?..b.trim().parse()?).collect()
    } else {
        text.split(',')
            .map(|s| s.trim().parse::<u64>())
            .collect::<std::result::Result<_, _>>()?
    };
    if seeds.is_empty() {
        bail!("seed range `{text}` is empty");
    }
    Ok(Seeds(seeds))
}

fn run(args: RunArgs) -> Result<Summary> {
    let mut spec = ExperimentSpec::new(args.env, args.algo, args.seeds.0, args.out);
    spec.epsilon = args.epsilon;
    spec.delta = args.delta;
    spec.episodes_per_iter = args.ne;
    spec.regret_threshold = args.threshold;
    spec.stop_at_threshold = !args.full_curves;
    spec.checkpoint_every = args.checkpoint_every;
    if let Some(m) = args.max_iter {
        spec.max_iterations = m;
    }
    spec.n_max = args.n_max;
    spec.irl = args.irl;
    spec.execution = if args.sequential {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    run_experiment(&spec).with_context(|| format!("writing to {}", spec.output_dir.display()))
}

fn print_table(grid: &[Summary]) {
    println!(
        "{:<14} {:<20} {:>5} {:>12} {:>10} {:>6} {:>9}",
        "env", "algo", "ne", "mean", "stderr", "seeds", "timeouts"
    );
    for s in grid {
        println!(
            "{:<14} {:<20} {:>5} {:>12.1} {:>10.1} {:>6} {:>9}",
            s.env, s.algo, s.ne, s.mean_samples, s.stderr_samples, s.num_seeds, s.num_timeouts
        );
    }
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("error")).init();
    match Cli::parse().command {
        Command::Run(args) => {
            let summary = run(args)?;
            println!("{}", serde_json::to_string(&summary)?);
        }
        Command::Summarize { input, json } => {
            let grid = summarize(&input)?;
            if json {
                for s in &grid {
                    println!("{}", serde_json::to_string(s)?);
                }
            } else {
                print_table(&grid);
            }
        }
    }
    Ok(())
}
