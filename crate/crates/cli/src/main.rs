use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use evotune::harness::{
    analyze, batch, load_summary, run_sweep, run_with, AnalyzeOptions, PairSpec, RunConfig, RunOptions, SweepConfig,
};
use evotune::Result;

#[derive(Parser)]
#[command(name = "tune", version, about = "Closed-loop CMA-ES calibration of simulated spin-qubit devices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one closed-loop optimization.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the configured seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the configured output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Continue an interrupted run in the output directory.
        #[arg(long)]
        resume: bool,
    },
    /// Repeat a run with seeds derived from the configured one.
    Batch {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        repeats: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Initialization-fidelity grid over two double-dot parameters.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sensitivity and covariance analysis of a run or batch directory.
    Analyze {
        #[arg(long)]
        record: PathBuf,
        #[arg(long)]
        hdmr: bool,
        /// Covariance entries to track, as `i,j` or `name,name`. Repeatable.
        #[arg(long = "cov-pairs")]
        cov_pairs: Vec<PairSpec>,
    },
}

fn load_run_config(path: &PathBuf, seed: Option<u64>, out: Option<PathBuf>) -> Result<RunConfig> {
    let mut config = RunConfig::load(path)?;
    if let Some(s) = seed {
        config.seed = s;
    }
    if let Some(o) = out {
        config.output_dir = o;
    }
    Ok(config)
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Run {
            config,
            seed,
            out,
            resume,
        } => {
            let config = load_run_config(&config, seed, out)?;
            run_with(&config, RunOptions { resume })?;
            let s = load_summary(&config.output_dir)?;
            let named: Vec<String> = s.best_named.iter().map(|(n, v)| format!("{n}={v}")).collect();
            println!(
                "best cost {} (generation {}, individual {}): {}",
                s.best.cost,
                s.best.generation,
                s.best.id,
                named.join(" ")
            );
        }
        Command::Batch {
            config,
            repeats,
            seed,
            out,
        } => {
            let config = load_run_config(&config, seed, out)?;
            let (_, summary) = batch(&config, repeats)?;
            for r in &summary.runs {
                match (&r.error, r.best_cost) {
                    (Some(e), _) => println!("{} seed {} failed: {e}", r.dir, r.seed),
                    (None, Some(c)) => println!("{} seed {} best cost {c}", r.dir, r.seed),
                    (None, None) => {}
                }
            }
            if let Some(s) = summary.best_cost {
                println!(
                    "best cost over {} runs: mean {} std {} min {} max {}",
                    s.count, s.mean, s.std, s.min, s.max
                );
            }
        }
        Command::Sweep { config, out } => {
            let mut config = SweepConfig::load(&config)?;
            if let Some(o) = out {
                config.output_dir = o;
            }
            let grid = run_sweep(&config)?;
            let (lo, hi) = grid
                .values
                .iter()
                .flatten()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
            println!(
                "{}x{} grid written to {}, fidelity range [{lo}, {hi}]",
                grid.axis1.values.len(),
                grid.axis2.values.len(),
                config.output_dir.display()
            );
        }
        Command::Analyze {
            record,
            hdmr,
            cov_pairs,
        } => {
            let report = analyze(&record, &AnalyzeOptions { hdmr, cov_pairs })?;
            if let Some(s) = &report.sensitivity {
                for p in s.ranked() {
                    println!("{:<24} S={:.4} contribution={:.4}", p.name, p.first_order, p.contribution);
                }
                println!("residual {:.4}", s.residual);
            }
            for t in &report.trajectories {
                println!(
                    "C[{},{}] ({}, {}): {} -> {} ({})",
                    t.pair.0, t.pair.1, t.names.0, t.names.1, t.first, t.last, t.file
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
