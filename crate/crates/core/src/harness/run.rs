use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;

use super::config::RunConfig;
use super::record::{
    read_generations, BestRecord, CandidateRecord, DistributionRecord, GenerationRecord, RunHeader, RunRecord,
    RunSummary, TimingRecord, HEADER_FILE, RECORD_FILE, SUMMARY_FILE, TIMING_FILE,
};
use crate::backends::Backend;
use crate::optimizer::{Bounds, DistributionState};
use crate::{rng, Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RunOptions {
    /// Continue from the last complete generation found in the output
    /// directory instead of starting over.
    pub resume: bool,
}

/// Shot seed of candidate `id` in generation `generation`.
pub fn shot_seed(run_seed: u64, generation: u64, id: usize) -> u64 {
    rng::derive_seed(&[run_seed, generation, id as u64])
}

pub fn run(config: &RunConfig) -> Result<RunRecord> {
    run_with(config, RunOptions::default())
}

fn write_line<T: serde::Serialize>(file: &mut File, value: &T) -> Result<()> {
    let mut line = serde_json::to_string(value)?;
    line.push('\n');
    file.write_all(line.as_bytes())?;
    file.flush()?;
    Ok(())
}

/// Ask, evaluate in parallel, tell, for the configured number of
/// generations. Every generation is appended to `record.jsonl` as soon as it
/// completes.
pub fn run_with(config: &RunConfig, options: RunOptions) -> Result<RunRecord> {
    config.validate()?;
    let backend = config.backend()?;
    run_with_backend(config, backend.as_ref(), options)
}

/// [`run_with`] against a caller-supplied device. Its parameter space must
/// have the configured dimension.
pub fn run_with_backend(config: &RunConfig, backend: &dyn Backend, options: RunOptions) -> Result<RunRecord> {
    config.validate()?;
    let space = backend.space().clone();
    if space.len() != config.space()?.len() {
        return Err(Error::Config(format!(
            "backend has {} parameters, the configuration {}",
            space.len(),
            config.space()?.len()
        )));
    }
    let params = config.strategy()?;
    let dir = &config.output_dir;
    std::fs::create_dir_all(dir)?;
    let header = RunHeader {
        config: config.clone(),
        names: space.names().map(str::to_string).collect(),
        units: space.entries().iter().map(|e| e.unit.clone()).collect(),
    };

    let record_path = dir.join(RECORD_FILE);
    let mut generations = Vec::new();
    if options.resume && record_path.exists() {
        let existing: RunHeader = serde_json::from_str(&std::fs::read_to_string(dir.join(HEADER_FILE))?)
            .map_err(|e| Error::Record(format!("run header: {e}")))?;
        if existing != header {
            return Err(Error::Config(format!(
                "{} holds a run with a different configuration",
                dir.display()
            )));
        }
        let (done, valid_len) = read_generations(&record_path)?;
        OpenOptions::new().write(true).open(&record_path)?.set_len(valid_len)?;
        generations = done;
        let timing_path = dir.join(TIMING_FILE);
        let kept: String = std::fs::read_to_string(&timing_path)
            .unwrap_or_default()
            .lines()
            .filter(|l| {
                serde_json::from_str::<TimingRecord>(l).is_ok_and(|t| (t.generation as usize) < generations.len())
            })
            .map(|l| format!("{l}\n"))
            .collect();
        std::fs::write(&timing_path, kept)?;
        info!("resuming {} after {} generations", dir.display(), generations.len());
    } else {
        std::fs::write(dir.join(HEADER_FILE), serde_json::to_string_pretty(&header)? + "\n")?;
        File::create(&record_path)?;
        File::create(dir.join(TIMING_FILE))?;
    }
    let mut record_file = OpenOptions::new().append(true).open(&record_path)?;
    let mut timing_file = OpenOptions::new().create(true).append(true).open(dir.join(TIMING_FILE))?;

    let mut state = match generations.last() {
        Some(g) => g.state_after.clone(),
        None => DistributionState::new(config.initial_mean()?, config.optimizer.initial_sigma)?,
    };
    let mut best: Option<BestRecord> = generations.last().map(|g| g.best_so_far.clone());

    for generation in generations.len() as u64..config.generations as u64 {
        let started = Instant::now();
        let candidates = state.ask(&params)?;
        let outcomes: Vec<Result<_>> = candidates
            .par_iter()
            .map(|c| backend.evaluate(&c.x, shot_seed(config.seed, generation, c.id)))
            .collect();
        let worst = outcomes
            .iter()
            .filter_map(|o| o.as_ref().ok())
            .map(|e| e.cost)
            .filter(|c| c.is_finite())
            .fold(f64::NEG_INFINITY, f64::max);
        let worst = if worst.is_finite() { worst } else { f64::MAX };

        let mut rows = Vec::with_capacity(candidates.len());
        for (c, outcome) in candidates.iter().zip(outcomes) {
            let x = space.denormalize(&c.x)?;
            let row = match outcome {
                Ok(e) if e.cost.is_finite() => CandidateRecord {
                    id: c.id,
                    x,
                    x_normalized: c.x.clone(),
                    cost: e.cost,
                    value: e.value,
                    shots: e.shots,
                    error: None,
                },
                other => {
                    let msg = match other {
                        Ok(e) => format!("non-finite cost {}", e.cost),
                        Err(e) => e.to_string(),
                    };
                    warn!("generation {generation} candidate {}: {msg}; assigned worst cost", c.id);
                    CandidateRecord {
                        id: c.id,
                        x,
                        x_normalized: c.x.clone(),
                        cost: worst,
                        value: 0.0,
                        shots: None,
                        error: Some(msg),
                    }
                }
            };
            rows.push(row);
        }

        let evaluated: Vec<_> = candidates.iter().cloned().zip(rows.iter().map(|r| r.cost)).collect();
        let next = state.tell(&params, &evaluated)?;
        for r in &rows {
            if best.as_ref().is_none_or(|b| r.cost < b.cost) {
                best = Some(BestRecord {
                    generation,
                    id: r.id,
                    cost: r.cost,
                    x: r.x.clone(),
                });
            }
        }
        let line = GenerationRecord {
            generation,
            distribution: DistributionRecord {
                mean: state.mean.clone(),
                mean_physical: space.denormalize(&state.mean)?,
                step_size: state.step_size,
                covariance: state.covariance_snapshot().matrix,
            },
            mean_cost: rows.iter().map(|r| r.cost).sum::<f64>() / rows.len() as f64,
            candidates: rows,
            best_so_far: best.clone().expect("at least one candidate"),
            state_after: next.clone(),
        };
        write_line(&mut record_file, &line)?;
        write_line(
            &mut timing_file,
            &TimingRecord {
                generation,
                wall_clock_s: started.elapsed().as_secs_f64(),
            },
        )?;
        generations.push(line);
        state = next;
    }
    record_file.sync_data()?;

    let record = RunRecord::load(dir)?;
    let summary = summarize(&record, backend)?;
    std::fs::write(dir.join(SUMMARY_FILE), serde_json::to_string_pretty(&summary)? + "\n")?;
    super::export::export_record(&record, dir)?;
    info!(
        "best cost {} at generation {} with {}",
        summary.best.cost,
        summary.best.generation,
        format_named(&summary.best_named)
    );
    Ok(record)
}

pub(crate) fn format_named(named: &[(String, f64)]) -> String {
    named
        .iter()
        .map(|(n, v)| format!("{n}={v}"))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Best point and the noiseless cost at the final mean.
pub fn summarize(record: &RunRecord, backend: &dyn Backend) -> Result<RunSummary> {
    let best = record
        .best()
        .cloned()
        .ok_or_else(|| Error::Record("run has no generations".into()))?;
    let state = record.final_state().expect("non-empty record");
    let mean: Vec<f64> = match record.header.config.optimizer.bounds {
        Bounds::Unbounded => state.mean.clone(),
        _ => state.mean.iter().map(|v| v.clamp(0.0, 1.0)).collect(),
    };
    let space = backend.space();
    Ok(RunSummary {
        generations: record.generations.len(),
        evaluations: record.evaluations(),
        best_named: record.names().iter().cloned().zip(best.x.iter().copied()).collect(),
        best,
        final_mean_cost: backend.noiseless_cost(&mean)?,
        final_mean_physical: space.denormalize(&mean)?,
    })
}

/// Loads the summary written at the end of a run.
pub fn load_summary(dir: &Path) -> Result<RunSummary> {
    let text = std::fs::read_to_string(dir.join(SUMMARY_FILE))?;
    serde_json::from_str(&text).map_err(|e| Error::Record(format!("summary: {e}")))
}
