use log::warn;
use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use super::record::RunRecord;
use super::run::{load_summary, run};
use crate::analysis::{write_json, CovarianceSeries};
use crate::{rng, Error, Result};

pub const AGGREGATE_FILE: &str = "aggregate.json";
pub const COVARIANCE_AVERAGE_FILE: &str = "covariance_average.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchEntry {
    pub repeat: usize,
    pub seed: u64,
    /// Run directory relative to the batch directory.
    pub dir: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub best_cost: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_mean_cost: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub count: usize,
    pub mean: f64,
    pub std: f64,
    pub min: f64,
    pub max: f64,
}

impl Stats {
    pub fn of(values: &[f64]) -> Option<Stats> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Some(Stats {
            count: values.len(),
            mean,
            std: var.sqrt(),
            min: values.iter().cloned().fold(f64::INFINITY, f64::min),
            max: values.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub base_seed: u64,
    pub repeats: usize,
    pub runs: Vec<BatchEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub best_cost: Option<Stats>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub final_mean_cost: Option<Stats>,
}

/// Seed of repeat `k`. Repeat 0 keeps the base seed so a one-repeat batch
/// reproduces a plain run.
pub fn repeat_seed(base: u64, k: usize) -> u64 {
    if k == 0 {
        base
    } else {
        rng::derive_seed(&[base, k as u64])
    }
}

pub fn repeat_dir_name(k: usize) -> String {
    format!("run_{k:03}")
}

/// Independent repeats of one configuration, each in its own
/// `run_NNN` directory under `output_dir`. A failing repeat is recorded in
/// the aggregate and does not stop the others.
pub fn batch(config: &RunConfig, repeats: usize) -> Result<(Vec<RunRecord>, BatchSummary)> {
    if repeats < 1 {
        return Err(Error::Config("repeats must be at least 1".into()));
    }
    config.validate()?;
    let base_dir = &config.output_dir;
    std::fs::create_dir_all(base_dir)?;
    let mut records = Vec::new();
    let mut runs = Vec::new();
    for k in 0..repeats {
        let mut cfg = config.clone();
        cfg.seed = repeat_seed(config.seed, k);
        cfg.output_dir = base_dir.join(repeat_dir_name(k));
        let mut entry = BatchEntry {
            repeat: k,
            seed: cfg.seed,
            dir: repeat_dir_name(k),
            best_cost: None,
            final_mean_cost: None,
            error: None,
        };
        match run(&cfg).and_then(|r| Ok((load_summary(&cfg.output_dir)?, r))) {
            Ok((summary, record)) => {
                entry.best_cost = Some(summary.best.cost);
                entry.final_mean_cost = Some(summary.final_mean_cost);
                records.push(record);
            }
            // Configuration and fixture problems hit every repeat alike.
            Err(e @ (Error::Config(_) | Error::Fixture { .. })) => return Err(e),
            Err(e) => {
                warn!("repeat {k} failed: {e}");
                entry.error = Some(e.to_string());
            }
        }
        runs.push(entry);
    }
    let collect = |f: fn(&BatchEntry) -> Option<f64>| Stats::of(&runs.iter().filter_map(f).collect::<Vec<_>>());
    let summary = BatchSummary {
        base_seed: config.seed,
        repeats,
        best_cost: collect(|e| e.best_cost),
        final_mean_cost: collect(|e| e.final_mean_cost),
        runs,
    };
    write_json(&summary, &base_dir.join(AGGREGATE_FILE))?;
    if !records.is_empty() {
        let series: Vec<CovarianceSeries> = records.iter().map(|r| r.covariance_series()).collect::<Result<_>>()?;
        write_json(&CovarianceSeries::average(&series)?, &base_dir.join(COVARIANCE_AVERAGE_FILE))?;
    }
    Ok((records, summary))
}
