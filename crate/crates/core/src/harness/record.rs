use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::RunConfig;
use crate::analysis::CovarianceSeries;
use crate::backends::ShotCounts;
use crate::optimizer::{CovarianceSnapshot, DistributionState};
use crate::{Error, Result};

pub const HEADER_FILE: &str = "run.json";
pub const RECORD_FILE: &str = "record.jsonl";
pub const TIMING_FILE: &str = "timing.jsonl";
pub const SUMMARY_FILE: &str = "summary.json";

/// Written once per run, before the first generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunHeader {
    pub config: RunConfig,
    pub names: Vec<String>,
    pub units: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub id: usize,
    /// Evaluated point in physical units.
    pub x: Vec<f64>,
    pub x_normalized: Vec<f64>,
    pub cost: f64,
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shots: Option<ShotCounts>,
    /// Set when the backend failed; `cost` is then the generation's worst.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// The distribution a generation was sampled from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionRecord {
    pub mean: Vec<f64>,
    pub mean_physical: Vec<f64>,
    pub step_size: f64,
    pub covariance: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestRecord {
    pub generation: u64,
    pub id: usize,
    pub cost: f64,
    pub x: Vec<f64>,
}

/// One line of `record.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub generation: u64,
    pub distribution: DistributionRecord,
    pub candidates: Vec<CandidateRecord>,
    pub mean_cost: f64,
    pub best_so_far: BestRecord,
    /// Optimizer state after this generation's update; resuming starts here.
    pub state_after: DistributionState,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingRecord {
    pub generation: u64,
    pub wall_clock_s: f64,
}

/// Everything persisted for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub header: RunHeader,
    pub generations: Vec<GenerationRecord>,
    /// Wall-clock seconds per generation, kept in a separate file so the
    /// record itself stays reproducible byte for byte.
    pub wall_clock_s: Vec<f64>,
}

fn record_error(path: &Path, line: usize, e: impl std::fmt::Display) -> Error {
    Error::Record(format!("{}:{}: {e}", path.display(), line + 1))
}

/// Complete generation lines of a record file and the byte length they
/// occupy. A final line without a newline or that does not parse is treated
/// as an interrupted write and dropped.
pub(crate) fn read_generations(path: &Path) -> Result<(Vec<GenerationRecord>, u64)> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    let mut valid = 0u64;
    let mut offset = 0usize;
    let lines: Vec<&str> = text.split_inclusive('\n').collect();
    for (i, line) in lines.iter().enumerate() {
        offset += line.len();
        let last = i + 1 == lines.len();
        if !line.ends_with('\n') {
            break;
        }
        match serde_json::from_str::<GenerationRecord>(line.trim_end()) {
            Ok(g) => {
                if g.generation != out.len() as u64 {
                    return Err(record_error(path, i, format!("expected generation {}", out.len())));
                }
                out.push(g);
                valid = offset as u64;
            }
            Err(_) if last => break,
            Err(e) => return Err(record_error(path, i, e)),
        }
    }
    Ok((out, valid))
}

impl RunRecord {
    /// Loads a run directory, tolerating a truncated final record line.
    pub fn load(dir: &Path) -> Result<Self> {
        let header_path = dir.join(HEADER_FILE);
        let text = std::fs::read_to_string(&header_path)?;
        let header: RunHeader = serde_json::from_str(&text).map_err(|e| record_error(&header_path, 0, e))?;
        let (generations, _) = read_generations(&dir.join(RECORD_FILE))?;
        let mut wall_clock_s = Vec::new();
        if let Ok(f) = std::fs::File::open(dir.join(TIMING_FILE)) {
            for line in BufReader::new(f).lines() {
                match serde_json::from_str::<TimingRecord>(&line?) {
                    Ok(t) if (t.generation as usize) < generations.len() => wall_clock_s.push(t.wall_clock_s),
                    _ => break,
                }
            }
        }
        Ok(RunRecord {
            header,
            generations,
            wall_clock_s,
        })
    }

    pub fn names(&self) -> &[String] {
        &self.header.names
    }

    pub fn evaluations(&self) -> usize {
        self.generations.iter().map(|g| g.candidates.len()).sum()
    }

    pub fn best(&self) -> Option<&BestRecord> {
        self.generations.last().map(|g| &g.best_so_far)
    }

    pub fn final_state(&self) -> Option<&DistributionState> {
        self.generations.last().map(|g| &g.state_after)
    }

    /// `C` at every generation plus the state after the last update, which
    /// carries generation number `len`.
    pub fn covariance_series(&self) -> Result<CovarianceSeries> {
        let mut snapshots: Vec<CovarianceSnapshot> = self
            .generations
            .iter()
            .map(|g| CovarianceSnapshot {
                generation: g.generation,
                matrix: g.distribution.covariance.clone(),
            })
            .collect();
        if let Some(s) = self.final_state() {
            snapshots.push(s.covariance_snapshot());
        }
        CovarianceSeries::new(self.header.names.clone(), snapshots)
    }

    /// Normalized evaluation points and costs of every candidate.
    pub fn samples(&self) -> (Vec<Vec<f64>>, Vec<f64>) {
        self.generations
            .iter()
            .flat_map(|g| g.candidates.iter())
            .map(|c| (c.x_normalized.clone(), c.cost))
            .unzip()
    }
}

/// Closing summary of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub generations: usize,
    pub evaluations: usize,
    pub best: BestRecord,
    pub best_named: Vec<(String, f64)>,
    /// Noiseless cost at the final distribution mean (clipped into the box
    /// for bounded runs).
    pub final_mean_cost: f64,
    pub final_mean_physical: Vec<f64>,
}
