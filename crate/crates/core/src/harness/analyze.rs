use std::path::{Path, PathBuf};

use log::info;
use serde::{Deserialize, Serialize};

use super::batch::COVARIANCE_AVERAGE_FILE;
use super::record::{RunRecord, HEADER_FILE};
use crate::analysis::{
    covariance_trajectory, hdmr_first_order, write_json, write_sensitivity_csv, write_trajectory_csv, CovarianceSeries,
    HdmrOptions, SensitivityReport,
};
use crate::{Error, Result};

pub const SENSITIVITY_JSON: &str = "sensitivity.json";
pub const SENSITIVITY_CSV: &str = "sensitivity.csv";
pub const ANALYSIS_FILE: &str = "analysis.json";

/// A covariance entry given by index or by parameter name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PairSpec {
    Index(usize, usize),
    Name(String, String),
}

impl std::str::FromStr for PairSpec {
    type Err = Error;

    /// `i,j` or `name_i,name_j`.
    fn from_str(s: &str) -> Result<Self> {
        let (a, b) = s
            .split_once(',')
            .ok_or_else(|| Error::Config(format!("covariance pair `{s}` must look like i,j")))?;
        let (a, b) = (a.trim(), b.trim());
        match (a.parse::<usize>(), b.parse::<usize>()) {
            (Ok(i), Ok(j)) => Ok(PairSpec::Index(i, j)),
            _ => Ok(PairSpec::Name(a.to_string(), b.to_string())),
        }
    }
}

impl PairSpec {
    pub fn resolve(&self, names: &[String]) -> Result<(usize, usize)> {
        let (i, j) = match self {
            PairSpec::Index(i, j) => (*i, *j),
            PairSpec::Name(a, b) => {
                let find = |n: &str| {
                    names
                        .iter()
                        .position(|m| m == n)
                        .ok_or_else(|| Error::Config(format!("unknown parameter `{n}`")))
                };
                (find(a)?, find(b)?)
            }
        };
        if i >= names.len() || j >= names.len() {
            return Err(Error::Config(format!(
                "covariance pair ({i},{j}) outside dimension {}",
                names.len()
            )));
        }
        Ok((i, j))
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AnalyzeOptions {
    pub hdmr: bool,
    pub cov_pairs: Vec<PairSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairTrajectory {
    pub pair: (usize, usize),
    pub names: (String, String),
    pub file: String,
    pub first: f64,
    pub last: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub runs: usize,
    pub names: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sensitivity: Option<SensitivityReport>,
    pub trajectories: Vec<PairTrajectory>,
}

/// Run directories under `dir`: `dir` itself when it holds a run, otherwise
/// its `run_*` subdirectories in name order.
pub fn run_dirs(dir: &Path) -> Result<Vec<PathBuf>> {
    if dir.join(HEADER_FILE).is_file() {
        return Ok(vec![dir.to_path_buf()]);
    }
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| {
            p.join(HEADER_FILE).is_file()
                && p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with("run_"))
        })
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(Error::Record(format!("no run found in {}", dir.display())));
    }
    Ok(dirs)
}

/// Sensitivity and covariance analysis of a run or a batch. Outputs land in
/// `dir`.
pub fn analyze(dir: &Path, options: &AnalyzeOptions) -> Result<AnalysisReport> {
    let records: Vec<RunRecord> = run_dirs(dir)?.iter().map(|d| RunRecord::load(d)).collect::<Result<_>>()?;
    let names = records[0].names().to_vec();
    if records.iter().any(|r| r.names() != names.as_slice()) {
        return Err(Error::Record("runs have different parameter spaces".into()));
    }

    let sensitivity = if options.hdmr {
        let (mut xs, mut ys) = (Vec::new(), Vec::new());
        for r in &records {
            let (x, y) = r.samples();
            xs.extend(x);
            ys.extend(y);
        }
        let report = hdmr_first_order(
            &xs,
            &ys,
            &HdmrOptions {
                names: Some(names.clone()),
                ..HdmrOptions::default()
            },
        )?;
        write_json(&report, &dir.join(SENSITIVITY_JSON))?;
        write_sensitivity_csv(&report, &dir.join(SENSITIVITY_CSV))?;
        Some(report)
    } else {
        None
    };

    let mut trajectories = Vec::new();
    if !options.cov_pairs.is_empty() {
        let series: Vec<CovarianceSeries> = records.iter().map(|r| r.covariance_series()).collect::<Result<_>>()?;
        let average = CovarianceSeries::average(&series)?;
        write_json(&average, &dir.join(COVARIANCE_AVERAGE_FILE))?;
        for spec in &options.cov_pairs {
            let (i, j) = spec.resolve(&names)?;
            let traj = covariance_trajectory(&average, (i, j))?;
            let file = format!("cov_{}_{}.csv", names[i], names[j]);
            write_trajectory_csv(&traj, &dir.join(&file))?;
            trajectories.push(PairTrajectory {
                pair: (i, j),
                names: (names[i].clone(), names[j].clone()),
                file,
                first: traj.first().map_or(f64::NAN, |t| t.1),
                last: traj.last().map_or(f64::NAN, |t| t.1),
            });
        }
    }

    let report = AnalysisReport {
        runs: records.len(),
        names,
        sensitivity,
        trajectories,
    };
    write_json(&report, &dir.join(ANALYSIS_FILE))?;
    info!("analyzed {} run(s) in {}", report.runs, dir.display());
    Ok(report)
}
