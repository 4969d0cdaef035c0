use serde::{Deserialize, Serialize};

use crate::optimizer::CovarianceSnapshot;
use crate::{Error, Result};

/// Per-generation covariance matrices of one run, or the element-wise
/// average of several.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceSeries {
    pub names: Vec<String>,
    pub snapshots: Vec<CovarianceSnapshot>,
    #[serde(default)]
    pub tracked: Vec<(usize, usize)>,
    /// Number of runs averaged into this series.
    #[serde(default = "one")]
    pub runs: usize,
}

fn one() -> usize {
    1
}

impl CovarianceSeries {
    pub fn new(names: Vec<String>, snapshots: Vec<CovarianceSnapshot>) -> Result<Self> {
        let n = names.len();
        for s in &snapshots {
            if s.matrix.len() != n || s.matrix.iter().any(|r| r.len() != n) {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: s.matrix.len(),
                });
            }
            for i in 0..n {
                for j in 0..i {
                    if (s.matrix[i][j] - s.matrix[j][i]).abs() > 1e-12 * (1.0 + s.matrix[i][j].abs()) {
                        return Err(Error::InvalidParameter(format!(
                            "covariance at generation {} is not symmetric",
                            s.generation
                        )));
                    }
                }
            }
        }
        Ok(CovarianceSeries {
            names,
            snapshots,
            tracked: Vec::new(),
            runs: 1,
        })
    }

    pub fn dimension(&self) -> usize {
        self.names.len()
    }

    pub fn at(&self, generation: u64) -> Option<&CovarianceSnapshot> {
        self.snapshots.iter().find(|s| s.generation == generation)
    }

    pub fn last_generation(&self) -> Option<u64> {
        self.snapshots.iter().map(|s| s.generation).max()
    }

    /// Element-wise average over runs for every generation they all share.
    pub fn average(runs: &[CovarianceSeries]) -> Result<CovarianceSeries> {
        let first = runs
            .first()
            .ok_or_else(|| Error::InvalidParameter("no runs to average".into()))?;
        let mut snapshots = Vec::new();
        for s in &first.snapshots {
            if runs.iter().all(|r| r.at(s.generation).is_some()) {
                snapshots.push(CovarianceSnapshot {
                    generation: s.generation,
                    matrix: covariance_average(runs, s.generation)?,
                });
            }
        }
        Ok(CovarianceSeries {
            names: first.names.clone(),
            snapshots,
            tracked: first.tracked.clone(),
            runs: runs.iter().map(|r| r.runs).sum(),
        })
    }
}

/// Element-wise mean of the generation-`generation` matrices of all runs.
pub fn covariance_average(runs: &[CovarianceSeries], generation: u64) -> Result<Vec<Vec<f64>>> {
    let first = runs
        .first()
        .ok_or_else(|| Error::InvalidParameter("no runs to average".into()))?;
    let n = first.dimension();
    let mut sum = vec![vec![0.0; n]; n];
    for run in runs {
        if run.dimension() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: run.dimension(),
            });
        }
        let snap = run.at(generation).ok_or(Error::MissingGeneration { generation })?;
        for (acc, row) in sum.iter_mut().zip(&snap.matrix) {
            for (a, v) in acc.iter_mut().zip(row) {
                *a += v;
            }
        }
    }
    let k = runs.len() as f64;
    for i in 0..n {
        for j in 0..=i {
            let v = (sum[i][j] + sum[j][i]) / (2.0 * k);
            sum[i][j] = v;
            sum[j][i] = v;
        }
    }
    Ok(sum)
}

/// `(generation, C[i][j])` in generation order.
pub fn covariance_trajectory(series: &CovarianceSeries, entry: (usize, usize)) -> Result<Vec<(u64, f64)>> {
    let n = series.dimension();
    if entry.0 >= n || entry.1 >= n {
        return Err(Error::InvalidParameter(format!(
            "entry {entry:?} outside a {n}×{n} covariance"
        )));
    }
    let mut out: Vec<(u64, f64)> = series
        .snapshots
        .iter()
        .map(|s| (s.generation, s.matrix[entry.0][entry.1]))
        .collect();
    out.sort_by_key(|p| p.0);
    Ok(out)
}
