use std::path::Path;

use serde::{Deserialize, Serialize};

use super::record::RunRecord;
use crate::quantum_sim::FidelityGrid;
use crate::{Error, Result};

pub const TRACE_FILE: &str = "trace.csv";
pub const COVARIANCE_FILE: &str = "covariance.json";
pub const BEST_PARAMS_FILE: &str = "best_params.json";
pub const GRID_FILE: &str = "grid.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExportKind {
    Trace,
    Covariance,
    BestParams,
    Grid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedValue {
    pub name: String,
    pub value: f64,
    pub unit: String,
}

/// Best candidate in physical units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BestParams {
    pub cost: f64,
    pub generation: u64,
    pub id: usize,
    pub parameters: Vec<NamedValue>,
}

impl BestParams {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Record(format!("{}: {e}", path.display())))
    }

    pub fn values(&self) -> Vec<f64> {
        self.parameters.iter().map(|p| p.value).collect()
    }
}

/// `generation,individual,cost` for every evaluation.
pub fn export_trace(record: &RunRecord, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["generation", "individual", "cost"])?;
    for g in &record.generations {
        for c in &g.candidates {
            w.write_record([g.generation.to_string(), c.id.to_string(), c.cost.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn export_covariance(record: &RunRecord, path: &Path) -> Result<()> {
    crate::analysis::write_json(&record.covariance_series()?, path)
}

pub fn best_params(record: &RunRecord) -> Result<BestParams> {
    let best = record
        .best()
        .ok_or_else(|| Error::Record("run has no generations".into()))?;
    Ok(BestParams {
        cost: best.cost,
        generation: best.generation,
        id: best.id,
        parameters: record
            .header
            .names
            .iter()
            .zip(&record.header.units)
            .zip(&best.x)
            .map(|((name, unit), &value)| NamedValue {
                name: name.clone(),
                value,
                unit: unit.clone(),
            })
            .collect(),
    })
}

pub fn export_best_params(record: &RunRecord, path: &Path) -> Result<()> {
    crate::analysis::write_json(&best_params(record)?, path)
}

pub fn export_grid(grid: &FidelityGrid, path: &Path) -> Result<()> {
    grid.write_csv(std::fs::File::create(path)?)
}

/// Writes one record export into `dir` under its standard file name. Grids
/// come from sweeps, not runs, so [`ExportKind::Grid`] is rejected here.
pub fn export(record: &RunRecord, kind: ExportKind, dir: &Path) -> Result<std::path::PathBuf> {
    let path = match kind {
        ExportKind::Trace => dir.join(TRACE_FILE),
        ExportKind::Covariance => dir.join(COVARIANCE_FILE),
        ExportKind::BestParams => dir.join(BEST_PARAMS_FILE),
        ExportKind::Grid => {
            return Err(Error::Config("grid exports are produced by sweeps, not runs".into()));
        }
    };
    match kind {
        ExportKind::Trace => export_trace(record, &path)?,
        ExportKind::Covariance => export_covariance(record, &path)?,
        ExportKind::BestParams => export_best_params(record, &path)?,
        ExportKind::Grid => unreachable!(),
    }
    Ok(path)
}

/// Trace, covariance and best-parameter files for a finished run.
pub(crate) fn export_record(record: &RunRecord, dir: &Path) -> Result<()> {
    for kind in [ExportKind::Trace, ExportKind::Covariance, ExportKind::BestParams] {
        export(record, kind, dir)?;
    }
    Ok(())
}
