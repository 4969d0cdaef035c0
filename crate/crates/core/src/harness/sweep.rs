use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::export::{export_grid, GRID_FILE};
use crate::analysis::write_json;
use crate::quantum_sim::{sweep_fidelity_grid, Axis, DqdConfig, FidelityGrid, NoiseModel};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    pub name: String,
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl AxisSpec {
    pub fn axis(&self) -> Axis {
        Axis::linspace(&self.name, self.start, self.stop, self.points)
    }
}

/// Initialization-fidelity grid over two [`DqdConfig`] fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default = "DqdConfig::strong_coupling")]
    pub base: DqdConfig,
    pub axis1: AxisSpec,
    pub axis2: AxisSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise: Option<NoiseModel>,
    /// Fixed steps per ramp; the adaptive default if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("sweep")
}

impl SweepConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let config: SweepConfig =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let wrap = |e: Error| Error::Config(e.to_string());
        self.base.validate().map_err(wrap)?;
        for a in [&self.axis1, &self.axis2] {
            self.base.get(&a.name).map_err(wrap)?;
            if a.points == 0 || !a.start.is_finite() || !a.stop.is_finite() {
                return Err(Error::Config(format!("axis `{}` needs finite bounds and points ≥ 1", a.name)));
            }
        }
        if let Some(n) = &self.noise {
            n.validate().map_err(wrap)?;
        }
        if self.steps == Some(0) {
            return Err(Error::Config("steps must be at least 1".into()));
        }
        Ok(())
    }
}

/// Computes the grid and writes `grid.csv` and `grid.json` to the output
/// directory.
pub fn run_sweep(config: &SweepConfig) -> Result<FidelityGrid> {
    config.validate()?;
    let grid = sweep_fidelity_grid(
        &config.base,
        &config.axis1.axis(),
        &config.axis2.axis(),
        config.noise.as_ref(),
        config.steps,
    )
    .map_err(|e| Error::Config(e.to_string()))?;
    std::fs::create_dir_all(&config.output_dir)?;
    export_grid(&grid, &config.output_dir.join(GRID_FILE))?;
    write_json(&grid, &config.output_dir.join("grid.json"))?;
    Ok(grid)
}
