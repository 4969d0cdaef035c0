use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dqd::{default_dt, initialization_fidelity_with_dt, DqdConfig, NoiseModel};
use crate::{Error, Result};

/// One swept [`DqdConfig`] field and the values it takes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub name: String,
    pub values: Vec<f64>,
}

impl Axis {
    /// `points` evenly spaced values from `start` to `stop` inclusive.
    pub fn linspace(name: &str, start: f64, stop: f64, points: usize) -> Self {
        let values = match points {
            0 => vec![],
            1 => vec![start],
            _ => (0..points)
                .map(|i| start + (stop - start) * i as f64 / (points - 1) as f64)
                .collect(),
        };
        Axis {
            name: name.to_string(),
            values,
        }
    }
}

/// `values[i][j]` is the fidelity at `axis1.values[i]`, `axis2.values[j]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FidelityGrid {
    pub axis1: Axis,
    pub axis2: Axis,
    pub values: Vec<Vec<f64>>,
}

impl FidelityGrid {
    pub fn mean(&self) -> f64 {
        let n: usize = self.values.iter().map(Vec::len).sum();
        self.values.iter().flatten().sum::<f64>() / n as f64
    }

    /// CSV with the axis names in the corner cell, `axis2` values across the
    /// header row and one row per `axis1` value.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec![format!("{}\\{}", self.axis1.name, self.axis2.name)];
        header.extend(self.axis2.values.iter().map(|v| v.to_string()));
        w.write_record(&header)?;
        for (v1, row) in self.axis1.values.iter().zip(&self.values) {
            let mut rec = vec![v1.to_string()];
            rec.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Initialization fidelity over a 2-D grid of [`DqdConfig`] overrides.
///
/// Each cell uses `ramp_time / steps` as its time step, or [`default_dt`]
/// when `steps` is `None`. Cells are evaluated in parallel; results do not depend on
/// scheduling.
pub fn sweep_fidelity_grid(
    base: &DqdConfig,
    axis1: &Axis,
    axis2: &Axis,
    noise: Option<&NoiseModel>,
    steps: Option<usize>,
) -> Result<FidelityGrid> {
    for axis in [axis1, axis2] {
        base.get(&axis.name)?;
        if axis.values.is_empty() {
            return Err(Error::InvalidParameter(format!("axis `{}` has no points", axis.name)));
        }
    }
    if axis1.name == axis2.name {
        return Err(Error::InvalidParameter(format!(
            "axes must name distinct parameters, both are `{}`",
            axis1.name
        )));
    }

    let cells: Vec<(f64, f64)> = axis1
        .values
        .iter()
        .flat_map(|&a| axis2.values.iter().map(move |&b| (a, b)))
        .collect();
    let flat: Vec<f64> = cells
        .par_iter()
        .map(|&(a, b)| {
            let mut cfg = *base;
            cfg.set(&axis1.name, a)?;
            cfg.set(&axis2.name, b)?;
            let dt = match steps {
                Some(n) => cfg.ramp_time / n.max(1) as f64,
                None => default_dt(&cfg),
            };
            initialization_fidelity_with_dt(&cfg, noise, dt)
        })
        .collect::<Result<_>>()?;
    let values = flat.chunks(axis2.values.len()).map(<[f64]>::to_vec).collect();
    Ok(FidelityGrid {
        axis1: axis1.clone(),
        axis2: axis2.clone(),
        values,
    })
}
