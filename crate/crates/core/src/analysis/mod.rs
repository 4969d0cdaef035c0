//! Post-hoc interpretation of optimization runs: decay and Rabi fits,
//! fidelity conversions, first-order HDMR sensitivity and covariance
//! averaging.

mod covariance;
mod fit;
mod hdmr;

use std::path::Path;

use serde::Serialize;

pub use covariance::{covariance_average, covariance_trajectory, CovarianceSeries};
pub use fit::{fit_decay, fit_rabi, gate_fidelity, shuttle_fidelity, FitResult};
pub use hdmr::{hdmr_first_order, HdmrOptions, ParameterSensitivity, SensitivityReport, MIN_SAMPLES};

use crate::Result;

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(value: &T, path: &Path) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

/// `name,contribution,first_order` rows, largest contribution first.
pub fn write_sensitivity_csv(report: &SensitivityReport, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["name", "contribution", "first_order"])?;
    for row in report.ranked() {
        w.write_record([
            row.name.clone(),
            row.contribution.to_string(),
            row.first_order.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `generation,value` rows.
pub fn write_trajectory_csv(trajectory: &[(u64, f64)], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["generation", "value"])?;
    for (g, v) in trajectory {
        w.write_record([g.to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
