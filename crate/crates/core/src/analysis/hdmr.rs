use log::warn;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterSensitivity {
    pub name: String,
    /// Share of the output variance explained by this parameter alone.
    pub first_order: f64,
    /// `first_order` renormalized over all parameters, for charts.
    pub contribution: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub parameters: Vec<ParameterSensitivity>,
    /// Variance fraction left after removing every first-order component.
    pub residual: f64,
}

impl SensitivityReport {
    pub fn first_order(&self) -> Vec<f64> {
        self.parameters.iter().map(|p| p.first_order).collect()
    }

    /// Rows sorted by decreasing contribution.
    pub fn ranked(&self) -> Vec<&ParameterSensitivity> {
        let mut rows: Vec<_> = self.parameters.iter().collect();
        rows.sort_by(|a, b| b.contribution.total_cmp(&a.contribution));
        rows
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HdmrOptions {
    /// Parameter names; `x0, x1, …` if absent.
    pub names: Option<Vec<String>>,
    /// Uniform intervals of the cubic B-spline basis per parameter. One
    /// interval is a plain cubic polynomial.
    pub intervals: usize,
}

impl Default for HdmrOptions {
    fn default() -> Self {
        HdmrOptions {
            names: None,
            intervals: 8,
        }
    }
}

pub const MIN_SAMPLES: usize = 50;

/// Uniform cubic B-spline on `[0, 4)`.
fn cardinal_cubic(t: f64) -> f64 {
    if !(0.0..4.0).contains(&t) {
        0.0
    } else if t < 1.0 {
        t * t * t / 6.0
    } else if t < 2.0 {
        (-3.0 * t * t * t + 12.0 * t * t - 12.0 * t + 4.0) / 6.0
    } else if t < 3.0 {
        (3.0 * t * t * t - 24.0 * t * t + 60.0 * t - 44.0) / 6.0
    } else {
        (4.0 - t).powi(3) / 6.0
    }
}

/// First-order HDMR indices from random samples in `[0, 1]^n`.
///
/// The component functions are centered cubic B-spline expansions, one per
/// coordinate, fitted jointly by least squares to the centered cost. Each
/// index is `Var(component)/Var(cost)`. A coordinate that never varies gets
/// index 0.
pub fn hdmr_first_order(samples: &[Vec<f64>], costs: &[f64], options: &HdmrOptions) -> Result<SensitivityReport> {
    let m = samples.len();
    if m != costs.len() {
        return Err(Error::DimensionMismatch {
            expected: m,
            found: costs.len(),
        });
    }
    if m < MIN_SAMPLES {
        return Err(Error::InvalidParameter(format!(
            "HDMR needs at least {MIN_SAMPLES} samples, got {m}"
        )));
    }
    let n = samples[0].len();
    if n == 0 || samples.iter().any(|s| s.len() != n) {
        return Err(Error::InvalidParameter("samples must share a positive dimension".into()));
    }
    if samples.iter().flatten().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(Error::InvalidParameter("HDMR samples must be normalized to [0, 1]".into()));
    }
    if costs.iter().any(|c| !c.is_finite()) {
        return Err(Error::InvalidParameter("HDMR costs must be finite".into()));
    }
    if options.intervals == 0 {
        return Err(Error::InvalidParameter("need at least one spline interval".into()));
    }
    let names: Vec<String> = match &options.names {
        Some(names) if names.len() == n => names.clone(),
        Some(names) => {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: names.len(),
            })
        }
        None => (0..n).map(|i| format!("x{i}")).collect(),
    };
    let mean = costs.iter().sum::<f64>() / m as f64;
    let y = DVector::from_iterator(m, costs.iter().map(|c| c - mean));
    let total = y.norm_squared();
    let mut indices = vec![0.0; n];
    let k = options.intervals;
    // The k + 3 basis functions sum to one, so after centering the last is
    // redundant and is left out.
    let width = k + 2;
    let active: Vec<usize> = (0..n)
        .filter(|&i| {
            let (lo, hi) = samples
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), s| (a.min(s[i]), b.max(s[i])));
            if hi - lo < 1e-12 {
                warn!("parameter `{}` is constant; its HDMR index is set to 0", names[i]);
            }
            hi - lo >= 1e-12
        })
        .collect();
    let mut fitted = DVector::zeros(m);
    if total > 0.0 && !active.is_empty() {
        // All components are fitted together so that correlated samples (an
        // optimizer's trajectory) do not count shared variance twice.
        let mut phi = DMatrix::from_fn(m, width * active.len(), |r, c| {
            let i = active[c / width];
            cardinal_cubic(k as f64 * samples[r][i] - (c % width) as f64 + 3.0)
        });
        for mut col in phi.column_iter_mut() {
            let mu = col.mean();
            col.add_scalar_mut(-mu);
        }
        // Normal equations through a symmetric eigendecomposition: the
        // Gram matrix is small, and row order only enters through rounding.
        let eig = SymmetricEigen::new(phi.tr_mul(&phi));
        let rhs = eig.eigenvectors.tr_mul(&phi.tr_mul(&y));
        let tol = 1e-12 * eig.eigenvalues.max();
        let scaled = DVector::from_fn(rhs.len(), |j, _| {
            let l = eig.eigenvalues[j];
            if l > tol {
                rhs[j] / l
            } else {
                0.0
            }
        });
        let beta = &eig.eigenvectors * scaled;
        for (b, &i) in active.iter().enumerate() {
            let block = phi.columns(b * width, width);
            let component = block * beta.rows(b * width, width);
            indices[i] = component.norm_squared() / total;
            fitted += component;
        }
    }
    let residual = if total > 0.0 {
        (&y - fitted).norm_squared() / total
    } else {
        0.0
    };
    let sum: f64 = indices.iter().sum();
    let parameters = names
        .into_iter()
        .zip(&indices)
        .map(|(name, &first_order)| ParameterSensitivity {
            name,
            first_order,
            contribution: if sum > 0.0 { first_order / sum } else { 0.0 },
        })
        .collect();
    Ok(SensitivityReport { parameters, residual })
}
