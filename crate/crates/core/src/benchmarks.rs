//! Standard test functions used to validate the optimizer and exercised by
//! the `benchmark` task of the harness.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestFunction {
    Sphere,
    Rosenbrock,
    Ellipsoid,
}

impl TestFunction {
    pub fn evaluate(self, x: &[f64]) -> f64 {
        match self {
            TestFunction::Sphere => sphere(x),
            TestFunction::Rosenbrock => rosenbrock(x),
            TestFunction::Ellipsoid => ellipsoid(x),
        }
    }

    /// Location of the global minimum (value 0) in `n` dimensions.
    pub fn minimizer(self, n: usize) -> Vec<f64> {
        match self {
            TestFunction::Rosenbrock => vec![1.0; n],
            _ => vec![0.0; n],
        }
    }
}

pub fn sphere(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

pub fn rosenbrock(x: &[f64]) -> f64 {
    x.windows(2)
        .map(|w| 100.0 * (w[1] - w[0] * w[0]).powi(2) + (1.0 - w[0]).powi(2))
        .sum()
}

/// `Σ 10^(6i/(n−1)) xᵢ²`, condition number 10⁶.
pub fn ellipsoid(x: &[f64]) -> f64 {
    let n = x.len();
    if n == 1 {
        return x[0] * x[0];
    }
    x.iter()
        .enumerate()
        .map(|(i, v)| 10f64.powf(6.0 * i as f64 / (n - 1) as f64) * v * v)
        .sum()
}
