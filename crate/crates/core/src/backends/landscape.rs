use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{rng, Error, Result};

/// Planted ground truth standing in for a physical device.
///
/// The cost surfaces built on top of it are functions of the quadratic form
/// `q(x) = (x − optimum)ᵀ·coupling·(x − optimum)` over normalized coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HiddenLandscape {
    pub optimum: Vec<f64>,
    pub coupling: Vec<Vec<f64>>,
    /// Residual loss at the optimum, in `[0, 1)`. Its meaning is set by the
    /// backend (missing visibility for readout, `p_min` for shuttling).
    pub floor: f64,
    pub shot_noise: bool,
    pub seed: u64,
}

/// A pair of parameters whose optimizer covariance should come out with the
/// sign of `correlation`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantedPair {
    pub i: usize,
    pub j: usize,
    pub correlation: f64,
}

/// Recipe for a seeded random landscape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandscapeSpec {
    pub dimension: usize,
    pub floor: f64,
    #[serde(default = "default_true")]
    pub shot_noise: bool,
    pub seed: u64,
    /// Geometric mean of the diagonal of the coupling matrix.
    #[serde(default = "default_curvature")]
    pub curvature: f64,
    #[serde(default)]
    pub planted: Vec<PlantedPair>,
}

fn default_true() -> bool {
    true
}

fn default_curvature() -> f64 {
    3.0
}

const BACKGROUND_CORRELATION: f64 = 0.02;

impl LandscapeSpec {
    /// Optimum uniform in `[0.2, 0.8]^n`; diagonal curvatures spread over
    /// half a decade around `curvature`; weak random background coupling plus
    /// the planted pairs. A planted positive covariance needs a negative
    /// coupling entry, since the search distribution follows the inverse.
    pub fn generate(&self) -> Result<HiddenLandscape> {
        let n = self.dimension;
        if n == 0 {
            return Err(Error::InvalidParameter("landscape dimension must be positive".into()));
        }
        if !(self.curvature > 0.0) {
            return Err(Error::InvalidParameter("curvature must be positive".into()));
        }
        for p in &self.planted {
            if p.i >= n || p.j >= n || p.i == p.j || !(p.correlation.abs() < 1.0) {
                return Err(Error::InvalidParameter(format!("bad planted pair {p:?}")));
            }
        }
        let mut rng = rng::stream(&[self.seed, 0x6c61_6e64]);
        let optimum: Vec<f64> = (0..n).map(|_| rng.random_range(0.2..0.8)).collect();
        let diag: Vec<f64> = (0..n)
            .map(|_| self.curvature * 10f64.powf(rng.random_range(-0.25..0.25)))
            .collect();
        let mut coupling = vec![vec![0.0; n]; n];
        for i in 0..n {
            coupling[i][i] = diag[i];
            for j in 0..i {
                let rho = rng.random_range(-BACKGROUND_CORRELATION..BACKGROUND_CORRELATION);
                let v = rho * (diag[i] * diag[j]).sqrt();
                coupling[i][j] = v;
                coupling[j][i] = v;
            }
        }
        for p in &self.planted {
            let v = -p.correlation * (diag[p.i] * diag[p.j]).sqrt();
            coupling[p.i][p.j] = v;
            coupling[p.j][p.i] = v;
        }
        let landscape = HiddenLandscape {
            optimum,
            coupling,
            floor: self.floor,
            shot_noise: self.shot_noise,
            seed: self.seed,
        };
        landscape.validate()?;
        Ok(landscape)
    }
}

impl HiddenLandscape {
    pub fn dimension(&self) -> usize {
        self.optimum.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.optimum.len();
        if n == 0 {
            return Err(Error::InvalidParameter("landscape has no dimensions".into()));
        }
        if self.coupling.len() != n || self.coupling.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidParameter(format!("coupling must be {n}×{n}")));
        }
        if !(0.0..1.0).contains(&self.floor) {
            return Err(Error::OutOfRange {
                what: "landscape floor",
                value: self.floor,
                low: 0.0,
                high: 1.0,
            });
        }
        for i in 0..n {
            for j in 0..i {
                if (self.coupling[i][j] - self.coupling[j][i]).abs() > 1e-12 {
                    return Err(Error::InvalidParameter("coupling is not symmetric".into()));
                }
            }
        }
        let k = DMatrix::from_fn(n, n, |i, j| self.coupling[i][j]);
        if k.iter().any(|v| !v.is_finite()) || k.cholesky().is_none() {
            return Err(Error::InvalidParameter("coupling is not positive definite".into()));
        }
        Ok(())
    }

    /// `(x − optimum)ᵀ·coupling·(x − optimum)`.
    pub fn quadratic(&self, x: &[f64]) -> f64 {
        let d: Vec<f64> = x.iter().zip(&self.optimum).map(|(a, b)| a - b).collect();
        self.coupling
            .iter()
            .zip(&d)
            .map(|(row, di)| di * row.iter().zip(&d).map(|(k, dj)| k * dj).sum::<f64>())
            .sum()
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Fixture {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        let landscape: HiddenLandscape = serde_json::from_str(&text).map_err(|e| Error::Fixture {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        landscape.validate().map_err(|e| Error::Fixture {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        Ok(landscape)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}
