//! CMA-ES as an ask/tell state machine.
//!
//! A generation is sampled with [`DistributionState::ask`], evaluated by the
//! caller (in any order, on any number of workers) and handed back to
//! [`DistributionState::tell`], which ranks the costs and returns the next
//! distribution. Sampling is keyed by `(seed, generation, candidate id)` so a
//! run is bit-reproducible regardless of how evaluations are scheduled.

mod params;

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

pub use params::{Bounds, StrategyParams};

use crate::{rng, Error, Result};

/// Draws per candidate before [`Bounds::Repair`] falls back to clipping.
pub const MAX_RESAMPLING: u64 = 100;

/// Relative eigenvalue floor applied before taking `√C`.
pub const EIGENVALUE_FLOOR: f64 = 1e-14;

/// Search distribution `N(m, σ²C)` plus the two evolution paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionState {
    pub mean: Vec<f64>,
    pub step_size: f64,
    /// Unscaled covariance `C`, stored row-major as nested rows.
    #[serde(with = "matrix_rows")]
    pub covariance: DMatrix<f64>,
    pub path_sigma: Vec<f64>,
    pub path_c: Vec<f64>,
    pub generation: u64,
}

/// One sampled individual.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub id: usize,
    /// Standard-normal draw.
    pub z: Vec<f64>,
    /// `√C · z`.
    pub y: Vec<f64>,
    /// Point handed to the cost function (after bound handling).
    pub x: Vec<f64>,
    /// `m + σ·y`, before bound handling.
    pub x_sampled: Vec<f64>,
}

/// Copy of the unscaled covariance tagged with its generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovarianceSnapshot {
    pub generation: u64,
    pub matrix: Vec<Vec<f64>>,
}

impl DistributionState {
    /// Fresh distribution with `C = I` and zeroed paths.
    pub fn new(mean: Vec<f64>, step_size: f64) -> Result<Self> {
        if mean.is_empty() {
            return Err(Error::InvalidParameter("mean must not be empty".into()));
        }
        if !(step_size > 0.0 && step_size.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "step size must be positive, got {step_size}"
            )));
        }
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("mean must be finite".into()));
        }
        let n = mean.len();
        Ok(DistributionState {
            mean,
            step_size,
            covariance: DMatrix::identity(n, n),
            path_sigma: vec![0.0; n],
            path_c: vec![0.0; n],
            generation: 0,
        })
    }

    pub fn dimension(&self) -> usize {
        self.mean.len()
    }

    fn check_dimension(&self, params: &StrategyParams) -> Result<()> {
        let n = self.dimension();
        if params.dimension != n {
            return Err(Error::DimensionMismatch {
                expected: params.dimension,
                found: n,
            });
        }
        if self.covariance.nrows() != n
            || self.covariance.ncols() != n
            || self.path_sigma.len() != n
            || self.path_c.len() != n
        {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: self.covariance.nrows(),
            });
        }
        Ok(())
    }

    /// Samples the next generation of `λ` candidates.
    pub fn ask(&self, params: &StrategyParams) -> Result<Vec<Candidate>> {
        self.check_dimension(params)?;
        let sqrt_c = symmetric_sqrt(&self.covariance)?;
        let n = self.dimension();
        let draw = |id: usize, attempt: u64| {
            let mut rng = if attempt == 0 {
                rng::stream(&[params.seed, self.generation, id as u64])
            } else {
                rng::stream(&[params.seed, self.generation, id as u64, attempt])
            };
            let z = DVector::from_iterator(n, (0..n).map(|_| StandardNormal.sample(&mut rng)));
            let y = &sqrt_c * &z;
            let x_sampled: Vec<f64> = self
                .mean
                .iter()
                .zip(y.iter())
                .map(|(m, yi)| m + self.step_size * yi)
                .collect();
            (z, y, x_sampled)
        };
        let inside = |x: &[f64]| x.iter().all(|v| (0.0..=1.0).contains(v));
        let candidates = (0..params.population_size)
            .map(|id| {
                let (mut z, mut y, mut x_sampled) = draw(id, 0);
                if params.bounds == Bounds::Repair {
                    let mut attempt = 1;
                    while !inside(&x_sampled) && attempt < MAX_RESAMPLING {
                        (z, y, x_sampled) = draw(id, attempt);
                        attempt += 1;
                    }
                }
                let x = match params.bounds {
                    Bounds::Unbounded => x_sampled.clone(),
                    Bounds::UnitCube | Bounds::Repair => {
                        x_sampled.iter().map(|v| v.clamp(0.0, 1.0)).collect()
                    }
                };
                Candidate {
                    id,
                    z: z.iter().copied().collect(),
                    y: y.iter().copied().collect(),
                    x,
                    x_sampled,
                }
            })
            .collect();
        Ok(candidates)
    }

    /// Ranks an evaluated generation and returns the updated distribution.
    ///
    /// Non-finite costs rank worst; ties (including among non-finite costs)
    /// are broken by candidate id, so the result does not depend on the order
    /// of `evaluated`.
    pub fn tell(&self, params: &StrategyParams, evaluated: &[(Candidate, f64)]) -> Result<Self> {
        self.check_dimension(params)?;
        let n = self.dimension();
        if evaluated.len() != params.population_size {
            return Err(Error::DimensionMismatch {
                expected: params.population_size,
                found: evaluated.len(),
            });
        }
        for (c, _) in evaluated {
            for len in [c.z.len(), c.y.len(), c.x.len()] {
                if len != n {
                    return Err(Error::DimensionMismatch {
                        expected: n,
                        found: len,
                    });
                }
            }
        }
        if evaluated.iter().all(|(_, f)| !f.is_finite()) {
            return Err(Error::AllCostsNonFinite {
                generation: self.generation,
            });
        }

        let ranked = rank(evaluated);
        let weights = &params.recombination_weights;
        let mu_eff = params.mu_eff();

        // Steps (y, z) the update learns from: the sampled ones, or for
        // `Repair` the ones that reproduce the evaluated (clipped) point.
        let inv_sqrt = match params.bounds {
            Bounds::Repair => Some(symmetric_inverse_sqrt(&self.covariance)?),
            _ => None,
        };
        let steps: Vec<(DVector<f64>, DVector<f64>)> = ranked
            .iter()
            .map(|&(c, _)| match &inv_sqrt {
                None => (DVector::from_column_slice(&c.y), DVector::from_column_slice(&c.z)),
                Some(inv) => {
                    let y = DVector::from_iterator(
                        n,
                        c.x.iter().zip(&self.mean).map(|(x, m)| (x - m) / self.step_size),
                    );
                    let z = inv * &y;
                    (y, z)
                }
            })
            .collect();

        let mut y_w = DVector::<f64>::zeros(n);
        let mut z_w = DVector::<f64>::zeros(n);
        for (&w, (y, z)) in weights.iter().zip(steps.iter()) {
            if w == 0.0 {
                break;
            }
            y_w.axpy(w, y, 1.0);
            z_w.axpy(w, z, 1.0);
        }

        let mean: Vec<f64> = self
            .mean
            .iter()
            .zip(y_w.iter())
            .map(|(m, y)| m + self.step_size * y)
            .collect();

        // y = √C z, hence C^{-1/2} y_w is the weighted mean of the z draws.
        let cs = params.c_sigma;
        let ps_scale = (cs * (2.0 - cs) * mu_eff).sqrt();
        let path_sigma: Vec<f64> = self
            .path_sigma
            .iter()
            .zip(z_w.iter())
            .map(|(p, z)| (1.0 - cs) * p + ps_scale * z)
            .collect();
        let ps_norm = path_sigma.iter().map(|v| v * v).sum::<f64>().sqrt();
        let chi_n = params.expected_norm();

        let exponent = ((cs / params.d_sigma) * (ps_norm / chi_n - 1.0)).min(1.0);
        let step_size = self.step_size * exponent.exp();

        let g1 = (self.generation + 1) as f64;
        let h_sigma_threshold = (1.4 + 2.0 / (n as f64 + 1.0)) * chi_n;
        let h_sigma = ps_norm / (1.0 - (1.0 - cs).powf(2.0 * g1)).sqrt() < h_sigma_threshold;

        let cc = params.c_c;
        let pc_scale = if h_sigma { (cc * (2.0 - cc) * mu_eff).sqrt() } else { 0.0 };
        let path_c: Vec<f64> = self
            .path_c
            .iter()
            .zip(y_w.iter())
            .map(|(p, y)| (1.0 - cc) * p + pc_scale * y)
            .collect();

        let delta_h = if h_sigma { 0.0 } else { cc * (2.0 - cc) };
        let weight_sum: f64 = weights.iter().sum();
        let decay = 1.0 + params.c_1 * delta_h - params.c_1 - params.c_mu * weight_sum;

        let pc = DVector::from_column_slice(&path_c);
        let mut covariance = &self.covariance * decay;
        covariance.ger(params.c_1, &pc, &pc, 1.0);
        for (&w, (y, _)) in weights.iter().zip(steps.iter()) {
            if w == 0.0 {
                break;
            }
            covariance.ger(params.c_mu * w, y, y, 1.0);
        }
        symmetrize(&mut covariance);

        if !(step_size > 0.0 && step_size.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "step size degenerated to {step_size} at generation {}",
                self.generation
            )));
        }

        Ok(DistributionState {
            mean,
            step_size,
            covariance,
            path_sigma,
            path_c,
            generation: self.generation + 1,
        })
    }

    /// Unscaled covariance `C` (not `σ²C`) at the current generation.
    pub fn covariance_snapshot(&self) -> CovarianceSnapshot {
        CovarianceSnapshot {
            generation: self.generation,
            matrix: matrix_rows::to_rows(&self.covariance),
        }
    }
}

/// Candidates sorted best first: finite costs ascending, then non-finite,
/// ties by id.
fn rank(evaluated: &[(Candidate, f64)]) -> Vec<(&Candidate, f64)> {
    let mut ranked: Vec<(&Candidate, f64)> = evaluated.iter().map(|(c, f)| (c, *f)).collect();
    ranked.sort_by(|a, b| {
        let key = |f: f64| if f.is_finite() { (0u8, f) } else { (1u8, 0.0) };
        let (ka, kb) = (key(a.1), key(b.1));
        ka.0.cmp(&kb.0)
            .then(ka.1.partial_cmp(&kb.1).unwrap_or(Ordering::Equal))
            .then(a.0.id.cmp(&b.0.id))
    });
    ranked
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// Symmetric square root `B·diag(√λ)·Bᵀ`, flooring eigenvalues that fall
/// below [`EIGENVALUE_FLOOR`] times the largest one.
pub fn symmetric_sqrt(c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if c.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("covariance contains non-finite entries".into()));
    }
    let mut sym = c.clone();
    symmetrize(&mut sym);
    let eig = SymmetricEigen::new(sym);
    let max = eig.eigenvalues.max();
    if !(max > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "covariance has no positive eigenvalue (largest {max})"
        )));
    }
    let floor = EIGENVALUE_FLOOR * max;
    let mut repaired = false;
    let roots = eig.eigenvalues.map(|l| {
        if l < floor {
            repaired = true;
            floor.sqrt()
        } else {
            l.sqrt()
        }
    });
    if repaired {
        log::warn!("covariance lost positive definiteness; eigenvalues floored at {floor:e}");
    }
    let b = &eig.eigenvectors;
    Ok(b * DMatrix::from_diagonal(&roots) * b.transpose())
}

/// `C^{-1/2}` with the same eigenvalue floor as [`symmetric_sqrt`].
fn symmetric_inverse_sqrt(c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut sym = c.clone();
    symmetrize(&mut sym);
    let eig = SymmetricEigen::new(sym);
    let max = eig.eigenvalues.max();
    if !(max > 0.0) || !max.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "covariance has no positive eigenvalue (largest {max})"
        )));
    }
    let floor = EIGENVALUE_FLOOR * max;
    let inv = eig.eigenvalues.map(|l| 1.0 / l.max(floor).sqrt());
    let b = &eig.eigenvectors;
    Ok(b * DMatrix::from_diagonal(&inv) * b.transpose())
}

/// Convenience owner of a parameter set and its evolving state.
#[derive(Debug, Clone)]
pub struct CmaEs {
    pub params: StrategyParams,
    pub state: DistributionState,
}

/// Outcome of one [`CmaEs::step`].
#[derive(Debug, Clone, PartialEq)]
pub struct GenerationSummary {
    pub generation: u64,
    pub best_cost: f64,
    pub best_x: Vec<f64>,
    pub mean_cost: f64,
}

impl CmaEs {
    pub fn new(params: StrategyParams, mean: Vec<f64>, step_size: f64) -> Result<Self> {
        params.validate()?;
        let state = DistributionState::new(mean, step_size)?;
        state.check_dimension(&params)?;
        Ok(CmaEs { params, state })
    }

    pub fn ask(&self) -> Result<Vec<Candidate>> {
        self.state.ask(&self.params)
    }

    pub fn tell(&mut self, evaluated: &[(Candidate, f64)]) -> Result<()> {
        self.state = self.state.tell(&self.params, evaluated)?;
        Ok(())
    }

    /// Runs one sequential ask/evaluate/tell cycle.
    pub fn step<F: FnMut(&[f64]) -> f64>(&mut self, mut cost: F) -> Result<GenerationSummary> {
        let generation = self.state.generation;
        let evaluated: Vec<(Candidate, f64)> = self
            .ask()?
            .into_iter()
            .map(|c| {
                let f = cost(&c.x);
                (c, f)
            })
            .collect();
        let finite: Vec<f64> = evaluated.iter().map(|e| e.1).filter(|f| f.is_finite()).collect();
        let mean_cost = finite.iter().sum::<f64>() / finite.len().max(1) as f64;
        let best = rank(&evaluated)[0];
        let summary = GenerationSummary {
            generation,
            best_cost: best.1,
            best_x: best.0.x.clone(),
            mean_cost,
        };
        self.tell(&evaluated)?;
        Ok(summary)
    }
}

/// Serde adapter storing a `DMatrix` as a list of rows.
pub mod matrix_rows {
    use nalgebra::DMatrix;
    use serde::{de::Error as _, Deserialize, Deserializer, Serializer};

    pub fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
        m.row_iter().map(|r| r.iter().copied().collect()).collect()
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Option<DMatrix<f64>> {
        let n = rows.len();
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return None;
        }
        Some(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
    }

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(to_rows(m))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        from_rows(&rows).ok_or_else(|| D::Error::custom("ragged matrix rows"))
    }
}
