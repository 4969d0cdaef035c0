use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// How sampled points are mapped into the evaluation domain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Bounds {
    /// Points are evaluated exactly where they were sampled.
    #[default]
    Unbounded,
    /// Points are clipped into `[0, 1]^n` for evaluation only; the
    /// distribution update always uses the unclipped sample.
    UnitCube,
    /// Infeasible draws are redrawn (up to `MAX_RESAMPLING` attempts, each
    /// keyed by its attempt number), then clipped into `[0, 1]^n`; the
    /// distribution update uses the evaluated point as if it had been sampled.
    Repair,
}

/// Strategy constants of the evolution strategy.
///
/// [`StrategyParams::new`] fills every learning rate with the standard
/// defaults derived from the dimension and population size. Fields are public
/// so individual constants can be overridden before [`validate`](Self::validate).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyParams {
    pub dimension: usize,
    pub population_size: usize,
    pub parent_count: usize,
    /// One weight per rank; entries past `parent_count` are zero.
    pub recombination_weights: Vec<f64>,
    pub c_sigma: f64,
    pub d_sigma: f64,
    pub c_c: f64,
    pub c_1: f64,
    pub c_mu: f64,
    pub seed: u64,
    #[serde(default)]
    pub bounds: Bounds,
}

impl StrategyParams {
    /// Population size used when the caller has no preference: `4 + ⌊3 ln n⌋`.
    pub fn default_population(dimension: usize) -> usize {
        4 + (3.0 * (dimension as f64).ln()).floor() as usize
    }

    pub fn new(dimension: usize, population_size: usize, seed: u64) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidParameter("dimension must be at least 1".into()));
        }
        if population_size < 2 {
            return Err(Error::InvalidParameter(format!(
                "population size must be at least 2, got {population_size}"
            )));
        }
        let n = dimension as f64;
        let lambda = population_size;
        let mu = lambda / 2;

        let mut weights: Vec<f64> = (0..lambda)
            .map(|i| {
                if i < mu {
                    ((lambda as f64 + 1.0) / 2.0).ln() - ((i + 1) as f64).ln()
                } else {
                    0.0
                }
            })
            .collect();
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        let mu_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();

        let c_sigma = (mu_eff + 2.0) / (n + mu_eff + 5.0);
        let d_sigma = 1.0 + 2.0 * (((mu_eff - 1.0) / (n + 1.0)).sqrt() - 1.0).max(0.0) + c_sigma;
        let c_c = (4.0 + mu_eff / n) / (n + 4.0 + 2.0 * mu_eff / n);
        let c_1 = 2.0 / ((n + 1.3).powi(2) + mu_eff);
        let c_mu = (1.0 - c_1).min(2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((n + 2.0).powi(2) + mu_eff));

        let params = StrategyParams {
            dimension,
            population_size: lambda,
            parent_count: mu,
            recombination_weights: weights,
            c_sigma,
            d_sigma,
            c_c,
            c_1,
            c_mu,
            seed,
            bounds: Bounds::Unbounded,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn with_bounds(mut self, bounds: Bounds) -> Self {
        self.bounds = bounds;
        self
    }

    /// Variance-effective selection mass `1 / Σ wᵢ²`.
    pub fn mu_eff(&self) -> f64 {
        1.0 / self.recombination_weights.iter().map(|w| w * w).sum::<f64>()
    }

    /// `E‖N(0, I)‖` approximation.
    pub fn expected_norm(&self) -> f64 {
        let n = self.dimension as f64;
        n.sqrt() * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if self.dimension == 0 {
            return bad("dimension must be at least 1".into());
        }
        if self.population_size < 2 {
            return bad("population size must be at least 2".into());
        }
        if self.recombination_weights.len() != self.population_size {
            return bad(format!(
                "expected {} recombination weights, got {}",
                self.population_size,
                self.recombination_weights.len()
            ));
        }
        if self.parent_count == 0 || self.parent_count > self.population_size {
            return bad(format!("parent count {} out of range", self.parent_count));
        }
        let w = &self.recombination_weights;
        if w.windows(2).any(|p| p[1] > p[0]) {
            return bad("recombination weights must be non-increasing".into());
        }
        if w[..self.parent_count].iter().any(|&v| v <= 0.0)
            || w[self.parent_count..].iter().any(|&v| v != 0.0)
        {
            return bad("weights must be positive for the parents and zero otherwise".into());
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return bad(format!("parent weights must sum to 1, got {sum}"));
        }
        for (name, rate) in [
            ("c_sigma", self.c_sigma),
            ("c_c", self.c_c),
            ("c_1", self.c_1),
        ] {
            if !(rate > 0.0 && rate <= 1.0) {
                return bad(format!("{name} = {rate} outside (0, 1]"));
            }
        }
        // c_mu vanishes for a single parent (mu_eff = 1), so zero is allowed.
        if !(self.c_mu >= 0.0 && self.c_mu <= 1.0 - self.c_1 + 1e-15) {
            return bad(format!("c_mu = {} outside [0, 1 - c_1]", self.c_mu));
        }
        if !(self.d_sigma >= 1.0) {
            return bad(format!("d_sigma = {} must be at least 1", self.d_sigma));
        }
        Ok(())
    }
}
