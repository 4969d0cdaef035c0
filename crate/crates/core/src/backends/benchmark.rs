use super::{Backend, CostEvaluation, ParameterSpace};
use crate::benchmarks::TestFunction;
use crate::{Error, Result};

/// Noise-free test function evaluated on the denormalized point. Points
/// outside the unit cube are accepted so the function can also be used with
/// unbounded sampling.
#[derive(Debug, Clone)]
pub struct BenchmarkBackend {
    function: TestFunction,
    space: ParameterSpace,
}

impl BenchmarkBackend {
    pub fn new(function: TestFunction, space: ParameterSpace) -> Self {
        BenchmarkBackend { function, space }
    }

    pub fn function(&self) -> TestFunction {
        self.function
    }
}

impl Backend for BenchmarkBackend {
    fn space(&self) -> &ParameterSpace {
        &self.space
    }

    fn evaluate(&self, x: &[f64], _shot_seed: u64) -> Result<CostEvaluation> {
        let cost = self.noiseless_cost(x)?;
        Ok(CostEvaluation {
            cost,
            value: cost,
            shots: None,
        })
    }

    fn noiseless_cost(&self, x: &[f64]) -> Result<f64> {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite coordinate".into()));
        }
        Ok(self.function.evaluate(&self.space.denormalize(x)?))
    }
}
