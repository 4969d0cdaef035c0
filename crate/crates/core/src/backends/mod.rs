//! Simulated devices that turn a candidate parameter vector into a cost.
//!
//! Every backend takes normalized coordinates in `[0, 1]^n` (see
//! [`ParameterSpace`]) and a shot seed, and is a pure function of the two.

mod benchmark;
mod landscape;
mod readout;
mod rb;
mod shuttle;
mod space;

use serde::{Deserialize, Serialize};

pub use benchmark::BenchmarkBackend;
pub use landscape::{HiddenLandscape, LandscapeSpec, PlantedPair};
pub use rb::{
    clifford_table, rb_sequences, Clifford, Primitive, QubitModel, RbBackend, RbConfig,
    GATES_PER_CLIFFORD,
};
pub use readout::{
    visibility, visibility_to_fidelity, InitStageMap, ReadoutBackend, ReadoutShots,
};
pub use shuttle::{ShuttleBackend, ShuttleModel, DEFAULT_DISTANCE_UM};
pub use space::{ParameterEntry, ParameterSpace};

use crate::Result;

/// Outcome of one candidate evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostEvaluation {
    /// Minimized by the optimizer.
    pub cost: f64,
    /// Figure of merit behind the cost: visibility, echo amplitude or mean
    /// return probability.
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shots: Option<ShotCounts>,
}

/// Raw counts behind a sampled evaluation; each count is out of `shots`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotCounts {
    pub shots: u64,
    pub counts: Vec<u64>,
}

pub trait Backend: Send + Sync {
    fn space(&self) -> &ParameterSpace;

    /// Evaluates the normalized point `x`, drawing any shot noise from
    /// `shot_seed`.
    fn evaluate(&self, x: &[f64], shot_seed: u64) -> Result<CostEvaluation>;

    /// Cost in the infinite-shot limit.
    fn noiseless_cost(&self, x: &[f64]) -> Result<f64>;
}

/// Binomial draw that tolerates probabilities a hair outside `[0, 1]`.
pub(crate) fn binomial<R: rand::Rng>(rng: &mut R, n: u64, p: f64) -> u64 {
    use rand_distr::{Binomial, Distribution};
    let p = p.clamp(0.0, 1.0);
    match Binomial::new(n, p) {
        Ok(b) => b.sample(rng),
        Err(_) => 0,
    }
}
