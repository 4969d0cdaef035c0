use serde::{Deserialize, Serialize};

use super::space::check_unit_cube;
use super::{binomial, Backend, CostEvaluation, HiddenLandscape, ParameterSpace, ShotCounts};
use crate::{rng, Error, Result};

/// Total distance of 400 back-and-forth conveyor rounds.
pub const DEFAULT_DISTANCE_UM: f64 = 172.8;

/// Echo-decay constants. The planted `p_min` is the landscape floor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ShuttleModel {
    pub p_max: f64,
    pub a0: f64,
    pub offset: f64,
    pub distance_um: f64,
    pub n_shots: u64,
}

impl Default for ShuttleModel {
    fn default() -> Self {
        ShuttleModel {
            p_max: 0.117,
            a0: 1.0,
            offset: 0.0,
            distance_um: DEFAULT_DISTANCE_UM,
            n_shots: 1000,
        }
    }
}

/// Conveyor shuttling judged by spin-echo amplitude.
///
/// The depolarization per 10 µm is
/// `p(x) = p_min + (p_max − p_min)·q(x)/q_max` with `q_max` the largest value
/// of the planted quadratic on the corners of the unit cube, and the echo
/// amplitude after distance `d` is `A = A₀·(1 − p)^(d/10 µm) + C`.
/// Cost is `1 − A`, where the sampled `A` is the contrast between the echo
/// circuit with and without the extra Z(π).
#[derive(Debug, Clone)]
pub struct ShuttleBackend {
    landscape: HiddenLandscape,
    space: ParameterSpace,
    model: ShuttleModel,
    q_max: f64,
}

const MAX_CORNER_DIMENSION: usize = 20;

impl ShuttleBackend {
    pub fn new(landscape: HiddenLandscape, space: ParameterSpace, model: ShuttleModel) -> Result<Self> {
        landscape.validate()?;
        let n = landscape.dimension();
        if n != space.len() {
            return Err(Error::DimensionMismatch {
                expected: space.len(),
                found: n,
            });
        }
        if n > MAX_CORNER_DIMENSION {
            return Err(Error::InvalidParameter(format!(
                "shuttle landscape limited to {MAX_CORNER_DIMENSION} parameters"
            )));
        }
        let p_min = landscape.floor;
        if !(p_min < model.p_max && model.p_max <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "need p_min < p_max ≤ 1, got {p_min} and {}",
                model.p_max
            )));
        }
        if !(model.distance_um >= 0.0) || !(model.a0 > 0.0) || model.a0 + model.offset.abs() > 1.0 {
            return Err(Error::InvalidParameter(
                "need distance ≥ 0, A₀ > 0 and A₀ + |C| ≤ 1".into(),
            ));
        }
        if landscape.shot_noise && model.n_shots == 0 {
            return Err(Error::InvalidParameter("shot noise needs n_shots > 0".into()));
        }
        let q_max = (0u32..1 << n)
            .map(|mask| {
                let corner: Vec<f64> = (0..n).map(|i| f64::from((mask >> i) & 1)).collect();
                landscape.quadratic(&corner)
            })
            .fold(0.0, f64::max);
        Ok(ShuttleBackend {
            landscape,
            space,
            model,
            q_max,
        })
    }

    pub fn landscape(&self) -> &HiddenLandscape {
        &self.landscape
    }

    pub fn model(&self) -> &ShuttleModel {
        &self.model
    }

    pub fn depolarization(&self, x: &[f64]) -> Result<f64> {
        check_unit_cube(x, self.space.len())?;
        let p_min = self.landscape.floor;
        let q = (self.landscape.quadratic(x) / self.q_max).clamp(0.0, 1.0);
        Ok(p_min + (self.model.p_max - p_min) * q)
    }

    pub fn echo_amplitude(&self, x: &[f64], distance_um: f64) -> Result<f64> {
        let p = self.depolarization(x)?;
        Ok(self.model.a0 * (1.0 - p).powf(distance_um / 10.0) + self.model.offset)
    }
}

impl Backend for ShuttleBackend {
    fn space(&self) -> &ParameterSpace {
        &self.space
    }

    fn evaluate(&self, x: &[f64], shot_seed: u64) -> Result<CostEvaluation> {
        let a = self.echo_amplitude(x, self.model.distance_um)?;
        if !self.landscape.shot_noise {
            return Ok(CostEvaluation {
                cost: 1.0 - a,
                value: a,
                shots: None,
            });
        }
        let n = self.model.n_shots;
        let mut rng = rng::stream(&[self.landscape.seed, shot_seed, 0x7368_7574]);
        let plain = binomial(&mut rng, n, (1.0 + a) / 2.0);
        let flipped = binomial(&mut rng, n, (1.0 - a) / 2.0);
        let measured = (plain as f64 - flipped as f64) / n as f64;
        Ok(CostEvaluation {
            cost: 1.0 - measured,
            value: measured,
            shots: Some(ShotCounts {
                shots: n,
                counts: vec![plain, flipped],
            }),
        })
    }

    fn noiseless_cost(&self, x: &[f64]) -> Result<f64> {
        Ok(1.0 - self.echo_amplitude(x, self.model.distance_um)?)
    }
}
