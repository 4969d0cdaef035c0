use serde::{Deserialize, Serialize};

use super::space::check_unit_cube;
use super::{binomial, Backend, CostEvaluation, HiddenLandscape, LandscapeSpec, ParameterSpace, PlantedPair, ShotCounts};
use crate::quantum_sim::{initialization_fidelity, DqdConfig};
use crate::{rng, Error, Result};

/// Odd-parity counts for the two readout circuit variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReadoutShots {
    pub n_shots: u64,
    pub odd_given_odd: u64,
    pub odd_given_even: u64,
}

impl ReadoutShots {
    pub fn new(n_shots: u64, odd_given_odd: u64, odd_given_even: u64) -> Result<Self> {
        if odd_given_odd > n_shots || odd_given_even > n_shots {
            return Err(Error::InvalidParameter(format!(
                "counts ({odd_given_odd}, {odd_given_even}) exceed {n_shots} shots"
            )));
        }
        Ok(ReadoutShots {
            n_shots,
            odd_given_odd,
            odd_given_even,
        })
    }
}

/// `n(odd|odd) − n(odd|even)` as fractions of the shot count.
pub fn visibility(shots: &ReadoutShots) -> Result<f64> {
    if shots.n_shots == 0 {
        return Err(Error::InvalidParameter("visibility needs at least one shot".into()));
    }
    let n = shots.n_shots as f64;
    Ok(shots.odd_given_odd as f64 / n - shots.odd_given_even as f64 / n)
}

pub fn visibility_to_fidelity(v: f64) -> f64 {
    (1.0 + v) / 2.0
}

/// Linear map from four init-stage parameters to the double-dot ramp
/// `(t_c, ε₀, ε_f, t_f)`. Ranges are addressed by the normalized coordinate
/// of the named parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InitStageMap {
    pub tunnel_coupling: (String, [f64; 2]),
    pub eps_initial: (String, [f64; 2]),
    pub eps_final: (String, [f64; 2]),
    pub ramp_time: (String, [f64; 2]),
    pub zeeman_diff: f64,
}

impl Default for InitStageMap {
    fn default() -> Self {
        InitStageMap {
            tunnel_coupling: ("B1_init".into(), [4.0, 16.0]),
            eps_initial: ("vP1_init".into(), [-10.0, 10.0]),
            eps_final: ("vP2_init".into(), [20.0, 80.0]),
            ramp_time: ("t_read_init".into(), [0.1, 5.0]),
            zeeman_diff: 0.3,
        }
    }
}

impl InitStageMap {
    fn slots(&self) -> [&(String, [f64; 2]); 4] {
        [&self.tunnel_coupling, &self.eps_initial, &self.eps_final, &self.ramp_time]
    }

    fn config(&self, index: &[usize; 4], x: &[f64]) -> DqdConfig {
        let v: [f64; 4] = std::array::from_fn(|k| {
            let [lo, hi] = self.slots()[k].1;
            lo + x[index[k]] * (hi - lo)
        });
        DqdConfig {
            tunnel_coupling: v[0],
            zeeman_diff: self.zeeman_diff,
            eps_initial: v[1],
            eps_final: v[2],
            ramp_time: v[3],
        }
    }
}

/// Pauli-spin-blockade readout over the 14 pulse parameters.
///
/// The noiseless visibility is
/// `V(x) = (1 − floor)·exp(−q(x))·min(1, F(x)/F(x*))`, where `F` is the
/// simulated initialization fidelity of the init-stage ramp and `x*` the
/// planted optimum, so `V(x*) = 1 − floor` is the global maximum. Shots are
/// binomial with odd-parity probabilities `(1 ± V)/2` for the two variants.
#[derive(Debug, Clone)]
pub struct ReadoutBackend {
    landscape: HiddenLandscape,
    space: ParameterSpace,
    init: InitStageMap,
    init_index: [usize; 4],
    reference_fidelity: f64,
    n_shots: u64,
}

impl ReadoutBackend {
    pub fn new(
        landscape: HiddenLandscape,
        space: ParameterSpace,
        init: InitStageMap,
        n_shots: u64,
    ) -> Result<Self> {
        landscape.validate()?;
        if landscape.dimension() != space.len() {
            return Err(Error::DimensionMismatch {
                expected: space.len(),
                found: landscape.dimension(),
            });
        }
        if landscape.shot_noise && n_shots == 0 {
            return Err(Error::InvalidParameter("shot noise needs n_shots > 0".into()));
        }
        let mut init_index = [0; 4];
        for (slot, (name, [lo, hi])) in init_index.iter_mut().zip(init.slots()) {
            *slot = space.index_of(name)?;
            if !(lo < hi) {
                return Err(Error::InvalidParameter(format!("empty init range for `{name}`")));
            }
        }
        let reference = init.config(&init_index, &landscape.optimum);
        reference.validate()?;
        let reference_fidelity = initialization_fidelity(&reference, None)?;
        Ok(ReadoutBackend {
            landscape,
            space,
            init,
            init_index,
            reference_fidelity,
            n_shots,
        })
    }

    /// The default 14-parameter space with crosstalk planted between
    /// (`veps12_read`, `B2_read`) with positive and (`vmu12_read`, `B1_read`)
    /// with negative covariance.
    pub fn planted_spec(seed: u64, floor: f64) -> LandscapeSpec {
        let space = ParameterSpace::readout();
        let idx = |name: &str| space.index_of(name).expect("default readout space");
        LandscapeSpec {
            dimension: space.len(),
            floor,
            shot_noise: true,
            seed,
            curvature: 3.0,
            planted: vec![
                PlantedPair {
                    i: idx("veps12_read"),
                    j: idx("B2_read"),
                    correlation: 0.7,
                },
                PlantedPair {
                    i: idx("vmu12_read"),
                    j: idx("B1_read"),
                    correlation: -0.7,
                },
            ],
        }
    }

    pub fn landscape(&self) -> &HiddenLandscape {
        &self.landscape
    }

    /// Double-dot ramp realised by the init-stage coordinates of `x`.
    pub fn init_config(&self, x: &[f64]) -> Result<DqdConfig> {
        check_unit_cube(x, self.space.len())?;
        Ok(self.init.config(&self.init_index, x))
    }

    pub fn true_visibility(&self, x: &[f64]) -> Result<f64> {
        let cfg = self.init_config(x)?;
        let ratio = (initialization_fidelity(&cfg, None)? / self.reference_fidelity).min(1.0);
        Ok((1.0 - self.landscape.floor) * (-self.landscape.quadratic(x)).exp() * ratio)
    }
}

impl Backend for ReadoutBackend {
    fn space(&self) -> &ParameterSpace {
        &self.space
    }

    fn evaluate(&self, x: &[f64], shot_seed: u64) -> Result<CostEvaluation> {
        let v = self.true_visibility(x)?;
        if !self.landscape.shot_noise {
            return Ok(CostEvaluation {
                cost: -v,
                value: v,
                shots: None,
            });
        }
        let mut rng = rng::stream(&[self.landscape.seed, shot_seed, 0x7265_6164]);
        let shots = ReadoutShots {
            n_shots: self.n_shots,
            odd_given_odd: binomial(&mut rng, self.n_shots, (1.0 + v) / 2.0),
            odd_given_even: binomial(&mut rng, self.n_shots, (1.0 - v) / 2.0),
        };
        let measured = visibility(&shots)?;
        Ok(CostEvaluation {
            cost: -measured,
            value: measured,
            shots: Some(ShotCounts {
                shots: self.n_shots,
                counts: vec![shots.odd_given_odd, shots.odd_given_even],
            }),
        })
    }

    fn noiseless_cost(&self, x: &[f64]) -> Result<f64> {
        Ok(-self.true_visibility(x)?)
    }
}
