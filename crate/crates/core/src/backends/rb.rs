use std::f64::consts::{FRAC_PI_2, PI};
use std::sync::OnceLock;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{binomial, Backend, CostEvaluation, ParameterSpace, ShotCounts};
use crate::{rng, Error, Result};

/// Mean primitive count of [`clifford_table`]; 45 primitives over 24 elements.
pub const GATES_PER_CLIFFORD: f64 = 1.875;

type Mat2 = [[Complex64; 2]; 2];

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const IDENTITY: Mat2 = [[ONE, ZERO], [ZERO, ONE]];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Primitive {
    I,
    X90,
    Xm90,
    X180,
    Y90,
    Ym90,
    Y180,
}

impl Primitive {
    pub const ALL: [Primitive; 7] = [
        Primitive::I,
        Primitive::X90,
        Primitive::Xm90,
        Primitive::X180,
        Primitive::Y90,
        Primitive::Ym90,
        Primitive::Y180,
    ];

    /// Drive phase (0 for +x, π/2 for +y, shifted by π for negative
    /// rotations) and nominal rotation angle; `None` for the idle.
    pub fn drive(self) -> Option<(f64, f64)> {
        match self {
            Primitive::I => None,
            Primitive::X90 => Some((0.0, FRAC_PI_2)),
            Primitive::Xm90 => Some((PI, FRAC_PI_2)),
            Primitive::X180 => Some((0.0, PI)),
            Primitive::Y90 => Some((FRAC_PI_2, FRAC_PI_2)),
            Primitive::Ym90 => Some((-FRAC_PI_2, FRAC_PI_2)),
            Primitive::Y180 => Some((FRAC_PI_2, PI)),
        }
    }

    /// Duration as a fraction of the π-pulse drive time `t_d`.
    pub fn duration_fraction(self) -> f64 {
        match self {
            Primitive::X180 | Primitive::Y180 => 1.0,
            _ => 0.5,
        }
    }

    fn index(self) -> usize {
        Primitive::ALL.iter().position(|&p| p == self).unwrap_or(0)
    }
}

/// `exp(−i·θ/2·(n·σ))` for a unit vector `n`.
fn rotation(n: [f64; 3], theta: f64) -> Mat2 {
    let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    let [nx, ny, nz] = n;
    [
        [Complex64::new(c, -s * nz), Complex64::new(-s * ny, -s * nx)],
        [Complex64::new(s * ny, -s * nx), Complex64::new(c, s * nz)],
    ]
}

fn mul(a: &Mat2, b: &Mat2) -> Mat2 {
    std::array::from_fn(|i| std::array::from_fn(|j| a[i][0] * b[0][j] + a[i][1] * b[1][j]))
}

/// `|tr(A†B)|`, equal to 2 when the unitaries agree up to a global phase.
fn trace_overlap(a: &Mat2, b: &Mat2) -> f64 {
    let mut t = ZERO;
    for i in 0..2 {
        for k in 0..2 {
            t += a[k][i].conj() * b[k][i];
        }
    }
    t.norm()
}

fn ideal(p: Primitive) -> Mat2 {
    match p.drive() {
        None => IDENTITY,
        Some((phi, theta)) => rotation([phi.cos(), phi.sin(), 0.0], theta),
    }
}

/// Single-qubit Clifford with its primitive decomposition, applied left to
/// right in time.
#[derive(Debug, Clone)]
pub struct Clifford {
    pub primitives: Vec<Primitive>,
    pub unitary: [[Complex64; 2]; 2],
}

struct Table {
    elements: Vec<Clifford>,
    product: Vec<Vec<usize>>,
    inverse: Vec<usize>,
}

fn table() -> &'static Table {
    static TABLE: OnceLock<Table> = OnceLock::new();
    TABLE.get_or_init(|| {
        use Primitive::*;
        let decompositions: [&[Primitive]; 24] = [
            &[I],
            &[X180],
            &[Y180],
            &[Y180, X180],
            &[X90, Y90],
            &[X90, Ym90],
            &[Xm90, Y90],
            &[Xm90, Ym90],
            &[Y90, X90],
            &[Y90, Xm90],
            &[Ym90, X90],
            &[Ym90, Xm90],
            &[X90],
            &[Xm90],
            &[Y90],
            &[Ym90],
            &[Xm90, Y90, X90],
            &[Xm90, Ym90, X90],
            &[X180, Y90],
            &[X180, Ym90],
            &[Y180, X90],
            &[Y180, Xm90],
            &[X90, Y90, X90],
            &[Xm90, Y90, Xm90],
        ];
        let elements: Vec<Clifford> = decompositions
            .iter()
            .map(|d| Clifford {
                primitives: d.to_vec(),
                unitary: d.iter().fold(IDENTITY, |acc, &p| mul(&ideal(p), &acc)),
            })
            .collect();
        let find = |u: &Mat2| {
            elements
                .iter()
                .position(|c| (trace_overlap(&c.unitary, u) - 2.0).abs() < 1e-9)
                .expect("Clifford table is closed")
        };
        // product[a][b]: apply a, then b.
        let product: Vec<Vec<usize>> = elements
            .iter()
            .map(|a| elements.iter().map(|b| find(&mul(&b.unitary, &a.unitary))).collect())
            .collect();
        let inverse = (0..24).map(|a| (0..24).find(|&b| product[a][b] == 0).unwrap_or(0)).collect();
        Table {
            elements,
            product,
            inverse,
        }
    })
}

/// The 24 single-qubit Cliffords (first entry is the identity).
pub fn clifford_table() -> &'static [Clifford] {
    &table().elements
}

/// Benchmarking settings for one cost evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RbConfig {
    pub sequence_length: usize,
    pub n_randomizations: usize,
    pub shots_per_sequence: u64,
    /// Fixes the random Clifford sequences.
    pub seed: u64,
    #[serde(default = "default_true")]
    pub shot_noise: bool,
}

fn default_true() -> bool {
    true
}

impl Default for RbConfig {
    fn default() -> Self {
        RbConfig {
            sequence_length: 30,
            n_randomizations: 15,
            shots_per_sequence: 100,
            seed: 0,
            shot_noise: true,
        }
    }
}

impl RbConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sequence_length == 0 || self.n_randomizations == 0 || self.shots_per_sequence == 0 {
            return Err(Error::InvalidParameter(
                "sequence length, randomizations and shots must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Random Clifford indices for every randomization, without the recovery.
pub fn rb_sequences(cfg: &RbConfig) -> Vec<Vec<usize>> {
    random_sequences(cfg.seed, cfg.sequence_length, cfg.n_randomizations)
}

fn random_sequences(seed: u64, length: usize, count: usize) -> Vec<Vec<usize>> {
    (0..count)
        .map(|r| {
            let mut rng = rng::stream(&[seed, length as u64, r as u64, 0x7262]);
            (0..length).map(|_| rng.random_range(0..24)).collect()
        })
        .collect()
}

/// Appends the Clifford that returns the sequence to the identity.
fn with_recovery(seq: &[usize]) -> Vec<usize> {
    let t = table();
    let net = seq.iter().fold(0, |acc, &c| t.product[acc][c]);
    let mut out = seq.to_vec();
    out.push(t.inverse[net]);
    out
}

/// Qubit and drive-line constants: resonance `f0` (GHz), Rabi rate per mV
/// (rad/ns/mV) and an optional depolarizing probability per primitive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QubitModel {
    pub f0: f64,
    pub rabi_per_mv: f64,
    #[serde(default)]
    pub depolarizing: f64,
}

impl Default for QubitModel {
    /// `A·t_d = 10⁴ mV·ns` makes a π pulse.
    fn default() -> Self {
        QubitModel {
            f0: 18.0,
            rabi_per_mv: PI * 1e-4,
            depolarizing: 0.0,
        }
    }
}

impl QubitModel {
    /// Rotating-frame unitaries of the seven primitives for drive time `t_d`
    /// (ns), amplitude `a` (mV) and drive frequency `f` (GHz).
    fn primitives(&self, t_d: f64, a: f64, f: f64) -> [Mat2; 7] {
        let omega = self.rabi_per_mv * a;
        let delta = 2.0 * PI * (f - self.f0);
        Primitive::ALL.map(|p| {
            let tau = p.duration_fraction() * t_d;
            let (rx, ry) = match p.drive() {
                Some((phi, _)) => (omega * phi.cos(), omega * phi.sin()),
                None => (0.0, 0.0),
            };
            let w = (rx * rx + ry * ry + delta * delta).sqrt();
            if w == 0.0 {
                IDENTITY
            } else {
                rotation([rx / w, ry / w, delta / w], w * tau)
            }
        })
    }

    /// Probability of returning to `|0⟩` after each sequence.
    fn return_probabilities(&self, phys: [f64; 3], sequences: &[Vec<usize>]) -> Vec<f64> {
        let [t_d, a, f] = phys;
        let prims = self.primitives(t_d, a, f);
        let elements = clifford_table();
        sequences
            .iter()
            .map(|seq| {
                let mut psi = [ONE, ZERO];
                let mut count = 0;
                for &c in seq {
                    for &p in &elements[c].primitives {
                        let u = &prims[p.index()];
                        psi = [
                            u[0][0] * psi[0] + u[0][1] * psi[1],
                            u[1][0] * psi[0] + u[1][1] * psi[1],
                        ];
                        count += 1;
                    }
                }
                let z = 2.0 * psi[0].norm_sqr() - 1.0;
                let shrink = (1.0 - self.depolarizing).powi(count);
                ((1.0 + shrink * z) / 2.0).clamp(0.0, 1.0)
            })
            .collect()
    }
}

/// Single-qubit gate calibration judged by RB return probability.
///
/// Every primitive is a rotating-frame pulse of Rabi rate `k·A` and
/// detuning `2π(f − f0)`; π pulses last `t_d`, π/2 pulses and the idle
/// `t_d/2`. Cost is `1 − mean P_r` over the fixed random sequences.
#[derive(Debug, Clone)]
pub struct RbBackend {
    config: RbConfig,
    qubit: QubitModel,
    space: ParameterSpace,
    sequences: Vec<Vec<usize>>,
}

impl RbBackend {
    pub fn new(config: RbConfig, qubit: QubitModel, space: ParameterSpace) -> Result<Self> {
        config.validate()?;
        if space.len() != 3 {
            return Err(Error::DimensionMismatch {
                expected: 3,
                found: space.len(),
            });
        }
        if !(0.0..1.0).contains(&qubit.depolarizing) || !(qubit.rabi_per_mv > 0.0) {
            return Err(Error::InvalidParameter(
                "need 0 ≤ depolarizing < 1 and a positive Rabi rate".into(),
            ));
        }
        let sequences = rb_sequences(&config).iter().map(|s| with_recovery(s)).collect();
        Ok(RbBackend {
            config,
            qubit,
            space,
            sequences,
        })
    }

    pub fn config(&self) -> &RbConfig {
        &self.config
    }

    pub fn qubit(&self) -> &QubitModel {
        &self.qubit
    }

    fn check_physical(phys: [f64; 3]) -> Result<()> {
        if !(phys[0] > 0.0 && phys[1] > 0.0) || !phys[2].is_finite() {
            return Err(Error::InvalidParameter(format!(
                "drive time and amplitude must be positive, got {phys:?}"
            )));
        }
        Ok(())
    }

    fn physical(&self, x: &[f64]) -> Result<[f64; 3]> {
        let v = self.space.denormalize(x)?;
        Ok([v[0], v[1], v[2]])
    }

    /// Exact mean return probability at physical `(t_d, A, f)`.
    pub fn return_probability(&self, phys: [f64; 3]) -> Result<f64> {
        Self::check_physical(phys)?;
        let p = self.qubit.return_probabilities(phys, &self.sequences);
        Ok(p.iter().sum::<f64>() / p.len() as f64)
    }

    pub fn evaluate_physical(&self, phys: [f64; 3], shot_seed: u64) -> Result<CostEvaluation> {
        Self::check_physical(phys)?;
        let probs = self.qubit.return_probabilities(phys, &self.sequences);
        if !self.config.shot_noise {
            let mean = probs.iter().sum::<f64>() / probs.len() as f64;
            return Ok(CostEvaluation {
                cost: 1.0 - mean,
                value: mean,
                shots: None,
            });
        }
        let n = self.config.shots_per_sequence;
        let mut rng = rng::stream(&[self.config.seed, shot_seed, 0x7262_7368]);
        let counts: Vec<u64> = probs.iter().map(|&p| binomial(&mut rng, n, p)).collect();
        let mean = counts.iter().sum::<u64>() as f64 / (n as f64 * counts.len() as f64);
        Ok(CostEvaluation {
            cost: 1.0 - mean,
            value: mean,
            shots: Some(ShotCounts { shots: n, counts }),
        })
    }

    /// Exact mean return probability for fresh random sequences at each
    /// length, for fitting `P_r = A·pᵐ + C`.
    pub fn decay_curve(
        &self,
        phys: [f64; 3],
        lengths: &[usize],
        randomizations: usize,
        seed: u64,
    ) -> Result<Vec<f64>> {
        Self::check_physical(phys)?;
        if randomizations == 0 {
            return Err(Error::InvalidParameter("need at least one randomization".into()));
        }
        Ok(lengths
            .iter()
            .map(|&m| {
                let seqs: Vec<Vec<usize>> = random_sequences(seed, m, randomizations)
                    .iter()
                    .map(|s| with_recovery(s))
                    .collect();
                let p = self.qubit.return_probabilities(phys, &seqs);
                p.iter().sum::<f64>() / p.len() as f64
            })
            .collect())
    }
}

impl Backend for RbBackend {
    fn space(&self) -> &ParameterSpace {
        &self.space
    }

    fn evaluate(&self, x: &[f64], shot_seed: u64) -> Result<CostEvaluation> {
        super::space::check_unit_cube(x, 3)?;
        self.evaluate_physical(self.physical(x)?, shot_seed)
    }

    fn noiseless_cost(&self, x: &[f64]) -> Result<f64> {
        super::space::check_unit_cube(x, 3)?;
        Ok(1.0 - self.return_probability(self.physical(x)?)?)
    }
}
