use nalgebra::{Matrix3, SymmetricEigen, Vector3};
use num_complex::Complex64;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::{rng, Error, Result};

/// Steps per ramp used when the caller does not choose a time step.
pub const DEFAULT_STEPS: usize = 2000;

/// Largest detuning resolution (GHz) used when Monte-Carlo draws are
/// quantized onto the propagator lattice.
const NOISE_RESOLUTION: f64 = 2e-3;

/// Upper bound on cached propagators per Monte-Carlo evaluation.
const MAX_LATTICE: usize = 1 << 22;

/// Steps per unit `E·t` enforced by [`default_dt`].
const MAX_PHASE_RATE: f64 = 6.0;

const TWO_PI: f64 = std::f64::consts::TAU;

/// Double-dot parameters. Energies in GHz, `ramp_time` in ns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DqdConfig {
    pub tunnel_coupling: f64,
    pub zeeman_diff: f64,
    pub eps_initial: f64,
    pub eps_final: f64,
    pub ramp_time: f64,
}

impl DqdConfig {
    pub const FIELDS: [&'static str; 5] = [
        "tunnel_coupling",
        "zeeman_diff",
        "eps_initial",
        "eps_final",
        "ramp_time",
    ];

    /// Strong-coupling reference point: `t_c = 10`, `ΔE_Z = 0.3`, ramp 0 → 50 GHz in 4 ns.
    pub fn strong_coupling() -> Self {
        DqdConfig {
            tunnel_coupling: 10.0,
            zeeman_diff: 0.3,
            eps_initial: 0.0,
            eps_final: 50.0,
            ramp_time: 4.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ramp_time > 0.0 && self.ramp_time.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "ramp_time must be positive, got {}",
                self.ramp_time
            )));
        }
        if !(self.tunnel_coupling >= 0.0) || !(self.zeeman_diff >= 0.0) {
            return Err(Error::InvalidParameter(
                "tunnel_coupling and zeeman_diff must be non-negative".into(),
            ));
        }
        if !self.eps_initial.is_finite() || !self.eps_final.is_finite() {
            return Err(Error::InvalidParameter("detuning endpoints must be finite".into()));
        }
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<f64> {
        Ok(match name {
            "tunnel_coupling" => self.tunnel_coupling,
            "zeeman_diff" => self.zeeman_diff,
            "eps_initial" => self.eps_initial,
            "eps_final" => self.eps_final,
            "ramp_time" => self.ramp_time,
            other => return Err(Error::UnknownParameter(other.to_string())),
        })
    }

    pub fn set(&mut self, name: &str, value: f64) -> Result<()> {
        let slot = match name {
            "tunnel_coupling" => &mut self.tunnel_coupling,
            "zeeman_diff" => &mut self.zeeman_diff,
            "eps_initial" => &mut self.eps_initial,
            "eps_final" => &mut self.eps_final,
            "ramp_time" => &mut self.ramp_time,
            other => return Err(Error::UnknownParameter(other.to_string())),
        };
        *slot = value;
        Ok(())
    }
}

/// Amplitudes over `(|S(2,0)⟩, |S(1,1)⟩, |T₀(1,1)⟩)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateVector {
    pub amplitudes: [Complex64; 3],
}

impl StateVector {
    pub fn basis(index: usize) -> Self {
        let mut amplitudes = [Complex64::new(0.0, 0.0); 3];
        amplitudes[index] = Complex64::new(1.0, 0.0);
        StateVector { amplitudes }
    }

    pub fn from_real(v: &Vector3<f64>) -> Self {
        StateVector {
            amplitudes: [v[0].into(), v[1].into(), v[2].into()],
        }
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn populations(&self) -> [f64; 3] {
        self.amplitudes.map(|a| a.norm_sqr())
    }

    /// `|⟨other|self⟩|²`.
    pub fn overlap_sqr(&self, other: &StateVector) -> f64 {
        self.amplitudes
            .iter()
            .zip(other.amplitudes.iter())
            .map(|(a, b)| b.conj() * a)
            .sum::<Complex64>()
            .norm_sqr()
    }
}

/// Quasistatic Gaussian detuning noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub sigma_eps: f64,
    pub n_samples: usize,
    pub seed: u64,
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_eps >= 0.0 && self.sigma_eps.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sigma_eps must be non-negative, got {}",
                self.sigma_eps
            )));
        }
        if self.n_samples == 0 {
            return Err(Error::InvalidParameter("n_samples must be at least 1".into()));
        }
        Ok(())
    }

    /// The `n_samples` detuning shifts in draw order.
    pub fn draws(&self) -> Vec<f64> {
        let mut rng = rng::stream(&[self.seed, 0x6e6f_6973_65]);
        match Normal::new(0.0, self.sigma_eps) {
            Ok(normal) => (0..self.n_samples).map(|_| normal.sample(&mut rng)).collect(),
            Err(_) => vec![0.0; self.n_samples],
        }
    }
}

/// Effective Hamiltonian at detuning `eps`, in GHz.
pub fn hamiltonian(cfg: &DqdConfig, eps: f64) -> Matrix3<f64> {
    let (tc, dz) = (cfg.tunnel_coupling, cfg.zeeman_diff);
    Matrix3::new(
        -eps, tc, 0.0, //
        tc, 0.0, dz, //
        0.0, dz, 0.0,
    )
}

/// Linear detuning ramp `ε(t) = (ε_f − ε₀)·t/t_f + ε₀`.
pub fn detuning_ramp(cfg: &DqdConfig, t: f64) -> Result<f64> {
    if !(0.0..=cfg.ramp_time).contains(&t) {
        return Err(Error::OutOfRange {
            what: "ramp time",
            value: t,
            low: 0.0,
            high: cfg.ramp_time,
        });
    }
    Ok((cfg.eps_final - cfg.eps_initial) * t / cfg.ramp_time + cfg.eps_initial)
}

/// Unitary step `exp(−2πi·H·dt)` for a Hermitian 3×3 generator.
#[derive(Debug, Clone, Copy)]
pub struct Propagator {
    matrix: [[Complex64; 3]; 3],
}

impl Propagator {
    /// Exact exponential of a constant real-symmetric Hamiltonian.
    pub fn new(h: &Matrix3<f64>, dt: f64) -> Self {
        Self::from_eigen(&SymmetricEigen::new(*h), dt)
    }

    /// One step of a linear ramp, from the detuning at the step midpoint and
    /// the sweep rate `dε/dt`.
    ///
    /// Uses the fourth-order Magnus generator built from the two Gauss
    /// points of the step. Only the (0,0) entry depends on time, so the
    /// commutator term reduces to an imaginary correction `iκ` on the tunnel
    /// coupling, `κ = π·dt²·(dε/dt)·t_c / 6`. A diagonal phase gauge maps the
    /// generator back onto a real-symmetric matrix with coupling
    /// `|t_c + iκ|`, which is then exponentiated exactly.
    pub fn ramp_step(cfg: &DqdConfig, eps_mid: f64, sweep_rate: f64, dt: f64) -> Self {
        let tc = cfg.tunnel_coupling;
        let kappa = std::f64::consts::PI * dt * dt * sweep_rate * tc / 6.0;
        if kappa == 0.0 {
            return Self::new(&hamiltonian(cfg, eps_mid), dt);
        }
        let coupling = Complex64::new(tc, kappa);
        let mut gauged = hamiltonian(cfg, eps_mid);
        gauged[(0, 1)] = coupling.norm();
        gauged[(1, 0)] = coupling.norm();
        let mut u = Self::new(&gauged, dt);
        let d0 = Complex64::from_polar(1.0, coupling.arg());
        for j in 1..3 {
            u.matrix[0][j] *= d0;
            u.matrix[j][0] *= d0.conj();
        }
        u
    }

    fn from_eigen(eig: &SymmetricEigen<f64, nalgebra::U3>, dt: f64) -> Self {
        let v = &eig.eigenvectors;
        let phases: [Complex64; 3] =
            std::array::from_fn(|k| Complex64::from_polar(1.0, -TWO_PI * eig.eigenvalues[k] * dt));
        let mut matrix = [[Complex64::new(0.0, 0.0); 3]; 3];
        for (i, row) in matrix.iter_mut().enumerate() {
            for (j, cell) in row.iter_mut().enumerate() {
                *cell = (0..3).map(|k| phases[k] * (v[(i, k)] * v[(j, k)])).sum();
            }
        }
        Propagator { matrix }
    }

    pub fn apply(&self, psi: &StateVector) -> StateVector {
        let a = &psi.amplitudes;
        StateVector {
            amplitudes: std::array::from_fn(|i| {
                let r = &self.matrix[i];
                r[0] * a[0] + r[1] * a[1] + r[2] * a[2]
            }),
        }
    }

    pub fn apply_adjoint(&self, psi: &StateVector) -> StateVector {
        let a = &psi.amplitudes;
        let m = &self.matrix;
        StateVector {
            amplitudes: std::array::from_fn(|i| {
                m[0][i].conj() * a[0] + m[1][i].conj() * a[1] + m[2][i].conj() * a[2]
            }),
        }
    }
}

/// Time grid of a ramp: number of steps and the realised step length.
fn discretize(cfg: &DqdConfig, dt: f64) -> Result<(usize, f64)> {
    cfg.validate()?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidParameter(format!("dt must be positive, got {dt}")));
    }
    if dt > cfg.ramp_time {
        return Err(Error::OutOfRange {
            what: "time step",
            value: dt,
            low: 0.0,
            high: cfg.ramp_time,
        });
    }
    let steps = ((cfg.ramp_time / dt) - 1e-9).ceil().max(1.0) as usize;
    Ok((steps, cfg.ramp_time / steps as f64))
}

/// `t_f / DEFAULT_STEPS`, shortened on long ramps so that no step accrues more
/// than about one radian of phase at the largest energy along the ramp.
pub fn default_dt(cfg: &DqdConfig) -> f64 {
    let energy = cfg.eps_initial.abs().max(cfg.eps_final.abs())
        + 2.0 * (cfg.tunnel_coupling + cfg.zeeman_diff);
    let phase_limited = 1.0 / (MAX_PHASE_RATE * energy.max(1e-12));
    (cfg.ramp_time / DEFAULT_STEPS as f64).min(phase_limited)
}

/// Detuning at the midpoint of step `k`.
fn midpoint_detuning(cfg: &DqdConfig, steps: usize, k: usize) -> f64 {
    cfg.eps_initial + (cfg.eps_final - cfg.eps_initial) * (k as f64 + 0.5) / steps as f64
}

fn sweep_rate(cfg: &DqdConfig) -> f64 {
    (cfg.eps_final - cfg.eps_initial) / cfg.ramp_time
}

/// Integrates the Schrödinger equation along the ramp under
/// `H(ε(t) + noise_shift)`.
///
/// Every step is an exact exponential of its (fourth-order Magnus) step
/// generator, so the evolution is unitary to rounding error.
pub fn evolve(cfg: &DqdConfig, psi0: &StateVector, noise_shift: f64, dt: f64) -> Result<StateVector> {
    let (steps, h) = discretize(cfg, dt)?;
    check_normalized(psi0)?;
    let rate = sweep_rate(cfg);
    let mut psi = *psi0;
    for k in 0..steps {
        let eps = midpoint_detuning(cfg, steps, k) + noise_shift;
        psi = Propagator::ramp_step(cfg, eps, rate, h).apply(&psi);
    }
    Ok(psi)
}

/// Undoes [`evolve`]: applies the adjoint step propagators in reverse order.
pub fn evolve_reverse(
    cfg: &DqdConfig,
    psi: &StateVector,
    noise_shift: f64,
    dt: f64,
) -> Result<StateVector> {
    let (steps, h) = discretize(cfg, dt)?;
    check_normalized(psi)?;
    let rate = sweep_rate(cfg);
    let mut out = *psi;
    for k in (0..steps).rev() {
        let eps = midpoint_detuning(cfg, steps, k) + noise_shift;
        out = Propagator::ramp_step(cfg, eps, rate, h).apply_adjoint(&out);
    }
    Ok(out)
}

fn check_normalized(psi: &StateVector) -> Result<()> {
    let n = psi.norm_sqr();
    if (n - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!("initial state has norm² {n}")));
    }
    Ok(())
}

/// Ground state at `ε₀` and the eigenstate at `ε_f` it connects to.
///
/// The connection follows eigenvector continuity (largest overlap) through
/// the midpoint Hamiltonians of the time grid rather than energy ordering.
#[derive(Debug, Clone, Copy)]
pub struct AdiabaticPair {
    pub initial: StateVector,
    pub target: StateVector,
}

pub fn adiabatic_pair(cfg: &DqdConfig, dt: f64) -> Result<AdiabaticPair> {
    let (steps, _) = discretize(cfg, dt)?;
    let start = SymmetricEigen::new(hamiltonian(cfg, cfg.eps_initial));
    let ground = start.eigenvalues.imin();
    let initial: Vector3<f64> = start.eigenvectors.column(ground).into();

    let mut tracked = initial;
    let eps_path = (0..steps)
        .map(|k| midpoint_detuning(cfg, steps, k))
        .chain(std::iter::once(cfg.eps_final));
    for eps in eps_path {
        let eig = SymmetricEigen::new(hamiltonian(cfg, eps));
        let (best, _) = (0..3)
            .map(|k| (k, eig.eigenvectors.column(k).dot(&tracked).abs()))
            .fold((0, -1.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
        let next: Vector3<f64> = eig.eigenvectors.column(best).into();
        tracked = if next.dot(&tracked) < 0.0 { -next } else { next };
    }
    Ok(AdiabaticPair {
        initial: StateVector::from_real(&initial),
        target: StateVector::from_real(&tracked),
    })
}

/// Probability of ending in the adiabatically connected target eigenstate
/// after starting in the ground state at `ε₀`, at the default time step.
pub fn initialization_fidelity(cfg: &DqdConfig, noise: Option<&NoiseModel>) -> Result<f64> {
    initialization_fidelity_with_dt(cfg, noise, default_dt(cfg))
}

/// As [`initialization_fidelity`] with an explicit time step.
///
/// With noise, each Monte-Carlo sample shifts the whole ramp by one
/// quasistatic draw `δε` while the prepared state and the target stay those of
/// the nominal ramp. The draws are snapped to a detuning lattice commensurate
/// with the per-step detuning increment (spacing at most 2 MHz) so that step
/// propagators can be shared between samples.
pub fn initialization_fidelity_with_dt(
    cfg: &DqdConfig,
    noise: Option<&NoiseModel>,
    dt: f64,
) -> Result<f64> {
    let pair = adiabatic_pair(cfg, dt)?;
    match noise {
        None => Ok(evolve(cfg, &pair.initial, 0.0, dt)?.overlap_sqr(&pair.target)),
        Some(noise) => {
            noise.validate()?;
            monte_carlo_fidelity(cfg, &pair, noise, dt)
        }
    }
}

fn monte_carlo_fidelity(
    cfg: &DqdConfig,
    pair: &AdiabaticPair,
    noise: &NoiseModel,
    dt: f64,
) -> Result<f64> {
    let (steps, h) = discretize(cfg, dt)?;
    let draws = noise.draws();
    let increment = (cfg.eps_final - cfg.eps_initial) / steps as f64;

    // Lattice of detunings base + j·spacing, with the ramp advancing `stride`
    // lattice points per step.
    let (spacing, stride) = if increment.abs() > 0.0 {
        let m = (increment.abs() / NOISE_RESOLUTION).ceil().max(1.0);
        (increment.abs() / m, m as i64 * increment.signum() as i64)
    } else {
        (NOISE_RESOLUTION, 0)
    };
    let offsets: Vec<i64> = draws.iter().map(|d| (d / spacing).round() as i64).collect();
    let lo = offsets.iter().copied().min().unwrap_or(0) + stride.min(0) * (steps as i64 - 1);
    let hi = offsets.iter().copied().max().unwrap_or(0) + stride.max(0) * (steps as i64 - 1);
    let span = (hi - lo + 1) as usize;

    let base = cfg.eps_initial + 0.5 * increment;
    let rate = sweep_rate(cfg);
    let total: f64 = if span <= MAX_LATTICE {
        let mut lattice: Vec<Option<Propagator>> = vec![None; span];
        offsets
            .iter()
            .map(|&q| {
                let mut psi = pair.initial;
                for k in 0..steps as i64 {
                    let j = q + k * stride;
                    let slot = &mut lattice[(j - lo) as usize];
                    let u = slot.get_or_insert_with(|| {
                        let eps = base + k as f64 * increment + q as f64 * spacing;
                        Propagator::ramp_step(cfg, eps, rate, h)
                    });
                    psi = u.apply(&psi);
                }
                psi.overlap_sqr(&pair.target)
            })
            .sum()
    } else {
        let mut acc = 0.0;
        for &q in &offsets {
            acc += evolve(cfg, &pair.initial, q as f64 * spacing, dt)?.overlap_sqr(&pair.target);
        }
        acc
    };
    Ok(total / draws.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decoupled_hamiltonian_is_diagonal() {
        let cfg = DqdConfig {
            tunnel_coupling: 0.0,
            zeeman_diff: 0.0,
            ..DqdConfig::strong_coupling()
        };
        let h = hamiltonian(&cfg, 5.0);
        assert_eq!(h, Matrix3::from_diagonal(&Vector3::new(-5.0, 0.0, 0.0)));
    }

    #[test]
    fn anticrossing_gap_is_twice_coupling() {
        let cfg = DqdConfig {
            tunnel_coupling: 2.0,
            zeeman_diff: 0.0,
            ..DqdConfig::strong_coupling()
        };
        let mut e: Vec<f64> = SymmetricEigen::new(hamiltonian(&cfg, 0.0)).eigenvalues.iter().copied().collect();
        e.sort_by(f64::total_cmp);
        for (got, want) in e.iter().zip([-2.0, 0.0, 2.0]) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn hamiltonian_is_hermitian() {
        let h = hamiltonian(&DqdConfig::strong_coupling(), 13.7);
        assert_eq!(h, h.transpose());
    }

    #[test]
    fn ramp_endpoints_and_midpoint() {
        let cfg = DqdConfig::strong_coupling();
        assert_eq!(detuning_ramp(&cfg, 0.0).unwrap(), 0.0);
        assert_eq!(detuning_ramp(&cfg, 4.0).unwrap(), 50.0);
        assert_eq!(detuning_ramp(&cfg, 2.0).unwrap(), 25.0);
        assert!(detuning_ramp(&cfg, 4.5).is_err());
        assert!(detuning_ramp(&cfg, -0.1).is_err());
    }

    #[test]
    fn oversized_step_is_rejected() {
        let cfg = DqdConfig::strong_coupling();
        let psi = StateVector::basis(0);
        assert!(evolve(&cfg, &psi, 0.0, 5.0).is_err());
        assert!(evolve(&cfg, &psi, 0.0, 0.0).is_err());
    }

    #[test]
    fn unknown_field_is_rejected() {
        let mut cfg = DqdConfig::strong_coupling();
        assert!(matches!(cfg.set("lever_arm", 1.0), Err(Error::UnknownParameter(_))));
        cfg.set("ramp_time", 8.0).unwrap();
        assert_eq!(cfg.get("ramp_time").unwrap(), 8.0);
    }

    #[test]
    fn zero_noise_matches_noiseless() {
        let cfg = DqdConfig::strong_coupling();
        let clean = initialization_fidelity(&cfg, None).unwrap();
        let noise = NoiseModel {
            sigma_eps: 0.0,
            n_samples: 1000,
            seed: 3,
        };
        let noisy = initialization_fidelity(&cfg, Some(&noise)).unwrap();
        assert!((clean - noisy).abs() < 1e-12, "{clean} vs {noisy}");
    }
}
