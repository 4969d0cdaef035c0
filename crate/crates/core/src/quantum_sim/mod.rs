//! Effective double-quantum-dot model for initialization ramps and the
//! two-tone conveyor drive.
//!
//! Units: energies in GHz, times in ns, ħ = 1 with phases `2π·E·t`.

mod conveyor;
mod dqd;
mod sweep;

pub use conveyor::ConveyorPulse;
pub use dqd::{
    adiabatic_pair, default_dt, detuning_ramp, evolve, evolve_reverse, hamiltonian,
    initialization_fidelity, initialization_fidelity_with_dt, AdiabaticPair, DqdConfig,
    NoiseModel, Propagator, StateVector, DEFAULT_STEPS,
};
pub use sweep::{sweep_fidelity_grid, Axis, FidelityGrid};
