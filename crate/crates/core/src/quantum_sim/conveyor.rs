use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Two-tone conveyor drive: a tone at `f` and one at `f/2` on every gate.
///
/// Voltages in mV, `frequency` in MHz, time in ns, phases in radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConveyorPulse {
    dc_offsets: Vec<f64>,
    amplitude: f64,
    frequency: f64,
    phases_fast: Vec<f64>,
    phases_slow: Vec<f64>,
}

impl ConveyorPulse {
    pub fn new(
        dc_offsets: Vec<f64>,
        amplitude: f64,
        frequency: f64,
        phases_fast: Vec<f64>,
        phases_slow: Vec<f64>,
    ) -> Result<Self> {
        let n = dc_offsets.len();
        if phases_fast.len() != n || phases_slow.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: if phases_fast.len() != n { phases_fast.len() } else { phases_slow.len() },
            });
        }
        Ok(ConveyorPulse {
            dc_offsets,
            amplitude,
            frequency,
            phases_fast,
            phases_slow,
        })
    }

    pub fn gates(&self) -> usize {
        self.dc_offsets.len()
    }

    /// `Vₙ(t) = Vₙᴰᶜ + (A/2)[sin(2πft − φₙ) + sin(πft − θₙ)]`.
    pub fn voltage(&self, gate: usize, t: f64) -> Result<f64> {
        if gate >= self.gates() {
            return Err(Error::OutOfRange {
                what: "gate index",
                value: gate as f64,
                low: 0.0,
                high: self.gates() as f64 - 1.0,
            });
        }
        // MHz · ns = 1e-3 cycles
        let cycles = self.frequency * t * 1e-3;
        let pi = std::f64::consts::PI;
        let fast = (2.0 * pi * cycles - self.phases_fast[gate]).sin();
        let slow = (pi * cycles - self.phases_slow[gate]).sin();
        Ok(self.dc_offsets[gate] + 0.5 * self.amplitude * (fast + slow))
    }
}
