use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterEntry {
    pub name: String,
    pub low: f64,
    pub high: f64,
    pub unit: String,
}

/// Ordered, named box of physical parameters. The optimizer only ever sees
/// the normalized coordinates `(v − low)/(high − low)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<ParameterEntry>", into = "Vec<ParameterEntry>")]
pub struct ParameterSpace {
    entries: Vec<ParameterEntry>,
}

impl TryFrom<Vec<ParameterEntry>> for ParameterSpace {
    type Error = Error;

    fn try_from(entries: Vec<ParameterEntry>) -> Result<Self> {
        ParameterSpace::new(entries)
    }
}

impl From<ParameterSpace> for Vec<ParameterEntry> {
    fn from(space: ParameterSpace) -> Self {
        space.entries
    }
}

fn entry(name: &str, low: f64, high: f64, unit: &str) -> ParameterEntry {
    ParameterEntry {
        name: name.to_string(),
        low,
        high,
        unit: unit.to_string(),
    }
}

impl ParameterSpace {
    pub fn new(entries: Vec<ParameterEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidParameter("parameter space is empty".into()));
        }
        for (i, e) in entries.iter().enumerate() {
            if !(e.low < e.high) || !e.low.is_finite() || !e.high.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "parameter `{}` needs finite low < high, got [{}, {}]",
                    e.name, e.low, e.high
                )));
            }
            if entries[..i].iter().any(|o| o.name == e.name) {
                return Err(Error::InvalidParameter(format!("duplicate parameter `{}`", e.name)));
            }
        }
        Ok(ParameterSpace { entries })
    }

    /// The 14 readout-pulse parameters: read-stage detuning/energy and
    /// barriers, init-stage barrier and plungers, zero-stage plungers,
    /// measurement time and the three inter-stage ramp times.
    pub fn readout() -> Self {
        let entries = vec![
            entry("veps12_read", -20.0, 20.0, "mV"),
            entry("vmu12_read", -20.0, 20.0, "mV"),
            entry("B0_read", -50.0, 50.0, "mV"),
            entry("B1_read", -50.0, 50.0, "mV"),
            entry("B2_read", -50.0, 50.0, "mV"),
            entry("B1_init", 0.0, 100.0, "mV"),
            entry("vP1_init", -30.0, 30.0, "mV"),
            entry("vP2_init", -30.0, 30.0, "mV"),
            entry("vP2_zero", -20.0, 20.0, "mV"),
            entry("vP3_zero", -20.0, 20.0, "mV"),
            entry("t_measure", 1.0, 20.0, "us"),
            entry("t_zero_read", 10.0, 1000.0, "ns"),
            entry("t_read_init", 0.1, 5.0, "ns"),
            entry("t_init_zero", 10.0, 1000.0, "ns"),
        ];
        ParameterSpace { entries }
    }

    /// DC offsets on the eight plunger and barrier gates along the conveyor.
    pub fn shuttle() -> Self {
        let entries = ["P2", "B2", "P3", "B3", "P4", "B4", "P5", "B5"]
            .iter()
            .map(|g| entry(&format!("dc_{g}"), -10.0, 10.0, "mV"))
            .collect();
        ParameterSpace { entries }
    }

    /// Drive time, drive amplitude and drive frequency around `f0` (GHz).
    /// The frequency window is deliberately off-centre so the resonance is
    /// not at the initial mean.
    pub fn single_qubit(f0: f64) -> Self {
        let entries = vec![
            entry("t_d", 20.0, 75.0, "ns"),
            entry("A", 120.0, 225.0, "mV"),
            entry("f", f0 - 3e-3, f0 + 1e-3, "GHz"),
        ];
        ParameterSpace { entries }
    }

    /// Symmetric box `[−half_width, half_width]^n` for test functions.
    pub fn benchmark(dimension: usize, half_width: f64) -> Result<Self> {
        Self::new(
            (0..dimension)
                .map(|i| entry(&format!("x{i}"), -half_width, half_width, ""))
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[ParameterEntry] {
        &self.entries
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.name.as_str())
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.entries
            .iter()
            .position(|e| e.name == name)
            .ok_or_else(|| Error::UnknownParameter(name.to_string()))
    }

    fn check_len(&self, found: usize) -> Result<()> {
        if found != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found,
            });
        }
        Ok(())
    }

    pub fn normalize(&self, physical: &[f64]) -> Result<Vec<f64>> {
        self.check_len(physical.len())?;
        Ok(self
            .entries
            .iter()
            .zip(physical)
            .map(|(e, v)| (v - e.low) / (e.high - e.low))
            .collect())
    }

    pub fn denormalize(&self, normalized: &[f64]) -> Result<Vec<f64>> {
        self.check_len(normalized.len())?;
        Ok(self
            .entries
            .iter()
            .zip(normalized)
            .map(|(e, u)| e.low + u * (e.high - e.low))
            .collect())
    }
}

/// Rejects points outside `[0, 1]^n` (with a little slack for rounding).
pub(crate) fn check_unit_cube(x: &[f64], expected: usize) -> Result<()> {
    if x.len() != expected {
        return Err(Error::DimensionMismatch {
            expected,
            found: x.len(),
        });
    }
    for &u in x {
        if !(-1e-12..=1.0 + 1e-12).contains(&u) {
            return Err(Error::OutOfRange {
                what: "normalized coordinate",
                value: u,
                low: 0.0,
                high: 1.0,
            });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_spaces_have_expected_sizes() {
        assert_eq!(ParameterSpace::readout().len(), 14);
        assert_eq!(ParameterSpace::shuttle().len(), 8);
        assert_eq!(ParameterSpace::single_qubit(18.0).len(), 3);
        for s in [ParameterSpace::readout(), ParameterSpace::shuttle()] {
            ParameterSpace::new(s.entries().to_vec()).unwrap();
        }
    }

    #[test]
    fn rejects_bad_entries() {
        assert!(ParameterSpace::new(vec![entry("a", 1.0, 1.0, "")]).is_err());
        assert!(ParameterSpace::new(vec![entry("a", 0.0, 1.0, ""), entry("a", 0.0, 2.0, "")]).is_err());
        assert!(ParameterSpace::new(vec![]).is_err());
    }

    #[test]
    fn json_round_trip_validates() {
        let s = ParameterSpace::readout();
        let text = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<ParameterSpace>(&text).unwrap(), s);
        let bad = r#"[{"name":"a","low":2,"high":1,"unit":"mV"}]"#;
        assert!(serde_json::from_str::<ParameterSpace>(bad).is_err());
    }

    #[test]
    fn lookup_and_dimension_errors() {
        let s = ParameterSpace::shuttle();
        assert_eq!(s.index_of("dc_P3").unwrap(), 2);
        assert!(matches!(s.index_of("nope"), Err(Error::UnknownParameter(_))));
        assert!(s.normalize(&[0.0; 3]).is_err());
    }
}
