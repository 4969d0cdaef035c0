use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::backends::{
    Backend, BenchmarkBackend, HiddenLandscape, InitStageMap, LandscapeSpec, ParameterSpace, QubitModel,
    RbBackend, RbConfig, ReadoutBackend, ShuttleBackend, ShuttleModel,
};
use crate::benchmarks::TestFunction;
use crate::optimizer::{Bounds, StrategyParams};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Readout,
    Shuttle,
    SingleQubit,
    Benchmark,
}

/// Where the hidden landscape comes from: a JSON file, a recipe, or the
/// landscape itself written inline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BackendFixture {
    Path(PathBuf),
    Spec(LandscapeSpec),
    Landscape(HiddenLandscape),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerSettings {
    #[serde(default = "default_sigma")]
    pub initial_sigma: f64,
    /// Normalized starting mean; the centre of the box if absent.
    #[serde(default)]
    pub initial_mean: Option<Vec<f64>>,
    #[serde(default = "default_bounds")]
    pub bounds: Bounds,
}

fn default_sigma() -> f64 {
    1.0
}

fn default_bounds() -> Bounds {
    Bounds::Repair
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        OptimizerSettings {
            initial_sigma: default_sigma(),
            initial_mean: None,
            bounds: default_bounds(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkSettings {
    pub function: TestFunction,
    pub dimension: usize,
    #[serde(default = "default_half_width")]
    pub half_width: f64,
}

fn default_half_width() -> f64 {
    5.0
}

/// One closed-loop run, read from a single JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub task: Task,
    pub generations: usize,
    pub population: usize,
    pub seed: u64,
    /// Shots per evaluation (per circuit variant, or per RB sequence).
    #[serde(default = "default_shots")]
    pub shots: u64,
    /// Defaults to the task's standard parameter set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parameter_space: Option<ParameterSpace>,
    /// Readout and shuttle only. Defaults to the task's planted landscape.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub backend_fixture: Option<BackendFixture>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub optimizer: OptimizerSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub readout_init: Option<InitStageMap>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shuttle: Option<ShuttleModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rb: Option<RbConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub qubit: Option<QubitModel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub benchmark: Option<BenchmarkSettings>,
}

fn default_shots() -> u64 {
    1000
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs")
}

/// Ceiling visibility 0.995 with crosstalk planted on the two read pairs.
pub fn default_readout_fixture() -> LandscapeSpec {
    ReadoutBackend::planted_spec(0, 0.005)
}

/// `p_min = 0.0192` over the eight conveyor offsets.
pub fn default_shuttle_fixture() -> LandscapeSpec {
    LandscapeSpec {
        dimension: 8,
        floor: 0.0192,
        shot_noise: true,
        seed: 0,
        curvature: 3.0,
        planted: Vec::new(),
    }
}

impl RunConfig {
    /// Minimal configuration for `task` with every optional field at its
    /// default.
    pub fn new(task: Task, generations: usize, population: usize, seed: u64) -> Self {
        RunConfig {
            task,
            generations,
            population,
            seed,
            shots: default_shots(),
            parameter_space: None,
            backend_fixture: None,
            output_dir: default_output_dir(),
            optimizer: OptimizerSettings::default(),
            readout_init: None,
            shuttle: None,
            rb: None,
            qubit: None,
            benchmark: None,
        }
    }

    /// Parses and validates a config file. A relative fixture path is taken
    /// relative to the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut config: RunConfig =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if let Some(BackendFixture::Path(p)) = &mut config.backend_fixture {
            if p.is_relative() {
                if let Some(dir) = path.parent() {
                    *p = dir.join(&*p);
                }
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.generations < 1 {
            return bad("generations must be at least 1".into());
        }
        if self.population < 2 {
            return bad("population must be at least 2".into());
        }
        if self.shots == 0 && self.task != Task::Benchmark {
            return bad("shots must be at least 1".into());
        }
        let o = &self.optimizer;
        if !(o.initial_sigma > 0.0 && o.initial_sigma.is_finite()) {
            return bad(format!("initial_sigma must be positive, got {}", o.initial_sigma));
        }
        if self.task == Task::Benchmark && self.benchmark.is_none() {
            return bad("benchmark task needs a `benchmark` section".into());
        }
        let n = self.space()?.len();
        if let Some(m) = &o.initial_mean {
            if m.len() != n {
                return bad(format!("initial_mean has {} entries, the space has {n}", m.len()));
            }
            if m.iter().any(|v| !v.is_finite()) {
                return bad("initial_mean must be finite".into());
            }
        }
        Ok(())
    }

    pub fn space(&self) -> Result<ParameterSpace> {
        if let Some(space) = &self.parameter_space {
            return Ok(space.clone());
        }
        Ok(match self.task {
            Task::Readout => ParameterSpace::readout(),
            Task::Shuttle => ParameterSpace::shuttle(),
            Task::SingleQubit => ParameterSpace::single_qubit(self.qubit.unwrap_or_default().f0),
            Task::Benchmark => {
                let b = self
                    .benchmark
                    .ok_or_else(|| Error::Config("benchmark task needs a `benchmark` section".into()))?;
                ParameterSpace::benchmark(b.dimension, b.half_width).map_err(|e| Error::Config(e.to_string()))?
            }
        })
    }

    pub fn strategy(&self) -> Result<StrategyParams> {
        let n = self.space()?.len();
        let params = StrategyParams::new(n, self.population, self.seed).map_err(|e| Error::Config(e.to_string()))?;
        Ok(params.with_bounds(self.optimizer.bounds))
    }

    pub fn initial_mean(&self) -> Result<Vec<f64>> {
        let n = self.space()?.len();
        Ok(self.optimizer.initial_mean.clone().unwrap_or_else(|| vec![0.5; n]))
    }

    fn landscape(&self, default: impl FnOnce() -> LandscapeSpec) -> Result<HiddenLandscape> {
        match &self.backend_fixture {
            None => default().generate(),
            Some(BackendFixture::Path(p)) => HiddenLandscape::load(p),
            Some(BackendFixture::Spec(spec)) => spec.generate(),
            Some(BackendFixture::Landscape(l)) => {
                l.validate()?;
                Ok(l.clone())
            }
        }
        .map_err(|e| match e {
            Error::Fixture { .. } => e,
            other => Error::Config(format!("backend fixture: {other}")),
        })
    }

    /// Builds the simulated device for this task. Fixture problems are
    /// reported as [`Error::Fixture`] or [`Error::Config`].
    pub fn backend(&self) -> Result<Box<dyn Backend>> {
        let space = self.space()?;
        let config_err = |e: Error| match e {
            Error::Fixture { .. } | Error::Config(_) => e,
            other => Error::Config(other.to_string()),
        };
        Ok(match self.task {
            Task::Readout => {
                let landscape = self.landscape(default_readout_fixture)?;
                let init = self.readout_init.clone().unwrap_or_default();
                Box::new(ReadoutBackend::new(landscape, space, init, self.shots).map_err(config_err)?)
            }
            Task::Shuttle => {
                let landscape = self.landscape(default_shuttle_fixture)?;
                let model = ShuttleModel {
                    n_shots: self.shots,
                    ..self.shuttle.unwrap_or_default()
                };
                Box::new(ShuttleBackend::new(landscape, space, model).map_err(config_err)?)
            }
            Task::SingleQubit => {
                let rb = RbConfig {
                    shots_per_sequence: self.shots,
                    ..self.rb.unwrap_or_default()
                };
                let qubit = self.qubit.unwrap_or_default();
                Box::new(RbBackend::new(rb, qubit, space).map_err(config_err)?)
            }
            Task::Benchmark => {
                let b = self
                    .benchmark
                    .ok_or_else(|| Error::Config("benchmark task needs a `benchmark` section".into()))?;
                Box::new(BenchmarkBackend::new(b.function, space))
            }
        })
    }
}
