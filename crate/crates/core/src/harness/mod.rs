//! Configured runs, batches, sweeps and their analysis.

mod analyze;
mod batch;
mod config;
mod export;
mod record;
mod run;
mod sweep;

pub use analyze::{
    analyze, run_dirs, AnalysisReport, AnalyzeOptions, PairSpec, PairTrajectory, ANALYSIS_FILE, SENSITIVITY_CSV,
    SENSITIVITY_JSON,
};
pub use batch::{
    batch, repeat_dir_name, repeat_seed, BatchEntry, BatchSummary, Stats, AGGREGATE_FILE, COVARIANCE_AVERAGE_FILE,
};
pub use config::{
    default_readout_fixture, default_shuttle_fixture, BackendFixture, BenchmarkSettings, OptimizerSettings, RunConfig,
    Task,
};
pub use export::{
    best_params, export, export_best_params, export_covariance, export_grid, export_trace, BestParams, ExportKind,
    NamedValue, BEST_PARAMS_FILE, COVARIANCE_FILE, GRID_FILE, TRACE_FILE,
};
pub use record::{
    BestRecord, CandidateRecord, DistributionRecord, GenerationRecord, RunHeader, RunRecord, RunSummary, TimingRecord,
    HEADER_FILE, RECORD_FILE, SUMMARY_FILE, TIMING_FILE,
};
pub use run::{load_summary, run, run_with, run_with_backend, shot_seed, summarize, RunOptions};
pub use sweep::{run_sweep, AxisSpec, SweepConfig};
