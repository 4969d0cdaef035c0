use std::path::Path;

use evotune::backends::{Backend, ParameterSpace};
use evotune::benchmarks::TestFunction;
use evotune::harness::*;
use evotune::{CostEvaluation, Error, Result};
use tempfile::tempdir;

fn sphere_config(dir: &Path, generations: usize, population: usize, seed: u64) -> RunConfig {
    let mut c = RunConfig::new(Task::Benchmark, generations, population, seed);
    c.benchmark = Some(BenchmarkSettings {
        function: TestFunction::Sphere,
        dimension: 3,
        half_width: 5.0,
    });
    c.output_dir = dir.to_path_buf();
    c
}

fn readout_config(dir: &Path, generations: usize, population: usize, seed: u64) -> RunConfig {
    let mut c = RunConfig::new(Task::Readout, generations, population, seed);
    c.output_dir = dir.to_path_buf();
    c
}

fn bytes(p: &Path) -> Vec<u8> {
    std::fs::read(p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

#[test]
fn one_generation_of_two_gives_two_evaluations() {
    let tmp = tempdir().unwrap();
    let record = run(&sphere_config(tmp.path(), 1, 2, 1)).unwrap();
    assert_eq!(record.evaluations(), 2);
    assert_eq!(record.generations.len(), 1);
    assert_eq!(record.wall_clock_s.len(), 1);
}

#[test]
fn trace_has_one_row_per_evaluation() {
    let tmp = tempdir().unwrap();
    run(&sphere_config(tmp.path(), 2, 3, 4)).unwrap();
    let text = std::fs::read_to_string(tmp.path().join(TRACE_FILE)).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "generation,individual,cost");
    assert_eq!(lines.len(), 7);
    let rows: Vec<(u64, usize)> = lines[1..]
        .iter()
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[1].parse().unwrap())
        })
        .collect();
    assert_eq!(rows, vec![(0, 0), (0, 1), (0, 2), (1, 0), (1, 1), (1, 2)]);
}

#[test]
fn covariance_export_starts_at_identity() {
    let tmp = tempdir().unwrap();
    run(&sphere_config(tmp.path(), 3, 6, 2)).unwrap();
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(tmp.path().join(COVARIANCE_FILE)).unwrap()).unwrap();
    let snaps = v["snapshots"].as_array().unwrap();
    assert_eq!(snaps.len(), 4);
    assert_eq!(snaps[0]["generation"], 0);
    let m = snaps[0]["matrix"].as_array().unwrap();
    for (i, row) in m.iter().enumerate() {
        for (j, x) in row.as_array().unwrap().iter().enumerate() {
            assert_eq!(x.as_f64().unwrap(), if i == j { 1.0 } else { 0.0 });
        }
    }
}

#[test]
fn identical_configs_give_identical_record_bytes() {
    let a = tempdir().unwrap();
    let b = tempdir().unwrap();
    run(&readout_config(a.path(), 4, 8, 17)).unwrap();
    run(&readout_config(b.path(), 4, 8, 17)).unwrap();
    for f in [RECORD_FILE, TRACE_FILE, COVARIANCE_FILE, BEST_PARAMS_FILE, SUMMARY_FILE] {
        assert_eq!(bytes(&a.path().join(f)), bytes(&b.path().join(f)), "{f}");
    }
    let c = tempdir().unwrap();
    run(&readout_config(c.path(), 4, 8, 18)).unwrap();
    assert_ne!(bytes(&a.path().join(RECORD_FILE)), bytes(&c.path().join(RECORD_FILE)));
}

#[test]
fn record_invariants_hold() {
    let tmp = tempdir().unwrap();
    let record = run(&readout_config(tmp.path(), 6, 10, 3)).unwrap();
    assert_eq!(record.evaluations(), 60);
    let mut last = f64::INFINITY;
    for g in &record.generations {
        let gen_min = g.candidates.iter().map(|c| c.cost).fold(f64::INFINITY, f64::min);
        assert!(g.best_so_far.cost <= last);
        assert!(g.best_so_far.cost <= gen_min);
        last = g.best_so_far.cost;
        let ids: Vec<usize> = g.candidates.iter().map(|c| c.id).collect();
        assert_eq!(ids, (0..10).collect::<Vec<_>>());
        for c in &g.candidates {
            assert!(c.shots.is_some());
            assert!(c.x_normalized.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }
}

#[test]
fn resume_after_truncation_matches_uninterrupted_run() {
    let full = tempdir().unwrap();
    run(&sphere_config(full.path(), 5, 6, 9)).unwrap();
    let reference = bytes(&full.path().join(RECORD_FILE));
    let text = String::from_utf8(reference.clone()).unwrap();
    let lines: Vec<&str> = text.split_inclusive('\n').collect();

    for keep in 0..lines.len() {
        let part = tempdir().unwrap();
        let cfg = sphere_config(part.path(), 5, 6, 9);
        run(&cfg).unwrap();
        // Complete generations plus half of the next line.
        let mut cut: String = lines[..keep].concat();
        cut.push_str(&lines[keep][..lines[keep].len() / 2]);
        std::fs::write(part.path().join(RECORD_FILE), &cut).unwrap();

        let shorter = RunRecord::load(part.path()).unwrap();
        assert_eq!(shorter.generations.len(), keep);
        assert_eq!(shorter.evaluations(), keep * 6);
        if keep > 0 {
            shorter.covariance_series().unwrap();
        }

        let resumed = run_with(&cfg, RunOptions { resume: true }).unwrap();
        assert_eq!(resumed.generations.len(), 5);
        assert_eq!(bytes(&part.path().join(RECORD_FILE)), reference, "keep {keep}");
        assert_eq!(resumed.wall_clock_s.len(), 5);
    }
}

#[test]
fn resume_rejects_a_different_configuration() {
    let tmp = tempdir().unwrap();
    run(&sphere_config(tmp.path(), 2, 4, 1)).unwrap();
    let other = sphere_config(tmp.path(), 2, 4, 2);
    assert!(matches!(
        run_with(&other, RunOptions { resume: true }),
        Err(Error::Config(_))
    ));
}

#[test]
fn best_params_reevaluate_within_shot_noise() {
    let tmp = tempdir().unwrap();
    let cfg = readout_config(tmp.path(), 10, 12, 5);
    let record = run(&cfg).unwrap();
    let best = BestParams::load(&tmp.path().join(BEST_PARAMS_FILE)).unwrap();
    assert_eq!(best.cost, record.best().unwrap().cost);
    assert_eq!(
        best.parameters.iter().map(|p| p.name.clone()).collect::<Vec<_>>(),
        record.names()
    );

    let backend = cfg.backend().unwrap();
    let x = backend.space().normalize(&best.values()).unwrap();
    let fresh: Vec<f64> = (0..300u64)
        .map(|s| backend.evaluate(&x, 1_000_000 + s).unwrap().cost)
        .collect();
    let mean = fresh.iter().sum::<f64>() / fresh.len() as f64;
    let sd = (fresh.iter().map(|c| (c - mean).powi(2)).sum::<f64>() / (fresh.len() - 1) as f64).sqrt();
    // The recorded best is the minimum of many noisy draws, so it sits on the
    // low tail; allow a wide band.
    assert!((best.cost - mean).abs() <= 5.0 * sd, "best {} fresh {mean} ± {sd}", best.cost);
    assert!((backend.noiseless_cost(&x).unwrap() - mean).abs() <= 4.0 * sd / (fresh.len() as f64).sqrt());
}

/// Sphere on a 2-d box that fails whenever the first coordinate is above
/// the centre.
struct Flaky(ParameterSpace);

impl Backend for Flaky {
    fn space(&self) -> &ParameterSpace {
        &self.0
    }
    fn evaluate(&self, x: &[f64], _: u64) -> Result<CostEvaluation> {
        if x[0] > 0.5 {
            return Err(Error::InvalidParameter("device timeout".into()));
        }
        let c: f64 = x.iter().map(|v| (v - 0.25).powi(2)).sum();
        Ok(CostEvaluation {
            cost: c,
            value: c,
            shots: None,
        })
    }
    fn noiseless_cost(&self, x: &[f64]) -> Result<f64> {
        Ok(x.iter().map(|v| (v - 0.25).powi(2)).sum())
    }
}

#[test]
fn failed_candidates_get_the_worst_cost_and_the_run_continues() {
    let tmp = tempdir().unwrap();
    let mut cfg = sphere_config(tmp.path(), 8, 8, 11);
    cfg.benchmark.as_mut().unwrap().dimension = 2;
    let backend = Flaky(ParameterSpace::benchmark(2, 1.0).unwrap());
    let record = run_with_backend(&cfg, &backend, RunOptions::default()).unwrap();
    assert_eq!(record.generations.len(), 8);
    let mut failures = 0;
    for g in &record.generations {
        let worst_ok = g
            .candidates
            .iter()
            .filter(|c| c.error.is_none())
            .map(|c| c.cost)
            .fold(f64::NEG_INFINITY, f64::max);
        for c in g.candidates.iter().filter(|c| c.error.is_some()) {
            failures += 1;
            assert!(c.x_normalized[0] > 0.5);
            let expected = if worst_ok.is_finite() { worst_ok } else { f64::MAX };
            assert_eq!(c.cost, expected);
        }
    }
    assert!(failures > 0);
    assert!(record.best().unwrap().cost < 0.05);
}

#[test]
fn missing_fixture_is_a_fixture_error() {
    let tmp = tempdir().unwrap();
    let mut cfg = readout_config(tmp.path(), 1, 2, 0);
    cfg.backend_fixture = Some(BackendFixture::Path(tmp.path().join("nope.json")));
    let e = run(&cfg).unwrap_err();
    assert_eq!(e.exit_code(), 2, "{e}");
}

#[test]
fn unwritable_output_is_an_io_error() {
    let tmp = tempdir().unwrap();
    let blocker = tmp.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let cfg = sphere_config(&blocker.join("out"), 1, 2, 0);
    let e = run(&cfg).unwrap_err();
    assert_eq!(e.exit_code(), 3, "{e}");
}

#[test]
fn invalid_shapes_are_config_errors() {
    let tmp = tempdir().unwrap();
    for (g, p) in [(0, 4), (3, 1)] {
        let e = run(&sphere_config(tmp.path(), g, p, 0)).unwrap_err();
        assert!(matches!(e, Error::Config(_)), "{e}");
    }
}

#[test]
fn config_file_round_trip_and_relative_fixture() {
    let tmp = tempdir().unwrap();
    let landscape = default_readout_fixture().generate().unwrap();
    landscape.save(&tmp.path().join("land.json")).unwrap();
    let text = r#"{
        "task": "readout",
        "generations": 2,
        "population": 4,
        "seed": 3,
        "shots": 200,
        "backend_fixture": "land.json",
        "optimizer": {"initial_sigma": 0.5}
    }"#;
    let path = tmp.path().join("cfg.json");
    std::fs::write(&path, text).unwrap();
    let cfg = RunConfig::load(&path).unwrap();
    assert_eq!(cfg.backend_fixture, Some(BackendFixture::Path(tmp.path().join("land.json"))));
    assert_eq!(cfg.optimizer.initial_sigma, 0.5);
    cfg.backend().unwrap();

    std::fs::write(&path, text.replace("\"seed\"", "\"sede\"")).unwrap();
    assert!(matches!(RunConfig::load(&path), Err(Error::Config(_))));
    let again: RunConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
    assert_eq!(again, cfg);
}

#[test]
fn one_repeat_batch_matches_run() {
    let a = tempdir().unwrap();
    let b = tempdir().unwrap();
    run(&readout_config(a.path(), 3, 6, 21)).unwrap();
    let (records, summary) = batch(&readout_config(b.path(), 3, 6, 21), 1).unwrap();
    assert_eq!(records.len(), 1);
    assert_eq!(summary.runs[0].seed, 21);
    assert_eq!(
        bytes(&a.path().join(RECORD_FILE)),
        bytes(&b.path().join(repeat_dir_name(0)).join(RECORD_FILE))
    );
}

#[test]
fn batches_with_the_same_seed_give_identical_aggregates() {
    let a = tempdir().unwrap();
    let b = tempdir().unwrap();
    let (_, sa) = batch(&readout_config(a.path(), 3, 6, 8), 3).unwrap();
    batch(&readout_config(b.path(), 3, 6, 8), 3).unwrap();
    assert_eq!(bytes(&a.path().join(AGGREGATE_FILE)), bytes(&b.path().join(AGGREGATE_FILE)));
    assert_eq!(
        bytes(&a.path().join(COVARIANCE_AVERAGE_FILE)),
        bytes(&b.path().join(COVARIANCE_AVERAGE_FILE))
    );
    let seeds: Vec<u64> = sa.runs.iter().map(|r| r.seed).collect();
    assert_eq!(seeds[0], 8);
    assert!(seeds[1] != seeds[0] && seeds[2] != seeds[1] && seeds[2] != seeds[0]);
    let stats = sa.best_cost.unwrap();
    assert_eq!(stats.count, 3);
    assert!(stats.min <= stats.mean && stats.mean <= stats.max);
}

#[test]
fn a_failed_repeat_does_not_abort_the_batch() {
    let tmp = tempdir().unwrap();
    std::fs::write(tmp.path().join(repeat_dir_name(1)), "in the way").unwrap();
    let (records, summary) = batch(&sphere_config(tmp.path(), 2, 4, 0), 3).unwrap();
    assert_eq!(records.len(), 2);
    assert!(summary.runs[1].error.is_some());
    assert!(summary.runs[0].error.is_none() && summary.runs[2].error.is_none());
    assert_eq!(summary.best_cost.unwrap().count, 2);
}

#[test]
fn analyze_writes_sensitivity_and_trajectories() {
    let tmp = tempdir().unwrap();
    batch(&sphere_config(tmp.path(), 10, 8, 2), 2).unwrap();
    let report = analyze(
        tmp.path(),
        &AnalyzeOptions {
            hdmr: true,
            cov_pairs: vec!["0,1".parse().unwrap(), "x2,x2".parse().unwrap()],
        },
    )
    .unwrap();
    assert_eq!(report.runs, 2);
    let s = report.sensitivity.unwrap();
    assert_eq!(s.parameters.len(), 3);
    assert!(tmp.path().join(SENSITIVITY_CSV).is_file());
    assert_eq!(report.trajectories.len(), 2);
    let diag = &report.trajectories[1];
    assert_eq!(diag.pair, (2, 2));
    assert_eq!(diag.first, 1.0);
    let csv = std::fs::read_to_string(tmp.path().join(&diag.file)).unwrap();
    assert_eq!(csv.lines().count(), 12);

    let bad = AnalyzeOptions {
        hdmr: false,
        cov_pairs: vec!["0,9".parse().unwrap()],
    };
    assert!(matches!(analyze(tmp.path(), &bad), Err(Error::Config(_))));
}

#[test]
fn sweep_writes_grid_files() {
    let tmp = tempdir().unwrap();
    let text = format!(
        r#"{{
        "axis1": {{"name": "ramp_time", "start": 1.0, "stop": 4.0, "points": 3}},
        "axis2": {{"name": "tunnel_coupling", "start": 5.0, "stop": 10.0, "points": 2}},
        "steps": 400,
        "output_dir": {:?}
    }}"#,
        tmp.path().join("g")
    );
    let path = tmp.path().join("sweep.json");
    std::fs::write(&path, text).unwrap();
    let cfg = SweepConfig::load(&path).unwrap();
    let grid = run_sweep(&cfg).unwrap();
    assert_eq!(grid.values.len(), 3);
    assert_eq!(grid.values[0].len(), 2);
    let csv = std::fs::read_to_string(tmp.path().join("g").join(GRID_FILE)).unwrap();
    assert_eq!(csv.lines().count(), 4);

    let mut bad = cfg.clone();
    bad.axis1.name = "volume".into();
    assert!(matches!(run_sweep(&bad), Err(Error::Config(_))));
}
