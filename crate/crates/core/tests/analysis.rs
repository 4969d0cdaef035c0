use std::f64::consts::PI;

use evotune::analysis::{
    covariance_average, covariance_trajectory, fit_decay, fit_rabi, gate_fidelity, hdmr_first_order,
    shuttle_fidelity, write_sensitivity_csv, CovarianceSeries, HdmrOptions,
};
use evotune::optimizer::CovarianceSnapshot;
use evotune::rng;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, Normal};

fn decay_data(a: f64, p: f64, c: f64) -> (Vec<f64>, Vec<f64>) {
    let xs: Vec<f64> = (0..20).map(|k| 1.0 + k as f64 * 299.0 / 19.0).map(f64::round).collect();
    let ys = xs.iter().map(|&x| a * p.powf(x) + c).collect();
    (xs, ys)
}

fn rabi_data(v: f64, w: f64, phi: f64, tau: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    // 1 µs window in ns: five periods at 5 MHz.
    let ts: Vec<f64> = (0..n).map(|k| k as f64 * 1000.0 / (n - 1) as f64).collect();
    let ps = ts.iter().map(|&t| v * (w * t + phi).cos() * (-t / tau).exp()).collect();
    (ts, ps)
}

fn uniform_samples(seed: u64, m: usize, n: usize) -> Vec<Vec<f64>> {
    let mut r = rng::stream(&[seed, 0x6864]);
    (0..m).map(|_| (0..n).map(|_| r.random_range(0.0..1.0)).collect()).collect()
}

fn ishigami(x: &[f64]) -> f64 {
    let z: Vec<f64> = x.iter().map(|v| PI * (2.0 * v - 1.0)).collect();
    z[0].sin() + 7.0 * z[1].sin().powi(2) + 0.1 * z[2].powi(4) * z[0].sin()
}

/// Closed-form first-order Sobol indices of the Ishigami function with
/// a = 7, b = 0.1 on `[−π, π]³`.
fn ishigami_indices() -> [f64; 3] {
    let (a, b) = (7.0f64, 0.1f64);
    let pi4 = PI.powi(4);
    let v1 = 0.5 * (1.0 + b * pi4 / 5.0).powi(2);
    let v2 = a * a / 8.0;
    let v13 = b * b * PI.powi(8) * (1.0 / 18.0 - 1.0 / 50.0);
    let total = v1 + v2 + v13;
    [v1 / total, v2 / total, 0.0]
}

#[test]
fn ishigami_oracle_matches_published_values() {
    let s = ishigami_indices();
    assert!((s[0] - 0.3139).abs() < 1e-4 && (s[1] - 0.4424).abs() < 1e-4);
}

#[test]
fn decay_fit_recovers_planted_rate() {
    let (xs, ys) = decay_data(0.5, 0.9925, 0.5);
    let fit = fit_decay(&xs, &ys).unwrap();
    assert!(fit.converged);
    assert!((fit.param("p") - 0.9925).abs() < 1e-6, "{:?}", fit.params);
    assert!((fit.param("A") - 0.5).abs() < 1e-6);
    assert!((fit.param("C") - 0.5).abs() < 1e-6);
    assert!(fit.residual_norm < 1e-8);
}

#[test]
fn decay_fit_gate_fidelity_scale() {
    let (xs, ys) = decay_data(0.5, 0.992, 0.5);
    let fit = fit_decay(&xs, &ys).unwrap();
    let f = gate_fidelity(fit.param("p"), 1.875);
    assert!((f - (1.0 - 0.008 / 3.75)).abs() < 1e-6);
    assert!((0.997..0.999).contains(&f));
}

#[test]
fn decay_fit_flat_data_is_degenerate_but_converged() {
    let xs: Vec<f64> = (0..10).map(f64::from).collect();
    let fit = fit_decay(&xs, &[0.3; 10]).unwrap();
    assert!(fit.converged);
    assert!(fit.param("A").abs() < 1e-6, "{:?}", fit.params);
    assert!(fit.residual_norm < 1e-8);
    assert!(fit.std_errors.values().all(|e| *e >= 0.0));
}

#[test]
fn decay_fit_preconditions() {
    assert!(fit_decay(&[0.0, 1.0, 2.0], &[1.0, 0.9, 0.8]).is_err());
    assert!(fit_decay(&[-1.0, 1.0, 2.0, 3.0], &[1.0, 0.9, 0.8, 0.7]).is_err());
}

#[test]
fn rabi_fit_recovers_noiseless_parameters() {
    let w = 2.0 * PI * 5e-3;
    let (ts, ps) = rabi_data(0.993, w, 0.0, 1e4, 200);
    let fit = fit_rabi(&ts, &ps).unwrap();
    assert!(fit.converged);
    let rel = |a: f64, b: f64| ((a - b) / b).abs();
    assert!(rel(fit.param("V_R"), 0.993) < 1e-6, "{:?}", fit.params);
    assert!(rel(fit.param("omega_R"), w) < 1e-6);
    assert!(rel(fit.param("tau"), 1e4) < 1e-6);
    assert!(fit.param("phi").abs() < 1e-6);
}

#[test]
fn rabi_fit_flat_trace_does_not_converge() {
    let (ts, ps) = rabi_data(0.0, 0.03, 0.0, 1e4, 100);
    assert!(!fit_rabi(&ts, &ps).unwrap().converged);
    assert!(fit_rabi(&ts[..5], &ps[..5]).is_err());
}

#[test]
fn rabi_standard_errors_cover_truth() {
    let w = 2.0 * PI * 5e-3;
    let (ts, clean) = rabi_data(0.993, w, 0.0, 1e4, 200);
    let noise = Normal::new(0.0, 0.02).unwrap();
    let mut covered = 0;
    for trial in 0..100u64 {
        let mut r = rng::stream(&[trial, 0x7261]);
        let ps: Vec<f64> = clean.iter().map(|p| p + noise.sample(&mut r)).collect();
        let fit = fit_rabi(&ts, &ps).unwrap();
        if fit.converged && (fit.param("V_R") - 0.993).abs() <= 3.0 * fit.std_error("V_R") {
            covered += 1;
        }
    }
    assert!(covered >= 95, "{covered}/100");
}

#[test]
fn shuttle_fidelity_values() {
    assert!((shuttle_fidelity(0.117) - 0.961).abs() < 1e-12);
    assert!((shuttle_fidelity(0.0192) - 0.9936).abs() < 1e-12);
    assert_eq!(shuttle_fidelity(0.0), 1.0);
    assert_eq!(format!("{:.4}", 100.0 * shuttle_fidelity(0.117)), "96.1000");
}

#[test]
fn hdmr_ishigami() {
    let xs = uniform_samples(1, 10_000, 3);
    let ys: Vec<f64> = xs.iter().map(|x| ishigami(x)).collect();
    let report = hdmr_first_order(&xs, &ys, &HdmrOptions::default()).unwrap();
    let s = report.first_order();
    for (got, want) in s.iter().zip(ishigami_indices()) {
        assert!((got - want).abs() < 0.03, "{s:?}");
    }
}

#[test]
fn hdmr_additive_quadratic() {
    let w = [1.0, 2.0, 0.5, 3.0];
    let xs = uniform_samples(2, 4000, 4);
    let ys: Vec<f64> = xs
        .iter()
        .map(|x| x.iter().zip(&w).map(|(v, wi)| wi * (v - 0.5).powi(2)).sum())
        .collect();
    let report = hdmr_first_order(&xs, &ys, &HdmrOptions::default()).unwrap();
    // Var(wᵢ(xᵢ − ½)²) = wᵢ²/180 for uniform xᵢ, so the indices go as wᵢ².
    let norm: f64 = w.iter().map(|v| v * v).sum();
    for (p, wi) in report.parameters.iter().zip(&w) {
        assert!((p.first_order - wi * wi / norm).abs() < 0.02, "{:?}", report);
    }
    assert!(report.residual < 0.02);
    let total: f64 = report.first_order().iter().sum::<f64>() + report.residual;
    assert!((0.9..=1.1).contains(&total));
}

#[test]
fn hdmr_correlated_inputs_do_not_share_credit() {
    // x1 shadows x0 closely, but only x0 enters the cost.
    let noise = Normal::new(0.0, 0.05).unwrap();
    let mut r = rng::stream(&[5, 0x6363]);
    let xs: Vec<Vec<f64>> = (0..2000)
        .map(|_| {
            let a: f64 = r.random_range(0.0..1.0);
            vec![a, (a + noise.sample(&mut r)).clamp(0.0, 1.0)]
        })
        .collect();
    let ys: Vec<f64> = xs.iter().map(|x| x[0] * x[0]).collect();
    let report = hdmr_first_order(&xs, &ys, &HdmrOptions::default()).unwrap();
    let s = report.first_order();
    assert!(s[0] > 0.95 && s[1] < 0.02, "{s:?}");
    assert!(report.residual < 1e-6, "{}", report.residual);
}

#[test]
fn hdmr_constant_inputs_and_outputs() {
    let xs = uniform_samples(3, 100, 3);
    let report = hdmr_first_order(&xs, &[2.0; 100], &HdmrOptions::default()).unwrap();
    assert!(report.first_order().iter().all(|v| *v == 0.0));
    let mut frozen = xs.clone();
    for row in &mut frozen {
        row[1] = 0.25;
    }
    let ys: Vec<f64> = frozen.iter().map(|x| x[0] + x[2]).collect();
    let report = hdmr_first_order(&frozen, &ys, &HdmrOptions::default()).unwrap();
    assert_eq!(report.first_order()[1], 0.0);
    assert!(hdmr_first_order(&xs[..40], &[0.0; 40], &HdmrOptions::default()).is_err());
}

#[test]
fn sensitivity_csv_has_header_and_rows() {
    let xs = uniform_samples(4, 200, 2);
    let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x[0] + x[1]).collect();
    let options = HdmrOptions {
        names: Some(vec!["a".into(), "b".into()]),
        ..HdmrOptions::default()
    };
    let report = hdmr_first_order(&xs, &ys, &options).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.csv");
    write_sensitivity_csv(&report, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "name,contribution,first_order");
    assert!(lines[1].starts_with("a,"));
    assert_eq!(lines.len(), 3);
}

fn series(entries: &[(u64, [[f64; 2]; 2])]) -> CovarianceSeries {
    CovarianceSeries::new(
        vec!["a".into(), "b".into()],
        entries
            .iter()
            .map(|(g, m)| CovarianceSnapshot {
                generation: *g,
                matrix: m.iter().map(|r| r.to_vec()).collect(),
            })
            .collect(),
    )
    .unwrap()
}

#[test]
fn covariance_average_examples() {
    let a = series(&[(0, [[1.0, 0.0], [0.0, 1.0]]), (3, [[0.5, 0.2], [0.2, 0.4]])]);
    let b = series(&[(0, [[1.0, 0.0], [0.0, 1.0]]), (3, [[-0.5, -0.2], [-0.2, -0.4]])]);
    assert_eq!(covariance_average(std::slice::from_ref(&a), 3).unwrap(), a.at(3).unwrap().matrix);
    assert_eq!(covariance_average(&[a.clone(), b], 3).unwrap(), vec![vec![0.0; 2]; 2]);
    let c = series(&[(0, [[1.0, 0.0], [0.0, 1.0]])]);
    assert!(covariance_average(&[a.clone(), c], 3).is_err());
    assert_eq!(
        covariance_average(&[a.clone(), a.clone()], 3).unwrap(),
        covariance_average(&[a], 3).unwrap()
    );
}

#[test]
fn covariance_trajectory_is_ordered() {
    let s = series(&[(2, [[0.3, 0.1], [0.1, 0.2]]), (0, [[1.0, 0.0], [0.0, 1.0]])]);
    assert_eq!(covariance_trajectory(&s, (0, 0)).unwrap(), vec![(0, 1.0), (2, 0.3)]);
    assert_eq!(covariance_trajectory(&s, (0, 1)).unwrap(), vec![(0, 0.0), (2, 0.1)]);
    assert!(covariance_trajectory(&s, (0, 2)).is_err());
    let averaged = CovarianceSeries::average(&[s.clone(), s]).unwrap();
    assert_eq!(averaged.runs, 2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn decay_fit_is_scale_consistent(s in 0.5f64..1.8, p in 0.95f64..0.999) {
        let (xs, ys) = decay_data(0.6, p, 0.3);
        let noisy: Vec<f64> = ys.iter().enumerate().map(|(i, y)| y + 0.003 * ((i * 7 % 5) as f64 - 2.0)).collect();
        let scaled: Vec<f64> = noisy.iter().map(|y| y * s).collect();
        let a = fit_decay(&xs, &noisy).unwrap();
        let b = fit_decay(&xs, &scaled).unwrap();
        prop_assert!((b.param("A") - s * a.param("A")).abs() < 1e-9);
        prop_assert!((b.param("p") - a.param("p")).abs() < 1e-9);
    }

    #[test]
    fn rabi_fit_is_scale_consistent(s in 0.3f64..1.5, phi in -1.0f64..1.0) {
        let w = 2.0 * PI * 5e-3;
        let (ts, ps) = rabi_data(0.9, w, phi, 3e3, 120);
        let noisy: Vec<f64> = ps.iter().enumerate().map(|(i, p)| p + 0.01 * ((i * 13 % 7) as f64 - 3.0) / 3.0).collect();
        let scaled: Vec<f64> = noisy.iter().map(|p| p * s).collect();
        let a = fit_rabi(&ts, &noisy).unwrap();
        let b = fit_rabi(&ts, &scaled).unwrap();
        prop_assert!((b.param("V_R") - s * a.param("V_R")).abs() < 1e-9);
        prop_assert!((b.param("omega_R") - a.param("omega_R")).abs() < 1e-9 * a.param("omega_R"));
        prop_assert!((b.param("tau") - a.param("tau")).abs() < 1e-9 * a.param("tau"));
    }

    #[test]
    fn hdmr_is_affine_and_permutation_invariant(a in prop_oneof![-5.0f64..-0.1, 0.1f64..5.0], b in -10.0f64..10.0, seed in 0u64..100) {
        let xs = uniform_samples(seed, 300, 3);
        let ys: Vec<f64> = xs.iter().map(|x| ishigami(x)).collect();
        let shifted: Vec<f64> = ys.iter().map(|y| a * y + b).collect();
        let base = hdmr_first_order(&xs, &ys, &HdmrOptions::default()).unwrap();
        let affine = hdmr_first_order(&xs, &shifted, &HdmrOptions::default()).unwrap();
        for (u, v) in base.first_order().iter().zip(affine.first_order()) {
            prop_assert!((u - v).abs() < 1e-9);
        }
        let mut order: Vec<usize> = (0..xs.len()).collect();
        order.reverse();
        order.swap(0, 7);
        let px: Vec<Vec<f64>> = order.iter().map(|&i| xs[i].clone()).collect();
        let py: Vec<f64> = order.iter().map(|&i| ys[i]).collect();
        let permuted = hdmr_first_order(&px, &py, &HdmrOptions::default()).unwrap();
        for (u, v) in base.first_order().iter().zip(permuted.first_order()) {
            prop_assert!((u - v).abs() < 1e-9);
        }
    }
}
