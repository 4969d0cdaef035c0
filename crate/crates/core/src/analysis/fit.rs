use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Outcome of a least-squares fit. Parameter names depend on the model:
/// `A`, `p`, `C` for decays and `V_R`, `omega_R`, `phi`, `tau` for Rabi
/// oscillations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: BTreeMap<String, f64>,
    pub std_errors: BTreeMap<String, f64>,
    /// Euclidean norm of the residual vector.
    pub residual_norm: f64,
    pub converged: bool,
}

impl FitResult {
    /// Value of a named parameter; NaN if the model has no such parameter.
    pub fn param(&self, name: &str) -> f64 {
        self.params.get(name).copied().unwrap_or(f64::NAN)
    }

    pub fn std_error(&self, name: &str) -> f64 {
        self.std_errors.get(name).copied().unwrap_or(f64::NAN)
    }
}

const MAX_ITERATIONS: usize = 2000;
/// Convergence threshold on the cosine between the residual and the range
/// of the Jacobian.
const GRADIENT_TOLERANCE: f64 = 1e-6;

struct Outcome {
    theta: Vec<f64>,
    rss: f64,
    converged: bool,
    jacobian: DMatrix<f64>,
}

/// Box-constrained Levenberg-Marquardt with Marquardt diagonal scaling.
/// `eval` returns residuals (model − data) and the Jacobian.
fn levenberg_marquardt<F>(eval: &F, start: &[f64], lower: &[f64], upper: &[f64], data_norm: f64) -> Outcome
where
    F: Fn(&[f64]) -> (DVector<f64>, DMatrix<f64>),
{
    let clamp = |t: &mut Vec<f64>| {
        for ((v, lo), hi) in t.iter_mut().zip(lower).zip(upper) {
            *v = v.clamp(*lo, *hi);
        }
    };
    let mut theta = start.to_vec();
    clamp(&mut theta);
    let (mut r, mut j) = eval(&theta);
    let mut rss = r.norm_squared();
    let jtj0 = j.transpose() * &j;
    let mut lambda = 1e-3 * jtj0.diagonal().max().max(f64::MIN_POSITIVE);
    for _ in 0..MAX_ITERATIONS {
        if !rss.is_finite() {
            break;
        }
        let jtj = j.transpose() * &j;
        let g = j.transpose() * &r;
        let dmax = jtj.diagonal().max().max(f64::MIN_POSITIVE);
        let mut improved = false;
        let mut stalled = false;
        while lambda < 1e40 * dmax {
            let mut a = jtj.clone();
            for k in 0..a.nrows() {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-12 * dmax);
            }
            let Some(step) = a.cholesky().map(|c| c.solve(&(-&g))) else {
                lambda *= 4.0;
                continue;
            };
            let mut trial: Vec<f64> = theta.iter().zip(step.iter()).map(|(t, s)| t + s).collect();
            clamp(&mut trial);
            let moved = trial
                .iter()
                .zip(&theta)
                .all(|(a, b)| (a - b).abs() <= 1e-15 * b.abs().max(1e-300));
            if moved {
                stalled = true;
                break;
            }
            let (r_new, j_new) = eval(&trial);
            let rss_new = r_new.norm_squared();
            if rss_new.is_finite() && rss_new < rss {
                theta = trial;
                r = r_new;
                j = j_new;
                rss = rss_new;
                lambda = (lambda / 3.0).max(1e-20 * dmax);
                improved = true;
                break;
            }
            lambda *= 4.0;
        }
        if !improved || stalled {
            break;
        }
    }
    // Undamped Gauss-Newton polish, solved on J itself rather than JᵀJ, to
    // pin the stationary point down to rounding.
    let mut last_step = f64::INFINITY;
    for _ in 0..10 {
        if !rss.is_finite() {
            break;
        }
        let Ok(step) = j.clone().svd(true, true).solve(&(-&r), 1e-14) else {
            break;
        };
        let mut trial: Vec<f64> = theta.iter().zip(step.iter()).map(|(t, s)| t + s).collect();
        clamp(&mut trial);
        let size = trial
            .iter()
            .zip(&theta)
            .map(|(a, b)| ((a - b) / b.abs().max(1e-300)).abs())
            .fold(0.0, f64::max);
        if !(size < last_step) {
            break;
        }
        let (r_new, j_new) = eval(&trial);
        let rss_new = r_new.norm_squared();
        if !(rss_new <= rss * (1.0 + 1e-10)) {
            break;
        }
        theta = trial;
        r = r_new;
        j = j_new;
        rss = rss_new;
        last_step = size;
    }
    let converged = projected_gradient_small(&theta, &r, &j, lower, upper, data_norm);
    Outcome {
        theta,
        rss,
        converged,
        jacobian: j,
    }
}

fn projected_gradient_small(
    theta: &[f64],
    r: &DVector<f64>,
    j: &DMatrix<f64>,
    lower: &[f64],
    upper: &[f64],
    data_norm: f64,
) -> bool {
    let g = j.transpose() * r;
    let mut norm2 = 0.0;
    for k in 0..theta.len() {
        // Descent direction is −g; a component pushing through an active
        // bound does not count.
        let blocked = (theta[k] <= lower[k] && g[k] > 0.0) || (theta[k] >= upper[k] && g[k] < 0.0);
        if !blocked {
            norm2 += g[k] * g[k];
        }
    }
    let scale = j.norm() * (r.norm() + 1e-10 * data_norm);
    norm2.is_finite() && norm2.sqrt() <= GRADIENT_TOLERANCE * scale + f64::MIN_POSITIVE
}

/// `sqrt(diag(s²·(JᵀJ)⁺))` with `s² = RSS/(n − k)`.
fn standard_errors(j: &DMatrix<f64>, rss: f64) -> Vec<f64> {
    let (n, k) = j.shape();
    let dof = n.saturating_sub(k).max(1) as f64;
    let s2 = rss / dof;
    let jtj = j.transpose() * j;
    let cov = match jtj.clone().pseudo_inverse(1e-12 * jtj.norm().max(f64::MIN_POSITIVE)) {
        Ok(p) => p,
        Err(_) => return vec![f64::NAN; k],
    };
    (0..k).map(|i| (s2 * cov[(i, i)]).max(0.0).sqrt()).collect()
}

fn named(names: &[&str], values: &[f64]) -> BTreeMap<String, f64> {
    names.iter().map(|n| n.to_string()).zip(values.iter().copied()).collect()
}

/// Least squares for `y ≈ a·f(x) + c` with fixed basis `f`.
fn linear_two(f: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = f.len() as f64;
    let (mf, my) = (f.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sff: f64 = f.iter().map(|v| (v - mf).powi(2)).sum();
    let sfy: f64 = f.iter().zip(ys).map(|(a, b)| (a - mf) * (b - my)).sum();
    let a = if sff > 0.0 { sfy / sff } else { 0.0 };
    (a, my - a * mf)
}

/// Fits `y = A·pˣ + C` with `p ∈ (0, 1]`, `A ∈ [0, 2]`, `C ∈ [−1, 1]`.
///
/// Eight starts spread the decay length over the sampled range; `A` and `C`
/// for each start come from the linear least-squares solution at that `p`.
/// The lowest-residual local solution wins.
pub fn fit_decay(xs: &[f64], ys: &[f64]) -> Result<FitResult> {
    if xs.len() != ys.len() {
        return Err(Error::DimensionMismatch {
            expected: xs.len(),
            found: ys.len(),
        });
    }
    if xs.len() < 4 {
        return Err(Error::InvalidParameter("decay fit needs at least 4 points".into()));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) || xs.iter().any(|&x| x < 0.0) {
        return Err(Error::InvalidParameter("decay fit needs finite data and x ≥ 0".into()));
    }
    let lower = [0.0, 1e-12, -1.0];
    let upper = [2.0, 1.0, 1.0];
    let eval = |t: &[f64]| {
        let (a, p, c) = (t[0], t[1], t[2]);
        let mut r = DVector::zeros(xs.len());
        let mut j = DMatrix::zeros(xs.len(), 3);
        for (i, (&x, &y)) in xs.iter().zip(ys).enumerate() {
            let px = p.powf(x);
            r[i] = a * px + c - y;
            j[(i, 0)] = px;
            j[(i, 1)] = if x == 0.0 { 0.0 } else { a * x * px / p };
            j[(i, 2)] = 1.0;
        }
        (r, j)
    };
    let span = xs.iter().cloned().fold(0.0, f64::max).max(1.0);
    let data_norm = DVector::from_column_slice(ys).norm();
    let mut best: Option<Outcome> = None;
    for factor in [0.05, 0.1, 0.25, 0.5, 1.0, 2.0, 5.0, 20.0] {
        let p0 = (-1.0 / (factor * span)).exp();
        let basis: Vec<f64> = xs.iter().map(|&x| p0.powf(x)).collect();
        let (a0, c0) = linear_two(&basis, ys);
        let out = levenberg_marquardt(&eval, &[a0, p0, c0], &lower, &upper, data_norm);
        if best.as_ref().is_none_or(|b| out.rss < b.rss) {
            best = Some(out);
        }
    }
    let best = best.expect("at least one start");
    let se = standard_errors(&best.jacobian, best.rss);
    let names = ["A", "p", "C"];
    Ok(FitResult {
        params: named(&names, &best.theta),
        std_errors: named(&names, &se),
        residual_norm: best.rss.sqrt(),
        converged: best.converged,
    })
}

/// Peak-to-median periodogram ratio a Rabi trace must exceed to count as
/// oscillating.
const SPECTRAL_PEAK_RATIO: f64 = 20.0;

/// Frequency of the strongest sinusoid in `(ts, ps)`, or `None` when no
/// peak stands out of the periodogram.
fn spectral_peak(ts: &[f64], ps: &[f64]) -> Option<f64> {
    let n = ts.len() as f64;
    let mean = ps.iter().sum::<f64>() / n;
    let centered: Vec<f64> = ps.iter().map(|p| p - mean).collect();
    let variance = centered.iter().map(|v| v * v).sum::<f64>() / n;
    let scale = ps.iter().map(|p| p.abs()).fold(0.0, f64::max);
    if !(variance > 1e-24 * scale.max(1.0).powi(2)) {
        return None;
    }
    let (t0, t1) = (
        ts.iter().cloned().fold(f64::INFINITY, f64::min),
        ts.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    );
    let span = t1 - t0;
    let mut sorted = ts.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut gaps: Vec<f64> = sorted.windows(2).map(|w| w[1] - w[0]).filter(|g| *g > 0.0).collect();
    gaps.sort_by(f64::total_cmp);
    let dt = *gaps.get(gaps.len() / 2)?;
    let (w_lo, w_hi) = (PI / span, PI / dt);
    let dw = 2.0 * PI / (8.0 * span);
    let count = ((w_hi - w_lo) / dw).ceil() as usize + 1;
    let power: Vec<(f64, f64)> = (0..count)
        .map(|k| {
            let w = w_lo + k as f64 * dw;
            let (mut re, mut im) = (0.0, 0.0);
            for (t, v) in ts.iter().zip(&centered) {
                let (s, c) = (w * (t - t0)).sin_cos();
                re += v * c;
                im += v * s;
            }
            (w, re * re + im * im)
        })
        .collect();
    let &(w_peak, p_peak) = power.iter().max_by(|a, b| a.1.total_cmp(&b.1))?;
    let mut values: Vec<f64> = power.iter().map(|p| p.1).collect();
    values.sort_by(f64::total_cmp);
    let median = values[values.len() / 2];
    (p_peak > SPECTRAL_PEAK_RATIO * median).then_some(w_peak)
}

/// Fits `P = V_R·cos(ω_R·t + φ)·exp(−t/τ)`.
///
/// The frequency is seeded from the periodogram peak; eight starts combine
/// two frequencies around the peak with four decay rates. Internally the
/// decay is fitted as the rate `1/τ`. `φ` is reported in `(−π, π]`.
pub fn fit_rabi(ts: &[f64], ps: &[f64]) -> Result<FitResult> {
    if ts.len() != ps.len() {
        return Err(Error::DimensionMismatch {
            expected: ts.len(),
            found: ps.len(),
        });
    }
    if ts.len() < 8 {
        return Err(Error::InvalidParameter("Rabi fit needs at least 8 points".into()));
    }
    if ts.iter().chain(ps).any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter("Rabi fit needs finite data".into()));
    }
    let names = ["V_R", "omega_R", "phi", "tau"];
    let span = ts.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - ts.iter().cloned().fold(f64::INFINITY, f64::min);
    let not_converged = |residual: f64| FitResult {
        params: named(&names, &[0.0, f64::NAN, f64::NAN, f64::NAN]),
        std_errors: named(&names, &[f64::NAN; 4]),
        residual_norm: residual,
        converged: false,
    };
    let data_norm = DVector::from_column_slice(ps).norm();
    if !(span > 0.0) {
        return Ok(not_converged(data_norm));
    }
    let Some(w_peak) = spectral_peak(ts, ps) else {
        return Ok(not_converged(data_norm));
    };
    let lower = [0.0, 0.0, f64::NEG_INFINITY, 0.0];
    let upper = [2.0, f64::INFINITY, f64::INFINITY, f64::INFINITY];
    let eval = |t: &[f64]| {
        let (v, w, phi, g) = (t[0], t[1], t[2], t[3]);
        let mut r = DVector::zeros(ts.len());
        let mut j = DMatrix::zeros(ts.len(), 4);
        for (i, (&tt, &p)) in ts.iter().zip(ps).enumerate() {
            let e = (-g * tt).exp();
            let (s, c) = (w * tt + phi).sin_cos();
            r[i] = v * c * e - p;
            j[(i, 0)] = c * e;
            j[(i, 1)] = -v * tt * s * e;
            j[(i, 2)] = -v * s * e;
            j[(i, 3)] = -v * tt * c * e;
        }
        (r, j)
    };
    let dw = 2.0 * PI / (8.0 * span);
    let mut best: Option<Outcome> = None;
    for w0 in [w_peak - dw / 4.0, w_peak + dw / 4.0] {
        for rate in [0.0, 0.3, 1.0, 3.0] {
            let g0 = rate / span;
            // Linear amplitude and phase at fixed (ω, 1/τ).
            let x = DMatrix::from_fn(ts.len(), 2, |i, k| {
                let e = (-g0 * ts[i]).exp();
                if k == 0 {
                    (w0 * ts[i]).cos() * e
                } else {
                    (w0 * ts[i]).sin() * e
                }
            });
            let coef = x
                .clone()
                .svd(true, true)
                .solve(&DVector::from_column_slice(ps), 1e-12)
                .unwrap_or_else(|_| DVector::zeros(2));
            let (a, b) = (coef[0], coef[1]);
            let start = [(a * a + b * b).sqrt(), w0, (-b).atan2(a), g0];
            let out = levenberg_marquardt(&eval, &start, &lower, &upper, data_norm);
            if best.as_ref().is_none_or(|b| out.rss < b.rss) {
                best = Some(out);
            }
        }
    }
    let best = best.expect("at least one start");
    let se = standard_errors(&best.jacobian, best.rss);
    let [v, w, phi, g] = [best.theta[0], best.theta[1], best.theta[2], best.theta[3]];
    let phi = wrap_phase(phi);
    let tau = 1.0 / g;
    let tau_se = se[3] / (g * g);
    Ok(FitResult {
        params: named(&names, &[v, w, phi, tau]),
        std_errors: named(&names, &[se[0], se[1], se[2], tau_se]),
        residual_norm: best.rss.sqrt(),
        converged: best.converged && v > 0.0,
    })
}

fn wrap_phase(phi: f64) -> f64 {
    let w = phi.rem_euclid(2.0 * PI);
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}

/// Fidelity per 10 µm of shuttling from the echo decay `p`: `1 − p/3`.
pub fn shuttle_fidelity(p: f64) -> f64 {
    1.0 - p / 3.0
}

/// Average gate fidelity from the RB decay per Clifford:
/// `1 − (1 − p)/(2·gates_per_clifford)`.
pub fn gate_fidelity(p: f64, gates_per_clifford: f64) -> f64 {
    1.0 - (1.0 - p) / (2.0 * gates_per_clifford)
}
