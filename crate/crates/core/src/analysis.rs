//! Closed-form engine diagnostics and ensemble statistics.
//!
//! The gain rate χ(Φ) and the variance growth follow from averaging the
//! delayed chamber response over one uniform rotation. The pV picture uses
//! the dimensionless volume `V = −cos Φ` and the pressure `p = ħg n_a`, so
//! that `∮p dV = ∮ħg n_a sin Φ dΦ` is the work the chamber does on the rotor
//! per turn. With `n_a` delayed by `τ`, expanding to first order in `τΦ̇`
//! gives `∮p dV = π τΦ̇ C₂ = π τ E_c Q C₂`.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{ensure_non_negative, ensure_positive, Error, Result};
use crate::model::{bath_at_angle, chamber_occupation_slope, steady_state_at_detuning, EngineParams};
use crate::quad::{periodic_trapezoid_checked, DEFAULT_NODES};
use crate::sim::{EnsembleRecord, TrajectoryRecord};

/// Relative tolerance of the halving check on angle averages.
pub const QUADRATURE_TOLERANCE: f64 = 1e-8;

/// End of first-order validity: ⟨L²⟩ = 0.1 κ_C².
pub const VALIDITY_L2_THRESHOLD: f64 = 0.1;

/// Default smoothing window for finite-difference rates, in 1/κ_C.
pub const DEFAULT_SMOOTHING_WINDOW: f64 = 200.0;

/// Default fraction of free-rotating trajectories that opens the validity
/// window.
pub const DEFAULT_FREE_FRACTION: f64 = 0.5;

/// Constants of the delayed quasi-static force
/// `Q̇ ≈ C₁ sin Φ + C₂ sin Φ cos Φ + C₃ Q sin² Φ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuasiStaticConstants {
    pub tau: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    /// Work per turn divided by the charge Q.
    pub w_cyc_per_q: f64,
}

impl QuasiStaticConstants {
    pub fn work_per_cycle(&self, q: f64) -> f64 {
        self.w_cyc_per_q * q
    }
}

pub fn quasi_static_constants(p: &EngineParams, tau: f64) -> Result<QuasiStaticConstants> {
    ensure_non_negative("tau", tau)?;
    let (n_a, _) = steady_state_at_detuning(p.delta0, p);
    let c2 = p.hbar_g * p.g * chamber_occupation_slope(p.delta0, p);
    Ok(QuasiStaticConstants {
        tau,
        c1: p.hbar_g * n_a - p.e_j,
        c2,
        c3: tau * p.e_c * c2,
        w_cyc_per_q: PI * tau * p.e_c * c2,
    })
}

/// Momentum gain rate χ(Φ) of the rotating engine.
pub fn chi(phi: f64, p: &EngineParams) -> f64 {
    let bath = bath_at_angle(phi, p);
    let x = 2.0 * bath.delta / p.kappa_h;
    let denom = 1.0 + p.alpha + x * x;
    let s = phi.sin();
    -(p.hbar_g * p.e_c / bath.kappa) * (p.n_h - p.n_c) * 8.0 * p.alpha * s * s
        * (p.g * bath.delta / (p.kappa_h * p.kappa_h))
        / (denom * denom)
}

/// Angle average of χ(Φ).
pub fn chi_mean(p: &EngineParams) -> Result<f64> {
    let q = periodic_trapezoid_checked(|phi| chi(phi, p), DEFAULT_NODES, QUADRATURE_TOLERANCE)?;
    Ok(q.value / TAU)
}

/// Additive term of the variance growth of L = E_c Q:
/// (E_c² ħ²g²/π) ∫ n̄² sin²Φ / κ dΦ.
pub fn variance_diffusion(p: &EngineParams) -> Result<f64> {
    let integrand = |phi: f64| {
        let bath = bath_at_angle(phi, p);
        let s = phi.sin();
        bath.n_bar * bath.n_bar * s * s / bath.kappa
    };
    let q = periodic_trapezoid_checked(integrand, DEFAULT_NODES, QUADRATURE_TOLERANCE)?;
    let scale = p.e_c * p.hbar_g;
    Ok(scale * scale / PI * q.value)
}

/// dVar(L)/dt = 2χ Var + D.
pub fn variance_rate(p: &EngineParams, var_l: f64) -> Result<f64> {
    ensure_non_negative("var_l", var_l)?;
    Ok(2.0 * chi_mean(p)? * var_l + variance_diffusion(p)?)
}

/// Bare detuning maximising −Δ/[1 + α + 4Δ²/κ_H²]², the gain at the angle
/// of strongest radiation pressure.
pub fn optimal_detuning(p: &EngineParams) -> f64 {
    -((1.0 + p.alpha) / 12.0).sqrt() * p.kappa_h
}

/// Tabulated χ(Φ) with its average, the variance offset and Δ*.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainReport {
    pub phi: Vec<f64>,
    pub chi: Vec<f64>,
    pub chi_mean: f64,
    pub var_rate_offset: f64,
    pub optimal_delta0: f64,
}

pub fn gain_report(p: &EngineParams, n_points: usize) -> Result<GainReport> {
    if n_points == 0 {
        return Err(Error::Domain {
            field: "n_points",
            value: 0.0,
            reason: "must be at least 1",
        });
    }
    let phi: Vec<f64> = (0..n_points).map(|k| TAU * k as f64 / n_points as f64).collect();
    let chi = phi.iter().map(|&x| chi(x, p)).collect();
    Ok(GainReport {
        phi,
        chi,
        chi_mean: chi_mean(p)?,
        var_rate_offset: variance_diffusion(p)?,
        optimal_delta0: optimal_detuning(p),
    })
}

/// One closed loop in the (V, p) plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CycleRecord {
    pub start_time: f64,
    pub end_time: f64,
    /// ∮p dV; positive when the chamber does net work on the rotor.
    pub loop_area: f64,
    pub phi: Vec<f64>,
    pub v: Vec<f64>,
    pub p: Vec<f64>,
}

/// ∮p dV over a closed polygon (the last point joins the first).
pub fn loop_work(v: &[f64], p: &[f64]) -> f64 {
    let n = v.len().min(p.len());
    (0..n)
        .map(|k| {
            let next = (k + 1) % n;
            0.5 * (p[k] + p[next]) * (v[next] - v[k])
        })
        .sum()
}

/// Steady-state pV loop under uniform rotation with a delayed chamber.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PvCurve {
    pub tau_omega: f64,
    /// Times are in units of 1/Φ̇: one turn spans [0, 2π).
    pub cycle: CycleRecord,
    /// Grid angles of the largest and smallest pressure.
    pub phi_p_max: f64,
    pub phi_p_min: f64,
}

/// `p(Φ) = ħg ⟨n_a⟩_ss(Δ(Φ − τΦ̇))` on `n_points` angles of one turn.
pub fn pv_curve(p: &EngineParams, tau_omega: f64, n_points: usize) -> Result<PvCurve> {
    if n_points < 8 {
        return Err(Error::Domain {
            field: "n_points",
            value: n_points as f64,
            reason: "must be at least 8",
        });
    }
    ensure_non_negative("tau_omega", tau_omega)?;
    let phi: Vec<f64> = (0..n_points).map(|k| TAU * k as f64 / n_points as f64).collect();
    let v: Vec<f64> = phi.iter().map(|x| -x.cos()).collect();
    let pressure: Vec<f64> = phi
        .iter()
        .map(|x| {
            let delta = p.delta0 + p.g * (x - tau_omega).cos();
            p.hbar_g * steady_state_at_detuning(delta, p).0
        })
        .collect();
    let arg = |better: fn(f64, f64) -> bool| {
        let mut best = 0;
        for k in 1..n_points {
            if better(pressure[k], pressure[best]) {
                best = k;
            }
        }
        phi[best]
    };
    let phi_p_max = arg(|a, b| a > b);
    let phi_p_min = arg(|a, b| a < b);
    Ok(PvCurve {
        tau_omega,
        cycle: CycleRecord {
            start_time: 0.0,
            end_time: TAU,
            loop_area: loop_work(&v, &pressure),
            phi,
            v,
            p: pressure,
        },
        phi_p_max,
        phi_p_min,
    })
}

/// Splits a trajectory into turns delimited by consecutive upward crossings
/// of Φ = 0 mod 2π and evaluates each turn's pV loop with `p = ħg n_a`.
pub fn trajectory_cycles(rec: &TrajectoryRecord, p: &EngineParams) -> Vec<CycleRecord> {
    let turn = |phi: f64| (phi / TAU).floor();
    let crossings: Vec<usize> = (1..rec.len())
        .filter(|&i| turn(rec.phi[i]) > turn(rec.phi[i - 1]))
        .collect();
    crossings
        .windows(2)
        .map(|w| {
            let range = w[0]..w[1];
            let phi = rec.phi[range.clone()].to_vec();
            let v: Vec<f64> = phi.iter().map(|x| -x.cos()).collect();
            let pressure: Vec<f64> = rec.n_a[range.clone()].iter().map(|n| p.hbar_g * n).collect();
            CycleRecord {
                start_time: rec.times[w[0]],
                end_time: rec.times[w[1]],
                loop_area: loop_work(&v, &pressure),
                phi,
                v,
                p: pressure,
            }
        })
        .collect()
}

/// Pointwise ensemble statistics of L with finite-difference rates.
///
/// Rates are centred differences over `smoothing_window`; they and their
/// normalised forms are `None` within half a window of either end. SNR is
/// `None` where the variance vanishes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub trajectories: usize,
    pub smoothing_window: f64,
    pub chi_mean: f64,
    pub var_rate_offset: f64,
    pub times: Vec<f64>,
    pub mean_l: Vec<f64>,
    pub var_l: Vec<f64>,
    pub mean_l2: Vec<f64>,
    pub snr: Vec<Option<f64>>,
    /// Fraction of trajectories whose Φ moved strictly monotonically over
    /// the trailing smoothing window.
    pub free_fraction: Vec<f64>,
    pub rate_mean: Vec<Option<f64>>,
    pub rate_var: Vec<Option<f64>>,
    pub norm_rate_mean: Vec<Option<f64>>,
    pub norm_rate_var: Vec<Option<f64>>,
}

impl EnsembleStats {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Mean, population variance and mean square; the values are sorted first
/// so the result does not depend on trajectory order.
fn moments(values: &mut [f64]) -> (f64, f64, f64) {
    values.sort_by(f64::total_cmp);
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let mean_sq = values.iter().map(|x| x * x).sum::<f64>() / n;
    (mean, var, mean_sq)
}

fn strictly_monotone(xs: &[f64]) -> bool {
    xs.len() >= 2 && (xs.windows(2).all(|w| w[1] > w[0]) || xs.windows(2).all(|w| w[1] < w[0]))
}

pub fn ensemble_stats(e: &EnsembleRecord, smoothing_window: f64) -> Result<EnsembleStats> {
    ensure_positive("smoothing_window", smoothing_window)?;
    let trajs = &e.trajectories;
    if trajs.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "ensemble statistics need at least 2 trajectories, got {}",
            trajs.len()
        )));
    }
    let first = &trajs[0];
    let p = first.meta.params;
    if trajs.iter().any(|t| t.times != first.times || t.meta.params != p) {
        return Err(Error::InsufficientData(
            "trajectories differ in sampling times or parameters".into(),
        ));
    }
    let times = first.times.clone();
    let n_samples = times.len();
    if n_samples < 2 || smoothing_window > times[n_samples - 1] - times[0] {
        return Err(Error::InsufficientData(format!(
            "smoothing window {smoothing_window} exceeds the record length"
        )));
    }
    let chi = chi_mean(&p)?;
    let offset = variance_diffusion(&p)?;

    let mut mean_l = Vec::with_capacity(n_samples);
    let mut var_l = Vec::with_capacity(n_samples);
    let mut mean_l2 = Vec::with_capacity(n_samples);
    let mut column = vec![0.0; trajs.len()];
    for i in 0..n_samples {
        for (c, t) in column.iter_mut().zip(trajs) {
            *c = t.l[i];
        }
        let (m, v, m2) = moments(&mut column);
        mean_l.push(m);
        var_l.push(v);
        mean_l2.push(m2);
    }
    let snr = mean_l
        .iter()
        .zip(&var_l)
        .map(|(m, v)| (*v > 0.0).then(|| m / v.sqrt()))
        .collect();

    let mut free_fraction = Vec::with_capacity(n_samples);
    let mut lo = 0;
    for i in 0..n_samples {
        while times[i] - times[lo] > smoothing_window {
            lo += 1;
        }
        let covered = times[i] - times[0] >= smoothing_window;
        let free = if covered {
            trajs.iter().filter(|t| strictly_monotone(&t.phi[lo..=i])).count()
        } else {
            0
        };
        free_fraction.push(free as f64 / trajs.len() as f64);
    }

    let spacing = times[1] - times[0];
    let half = ((0.5 * smoothing_window / spacing).round() as usize).max(1);
    let centred = |xs: &[f64]| -> Vec<Option<f64>> {
        (0..n_samples)
            .map(|i| {
                (i >= half && i + half < n_samples).then(|| {
                    (xs[i + half] - xs[i - half]) / (times[i + half] - times[i - half])
                })
            })
            .collect()
    };
    let rate_mean = centred(&mean_l);
    let rate_var = centred(&var_l);
    let norm_rate_mean = rate_mean
        .iter()
        .zip(&mean_l)
        .map(|(r, m)| r.and_then(|r| (chi * m != 0.0).then(|| r / (chi * m))))
        .collect();
    let norm_rate_var = rate_var
        .iter()
        .zip(&var_l)
        .map(|(r, v)| {
            let predicted = 2.0 * chi * v + offset;
            r.and_then(|r| (predicted != 0.0).then(|| r / predicted))
        })
        .collect();

    Ok(EnsembleStats {
        trajectories: trajs.len(),
        smoothing_window,
        chi_mean: chi,
        var_rate_offset: offset,
        times,
        mean_l,
        var_l,
        mean_l2,
        snr,
        free_fraction,
        rate_mean,
        rate_var,
        norm_rate_mean,
        norm_rate_var,
    })
}

/// Sample range where the first-order gain picture applies.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidityWindow {
    /// Interpolated time at which ⟨L²⟩ first exceeds the threshold.
    pub crossing_time: Option<f64>,
    /// First sample with enough free-rotating trajectories.
    pub start: Option<usize>,
    /// Last sample before the threshold is exceeded (inclusive).
    pub end: Option<usize>,
}

impl ValidityWindow {
    /// Inclusive sample range, if non-empty.
    pub fn range(&self) -> Option<(usize, usize)> {
        match (self.start, self.end) {
            (Some(s), Some(e)) if s < e => Some((s, e)),
            _ => None,
        }
    }
}

/// Validity window for `⟨L²⟩ ≤ 0.1 κ_C²` after the free-rotating fraction
/// first reaches `free_fraction`.
pub fn validity_window(stats: &EnsembleStats, p: &EngineParams, free_fraction: f64) -> ValidityWindow {
    let limit = VALIDITY_L2_THRESHOLD * p.kappa_c * p.kappa_c;
    let over = stats.mean_l2.iter().position(|&m| m > limit);
    let end = match over {
        Some(0) => None,
        Some(i) => Some(i - 1),
        None => stats.len().checked_sub(1),
    };
    let crossing_time = over.filter(|&i| i > 0).map(|i| {
        let (t0, t1) = (stats.times[i - 1], stats.times[i]);
        let (m0, m1) = (stats.mean_l2[i - 1], stats.mean_l2[i]);
        t0 + (limit - m0) / (m1 - m0) * (t1 - t0)
    });
    let start = end.and_then(|e| stats.free_fraction[..=e].iter().position(|&f| f >= free_fraction));
    ValidityWindow {
        crossing_time,
        start,
        end,
    }
}

/// Period of the bare pendulum `Φ̈ = −E_cE_J sin Φ` released at rest from
/// `amplitude` (|amplitude| < π); `None` without a restoring force.
pub fn pendulum_period(p: &EngineParams, amplitude: f64) -> Option<f64> {
    let omega_sq = p.e_c * p.e_j;
    let k = (0.5 * amplitude).sin().abs();
    if !(omega_sq > 0.0) || k >= 1.0 {
        return None;
    }
    // K(k) = π / (2 AGM(1, √(1 − k²)))
    let (mut a, mut b) = (1.0f64, (1.0 - k * k).sqrt());
    while (a - b).abs() > 1e-15 * a {
        (a, b) = (0.5 * (a + b), (a * b).sqrt());
    }
    Some(4.0 * (PI / (2.0 * a)) / omega_sq.sqrt())
}

/// Earliest sample time from which the ensemble mean of L stays positive.
pub fn positive_from(stats: &EnsembleStats) -> Option<f64> {
    let last_non_positive = stats.mean_l.iter().rposition(|&m| m <= 0.0);
    match last_non_positive {
        None => stats.times.first().copied(),
        Some(i) => stats.times.get(i + 1).copied(),
    }
}

/// Growth over a whole validity window compared with the prediction
/// integrated over the same window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowRates {
    pub start_time: f64,
    pub end_time: f64,
    /// [⟨L⟩(t₁) − ⟨L⟩(t₀)] / χ∫⟨L⟩dt.
    pub gain_ratio: f64,
    /// [Var(t₁) − Var(t₀)] / ∫(2χ Var + D)dt.
    pub variance_ratio: f64,
    /// (max − min)/mean of the SNR over the window.
    pub snr_variation: f64,
}

fn trapezoid(t: &[f64], y: &[f64]) -> f64 {
    t.windows(2)
        .zip(y.windows(2))
        .map(|(t, y)| 0.5 * (y[0] + y[1]) * (t[1] - t[0]))
        .sum()
}

pub fn window_rates(stats: &EnsembleStats, window: &ValidityWindow) -> Result<WindowRates> {
    let (s, e) = window
        .range()
        .ok_or_else(|| Error::InsufficientData("empty validity window".into()))?;
    let t = &stats.times[s..=e];
    let mean = &stats.mean_l[s..=e];
    let var = &stats.var_l[s..=e];
    let predicted_var: Vec<f64> = var
        .iter()
        .map(|v| 2.0 * stats.chi_mean * v + stats.var_rate_offset)
        .collect();
    let snr: Option<Vec<f64>> = stats.snr[s..=e].iter().copied().collect();
    let snr = snr.ok_or_else(|| Error::InsufficientData("SNR undefined inside the window".into()))?;
    let snr_mean = snr.iter().sum::<f64>() / snr.len() as f64;
    let snr_max = snr.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let snr_min = snr.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(WindowRates {
        start_time: t[0],
        end_time: t[t.len() - 1],
        gain_ratio: (mean[mean.len() - 1] - mean[0]) / (stats.chi_mean * trapezoid(t, mean)),
        variance_ratio: (var[var.len() - 1] - var[0]) / trapezoid(t, &predicted_var),
        snr_variation: (snr_max - snr_min) / snr_mean.abs(),
    })
}
