//! Subcommand implementations. Each writes its files under `cfg.out` and
//! returns a short human-readable summary.

use std::path::{Path, PathBuf};

use piston_core::analysis::{
    ensemble_stats, pendulum_period, positive_from, pv_curve, quasi_static_constants, validity_window, window_rates,
    EnsembleStats, WindowRates,
};
use piston_core::circuit::{
    derive_params, effective_capacitive, effective_inductive, validate_regime, DerivedParams, EffectiveCircuit,
    EngineScale, RegimeReport, RegimeThresholds,
};
use piston_core::model::steady_state_at_detuning;
use piston_core::sim::run_ensemble;
use piston_core::{EnsembleRecord, EngineParams, ModelKind};
use serde::Serialize;

use crate::config::{Circuit, CircuitSection};
use crate::output::{fmt_f64, num, opt, read_csv, write_csv, write_json, Provenance, Table, VERSION};
use crate::{CliError, RunConfig};

fn out_dir(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(&cfg.out)?;
    Ok(cfg.out.clone())
}

#[derive(Debug, Serialize)]
pub struct ParamsReport {
    pub circuit: CircuitSection,
    pub effective: EffectiveCircuit,
    pub derived: DerivedParams,
    pub regime: RegimeReport,
    pub regime_all_pass: bool,
    /// Derived quantities in units of κ_C (ħ = 1), when κ_C is given.
    pub scaled: Option<EngineScale>,
}

impl ParamsReport {
    fn key_values(&self) -> Vec<(String, String)> {
        let mut kv: Vec<(String, String)> = Vec::new();
        let mut put = |k: &str, v: String| kv.push((k.to_string(), v));
        let e = &self.effective;
        for (k, v) in [("xi", e.xi), ("c", e.c), ("c_j", e.c_j), ("inductance", e.inductance), ("e_j", e.e_j)] {
            put(&format!("effective.{k}"), fmt_f64(v));
        }
        let d = &self.derived;
        for (k, v) in [
            ("omega0", d.omega0),
            ("omega_p", d.omega_p),
            ("g", d.g),
            ("e_c", d.e_c),
            ("phi_r", d.phi_r),
            ("phi0", d.phi0),
        ] {
            put(&format!("derived.{k}"), fmt_f64(v));
        }
        for c in &self.regime.checks {
            put(&format!("regime.{}.ratio", c.name), fmt_f64(c.ratio));
            put(&format!("regime.{}.threshold", c.name), fmt_f64(c.threshold));
            put(&format!("regime.{}.pass", c.name), c.pass.to_string());
        }
        put("regime.all_pass", self.regime_all_pass.to_string());
        if let Some(s) = &self.scaled {
            for (k, v) in [("omega0", s.omega0), ("omega_p", s.omega_p), ("g", s.g), ("e_c", s.e_c), ("e_j", s.e_j)] {
                put(&format!("scaled.{k}"), fmt_f64(v));
            }
        }
        kv
    }
}

/// Circuit reduction and regime checks. Regime violations are reported,
/// not raised.
pub fn params(cfg: &RunConfig) -> Result<String, CliError> {
    let section = cfg
        .circuit
        .ok_or_else(|| CliError::Config("`params` needs a [circuit] section (missing field `circuit`)".into()))?;
    let invalid = |e: piston_core::Error| CliError::Config(format!("circuit: {e}"));
    let effective = match section.circuit()? {
        Circuit::Capacitive(c) => effective_capacitive(&c),
        Circuit::Inductive(c) => effective_inductive(&c),
    }
    .map_err(invalid)?;
    let derived = derive_params(&effective).map_err(invalid)?;
    let regime = validate_regime(&derived, section.e_j, section.expected_occupation, &RegimeThresholds::default());
    let scaled = section
        .kappa_c
        .map(|k| EngineScale::from_circuit(&derived, section.e_j, k))
        .transpose()
        .map_err(invalid)?;
    let report = ParamsReport {
        circuit: section,
        effective,
        derived,
        regime_all_pass: regime.all_pass(),
        regime,
        scaled,
    };
    let dir = out_dir(cfg)?;
    let text: String = report
        .key_values()
        .into_iter()
        .map(|(k, v)| format!("{k} = {v}\n"))
        .collect();
    std::fs::write(dir.join("params.txt"), &text)?;
    write_json(&dir.join("params.json"), &report)?;
    Ok(text)
}

/// Steady-state occupations against detuning for each configured κ_H.
pub fn steady_state(cfg: &RunConfig) -> Result<String, CliError> {
    cfg.reject_circuit("steady-state")?;
    let s = &cfg.steady_state;
    if s.points == 0 || s.kappa_h.is_empty() {
        return Err(CliError::Config("steady_state: empty grid".into()));
    }
    if !(s.delta_min <= s.delta_max) || (s.points > 1 && s.delta_min == s.delta_max) {
        return Err(CliError::Config("steady_state: need delta_min < delta_max".into()));
    }
    let base = cfg.engine();
    if base.n_h <= 0.0 {
        return Err(CliError::Config("steady_state: n_h must be positive to normalise".into()));
    }
    let mut rows = Vec::with_capacity(s.points * s.kappa_h.len());
    for &kappa_h in &s.kappa_h {
        let mut p = base;
        p.kappa_h = kappa_h;
        p.set_cooperativity(base.alpha);
        p.validate().map_err(|e| CliError::Config(format!("steady_state: {e}")))?;
        for k in 0..s.points {
            let x = if s.points == 1 {
                s.delta_min
            } else {
                s.delta_min + (s.delta_max - s.delta_min) * k as f64 / (s.points - 1) as f64
            };
            let (n_a, n_b) = steady_state_at_detuning(x * kappa_h, &p);
            rows.push(vec![num(kappa_h)?, num(x)?, num(n_a / p.n_h)?, num(n_b / p.n_h)?]);
        }
    }
    let dir = out_dir(cfg)?;
    let mut prov = Provenance::new("steady-state", cfg);
    prov.push("units", "kappa_h in kappa_c; delta in kappa_h; occupations in n_h");
    write_csv(
        &dir.join("steady_state.csv"),
        &prov,
        &["kappa_h", "delta_over_kappa_h", "n_a_over_n_h", "n_b_over_n_h"],
        &rows,
    )?;
    Ok(format!("wrote {} rows to {}\n", rows.len(), dir.join("steady_state.csv").display()))
}

/// pV loops of the delayed steady state for each configured τΦ̇.
pub fn pv(cfg: &RunConfig) -> Result<String, CliError> {
    cfg.reject_circuit("pv")?;
    let p = cfg.engine();
    let c2 = quasi_static_constants(&p, 0.0)?.c2;
    let (mut curve, mut summary, mut stars) = (Vec::new(), Vec::new(), Vec::new());
    let mut text = String::new();
    for (id, &tau_omega) in cfg.pv.tau_omega.iter().enumerate() {
        let c = pv_curve(&p, tau_omega, cfg.pv.points).map_err(|e| CliError::Config(format!("pv: {e}")))?;
        let cyc = &c.cycle;
        for k in 0..cyc.phi.len() {
            curve.push(vec![id.to_string(), num(tau_omega)?, num(cyc.phi[k])?, num(cyc.v[k])?, num(cyc.p[k])?]);
        }
        let first_order = std::f64::consts::PI * tau_omega * c2;
        summary.push(vec![id.to_string(), num(tau_omega)?, num(cyc.loop_area)?, num(first_order)?]);
        for (marker, phi) in [("p_max", c.phi_p_max), ("p_min", c.phi_p_min)] {
            let k = cyc.phi.iter().position(|&x| x == phi).expect("marker lies on the grid");
            stars.push(vec![
                id.to_string(),
                num(tau_omega)?,
                marker.to_string(),
                num(phi)?,
                num(cyc.v[k])?,
                num(cyc.p[k])?,
            ]);
        }
        text.push_str(&format!("curve {id}: tau_omega = {tau_omega}, loop area = {}\n", cyc.loop_area));
    }
    let dir = out_dir(cfg)?;
    let mut prov = Provenance::new("pv", cfg);
    prov.push("units", "V = -cos(phi); p = hbar_g * n_a in kappa_c");
    prov.push("points", cfg.pv.points);
    write_csv(&dir.join("pv.csv"), &prov, &["curve_id", "tau_omega", "phi", "v", "p"], &curve)?;
    write_csv(
        &dir.join("pv_summary.csv"),
        &prov,
        &["curve_id", "tau_omega", "loop_area", "first_order_area"],
        &summary,
    )?;
    write_csv(&dir.join("pv_stars.csv"), &prov, &["curve_id", "tau_omega", "marker", "phi", "v", "p"], &stars)?;
    Ok(text)
}

#[derive(Debug, Serialize)]
struct FailureEntry {
    stream_id: u64,
    error: String,
}

#[derive(Debug, Serialize)]
struct Manifest {
    generator: String,
    config: RunConfig,
    trajectories_requested: usize,
    trajectories_completed: usize,
    failures: Vec<FailureEntry>,
    steps_per_trajectory: u64,
    clamped_steps: u64,
    clamped_fraction: f64,
    warnings: Vec<String>,
    files: Vec<String>,
    stats_skipped: Option<String>,
}

/// Runs the ensemble and writes trajectories, statistics and a manifest.
pub fn simulate(cfg: &RunConfig, threads: Option<usize>) -> Result<String, CliError> {
    cfg.reject_circuit("simulate")?;
    let sim = cfg.sim_config();
    let init = cfg.initial_condition().to_state(cfg.model, &sim.params);
    let warnings = sim.warnings(cfg.model);
    let e = run_ensemble(&sim, &init, cfg.seed, cfg.n_traj, threads)?;
    let dir = out_dir(cfg)?;
    let mut prov = Provenance::new("simulate", cfg);
    prov.push("model", cfg.model.as_str());
    prov.push_f64("dt", cfg.dt);
    prov.push_f64("t_end", cfg.t_end);
    prov.push("sample_stride", cfg.sample_stride);
    prov.push("n_traj", cfg.n_traj);
    prov.push_f64("init.phi", cfg.init.phi);
    prov.push_f64("init.l", cfg.init.l);
    if let Some(n_a) = cfg.init.n_a {
        prov.push_f64("init.n_a", n_a);
    }

    let mut files = vec!["trajectories.csv".to_string()];
    write_trajectories(&dir.join("trajectories.csv"), &prov, &e, cfg.model)?;
    let stats_skipped = match e.trajectories.len() {
        n if n < 2 => Some(format!("{n} completed trajectory; statistics need at least 2")),
        _ => match ensemble_stats(&e, cfg.analysis.smoothing_window) {
            Ok(stats) => {
                let mut prov = prov.clone();
                prov.push("trajectories", stats.trajectories);
                prov.push_f64("smoothing_window", stats.smoothing_window);
                prov.push_f64("chi_mean", stats.chi_mean);
                prov.push_f64("var_rate_offset", stats.var_rate_offset);
                write_stats(&dir.join("stats.csv"), &prov, &stats)?;
                files.push("stats.csv".into());
                None
            }
            Err(err) => Some(err.to_string()),
        },
    };

    let clamped: u64 = e.trajectories.iter().map(|t| t.meta.clamped_steps).sum();
    let steps = sim.n_steps();
    let total_steps = steps * e.trajectories.len() as u64;
    files.push("manifest.json".into());
    let manifest = Manifest {
        generator: format!("piston {VERSION}"),
        config: cfg.clone(),
        trajectories_requested: e.count,
        trajectories_completed: e.trajectories.len(),
        failures: e
            .failures
            .iter()
            .map(|f| FailureEntry {
                stream_id: f.stream_id,
                error: f.error.to_string(),
            })
            .collect(),
        steps_per_trajectory: steps,
        clamped_steps: clamped,
        clamped_fraction: if total_steps > 0 { clamped as f64 / total_steps as f64 } else { 0.0 },
        warnings: warnings.clone(),
        files,
        stats_skipped,
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    if e.trajectories.is_empty() {
        return Err(CliError::Runtime(format!(
            "all {} trajectories failed; see {}",
            e.count,
            dir.join("manifest.json").display()
        )));
    }
    let mut text = String::new();
    for w in &warnings {
        text.push_str(&format!("warning: {w}\n"));
    }
    text.push_str(&format!(
        "{} of {} trajectories completed ({} steps each); output in {}\n",
        e.trajectories.len(),
        e.count,
        steps,
        dir.display()
    ));
    Ok(text)
}

fn write_trajectories(path: &Path, prov: &Provenance, e: &EnsembleRecord, model: ModelKind) -> Result<(), CliError> {
    let full = model == ModelKind::Full;
    let header: &[&str] = if full {
        &["stream_id", "t", "n_a", "n_b", "phi", "l"]
    } else {
        &["stream_id", "t", "n_a", "phi", "l"]
    };
    let mut rows = Vec::new();
    for t in &e.trajectories {
        let id = t.meta.stream_id.to_string();
        for i in 0..t.len() {
            let mut row = vec![id.clone(), num(t.times[i])?, num(t.n_a[i])?];
            if let Some(n_b) = &t.n_b {
                row.push(num(n_b[i])?);
            }
            row.push(num(t.phi[i])?);
            row.push(num(t.l[i])?);
            rows.push(row);
        }
    }
    write_csv(path, prov, header, &rows)
}

const STATS_COLUMNS: [&str; 10] = [
    "t",
    "mean_l",
    "var_l",
    "mean_l2",
    "snr",
    "free_fraction",
    "rate_mean",
    "rate_var",
    "norm_rate_mean",
    "norm_rate_var",
];

fn write_stats(path: &Path, prov: &Provenance, s: &EnsembleStats) -> Result<(), CliError> {
    let rows = (0..s.len())
        .map(|i| {
            Ok(vec![
                num(s.times[i])?,
                num(s.mean_l[i])?,
                num(s.var_l[i])?,
                num(s.mean_l2[i])?,
                opt(s.snr[i])?,
                num(s.free_fraction[i])?,
                opt(s.rate_mean[i])?,
                opt(s.rate_var[i])?,
                opt(s.norm_rate_mean[i])?,
                opt(s.norm_rate_var[i])?,
            ])
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    write_csv(path, prov, &STATS_COLUMNS, &rows)
}

/// Reads a statistics file written by `simulate`.
pub fn read_stats(path: &Path) -> Result<(EnsembleStats, Provenance), CliError> {
    let table: Table = read_csv(path)?;
    if table.rows.is_empty() {
        return Err(CliError::Config(format!("{}: no data rows", path.display())));
    }
    let meta = |key: &str| -> Result<f64, CliError> {
        table
            .provenance
            .get(key)
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| CliError::Config(format!("{}: missing `# {key} = ...` line", path.display())))
    };
    let stats = EnsembleStats {
        trajectories: meta("trajectories")? as usize,
        smoothing_window: meta("smoothing_window")?,
        chi_mean: meta("chi_mean")?,
        var_rate_offset: meta("var_rate_offset")?,
        times: table.floats("t")?,
        mean_l: table.floats("mean_l")?,
        var_l: table.floats("var_l")?,
        mean_l2: table.floats("mean_l2")?,
        snr: table.optional_floats("snr")?,
        free_fraction: table.floats("free_fraction")?,
        rate_mean: table.optional_floats("rate_mean")?,
        rate_var: table.optional_floats("rate_var")?,
        norm_rate_mean: table.optional_floats("norm_rate_mean")?,
        norm_rate_var: table.optional_floats("norm_rate_var")?,
    };
    if stats.times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(CliError::Config(format!("{}: times must increase strictly", path.display())));
    }
    Ok((stats, table.provenance))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: Option<f64>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub pass: bool,
}

impl Check {
    fn within(name: &str, value: Option<f64>, lower: Option<f64>, upper: Option<f64>) -> Self {
        let pass = value.is_some_and(|v| lower.map_or(true, |l| v >= l) && upper.map_or(true, |u| v <= u));
        Check {
            name: name.into(),
            value,
            lower,
            upper,
            pass,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnalysisReport {
    pub trajectories: usize,
    pub smoothing_window: f64,
    pub chi_mean: f64,
    pub var_rate_offset: f64,
    pub free_fraction_threshold: f64,
    pub window_start: Option<f64>,
    pub window_end: Option<f64>,
    pub crossing_time: Option<f64>,
    pub first_swing_end: Option<f64>,
    /// Time from which the mean of L stays positive.
    pub mean_positive_from: Option<f64>,
    pub snr_undefined_samples: usize,
    pub rates: Option<WindowRates>,
    pub checks: Vec<Check>,
    pub all_pass: bool,
}

/// Fig. 3 style checks on a statistics record.
pub fn analyze_stats(stats: &EnsembleStats, p: &EngineParams, cfg: &RunConfig) -> AnalysisReport {
    let a = &cfg.analysis;
    let window = validity_window(stats, p, a.free_fraction);
    let rates = window_rates(stats, &window).ok();
    // one swing carries the rotor from one turning point to the other
    let first_swing_end = pendulum_period(p, cfg.init.phi.abs()).map(|t| stats.times[0] + 0.5 * t);
    let mean_positive_from = positive_from(stats);
    let target = a.crossing_time;
    let checks = vec![
        Check::within("mean_positive_after_first_swing", mean_positive_from, None, first_swing_end),
        Check::within(
            "gain_ratio",
            rates.map(|r| r.gain_ratio),
            Some(a.gain_band[0]),
            Some(a.gain_band[1]),
        ),
        Check::within(
            "variance_ratio",
            rates.map(|r| r.variance_ratio),
            Some(a.variance_band[0]),
            Some(a.variance_band[1]),
        ),
        Check::within(
            "crossing_time",
            window.crossing_time,
            Some(target * (1.0 - a.crossing_tolerance)),
            Some(target * (1.0 + a.crossing_tolerance)),
        ),
        Check::within("snr_variation", rates.map(|r| r.snr_variation), None, Some(a.max_snr_variation)),
    ];
    AnalysisReport {
        trajectories: stats.trajectories,
        smoothing_window: stats.smoothing_window,
        chi_mean: stats.chi_mean,
        var_rate_offset: stats.var_rate_offset,
        free_fraction_threshold: a.free_fraction,
        window_start: window.range().map(|(s, _)| stats.times[s]),
        window_end: window.range().map(|(_, e)| stats.times[e]),
        crossing_time: window.crossing_time,
        first_swing_end,
        mean_positive_from,
        snr_undefined_samples: stats.snr.iter().filter(|s| s.is_none()).count(),
        rates,
        all_pass: checks.iter().all(|c| c.pass),
        checks,
    }
}

/// Reads `stats` (default `<out>/stats.csv`) and writes `analysis.json`.
pub fn analyze(cfg: &RunConfig, stats_path: Option<&Path>) -> Result<String, CliError> {
    cfg.reject_circuit("analyze")?;
    let path = stats_path.map_or_else(|| cfg.out.join("stats.csv"), Path::to_path_buf);
    let (stats, prov) = read_stats(&path)?;
    let p = cfg.engine();
    let expected = Provenance::new("analyze", cfg);
    for (key, value) in expected.0.iter().filter(|(k, _)| k.starts_with("params.")) {
        if let Some(found) = prov.get(key) {
            if found != value {
                return Err(CliError::Config(format!(
                    "{} was produced with {key} = {found}, but the configuration has {value}",
                    path.display()
                )));
            }
        }
    }
    let report = analyze_stats(&stats, &p, cfg);
    let dir = out_dir(cfg)?;
    write_json(&dir.join("analysis.json"), &report)?;
    let mut text = String::new();
    for c in &report.checks {
        let value = c.value.map_or("undefined".to_string(), |v| v.to_string());
        text.push_str(&format!("{:<34} {:<8} {}\n", c.name, if c.pass { "pass" } else { "FAIL" }, value));
    }
    Ok(text)
}
