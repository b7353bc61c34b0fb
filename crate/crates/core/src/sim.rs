//! Time-domain simulation of the engine.
//!
//! Two models share the rotor description `(Φ, L = E_c Q)`:
//!
//! * the full model integrates the chamber `a` and filter `b` amplitudes in
//!   the frame rotating at the filter frequency, with classical complex
//!   thermal inputs;
//! * the reduced model replaces `b` by an angle-dependent bath and tracks
//!   the chamber occupation only, `dn = −κ(Φ)(n − n̄(Φ))dt + √(2κ(Φ)n̄(Φ)n) dW`.
//!
//! Noise terms are Itô / Euler-Maruyama. The rotor itself carries no noise
//! and is advanced with a semi-implicit Euler kick (`L` first, then `Φ` with
//! the new `L`), which keeps the pendulum energy bounded instead of letting
//! it grow by `exp(2π ω dt)` per swing. The force uses the chamber
//! occupation at the start of the step, so the scheme stays non-anticipating.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_non_negative, ensure_positive, Error, Result};
use crate::model::{bath_at_angle, bath_at_cos, steady_state_occupations, EngineParams};
use crate::sde::RandomStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Full,
    Reduced,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Full => "full",
            ModelKind::Reduced => "reduced",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "full" => Ok(ModelKind::Full),
            "reduced" => Ok(ModelKind::Reduced),
            other => Err(format!("unknown model `{other}` (expected full or reduced)")),
        }
    }
}

/// Chamber `a`, filter `b`, unwrapped angle and `L = E_c Q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FullState {
    pub a: Complex64,
    pub b: Complex64,
    pub phi: f64,
    pub l: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReducedState {
    pub n_a: f64,
    pub phi: f64,
    pub l: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum State {
    Full(FullState),
    Reduced(ReducedState),
}

impl State {
    pub fn model(&self) -> ModelKind {
        match self {
            State::Full(_) => ModelKind::Full,
            State::Reduced(_) => ModelKind::Reduced,
        }
    }

    pub fn n_a(&self) -> f64 {
        match self {
            State::Full(s) => s.a.norm_sqr(),
            State::Reduced(s) => s.n_a,
        }
    }

    pub fn n_b(&self) -> Option<f64> {
        match self {
            State::Full(s) => Some(s.b.norm_sqr()),
            State::Reduced(_) => None,
        }
    }

    pub fn phi(&self) -> f64 {
        match self {
            State::Full(s) => s.phi,
            State::Reduced(s) => s.phi,
        }
    }

    pub fn l(&self) -> f64 {
        match self {
            State::Full(s) => s.l,
            State::Reduced(s) => s.l,
        }
    }
}

/// Rotor start plus an optional chamber occupation. Without one the chamber
/// starts in local equilibrium at the initial angle: n̄(Φ) for the reduced
/// model, the two-mode steady state for the full model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitialCondition {
    pub phi: f64,
    pub l: f64,
    pub n_a: Option<f64>,
}

impl InitialCondition {
    /// Φ = −0.95π, at rest.
    pub fn fig3() -> Self {
        Self {
            phi: -0.95 * std::f64::consts::PI,
            l: 0.0,
            n_a: None,
        }
    }

    pub fn to_state(&self, model: ModelKind, p: &EngineParams) -> State {
        match model {
            ModelKind::Reduced => State::Reduced(ReducedState {
                n_a: self.n_a.unwrap_or_else(|| bath_at_angle(self.phi, p).n_bar),
                phi: self.phi,
                l: self.l,
            }),
            ModelKind::Full => {
                let (n_a_ss, n_b_ss) = steady_state_occupations(self.phi, p);
                let n_a = self.n_a.unwrap_or(n_a_ss);
                State::Full(FullState {
                    a: Complex64::new(n_a.max(0.0).sqrt(), 0.0),
                    b: Complex64::new(n_b_ss.max(0.0).sqrt(), 0.0),
                    phi: self.phi,
                    l: self.l,
                })
            }
        }
    }
}

#[inline]
fn rotor_kick(phi: f64, sin_phi: f64, l: f64, n_a: f64, p: &EngineParams, dt: f64) -> (f64, f64) {
    let l_next = l - p.e_c * (p.e_j - p.hbar_g * n_a) * sin_phi * dt;
    (phi + l_next * dt, l_next)
}

#[cold]
fn integration_error(step: u64, dt: f64) -> Error {
    Error::Integration {
        step,
        time: step as f64 * dt,
    }
}

fn check_finite(values: &[f64], step: u64, dt: f64) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(integration_error(step, dt))
    }
}

/// One step of the three-mode Langevin equations. `step` labels failures.
pub fn step_full(
    s: &FullState,
    p: &EngineParams,
    dt: f64,
    rng: &mut RandomStream,
    step: u64,
) -> Result<FullState> {
    let i = Complex64::i();
    let (sin_phi, cos_phi) = s.phi.sin_cos();
    let delta = p.delta0 + p.g * cos_phi;
    let dz_a = rng.complex_thermal_increment(dt, p.kappa_c * p.n_c);
    let dz_b = rng.complex_thermal_increment(dt, p.kappa_h * p.n_h);

    let da = (-(i * delta + 0.5 * p.kappa_c) * s.a - i * p.j * s.b) * dt + dz_a;
    let db = (-0.5 * p.kappa_h * s.b - i * p.j * s.a) * dt + dz_b;
    let (phi, l) = rotor_kick(s.phi, sin_phi, s.l, s.a.norm_sqr(), p, dt);
    let next = FullState {
        a: s.a + da,
        b: s.b + db,
        phi,
        l,
    };
    check_finite(&[next.a.re, next.a.im, next.b.re, next.b.im, phi, l], step, dt)?;
    Ok(next)
}

/// Euler-Maruyama with full truncation: the diffusion sees `max(n, 0)` and
/// the updated occupation is clamped at 0. Returns the raw (unclamped)
/// occupation alongside the state; non-finite values are left to the caller.
#[inline(always)]
fn advance_reduced(s: &ReducedState, p: &EngineParams, dt: f64, rng: &mut RandomStream) -> (ReducedState, f64) {
    let (sin_phi, cos_phi) = s.phi.sin_cos();
    let bath = bath_at_cos(cos_phi, p);
    let dw = rng.wiener(dt);
    let drift = -bath.kappa * (s.n_a - bath.n_bar);
    let diffusion = (2.0 * bath.kappa * bath.n_bar * s.n_a.max(0.0)).sqrt();
    let n_raw = s.n_a + drift * dt + diffusion * dw;
    let (phi, l) = rotor_kick(s.phi, sin_phi, s.l, s.n_a, p, dt);
    (ReducedState { n_a: n_raw.max(0.0), phi, l }, n_raw)
}

#[inline(always)]
fn reduced_is_finite(s: &ReducedState, n_raw: f64) -> bool {
    n_raw.is_finite() && s.phi.is_finite() && s.l.is_finite()
}

/// Reduced-model step; also reports whether the occupation was clamped at 0.
pub fn step_reduced_monitored(
    s: &ReducedState,
    p: &EngineParams,
    dt: f64,
    rng: &mut RandomStream,
    step: u64,
) -> Result<(ReducedState, bool)> {
    let (next, n_raw) = advance_reduced(s, p, dt, rng);
    if !reduced_is_finite(&next, n_raw) {
        return Err(integration_error(step, dt));
    }
    Ok((next, n_raw < 0.0))
}

pub fn step_reduced(
    s: &ReducedState,
    p: &EngineParams,
    dt: f64,
    rng: &mut RandomStream,
    step: u64,
) -> Result<ReducedState> {
    step_reduced_monitored(s, p, dt, rng, step).map(|(s, _)| s)
}

/// Integration settings shared by every trajectory of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub params: EngineParams,
    pub dt: f64,
    pub t_end: f64,
    /// Record every `sample_stride` steps (plus the final step).
    pub sample_stride: u64,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        ensure_positive("dt", self.dt)?;
        ensure_non_negative("t_end", self.t_end)?;
        if self.sample_stride == 0 {
            return Err(Error::Domain {
                field: "sample_stride",
                value: 0.0,
                reason: "must be at least 1",
            });
        }
        Ok(())
    }

    pub fn n_steps(&self) -> u64 {
        (self.t_end / self.dt).round() as u64
    }

    /// Step-size warnings for the chosen model; empty when dt is comfortable.
    pub fn warnings(&self, model: ModelKind) -> Vec<String> {
        let p = &self.params;
        let fastest = match model {
            ModelKind::Full => p.kappa_h.max(p.kappa_c).max(p.delta0.abs() + p.g),
            ModelKind::Reduced => p.kappa_c * (1.0 + p.alpha),
        };
        if self.dt * fastest > 0.1 {
            vec![format!(
                "dt = {} exceeds 0.1 / {} for the {} model",
                self.dt,
                fastest,
                model.as_str()
            )]
        } else {
            Vec::new()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryMeta {
    pub model: ModelKind,
    pub params: EngineParams,
    pub seed: u64,
    pub stream_id: u64,
    pub dt: f64,
    pub sample_stride: u64,
    pub steps: u64,
    /// Steps at which the reduced-model occupation went negative and was
    /// clamped to zero.
    pub clamped_steps: u64,
}

/// Sampled time series in column layout. `n_b` is present for the full
/// model only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub n_a: Vec<f64>,
    pub n_b: Option<Vec<f64>>,
    pub phi: Vec<f64>,
    pub l: Vec<f64>,
    pub meta: TrajectoryMeta,
}

impl TrajectoryRecord {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    fn push(&mut self, t: f64, state: &State) {
        self.times.push(t);
        self.n_a.push(state.n_a());
        if let (Some(col), Some(n_b)) = (self.n_b.as_mut(), state.n_b()) {
            col.push(n_b);
        }
        self.phi.push(state.phi());
        self.l.push(state.l());
    }
}

/// Integrates one trajectory; a pure function of its arguments.
pub fn run_trajectory(
    cfg: &SimConfig,
    init: &State,
    seed: u64,
    stream_id: u64,
) -> Result<TrajectoryRecord> {
    cfg.validate()?;
    let p = cfg.params;
    let n_steps = cfg.n_steps();
    let stride = cfg.sample_stride;
    let capacity = (n_steps / stride + 2) as usize;
    let model = init.model();
    let mut rec = TrajectoryRecord {
        times: Vec::with_capacity(capacity),
        n_a: Vec::with_capacity(capacity),
        n_b: match model {
            ModelKind::Full => Some(Vec::with_capacity(capacity)),
            ModelKind::Reduced => None,
        },
        phi: Vec::with_capacity(capacity),
        l: Vec::with_capacity(capacity),
        meta: TrajectoryMeta {
            model,
            params: p,
            seed,
            stream_id,
            dt: cfg.dt,
            sample_stride: stride,
            steps: n_steps,
            clamped_steps: 0,
        },
    };

    let mut rng = RandomStream::new(seed, stream_id);
    let state = *init;
    rec.push(0.0, &state);
    match state {
        State::Reduced(mut s) => {
            let mut clamped = 0u64;
            for k in 0..n_steps {
                let (next, n_raw) = advance_reduced(&s, &p, cfg.dt, &mut rng);
                if !reduced_is_finite(&next, n_raw) {
                    return Err(integration_error(k, cfg.dt));
                }
                clamped += u64::from(n_raw < 0.0);
                s = next;
                let done = k + 1;
                if done % stride == 0 || done == n_steps {
                    rec.push(done as f64 * cfg.dt, &State::Reduced(s));
                }
            }
            rec.meta.clamped_steps = clamped;
        }
        State::Full(mut s) => {
            for k in 0..n_steps {
                s = step_full(&s, &p, cfg.dt, &mut rng, k)?;
                let done = k + 1;
                if done % stride == 0 || done == n_steps {
                    rec.push(done as f64 * cfg.dt, &State::Full(s));
                }
            }
        }
    }
    Ok(rec)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryFailure {
    pub stream_id: u64,
    pub error: Error,
}

/// Trajectories with stream ids `0..count`, ordered by stream id.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleRecord {
    pub trajectories: Vec<TrajectoryRecord>,
    pub failures: Vec<TrajectoryFailure>,
    pub count: usize,
}

/// Runs `n_traj` independent trajectories in parallel. `threads` pins the
/// worker count; `None` uses the global rayon pool. The result does not
/// depend on either.
pub fn run_ensemble(
    cfg: &SimConfig,
    init: &State,
    seed: u64,
    n_traj: usize,
    threads: Option<usize>,
) -> Result<EnsembleRecord> {
    if n_traj == 0 {
        return Err(Error::Domain {
            field: "n_traj",
            value: 0.0,
            reason: "must be at least 1",
        });
    }
    cfg.validate()?;
    let work = || {
        (0..n_traj as u64)
            .into_par_iter()
            .map(|id| (id, run_trajectory(cfg, init, seed, id)))
            .collect::<Vec<_>>()
    };
    let results = match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|_| Error::Domain {
                field: "threads",
                value: n as f64,
                reason: "could not start worker pool",
            })?
            .install(work),
        None => work(),
    };

    let mut trajectories = Vec::with_capacity(n_traj);
    let mut failures = Vec::new();
    for (stream_id, result) in results {
        match result {
            Ok(rec) => trajectories.push(rec),
            Err(error) => failures.push(TrajectoryFailure { stream_id, error }),
        }
    }
    Ok(EnsembleRecord {
        trajectories,
        failures,
        count: n_traj,
    })
}
