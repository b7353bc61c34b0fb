//! Run configuration.
//!
//! A run is described by one TOML document. It is assembled in three layers:
//! the built-in defaults with the selected preset merged over them, then the
//! user's file, then command-line flags. The merged document is validated
//! against a strict schema (unknown keys are errors). Rates and frequencies
//! are in units of κ_C everywhere except the `[circuit]` section, which
//! holds SI element values and is accepted by `params` only.

use std::path::{Path, PathBuf};

use piston_core::circuit::{CapacitiveCircuit, InductiveCircuit};
use piston_core::{EngineParams, InitialCondition, ModelKind, SimConfig};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::CliError;

/// Names accepted by `--preset` and the `preset` key.
pub const PRESETS: [&str; 4] = ["fig2b", "fig2c", "fig2d", "fig3"];

/// Complete defaults: the engine run of the rotor simulation.
const DEFAULTS: &str = r#"
model = "reduced"
seed = 1
n_traj = 200
dt = 0.001
t_end = 7000.0
sample_stride = 5000
out = "out"

[params]
kappa_h = 10.0
alpha = 1.0
delta0 = -4.0
g = 4.0
e_c = 1.0e-5
e_j = 400.0
n_h = 100.0
n_c = 1.0

[init]
phi = -2.9845130209103035
l = 0.0

[steady_state]
kappa_h = [0.1, 1.0, 10.0]
delta_min = -5.0
delta_max = 5.0
points = 201

[pv]
tau_omega = [0.0, 0.05, 0.1, 0.2]
points = 256

[analysis]
smoothing_window = 200.0
free_fraction = 0.5
gain_band = [0.8, 1.2]
variance_band = [0.7, 1.3]
max_snr_variation = 0.3
crossing_time = 6770.0
crossing_tolerance = 0.15
"#;

/// Steady-state panels: α = 1, n̄_H = 10, n̄_C = 0.1 n̄_H, κ_H = 10κ_C,
/// Δ₀ = −κ_H, g = 0.1κ_H and a frozen rotor.
const FIG2: &str = r#"
[params]
kappa_h = 10.0
alpha = 1.0
delta0 = -10.0
g = 1.0
e_c = 0.0
e_j = 0.0
n_h = 10.0
n_c = 1.0
"#;

fn preset_table(name: &str) -> Result<Table, CliError> {
    let text = match name {
        "fig2b" | "fig2c" | "fig2d" => FIG2,
        "fig3" => "",
        other => {
            return Err(CliError::Config(format!(
                "unknown preset `{other}` (expected one of {})",
                PRESETS.join(", ")
            )))
        }
    };
    Ok(text.parse().expect("built-in preset parses"))
}

/// Recursively overlays `top` onto `base`; tables merge, anything else
/// replaces.
fn merge(base: &mut Table, top: Table) {
    for (key, value) in top {
        match (base.get_mut(&key), value) {
            (Some(Value::Table(b)), Value::Table(t)) => merge(b, t),
            (_, v) => {
                base.insert(key, v);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    pub kappa_h: f64,
    pub alpha: f64,
    pub delta0: f64,
    pub g: f64,
    pub e_c: f64,
    pub e_j: f64,
    pub n_h: f64,
    pub n_c: f64,
    /// Force coupling ħg; defaults to `g`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hbar_g: Option<f64>,
}

impl ParamsSection {
    pub fn engine(&self) -> Result<EngineParams, CliError> {
        let mut p = EngineParams {
            kappa_c: 1.0,
            kappa_h: self.kappa_h,
            j: 0.0,
            alpha: self.alpha,
            delta0: self.delta0,
            g: self.g,
            e_c: self.e_c,
            e_j: self.e_j,
            n_h: self.n_h,
            n_c: self.n_c,
            hbar_g: self.hbar_g.unwrap_or(self.g),
        };
        p.set_cooperativity(self.alpha);
        p.validate().map_err(|e| CliError::Config(format!("params: {e}")))?;
        Ok(p)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitSection {
    pub phi: f64,
    pub l: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_a: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SteadyStateSection {
    /// Hot linewidths to sweep, one curve each.
    pub kappa_h: Vec<f64>,
    /// Detuning range in units of each κ_H.
    pub delta_min: f64,
    pub delta_max: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PvSection {
    /// Non-adiabaticities τΦ̇, one loop each.
    pub tau_omega: Vec<f64>,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    pub smoothing_window: f64,
    pub free_fraction: f64,
    pub gain_band: [f64; 2],
    pub variance_band: [f64; 2],
    pub max_snr_variation: f64,
    pub crossing_time: f64,
    pub crossing_tolerance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Coupling {
    Capacitive,
    Inductive,
}

/// Circuit element values in SI units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitSection {
    pub coupling: Coupling,
    /// Resonator capacitance (F).
    pub c_tilde: f64,
    /// Junction capacitance (F).
    pub cj_tilde: f64,
    /// Coupling capacitance (F), capacitive variant only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_c: Option<f64>,
    /// Resonator inductance (H).
    pub inductance: f64,
    /// Josephson energy (J).
    pub e_j: f64,
    /// Cold-bath linewidth (rad/s); enables the rescaled output.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa_c: Option<f64>,
    /// Chamber occupation assumed by the regime checks.
    #[serde(default = "default_occupation")]
    pub expected_occupation: f64,
}

fn default_occupation() -> f64 {
    1.0
}

pub enum Circuit {
    Capacitive(CapacitiveCircuit),
    Inductive(InductiveCircuit),
}

impl CircuitSection {
    pub fn circuit(&self) -> Result<Circuit, CliError> {
        Ok(match self.coupling {
            Coupling::Capacitive => Circuit::Capacitive(CapacitiveCircuit {
                c_tilde: self.c_tilde,
                cj_tilde: self.cj_tilde,
                c_c: self.c_c.ok_or_else(|| {
                    CliError::Config("circuit: missing field `c_c` (required for capacitive coupling)".into())
                })?,
                inductance: self.inductance,
                e_j: self.e_j,
            }),
            Coupling::Inductive => {
                if self.c_c.is_some() {
                    return Err(CliError::Config(
                        "circuit: `c_c` applies to capacitive coupling only".into(),
                    ));
                }
                Circuit::Inductive(InductiveCircuit {
                    c_tilde: self.c_tilde,
                    cj_tilde: self.cj_tilde,
                    inductance: self.inductance,
                    e_j: self.e_j,
                })
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    pub model: ModelKind,
    pub seed: u64,
    pub n_traj: usize,
    pub dt: f64,
    pub t_end: f64,
    pub sample_stride: u64,
    pub out: PathBuf,
    pub params: ParamsSection,
    pub init: InitSection,
    pub steady_state: SteadyStateSection,
    pub pv: PvSection,
    pub analysis: AnalysisSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub circuit: Option<CircuitSection>,
}

/// Values given on the command line; they win over file and preset.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub preset: Option<String>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub n_traj: Option<usize>,
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
}

impl RunConfig {
    /// Builds the configuration from an optional file plus flag overrides.
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self, CliError> {
        let file = match path {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
                text.parse::<Table>()
                    .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
            }
            None => Table::new(),
        };
        Self::from_table(file, overrides)
    }

    pub fn from_table(file: Table, overrides: &Overrides) -> Result<Self, CliError> {
        let mut doc: Table = DEFAULTS.parse().expect("built-in defaults parse");
        let preset = match (&overrides.preset, file.get("preset")) {
            (Some(name), _) => Some(name.clone()),
            (None, Some(Value::String(name))) => Some(name.clone()),
            (None, Some(other)) => {
                return Err(CliError::Config(format!("`preset` must be a string, got {other}")))
            }
            (None, None) => None,
        };
        if let Some(name) = &preset {
            merge(&mut doc, preset_table(name)?);
        }
        merge(&mut doc, file);
        if let Some(name) = preset {
            doc.insert("preset".into(), Value::String(name));
        }

        let mut flags = Table::new();
        if let Some(seed) = overrides.seed {
            let seed = i64::try_from(seed)
                .map_err(|_| CliError::Config(format!("seed {seed} exceeds the supported range")))?;
            flags.insert("seed".into(), Value::Integer(seed));
        }
        if let Some(out) = &overrides.out {
            flags.insert("out".into(), Value::String(out.to_string_lossy().into_owned()));
        }
        if let Some(n) = overrides.n_traj {
            flags.insert("n_traj".into(), Value::Integer(n as i64));
        }
        if let Some(dt) = overrides.dt {
            flags.insert("dt".into(), Value::Float(dt));
        }
        if let Some(t_end) = overrides.t_end {
            flags.insert("t_end".into(), Value::Float(t_end));
        }
        merge(&mut doc, flags);

        let cfg: RunConfig = Value::Table(doc)
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(e.message().trim().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        self.params.engine()?;
        self.sim_config()
            .validate()
            .map_err(|e| CliError::Config(e.to_string()))?;
        if self.n_traj == 0 {
            return Err(CliError::Config("n_traj must be at least 1".into()));
        }
        let a = &self.analysis;
        if !(a.smoothing_window > 0.0 && a.free_fraction > 0.0 && a.free_fraction <= 1.0) {
            return Err(CliError::Config(
                "analysis: smoothing_window must be positive and free_fraction in (0, 1]".into(),
            ));
        }
        Ok(())
    }

    /// Rejects SI circuit values for commands that work in κ_C units.
    pub fn reject_circuit(&self, command: &str) -> Result<(), CliError> {
        if self.circuit.is_some() {
            return Err(CliError::Config(format!(
                "the [circuit] section holds SI values and is only accepted by `params`, not `{command}`"
            )));
        }
        Ok(())
    }

    pub fn engine(&self) -> EngineParams {
        self.params.engine().expect("validated on load")
    }

    pub fn sim_config(&self) -> SimConfig {
        SimConfig {
            params: self.params.engine().unwrap_or_else(|_| EngineParams::fig3()),
            dt: self.dt,
            t_end: self.t_end,
            sample_stride: self.sample_stride,
        }
    }

    pub fn initial_condition(&self) -> InitialCondition {
        InitialCondition {
            phi: self.init.phi,
            l: self.init.l,
            n_a: self.init.n_a,
        }
    }
}
