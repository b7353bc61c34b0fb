//! Reduction of the raw circuit element values to the effective
//! oscillator-rotor description, in SI units.
//!
//! Both coupling variants (capacitive and inductive) reduce to a resonator
//! with capacitance `C` coupled through `cos((Φ + ξφ)/Φ₀)` to a Josephson
//! rotor with capacitance `C_J`. [`derive_params`] turns that record into
//! the frequencies and energies used by the dynamics, and
//! [`EngineScale::from_circuit`] rescales them to units of the cold-bath
//! linewidth.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_non_negative, ensure_positive, Result};

/// Reduced Planck constant (J s), CODATA 2018 exact.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Elementary charge (C), exact.
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;
/// Reduced flux quantum ħ/2e (Wb).
pub const FLUX_QUANTUM: f64 = HBAR / (2.0 * ELEMENTARY_CHARGE);

/// Default ratio used for every "much smaller than" check.
pub const DEFAULT_REGIME_THRESHOLD: f64 = 0.01;

/// Resonator capacitively coupled to the Josephson loop through `c_c`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapacitiveCircuit {
    pub c_tilde: f64,
    pub cj_tilde: f64,
    pub c_c: f64,
    pub inductance: f64,
    pub e_j: f64,
}

/// Resonator galvanically (inductively) coupled to the Josephson loop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InductiveCircuit {
    pub c_tilde: f64,
    pub cj_tilde: f64,
    pub inductance: f64,
    pub e_j: f64,
}

/// Effective oscillator-rotor circuit shared by both coupling variants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveCircuit {
    /// Dimensionless coupling, always in (0, 1).
    pub xi: f64,
    /// Effective resonator capacitance.
    pub c: f64,
    /// Effective rotor capacitance.
    pub c_j: f64,
    pub inductance: f64,
    pub e_j: f64,
    /// Bare junction capacitance, which sets the plasma frequency.
    pub cj_tilde: f64,
}

/// Frequencies and energies of the Born-Oppenheimer piston Hamiltonian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedParams {
    /// Resonator frequency 1/√(LC) (rad/s).
    pub omega0: f64,
    /// Josephson plasma frequency (rad/s).
    pub omega_p: f64,
    /// Angle-dependent frequency modulation amplitude (rad/s).
    pub g: f64,
    /// Charging energy 1/(Φ₀² C_J) in J⁻¹ s⁻².
    pub e_c: f64,
    /// Zero-point flux fluctuation of the resonator (Wb).
    pub phi_r: f64,
    pub phi0: f64,
}

impl CapacitiveCircuit {
    pub fn validate(&self) -> Result<()> {
        ensure_positive("c_tilde", self.c_tilde)?;
        ensure_positive("cj_tilde", self.cj_tilde)?;
        ensure_positive("c_c", self.c_c)?;
        ensure_positive("inductance", self.inductance)?;
        ensure_positive("e_j", self.e_j)
    }
}

impl InductiveCircuit {
    pub fn validate(&self) -> Result<()> {
        ensure_positive("c_tilde", self.c_tilde)?;
        ensure_positive("cj_tilde", self.cj_tilde)?;
        ensure_positive("inductance", self.inductance)?;
        ensure_positive("e_j", self.e_j)
    }
}

/// Capacitive variant: displace the junction flux by `ξφ`.
pub fn effective_capacitive(raw: &CapacitiveCircuit) -> Result<EffectiveCircuit> {
    raw.validate()?;
    let xi = raw.c_c / (raw.c_c + raw.cj_tilde);
    Ok(EffectiveCircuit {
        xi,
        c: raw.c_tilde + xi * raw.cj_tilde,
        c_j: raw.cj_tilde + raw.c_c,
        inductance: raw.inductance,
        e_j: raw.e_j,
        cj_tilde: raw.cj_tilde,
    })
}

/// Inductive variant: relative coordinate for the resonator, centre of
/// mass for the rotor.
pub fn effective_inductive(raw: &InductiveCircuit) -> Result<EffectiveCircuit> {
    raw.validate()?;
    let xi = raw.c_tilde / (raw.c_tilde + raw.cj_tilde);
    Ok(EffectiveCircuit {
        xi,
        c: xi * raw.cj_tilde,
        c_j: raw.cj_tilde + raw.c_tilde,
        inductance: raw.inductance,
        e_j: raw.e_j,
        cj_tilde: raw.cj_tilde,
    })
}

pub fn derive_params(eff: &EffectiveCircuit) -> Result<DerivedParams> {
    ensure_positive("c", eff.c)?;
    ensure_positive("c_j", eff.c_j)?;
    ensure_positive("cj_tilde", eff.cj_tilde)?;
    ensure_positive("inductance", eff.inductance)?;
    ensure_positive("e_j", eff.e_j)?;
    ensure_non_negative("xi", eff.xi)?;

    let phi0 = FLUX_QUANTUM;
    let omega0 = 1.0 / (eff.inductance * eff.c).sqrt();
    let omega_p = (eff.e_j / (phi0 * phi0 * eff.cj_tilde)).sqrt();
    let g = eff.xi * eff.xi * omega_p * omega_p * eff.cj_tilde / (2.0 * omega0 * eff.c);
    let e_c = 1.0 / (phi0 * phi0 * eff.c_j);
    let phi_r = (HBAR / (2.0 * omega0 * eff.c)).sqrt();
    Ok(DerivedParams {
        omega0,
        omega_p,
        g,
        e_c,
        phi_r,
        phi0,
    })
}

/// One "≪" condition of the Born-Oppenheimer regime.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeCheck {
    pub name: String,
    /// Left side divided by right side of the "≪" relation.
    pub ratio: f64,
    pub threshold: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub checks: Vec<RegimeCheck>,
}

impl RegimeReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn check(&self, name: &str) -> Option<&RegimeCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Thresholds for the "≪" relations; a check passes when `ratio <= threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeThresholds {
    pub modulation: f64,
    pub plasma: f64,
    pub vacuum_correction: f64,
    pub occupation: f64,
}

impl Default for RegimeThresholds {
    fn default() -> Self {
        Self {
            modulation: DEFAULT_REGIME_THRESHOLD,
            plasma: DEFAULT_REGIME_THRESHOLD,
            vacuum_correction: DEFAULT_REGIME_THRESHOLD,
            occupation: DEFAULT_REGIME_THRESHOLD,
        }
    }
}

/// Report-only: never fails, flags each violated assumption instead.
pub fn validate_regime(
    p: &DerivedParams,
    e_j: f64,
    expected_occupation: f64,
    thresholds: &RegimeThresholds,
) -> RegimeReport {
    let hbar_g = HBAR * p.g;
    let mk = |name: &str, ratio: f64, threshold: f64| RegimeCheck {
        name: name.to_string(),
        ratio,
        threshold,
        pass: ratio.is_finite() && ratio <= threshold,
    };
    RegimeReport {
        checks: vec![
            mk("g_over_omega0", p.g / p.omega0, thresholds.modulation),
            mk("omega_p_over_omega0", p.omega_p / p.omega0, thresholds.plasma),
            mk(
                "vacuum_correction",
                0.5 * hbar_g / e_j,
                thresholds.vacuum_correction,
            ),
            // critical occupation for inversion of the pendulum potential is E_J/ħg
            mk(
                "critical_occupation",
                expected_occupation * hbar_g / e_j,
                thresholds.occupation,
            ),
        ],
    }
}

/// Circuit quantities expressed in units of the cold-bath linewidth κ_C,
/// with ħ = 1. Energies become rates: `e_c` is ħE_c/κ_C and `e_j` is
/// E_J/(ħκ_C), so that `e_c * e_j` equals E_cE_J/κ_C².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineScale {
    pub omega0: f64,
    pub omega_p: f64,
    pub g: f64,
    pub e_c: f64,
    pub e_j: f64,
}

impl EngineScale {
    /// `kappa_c` is the cold-bath linewidth in rad/s.
    pub fn from_circuit(p: &DerivedParams, e_j: f64, kappa_c: f64) -> Result<Self> {
        ensure_positive("kappa_c", kappa_c)?;
        Ok(Self {
            omega0: p.omega0 / kappa_c,
            omega_p: p.omega_p / kappa_c,
            g: p.g / kappa_c,
            e_c: HBAR * p.e_c / kappa_c,
            e_j: e_j / (HBAR * kappa_c),
        })
    }
}
