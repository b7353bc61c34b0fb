//! Angle-dependent static quantities of the engine.
//!
//! All rates and frequencies are in units of the cold-bath linewidth κ_C
//! and ħ = 1. The rotor is described by the angle Φ and the rescaled
//! momentum `L = E_c Q`, which is the rotor angular frequency.

use serde::{Deserialize, Serialize};

use crate::error::{ensure_non_negative, ensure_positive, Error, Result};

/// Rates, energies and bath occupations defining the engine.
///
/// `alpha` and `j` are redundant (α = 4J²/κ_Cκ_H); build the record with
/// [`EngineParams::set_cooperativity`] or [`EngineParams::set_coupling`] so
/// that they stay consistent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineParams {
    pub kappa_c: f64,
    pub kappa_h: f64,
    /// Filter-chamber exchange rate.
    pub j: f64,
    /// Cooperativity 4J²/(κ_C κ_H).
    pub alpha: f64,
    /// Bare detuning ω₀ − ω_b.
    pub delta0: f64,
    /// Amplitude of the angle-dependent detuning modulation.
    pub g: f64,
    /// Charging energy as a rate factor: Φ̇ = E_c Q.
    pub e_c: f64,
    pub e_j: f64,
    pub n_h: f64,
    pub n_c: f64,
    /// Radiation-pressure force coupling ħg; equal to `g` when ħ = 1.
    pub hbar_g: f64,
}

impl EngineParams {
    /// α = 1, κ_H = 10κ_C, Δ₀ = −κ_H, g = 0.1κ_H, n̄_H = 10, n̄_C = 0.1n̄_H,
    /// with a frozen rotor (E_c = E_J = 0).
    pub fn fig2() -> Self {
        Self::fig2_with_kappa_h(10.0)
    }

    /// Steady-state sweep parameters at a given hot linewidth.
    pub fn fig2_with_kappa_h(kappa_h: f64) -> Self {
        let mut p = Self {
            kappa_c: 1.0,
            kappa_h,
            j: 0.0,
            alpha: 0.0,
            delta0: -kappa_h,
            g: 0.1 * kappa_h,
            e_c: 0.0,
            e_j: 0.0,
            n_h: 10.0,
            n_c: 1.0,
            hbar_g: 0.1 * kappa_h,
        };
        p.set_cooperativity(1.0);
        p
    }

    /// Engine run: E_cE_J = E_c ħg n̄_H = 0.004κ_C², n̄_H = 100n̄_C, α = 1,
    /// κ_H = 10κ_C, Δ₀ = −0.4κ_H (gain-optimal) and g = |Δ₀|, the largest
    /// modulation that keeps the filter blue-detuned at every angle.
    pub fn fig3() -> Self {
        let kappa_h = 10.0;
        let g = 0.4 * kappa_h;
        let n_h = 100.0;
        let e_c = 0.004 / (g * n_h);
        let mut p = Self {
            kappa_c: 1.0,
            kappa_h,
            j: 0.0,
            alpha: 0.0,
            delta0: -0.4 * kappa_h,
            g,
            e_c,
            e_j: 0.004 / e_c,
            n_h,
            n_c: 0.01 * n_h,
            hbar_g: g,
        };
        p.set_cooperativity(1.0);
        p
    }

    /// Sets α and derives J from it.
    pub fn set_cooperativity(&mut self, alpha: f64) {
        self.alpha = alpha;
        self.j = 0.5 * (alpha * self.kappa_c * self.kappa_h).sqrt();
    }

    /// Sets J and derives α from it.
    pub fn set_coupling(&mut self, j: f64) {
        self.j = j;
        self.alpha = 4.0 * j * j / (self.kappa_c * self.kappa_h);
    }

    pub fn validate(&self) -> Result<()> {
        ensure_positive("kappa_c", self.kappa_c)?;
        ensure_positive("kappa_h", self.kappa_h)?;
        ensure_non_negative("alpha", self.alpha)?;
        ensure_non_negative("j", self.j)?;
        ensure_non_negative("g", self.g)?;
        ensure_non_negative("e_c", self.e_c)?;
        ensure_non_negative("n_c", self.n_c)?;
        ensure_non_negative("hbar_g", self.hbar_g)?;
        for (field, value) in [("delta0", self.delta0), ("e_j", self.e_j)] {
            if !value.is_finite() {
                return Err(Error::Domain {
                    field,
                    value,
                    reason: "must be finite",
                });
            }
        }
        if !(self.n_h >= self.n_c && self.n_h.is_finite()) {
            return Err(Error::Domain {
                field: "n_h",
                value: self.n_h,
                reason: "hot occupation must be at least the cold occupation",
            });
        }
        let alpha_from_j = 4.0 * self.j * self.j / (self.kappa_c * self.kappa_h);
        if (alpha_from_j - self.alpha).abs() > 1e-12 * self.alpha.max(1.0) {
            return Err(Error::Domain {
                field: "alpha",
                value: self.alpha,
                reason: "inconsistent with 4J²/(κ_C κ_H)",
            });
        }
        Ok(())
    }
}

/// Effective bath seen by the chamber once the filter is eliminated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BathAtAngle {
    pub n_bar: f64,
    pub kappa: f64,
    pub f_h: f64,
    pub delta: f64,
}

/// Δ(Φ) = Δ₀ + g cos Φ.
#[inline]
pub fn detuning(phi: f64, p: &EngineParams) -> f64 {
    p.delta0 + p.g * phi.cos()
}

/// Hot contact f_H = α / (1 + 4Δ²/κ_H²) at a given detuning.
#[inline]
pub fn hot_contact_at_detuning(delta: f64, p: &EngineParams) -> f64 {
    let x = 2.0 * delta / p.kappa_h;
    p.alpha / (1.0 + x * x)
}

#[inline]
pub fn hot_contact(phi: f64, p: &EngineParams) -> f64 {
    hot_contact_at_detuning(detuning(phi, p), p)
}

#[inline]
pub fn bath_at_angle(phi: f64, p: &EngineParams) -> BathAtAngle {
    bath_at_cos(phi.cos(), p)
}

/// [`bath_at_angle`] for a precomputed `cos Φ`.
#[inline]
pub fn bath_at_cos(cos_phi: f64, p: &EngineParams) -> BathAtAngle {
    let delta = p.delta0 + p.g * cos_phi;
    let x = 2.0 * delta / p.kappa_h;
    let lorentz = 1.0 + x * x;
    // 1 + f_H = (lorentz + α)/lorentz; one division per quantity keeps the
    // per-step dependency chain short
    let total = lorentz + p.alpha;
    BathAtAngle {
        n_bar: (p.n_c * lorentz + p.alpha * p.n_h) / total,
        kappa: p.kappa_c * total / lorentz,
        f_h: p.alpha / lorentz,
        delta,
    }
}

/// Steady-state chamber and filter occupations at fixed detuning, from the
/// linear two-mode Langevin equations (finite κ_H/κ_C, no limit taken).
pub fn steady_state_at_detuning(delta: f64, p: &EngineParams) -> (f64, f64) {
    let (kc, kh) = (p.kappa_c, p.kappa_h);
    let sum = kc + kh;
    let gradient = p.alpha * (p.n_h - p.n_c);
    let d2 = 4.0 * delta * delta;
    let denom_a = d2 / (kh * sum) + (1.0 + p.alpha) * sum / kh;
    let denom_b = d2 / (kc * sum) + (1.0 + p.alpha) * sum / kc;
    (p.n_c + gradient / denom_a, p.n_h - gradient / denom_b)
}

pub fn steady_state_occupations(phi: f64, p: &EngineParams) -> (f64, f64) {
    steady_state_at_detuning(detuning(phi, p), p)
}

/// ∂⟨n_a⟩_ss/∂Δ, analytic.
pub fn chamber_occupation_slope(delta: f64, p: &EngineParams) -> f64 {
    let (kc, kh) = (p.kappa_c, p.kappa_h);
    let sum = kc + kh;
    let denom_a = 4.0 * delta * delta / (kh * sum) + (1.0 + p.alpha) * sum / kh;
    let d_denom = 8.0 * delta / (kh * sum);
    -p.alpha * (p.n_h - p.n_c) * d_denom / (denom_a * denom_a)
}

/// Rotor equations of motion in charge units: (Φ̇, Q̇) with
/// Φ̇ = E_c Q and Q̇ = −(E_J − ħg n_a) sin Φ.
#[inline]
pub fn rotor_drift(phi: f64, q: f64, n_a: f64, p: &EngineParams) -> (f64, f64) {
    (p.e_c * q, -(p.e_j - p.hbar_g * n_a) * phi.sin())
}

/// Rotor equations of motion for (Φ, L = E_c Q).
#[inline]
pub fn rotor_drift_scaled(phi: f64, l: f64, n_a: f64, p: &EngineParams) -> (f64, f64) {
    (l, -p.e_c * (p.e_j - p.hbar_g * n_a) * phi.sin())
}
