//! Stochastic simulation of an autonomous flux-piston heat engine: a
//! Josephson rotor driven by the radiation-pressure-like force of a
//! thermally loaded resonator whose hot-bath contact is gated by the rotor
//! angle through a filter cavity.
//!
//! Modules, bottom up:
//!
//! * [`circuit`] – raw circuit elements to effective oscillator-rotor
//!   parameters (SI units);
//! * [`model`] – angle-dependent detuning, effective baths and steady states
//!   (units of κ_C, ħ = 1);
//! * [`sde`] – reproducible random streams and the Euler-Maruyama kernel;
//! * [`sim`] – full three-mode and reduced chamber+rotor simulators;
//! * [`analysis`] – closed-form gain and variance rates, pV loops and
//!   ensemble statistics.

pub mod analysis;
pub mod circuit;
pub mod error;
pub mod model;
pub mod quad;
pub mod sde;
pub mod sim;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use model::{BathAtAngle, EngineParams};
pub use sde::RandomStream;
pub use sim::{
    EnsembleRecord, FullState, InitialCondition, ModelKind, ReducedState, SimConfig, State,
    TrajectoryRecord,
};
