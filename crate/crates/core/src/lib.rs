//! Simulation core for a pair of dipole-dipole coupled multilevel atoms driven
//! by classical optical fields.
//!
//! The crate is `no_std` (it needs `alloc`) and performs no IO. It covers:
//!
//! * [`model`]: declarative scenario description and validation,
//! * [`frame`]: the rotating frame that makes cw drives time independent,
//! * [`operators`]: composite-space Hamiltonian and collapse operators,
//! * [`dynamics`]: Lindblad evolution, steady states and linear response,
//! * [`spectra`]: weak-probe susceptibility (closed form and numeric) and
//!   dressed-state analysis,
//! * [`protocols`]: two-atom Raman transfer, conditional adiabatic passage,
//!   conditional Raman pulses and minimal-fidelity evaluation.
//!
//! All frequencies and rates are dimensionless multiples of a reference
//! linewidth `γ`; times are in units of `γ⁻¹`.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

mod complex_serde;
pub mod dynamics;
mod error;
pub mod frame;
pub mod model;
pub mod operators;
pub mod protocols;
pub mod spectra;

pub use error::{Diagnostic, Diagnostics, Error, Result, Severity};

/// Complex double used throughout the crate.
pub type C64 = num_complex::Complex64;
