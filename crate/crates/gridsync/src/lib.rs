//! Synchronization dynamics of grid-forming (GFM) and grid-following (GFL)
//! inverters.
//!
//! The crate is organised around the duality between droop-controlled
//! voltage sources and PLL-synchronized current sources:
//!
//! - [`dqframe`]: complex dq± signal and model algebra, rational transfers.
//! - [`devices`]: controller parameters, swing characteristic polynomials,
//!   virtual synchronization ports and the modified swing equations.
//! - [`smallsignal`]: root-locus sweeps and stability verdicts.
//! - [`network`]: topologies, the nonlinear whole-system model, its
//!   linearization and pole analysis.
//! - [`timedomain`]: fixed-step simulation with events and traces.
//! - [`transient`]: two-inverter power-angle analysis.
//!
//! Everything is `no_std` with `alloc`; file formats and the command line
//! live in the `gridsync-cli` crate.
#![no_std]
#![warn(missing_docs)]
#![cfg_attr(test, allow(unused_imports))]

extern crate alloc;

pub mod devices;
pub mod dqframe;
mod error;
pub mod linalg;
pub mod network;
pub mod poly;
pub mod smallsignal;
pub mod timedomain;
pub mod transient;

pub use error::{Error, Result};

/// Complex number type used throughout.
pub type C64 = num_complex::Complex64;

/// Base system frequency in Hz.
pub const F0_HZ: f64 = 50.0;

/// Base angular frequency Ω0 in rad/s.
pub const OMEGA0: f64 = 2.0 * core::f64::consts::PI * F0_HZ;

/// Imaginary unit.
pub const J: C64 = C64 { re: 0.0, im: 1.0 };

/// Convert a frequency in Hz to rad/s.
#[inline]
pub fn hz(f: f64) -> f64 {
    2.0 * core::f64::consts::PI * f
}
