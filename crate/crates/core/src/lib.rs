//! Pulse-level simulator and compiler for a molecular electro-nuclear spin
//! qudit used as a quantum simulator.
//!
//! The crate is organized bottom-up:
//!
//! - [`spin`]: static spin Hamiltonian, level labeling, transitions, thermal
//!   state and NMR spectrum synthesis.
//! - [`dynamics`]: density-matrix evolution with pure dephasing, in the lab
//!   frame or in the rotating-wave approximation, plus B1 ensembles.
//! - [`compiler`]: target models, Trotterization, ZZ-phase folding and
//!   lowering of gate lists to pulse schedules.
//! - [`experiments`]: purification, the two quantum simulations, readout and
//!   the calibration protocols with decay fitting.
//!
//! Energies are linear frequencies in MHz and times are in microseconds;
//! propagators carry the `2π` factor explicitly.

// `!(x > 0.0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod compiler;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod spin;

pub use error::{Error, Result};
pub use linalg::{CMatrix, C64};
