//! Simulation and analysis toolkit for flux-qubit electron spin resonance.
//!
//! * [`spinsys`] builds spin Hamiltonians and ESR spectra of multi-site crystals.
//! * [`magnetization`] models the thermal spin magnetization sensed by the qubit.
//! * [`qubit`] is the flux-qubit transducer: dispersion, fitting, ESR scans and
//!   spin-count sensitivity.
//! * [`noise`] covers flicker-noise synthesis, switching statistics and Welch
//!   spectral estimation.
//! * [`config`] and [`io`] hold the run-config schema and CSV formats used by
//!   the command-line front end.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod constants;
mod error;
pub mod fixtures;
pub mod io;
pub mod magnetization;
pub mod noise;
pub mod numerics;
mod par;
pub mod qubit;
pub mod spinsys;

pub use error::{Error, Result};
