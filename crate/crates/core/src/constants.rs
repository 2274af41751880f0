//! Physical constants (CODATA 2018 exact / recommended values).
//!
//! Every module takes its constants from here; there are no other literals
//! for these quantities in the crate.

/// Planck constant, J·s.
pub const PLANCK: f64 = 6.62607015e-34;
/// Bohr magneton, J/T.
pub const BOHR_MAGNETON: f64 = 9.2740100783e-24;
/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.380649e-23;
/// Nuclear magneton, J/T.
pub const NUCLEAR_MAGNETON: f64 = 5.0507837461e-27;
/// Magnetic flux quantum h/2e, Wb.
pub const FLUX_QUANTUM: f64 = 2.067833848e-15;
