//! Simulation of polarization-qubit state tomography under chromatic
//! aberration of the waveplate basis-change transformation.
//!
//! A half-wave plus quarter-wave plate pair rotates the measurement basis of
//! a polarization qubit, but the plates' birefringent dispersion makes the
//! rotation wavelength-dependent. Averaged over a finite spectral bandwidth
//! the ideal projective measurement turns into a fuzzy POVM. This crate
//! builds that measurement model end to end:
//!
//! * [`states`] — pure states, density matrices, purification, fidelity;
//! * [`optics`] — quartz dispersion, waveplate Jones matrices, plate design;
//! * [`protocol`] — waveplate angle synthesis and the cube / octahedron
//!   measurement protocols;
//! * [`measurement`] — spectral averaging into fuzzy operators and the
//!   measurement-matrix completeness / condition-number diagnostics;
//! * [`mle`] — maximum-likelihood reconstruction by the quasilinear
//!   likelihood equation plus chi-squared adequacy testing;
//! * [`fidelity`] — information-matrix fidelity theory: loss function,
//!   informative spectrum, generalized chi-squared infidelity distribution;
//! * [`harness`] — seeded Monte Carlo experiments comparing reconstruction
//!   models, loss maps over the Bloch sphere, bandwidth sweeps.
//!
//! All wavelengths and thicknesses are micrometers, all angles radians.

pub mod error;
pub mod fidelity;
pub mod harness;
pub mod measurement;
pub mod mle;
pub mod optics;
pub mod protocol;
pub mod states;
pub mod stats;

pub use error::Error;

/// Complex scalar used throughout.
pub type C64 = num_complex::Complex<f64>;

/// Crate result alias.
pub type Result<T> = std::result::Result<T, Error>;
