//! Polarization-entanglement signal model for photon pairs from two sky
//! sources observed by two polarizer-equipped detectors.
//!
//! - [`polarization`]: Bell states, polarizer observables, correlators and
//!   the CHSH operator.
//! - [`propagation`]: source/detector geometry, path amplitudes and HBT
//!   intensities.
//! - [`background`]: coincidences from unentangled, partially polarized
//!   sources.
//! - [`scenarios`]: signal + background mixtures, angular scans and the
//!   background-nulling axes.
//! - [`fit`]: least-squares separation of signal from background.
//! - [`montecarlo`]: reproducible finite-statistics sampling.

pub mod background;
pub mod error;
pub mod fit;
pub mod montecarlo;
pub mod polarization;
pub mod propagation;
pub mod scenarios;

pub use error::{Error, Result};
