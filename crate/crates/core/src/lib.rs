//! Simulation and inversion of biphoton spectral interferograms from a
//! common-path nonlinear interferometer built from two cascaded SPDC sources
//! with a fiber-under-test (FUT) between them.
//!
//! The forward path is [`synthesis`] (spectral interferogram) followed by
//! [`spectrometer`] (time-of-flight fiber spectrometer with detector jitter and
//! counting noise). The inverse path is [`extraction`]: normalize by the
//! single-source spectra, fit a raised cosine with an even phase polynomial,
//! subtract the no-FUT reference and convert the curvature to the group
//! velocity dispersion and the dispersion parameter `D`. Two degeneracy
//! wavelengths give the dispersion slope.
//!
//! Units are fixed crate-wide, see [`units`].

// `!(x > 0.0)` is used on purpose so NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dispersion;
pub mod error;
pub mod exec;
pub mod extraction;
pub mod io;
pub mod presets;
pub mod spectrometer;
pub mod synthesis;
pub mod units;

pub use error::{Error, Result};
pub use exec::Exec;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
