//! Inverse pipeline: normalized fringes → phase → FUT dispersion.

mod bootstrap;
mod estimate;
mod fit;
mod normalize;
mod pipeline;
mod pointwise;

pub use bootstrap::{bootstrap_uncertainty, poisson_resample, MIN_RESAMPLES};
pub use estimate::{
    estimate_dispersion, format_measured, min_measurable_dl, parse_measured, slope_from_two,
    subtract_reference, DispersionEstimate, Method, PhaseDifference, PhaseEstimate, SlopeEstimate,
    DEFAULT_PHASE_THRESHOLD,
};
pub use fit::{fit_raised_cosine, CurvatureSign, FitOptions, FitWindow, RaisedCosineFit};
pub use normalize::{normalize, EnvelopeScale, NormalizeOptions, NormalizedSpectrum};
pub use pipeline::{
    extract_dispersion, Diagnostics, Envelopes, Extraction, ExtractionInputs, ExtractionOptions,
};
pub use pointwise::{extract_phase_pointwise, PhaseTrace};
