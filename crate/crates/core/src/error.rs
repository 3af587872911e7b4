use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} = {value} is outside the valid range [{min}, {max}]")]
    OutOfRange {
        what: &'static str,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("every point was masked out")]
    AllMasked,

    #[error("too few usable points: {found} (need {needed})")]
    TooFewPoints { found: usize, needed: usize },

    #[error("fringes are undersampled: {samples_per_fringe:.2} samples per fringe at the window edge (need 4)")]
    Undersampled { samples_per_fringe: f64 },

    #[error("fit did not converge after {restarts} restarts (best cost {best_cost:.6e}, best c2 {best_c2:.6e})")]
    FitFailed {
        restarts: usize,
        best_cost: f64,
        best_c2: f64,
    },

    #[error("spectrum has zero total weight")]
    ZeroWeight,

    #[error("histogram is empty")]
    EmptyHistogram,

    #[error("{failed} of {total} bootstrap resamples failed to fit")]
    BootstrapFailed { failed: usize, total: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error in {source_name} line {line}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn out_of_range(what: &'static str, value: f64, min: f64, max: f64) -> Self {
        Error::OutOfRange {
            what,
            value,
            min,
            max,
        }
    }

    /// True for errors caused by bad configuration or malformed input files
    /// rather than a numerical failure of the pipeline.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::Config(_)
                | Error::Parse { .. }
                | Error::InvalidInput(_)
                | Error::GridMismatch(_)
        )
    }
}
