//! Configuration, file formats and the end-to-end drivers.

mod config;
mod report;
mod run;
mod table;

use std::path::Path;

pub use config::{derive_seed, GridConfig, RunConfig, SetupConfig, SourceConfig};
pub use report::{Check, Provenance, PumpResult, Report, RoundtripSummary};
pub use run::{
    check_against_truth, extract_all, measure, roundtrip, simulate, spectrometer_for,
    spectrum_stem, ExtractOutcome, Measurement, PumpData, SimulatedSpectrum, ROUNDTRIP_D_TOLERANCE,
    ROUNDTRIP_SIGMAS,
};
pub use table::{
    histogram_from_csv, histogram_to_csv, phase_trace_to_csv, read_spectrum, spectrum_from_csv,
    spectrum_to_csv, Header, SpectrumFile,
};

use crate::error::Result;

/// Writes `contents` to a temporary file next to `path`, then renames it
/// into place.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    use std::io::Write;
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}
