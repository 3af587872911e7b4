use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dispersion::FiberSegment;
use crate::error::{Error, Result};
use crate::extraction::ExtractionOptions;
use crate::spectrometer::SpectrometerConfig;
use crate::synthesis::{
    EnvelopeShape, FrequencyGrid, InterferometerSetup, InternalPhase, SpdcEnvelope,
};
use crate::units::omega_deg_from_pump;

/// One SPDC source; its degeneracy follows from the pump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceConfig {
    /// FWHM of the single-source spectrum, rad/ps.
    pub fwhm_radps: f64,
    #[serde(default)]
    pub shape: EnvelopeShape,
    #[serde(default = "one")]
    pub peak: f64,
}

fn one() -> f64 {
    1.0
}

/// Interferometer description shared by all pump settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetupConfig {
    pub source1: SourceConfig,
    pub source2: SourceConfig,
    #[serde(default)]
    pub internal: InternalPhase,
    #[serde(default)]
    pub fut: Option<FiberSegment>,
    pub pump_linewidth_mhz: f64,
    #[serde(default)]
    pub path_mismatch_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub half_width_radps: f64,
    pub points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub name: String,
    /// One or two pump wavelengths, nm.
    pub pumps_nm: Vec<f64>,
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    pub grid: GridConfig,
    pub setup: SetupConfig,
    pub spectrometer: SpectrometerConfig,
    #[serde(default)]
    pub extraction: ExtractionOptions,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())]
        .bytes()
        .filter(|b| *b == b'\n')
        .count()
        + 1
}

impl RunConfig {
    pub fn from_toml_str(text: &str, source_name: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Parse {
            source_name: source_name.to_string(),
            line: e.span().map_or(0, |s| line_of(text, s.start)),
            message: e.message().to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text, &path.display().to_string())
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let cfg_err = |key: &str, e: Error| Error::Config(format!("{key}: {e}"));
        if self.name.trim().is_empty() {
            return Err(Error::Config("name: must not be empty".into()));
        }
        match self.pumps_nm.len() {
            1 | 2 => {}
            n => {
                return Err(Error::Config(format!(
                    "pumps_nm: expected one or two pumps, got {n}"
                )))
            }
        }
        for (i, p) in self.pumps_nm.iter().enumerate() {
            if !(p.is_finite() && *p > 0.0) {
                return Err(Error::Config(format!(
                    "pumps_nm[{i}]: must be positive, got {p}"
                )));
            }
        }
        if self.pumps_nm.len() == 2 && self.pumps_nm[0] == self.pumps_nm[1] {
            return Err(Error::Config("pumps_nm: the two pumps must differ".into()));
        }
        if !(self.grid.half_width_radps.is_finite() && self.grid.half_width_radps > 0.0) {
            return Err(Error::Config(format!(
                "grid.half_width_radps: must be positive, got {}",
                self.grid.half_width_radps
            )));
        }
        if self.grid.points < 3 {
            return Err(Error::Config(format!(
                "grid.points: need at least 3, got {}",
                self.grid.points
            )));
        }
        self.spectrometer
            .validate()
            .map_err(|e| cfg_err("spectrometer", e))?;
        if self.spectrometer.rng_seed != 0 {
            return Err(Error::Config(
                "spectrometer.rng_seed: per-measurement seeds derive from the top-level seed; remove this key".into(),
            ));
        }
        self.extraction
            .validate()
            .map_err(|e| cfg_err("extraction", e))?;
        for &p in &self.pumps_nm {
            self.setup_for(p)
                .and_then(|s| s.validate())
                .map_err(|e| cfg_err("setup", e))?;
        }
        Ok(())
    }

    pub fn grid(&self) -> FrequencyGrid {
        FrequencyGrid {
            detuning_min: -self.grid.half_width_radps,
            detuning_max: self.grid.half_width_radps,
            points: self.grid.points,
        }
    }

    pub fn setup_for(&self, pump_nm: f64) -> Result<InterferometerSetup> {
        let wdeg = omega_deg_from_pump(pump_nm);
        let src = |s: &SourceConfig| SpdcEnvelope::new(wdeg, s.fwhm_radps, s.shape, s.peak);
        Ok(InterferometerSetup {
            pump_wavelength_nm: pump_nm,
            source1: src(&self.setup.source1)?,
            source2: src(&self.setup.source2)?,
            internal: self.setup.internal.clone(),
            fut: self.setup.fut.clone(),
            pump_linewidth_mhz: self.setup.pump_linewidth_mhz,
            path_mismatch_m: self.setup.path_mismatch_m,
        })
    }

    pub fn fut_length_m(&self) -> f64 {
        self.setup.fut.as_ref().map_or(0.0, |f| f.length_m)
    }

    /// Short hash of the canonical serialized config.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(&Sha256::digest(&json)[..8])
    }
}

/// Independent 64-bit seed for a named stream under the master seed.
pub fn derive_seed(master: u64, label: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(master.to_le_bytes());
    h.update(label.as_bytes());
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}
