//! Reference configuration: two pumps near 780 nm, SMF-28-like fiber.

use std::f64::consts::PI;

use crate::dispersion::{DispersionModel, FiberSegment};
use crate::error::Result;
use crate::synthesis::{
    EnvelopeShape, FrequencyGrid, InterferometerSetup, InternalPhase, SpdcEnvelope,
};
use crate::units::omega_deg_from_pump;

pub const PUMP_TYPE0_NM: f64 = 780.2;
pub const PUMP_TYPE1_NM: f64 = 776.2;
pub const SMF28_LAMBDA0_NM: f64 = 1313.0;
pub const SMF28_S0: f64 = 0.085;
pub const FUT_LENGTH_M: f64 = 5.0;
/// Source bandwidth (FWHM) in rad/ps, 12 THz.
pub const SOURCE_FWHM: f64 = 2.0 * PI * 12.0;
pub const GRID_HALF_WIDTH: f64 = 2.0 * PI * 7.0;
pub const GRID_POINTS: usize = 4001;

pub fn smf28() -> DispersionModel {
    DispersionModel::SpecSheet {
        lambda0_nm: SMF28_LAMBDA0_NM,
        s0: SMF28_S0,
    }
}

/// Two gaussian sources, a 1 m SMF-28 pigtail in the middle section and,
/// when `fut_length_m > 0`, an SMF-28 fiber under test.
pub fn reference_setup(pump_nm: f64, fut_length_m: f64) -> Result<InterferometerSetup> {
    let wdeg = omega_deg_from_pump(pump_nm);
    let setup = InterferometerSetup {
        pump_wavelength_nm: pump_nm,
        source1: SpdcEnvelope::new(wdeg, SOURCE_FWHM, EnvelopeShape::Gaussian, 1.0)?,
        source2: SpdcEnvelope::new(wdeg, SOURCE_FWHM, EnvelopeShape::Gaussian, 0.9)?,
        internal: InternalPhase {
            segments: vec![FiberSegment::new("pigtail", 1.0, smf28())?],
            even_poly: vec![0.7],
        },
        fut: if fut_length_m > 0.0 {
            Some(FiberSegment::new("fut", fut_length_m, smf28())?)
        } else {
            None
        },
        pump_linewidth_mhz: 0.1,
        path_mismatch_m: 0.02,
    };
    setup.validate()?;
    Ok(setup)
}

pub fn reference_grid() -> FrequencyGrid {
    FrequencyGrid {
        detuning_min: -GRID_HALF_WIDTH,
        detuning_max: GRID_HALF_WIDTH,
        points: GRID_POINTS,
    }
}
