//! Unit conventions.
//!
//! | quantity            | unit          |
//! |---------------------|---------------|
//! | angular frequency   | rad/ps        |
//! | frequency           | THz (= 1/ps)  |
//! | wavelength          | nm            |
//! | time                | ps            |
//! | `D`                 | ps/(nm·km)    |
//! | dispersion slope    | ps/(nm²·km)   |
//! | `k2`                | ps²/km        |
//! | `k3`                | ps³/km        |
//! | `k4`                | ps⁴/km        |
//! | length              | m             |
//!
//! `λ·ν = c` with `c` in nm/ps.

use std::f64::consts::PI;

/// Speed of light in vacuum, nm/ps (exact).
pub const C_NM_PER_PS: f64 = 299_792.458;

/// Speed of light in vacuum, m/s (exact).
pub const C_M_PER_S: f64 = 299_792_458.0;

/// Default group index of silica fiber.
pub const FIBER_GROUP_INDEX: f64 = 1.468;

pub const METERS_PER_KM: f64 = 1000.0;

/// `FWHM = FWHM_PER_SIGMA · σ` for a gaussian.
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949_3;

pub fn omega_from_wavelength(lambda_nm: f64) -> f64 {
    2.0 * PI * C_NM_PER_PS / lambda_nm
}

pub fn wavelength_from_omega(omega: f64) -> f64 {
    2.0 * PI * C_NM_PER_PS / omega
}

pub fn thz_to_radps(nu_thz: f64) -> f64 {
    2.0 * PI * nu_thz
}

/// Degenerate signal/idler angular frequency for a pump wavelength.
pub fn omega_deg_from_pump(pump_nm: f64) -> f64 {
    omega_from_wavelength(pump_nm) / 2.0
}

pub fn lambda_deg_from_pump(pump_nm: f64) -> f64 {
    2.0 * pump_nm
}
