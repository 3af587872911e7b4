//! Fiber dispersion models, `D`/`k2` conversions and the FUT phase imprinted
//! on frequency-conjugate photon pairs.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{wavelength_from_omega, C_NM_PER_PS, METERS_PER_KM};

/// Wavelength window (nm) in which the spec-sheet `D(λ)` formula is trusted.
pub const SPEC_SHEET_WINDOW_NM: (f64, f64) = (1200.0, 1700.0);

/// Step (nm) of the central difference used for numeric slopes.
const SLOPE_STEP_NM: f64 = 0.1;

/// Parametric description of a fiber's chromatic dispersion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DispersionModel {
    /// Vendor data-sheet form `D(λ) = (S0/4)(λ − λ0⁴/λ³)`.
    SpecSheet {
        lambda0_nm: f64,
        /// Zero-dispersion slope, ps/(nm²·km).
        s0: f64,
    },
    /// Taylor expansion of the propagation constant about `omega_ref`.
    TaylorBeta {
        omega_ref_radps: f64,
        /// ps²/km
        k2: f64,
        /// ps³/km
        k3: f64,
        /// ps⁴/km
        #[serde(default)]
        k4: f64,
    },
    /// Linearly interpolated `(λ nm, D ps/(nm·km))` table.
    TabulatedD { points: Vec<(f64, f64)> },
}

impl DispersionModel {
    pub fn spec_sheet(lambda0_nm: f64, s0: f64) -> Result<Self> {
        let m = DispersionModel::SpecSheet { lambda0_nm, s0 };
        m.validate()?;
        Ok(m)
    }

    pub fn taylor_beta(omega_ref_radps: f64, k2: f64, k3: f64, k4: f64) -> Result<Self> {
        let m = DispersionModel::TaylorBeta {
            omega_ref_radps,
            k2,
            k3,
            k4,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn tabulated(points: Vec<(f64, f64)>) -> Result<Self> {
        let m = DispersionModel::TabulatedD { points };
        m.validate()?;
        Ok(m)
    }

    /// Checks the model invariants. Deserialized models must pass this before use.
    pub fn validate(&self) -> Result<()> {
        match self {
            DispersionModel::SpecSheet { lambda0_nm, s0 } => {
                if !(lambda0_nm.is_finite() && *lambda0_nm > 0.0) {
                    return Err(Error::InvalidInput(format!(
                        "spec-sheet lambda0 must be positive, got {lambda0_nm}"
                    )));
                }
                if !(s0.is_finite() && *s0 > 0.0) {
                    return Err(Error::InvalidInput(format!(
                        "spec-sheet zero-dispersion slope must be positive, got {s0}"
                    )));
                }
            }
            DispersionModel::TaylorBeta {
                omega_ref_radps,
                k2,
                k3,
                k4,
            } => {
                if !(omega_ref_radps.is_finite() && *omega_ref_radps > 0.0) {
                    return Err(Error::InvalidInput(format!(
                        "Taylor reference frequency must be positive, got {omega_ref_radps}"
                    )));
                }
                if ![k2, k3, k4].iter().all(|k| k.is_finite()) {
                    return Err(Error::InvalidInput(
                        "Taylor coefficients must be finite".into(),
                    ));
                }
            }
            DispersionModel::TabulatedD { points } => {
                if points.len() < 2 {
                    return Err(Error::InvalidInput(format!(
                        "tabulated D needs at least 2 points, got {}",
                        points.len()
                    )));
                }
                if points.iter().any(|(l, d)| !l.is_finite() || !d.is_finite()) {
                    return Err(Error::InvalidInput(
                        "tabulated D contains non-finite values".into(),
                    ));
                }
                if points.windows(2).any(|w| w[1].0 <= w[0].0) {
                    return Err(Error::InvalidInput(
                        "tabulated wavelengths must be strictly increasing".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Wavelength range over which the model may be evaluated.
    pub fn valid_range_nm(&self) -> (f64, f64) {
        match self {
            DispersionModel::SpecSheet { .. } => SPEC_SHEET_WINDOW_NM,
            DispersionModel::TaylorBeta { .. } => (f64::MIN_POSITIVE, f64::INFINITY),
            DispersionModel::TabulatedD { points } => (points[0].0, points[points.len() - 1].0),
        }
    }

    fn check_range(&self, lambda_nm: f64) -> Result<()> {
        let (lo, hi) = self.valid_range_nm();
        if !(lambda_nm >= lo && lambda_nm <= hi) {
            return Err(Error::out_of_range("wavelength (nm)", lambda_nm, lo, hi));
        }
        Ok(())
    }

    /// Local GVD `k2(ω)` in ps²/km.
    pub fn k2_at(&self, omega: f64) -> Result<f64> {
        match self {
            DispersionModel::TaylorBeta {
                omega_ref_radps,
                k2,
                k3,
                k4,
            } => {
                if !(omega.is_finite() && omega > 0.0) {
                    return Err(Error::out_of_range(
                        "angular frequency (rad/ps)",
                        omega,
                        0.0,
                        f64::INFINITY,
                    ));
                }
                let dw = omega - omega_ref_radps;
                Ok(k2 + k3 * dw + 0.5 * k4 * dw * dw)
            }
            _ => {
                let lambda = wavelength_from_omega(omega);
                Ok(k2_from_d(d_param(self, lambda)?, lambda))
            }
        }
    }

    /// Local fourth-order coefficient `k4(ω)` in ps⁴/km; zero unless the model
    /// carries one.
    pub fn k4_at(&self, _omega: f64) -> f64 {
        match self {
            DispersionModel::TaylorBeta { k4, .. } => *k4,
            _ => 0.0,
        }
    }
}

/// A piece of fiber with a dispersion model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiberSegment {
    #[serde(default)]
    pub label: String,
    pub length_m: f64,
    pub model: DispersionModel,
    /// Constant phase at degeneracy `[k(2ω_deg) − 2k(ω_deg)]·L` (rad). Models
    /// described only by `D(λ)` cannot supply it, so it is a free parameter.
    #[serde(default)]
    pub offset_rad: f64,
}

impl FiberSegment {
    pub fn new(label: impl Into<String>, length_m: f64, model: DispersionModel) -> Result<Self> {
        let s = FiberSegment {
            label: label.into(),
            length_m,
            model,
            offset_rad: 0.0,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length_m.is_finite() && self.length_m >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "segment '{}' length must be finite and non-negative, got {}",
                self.label, self.length_m
            )));
        }
        if !self.offset_rad.is_finite() {
            return Err(Error::InvalidInput("segment offset must be finite".into()));
        }
        self.model.validate()
    }

    pub fn length_km(&self) -> f64 {
        self.length_m / METERS_PER_KM
    }
}

/// Dispersion parameter `D(λ)` in ps/(nm·km).
pub fn d_param(model: &DispersionModel, lambda_nm: f64) -> Result<f64> {
    model.check_range(lambda_nm)?;
    match model {
        DispersionModel::SpecSheet { lambda0_nm, s0 } => {
            Ok(0.25 * s0 * (lambda_nm - lambda0_nm.powi(4) / lambda_nm.powi(3)))
        }
        DispersionModel::TaylorBeta { .. } => {
            let omega = crate::units::omega_from_wavelength(lambda_nm);
            Ok(d_from_k2(model.k2_at(omega)?, lambda_nm))
        }
        DispersionModel::TabulatedD { points } => Ok(interpolate(points, lambda_nm)),
    }
}

fn interpolate(points: &[(f64, f64)], x: f64) -> f64 {
    let i = points
        .partition_point(|p| p.0 <= x)
        .clamp(1, points.len() - 1);
    let (x0, y0) = points[i - 1];
    let (x1, y1) = points[i];
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

/// `k2 = −D·λ²/(2πc)`: ps/(nm·km) → ps²/km.
pub fn k2_from_d(d: f64, lambda_nm: f64) -> f64 {
    -d * lambda_nm * lambda_nm / (2.0 * PI * C_NM_PER_PS)
}

/// `D = −(2πc/λ²)·k2`: ps²/km → ps/(nm·km).
pub fn d_from_k2(k2: f64, lambda_nm: f64) -> f64 {
    -2.0 * PI * C_NM_PER_PS * k2 / (lambda_nm * lambda_nm)
}

/// Dispersion slope `dD/dλ` in ps/(nm²·km).
pub fn dispersion_slope(model: &DispersionModel, lambda_nm: f64) -> Result<f64> {
    model.check_range(lambda_nm)?;
    match model {
        DispersionModel::SpecSheet { lambda0_nm, s0 } => {
            Ok(0.25 * s0 * (1.0 + 3.0 * lambda0_nm.powi(4) / lambda_nm.powi(4)))
        }
        _ => {
            let (lo, hi) = model.valid_range_nm();
            let a = (lambda_nm - SLOPE_STEP_NM).max(lo);
            let b = (lambda_nm + SLOPE_STEP_NM).min(hi);
            Ok((d_param(model, b)? - d_param(model, a)?) / (b - a))
        }
    }
}

/// FUT phase `Φ(ω)` for the conjugate pair `(ω, ω_p − ω)`, from the even-order
/// expansion about `ω_deg = ω_p/2`:
///
/// `Φ = Φ0 − [k2·δ² + (k4/12)·δ⁴]·L`, `δ = ω − ω_deg`.
///
/// `Φ0` is the segment's `offset_rad`, added only when `include_offset` is set.
pub fn phi_fut(
    segment: &FiberSegment,
    omega: f64,
    omega_p: f64,
    include_offset: bool,
) -> Result<f64> {
    if !(omega > 0.0 && omega < omega_p) {
        return Err(Error::out_of_range(
            "signal angular frequency (rad/ps)",
            omega,
            0.0,
            omega_p,
        ));
    }
    let omega_deg = 0.5 * omega_p;
    phi_fut_detuning(segment, omega - omega_deg, omega_deg, include_offset)
}

/// [`phi_fut`] with the detuning given directly; exactly even in `detuning`.
pub fn phi_fut_detuning(
    segment: &FiberSegment,
    detuning: f64,
    omega_deg: f64,
    include_offset: bool,
) -> Result<f64> {
    if detuning.abs() >= omega_deg {
        return Err(Error::out_of_range(
            "detuning (rad/ps)",
            detuning,
            -omega_deg,
            omega_deg,
        ));
    }
    let offset = if include_offset {
        segment.offset_rad
    } else {
        0.0
    };
    if segment.length_m == 0.0 {
        return Ok(offset);
    }
    let k2 = segment.model.k2_at(omega_deg)?;
    let k4 = segment.model.k4_at(omega_deg);
    let d2 = detuning * detuning;
    Ok(offset - (k2 * d2 + k4 / 12.0 * d2 * d2) * segment.length_km())
}
