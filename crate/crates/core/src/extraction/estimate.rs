use std::fmt;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use super::fit::RaisedCosineFit;
use super::normalize::same_grid;
use super::pointwise::PhaseTrace;
use crate::dispersion::d_from_k2;
use crate::error::{Error, Result};
use crate::units::{C_NM_PER_PS, METERS_PER_KM};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Parametric,
    Pointwise,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Parametric => "parametric",
            Method::Pointwise => "pointwise",
        })
    }
}

/// Phase of one interferogram, either as fit coefficients or as a trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum PhaseEstimate {
    Parametric(RaisedCosineFit),
    Pointwise(PhaseTrace),
}

impl PhaseEstimate {
    pub fn method(&self) -> Method {
        match self {
            PhaseEstimate::Parametric(_) => Method::Parametric,
            PhaseEstimate::Pointwise(_) => Method::Pointwise,
        }
    }
}

/// Phase added by the fiber under test, with the constant term zeroed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseDifference {
    pub method: Method,
    /// rad·ps²
    pub delta_c2: f64,
    /// rad·ps⁴
    pub delta_c4: f64,
    /// Covariance of `(Δc2, Δc4)`.
    pub covariance: [[f64; 2]; 2],
    /// Pointwise difference; `None` for the parametric path.
    pub trace: Option<PhaseTrace>,
}

impl PhaseDifference {
    pub fn sigma_c2(&self) -> f64 {
        self.covariance[0][0].sqrt()
    }

    pub fn phase_at(&self, detuning: f64) -> f64 {
        let d2 = detuning * detuning;
        self.delta_c2 * d2 + self.delta_c4 * d2 * d2
    }
}

/// Weighted least squares of `Φ ≈ a + b·δ² + c·δ⁴` over `δ ≥ 0`.
///
/// Returns `(b, c, cov(b, c))`, the covariance scaled by the reduced χ².
fn even_poly_fit(trace: &PhaseTrace) -> Result<(f64, f64, [[f64; 2]; 2])> {
    let scale = trace
        .detuning
        .iter()
        .zip(&trace.mask)
        .filter(|(_, m)| **m)
        .fold(0.0f64, |a, (d, _)| a.max(d.abs()));
    if !(scale > 0.0) {
        return Err(Error::AllMasked);
    }
    let pts: Vec<(f64, f64, f64)> = (0..trace.detuning.len())
        .filter(|&i| trace.mask[i] && trace.detuning[i] >= 0.0)
        .map(|i| {
            (
                trace.detuning[i] / scale,
                trace.phase[i],
                1.0 / trace.sigma[i],
            )
        })
        .collect();
    if pts.len() < 4 {
        return Err(Error::TooFewPoints {
            found: pts.len(),
            needed: 4,
        });
    }
    let mut ata = Matrix3::zeros();
    let mut atb = Vector3::zeros();
    for &(u, y, w) in &pts {
        let u2 = u * u;
        let row = Vector3::new(w, w * u2, w * u2 * u2);
        ata += row * row.transpose();
        atb += row * (w * y);
    }
    let inv = ata.try_inverse().ok_or_else(|| {
        Error::InvalidInput("phase trace does not constrain an even quartic".into())
    })?;
    let p = inv * atb;
    let chi2: f64 = pts
        .iter()
        .map(|&(u, y, w)| {
            let u2 = u * u;
            (w * (y - p[0] - p[1] * u2 - p[2] * u2 * u2)).powi(2)
        })
        .sum();
    let red = chi2 / (pts.len() - 3).max(1) as f64;
    let s2 = scale.powi(-2);
    let s4 = scale.powi(-4);
    let cov = [
        [inv[(1, 1)] * red * s2 * s2, inv[(1, 2)] * red * s2 * s4],
        [inv[(2, 1)] * red * s2 * s4, inv[(2, 2)] * red * s4 * s4],
    ];
    Ok((p[1] * s2, p[2] * s4, cov))
}

/// `with_fut − without_fut`; covariances of independent measurements add.
pub fn subtract_reference(
    with_fut: &PhaseEstimate,
    without_fut: &PhaseEstimate,
) -> Result<PhaseDifference> {
    match (with_fut, without_fut) {
        (PhaseEstimate::Parametric(a), PhaseEstimate::Parametric(b)) => {
            if a.window != b.window {
                return Err(Error::GridMismatch(format!(
                    "fit windows differ: [{}, {}] vs [{}, {}]",
                    a.window.min, a.window.max, b.window.min, b.window.max
                )));
            }
            let (ca, cb) = (a.curvature_covariance(), b.curvature_covariance());
            Ok(PhaseDifference {
                method: Method::Parametric,
                delta_c2: a.c2 - b.c2,
                delta_c4: a.c4 - b.c4,
                covariance: std::array::from_fn(|i| std::array::from_fn(|j| ca[i][j] + cb[i][j])),
                trace: None,
            })
        }
        (PhaseEstimate::Pointwise(a), PhaseEstimate::Pointwise(b)) => {
            if !same_grid(&a.detuning, &b.detuning) {
                return Err(Error::GridMismatch(
                    "phase traces are on different detuning grids".into(),
                ));
            }
            let n = a.detuning.len();
            let mask: Vec<bool> = (0..n).map(|i| a.mask[i] && b.mask[i]).collect();
            let c = a.center_index();
            if !mask[c] {
                return Err(Error::AllMasked);
            }
            let offset = a.phase[c] - b.phase[c];
            let trace = PhaseTrace {
                omega_deg: a.omega_deg,
                detuning: a.detuning.clone(),
                phase: (0..n)
                    .map(|i| {
                        if mask[i] {
                            a.phase[i] - b.phase[i] - offset
                        } else {
                            f64::NAN
                        }
                    })
                    .collect(),
                sigma: (0..n)
                    .map(|i| {
                        if mask[i] {
                            a.sigma[i].hypot(b.sigma[i])
                        } else {
                            f64::NAN
                        }
                    })
                    .collect(),
                odd: (0..n)
                    .map(|i| {
                        if mask[i] {
                            a.odd[i] - b.odd[i]
                        } else {
                            f64::NAN
                        }
                    })
                    .collect(),
                mask,
                asymmetry: 0.0,
                asymmetry_expected: a.asymmetry_expected.hypot(b.asymmetry_expected),
            };
            let trace = PhaseTrace {
                asymmetry: rms_finite(&trace.odd),
                ..trace
            };
            trace.validate()?;
            let (dc2, dc4, cov) = even_poly_fit(&trace)?;
            Ok(PhaseDifference {
                method: Method::Pointwise,
                delta_c2: dc2,
                delta_c4: dc4,
                covariance: cov,
                trace: Some(trace),
            })
        }
        _ => Err(Error::InvalidInput(format!(
            "cannot subtract a {} phase from a {} phase",
            without_fut.method(),
            with_fut.method()
        ))),
    }
}

fn rms_finite(v: &[f64]) -> f64 {
    let (s, n) = v
        .iter()
        .filter(|x| x.is_finite())
        .fold((0.0, 0usize), |(s, n), x| (s + x * x, n + 1));
    if n == 0 {
        0.0
    } else {
        (s / n as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DispersionEstimate {
    pub lambda_deg_nm: f64,
    /// ps²/km
    pub k2: f64,
    pub sigma_k2: f64,
    /// ps/(nm·km)
    pub d: f64,
    pub sigma_d: f64,
    pub length_m: f64,
    pub method: Method,
    /// Spread of Poisson-resampled re-fits, when computed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_d_bootstrap: Option<f64>,
}

impl DispersionEstimate {
    pub fn display_d(&self) -> String {
        format_measured(self.d, self.sigma_d)
    }
}

/// `k2 = −Δc2 / L` and `D(λ_deg)` from it.
///
/// `Δc2` is in rad·ps² and `L` in meters; dividing by `L/1000` gives k2 in
/// ps²/km.
pub fn estimate_dispersion(
    diff: &PhaseDifference,
    length_m: f64,
    lambda_deg_nm: f64,
) -> Result<DispersionEstimate> {
    if !(length_m > 0.0) || !length_m.is_finite() {
        return Err(Error::InvalidInput(format!(
            "fiber length must be positive, got {length_m} m"
        )));
    }
    if !(lambda_deg_nm > 0.0) {
        return Err(Error::InvalidInput(format!(
            "wavelength must be positive, got {lambda_deg_nm} nm"
        )));
    }
    let l_km = length_m / METERS_PER_KM;
    let k2 = -diff.delta_c2 / l_km;
    let sigma_k2 = diff.sigma_c2() / l_km;
    let dd_dk2 = 2.0 * std::f64::consts::PI * C_NM_PER_PS / (lambda_deg_nm * lambda_deg_nm);
    Ok(DispersionEstimate {
        lambda_deg_nm,
        k2,
        sigma_k2,
        d: d_from_k2(k2, lambda_deg_nm),
        sigma_d: dd_dk2 * sigma_k2,
        length_m,
        method: diff.method,
        sigma_d_bootstrap: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeEstimate {
    /// ps/(nm²·km)
    pub s: f64,
    pub sigma_s: f64,
    pub lambda_pair_nm: (f64, f64),
    pub lambda_mid_nm: f64,
}

impl SlopeEstimate {
    pub fn display(&self) -> String {
        format_measured(self.s, self.sigma_s)
    }
}

/// Finite-difference dispersion slope between two degeneracy wavelengths.
pub fn slope_from_two(e1: &DispersionEstimate, e2: &DispersionEstimate) -> Result<SlopeEstimate> {
    let dl = e1.lambda_deg_nm - e2.lambda_deg_nm;
    if dl == 0.0 {
        return Err(Error::InvalidInput(format!(
            "both estimates are at {} nm; a slope needs two wavelengths",
            e1.lambda_deg_nm
        )));
    }
    Ok(SlopeEstimate {
        s: (e1.d - e2.d) / dl,
        sigma_s: e1.sigma_d.hypot(e2.sigma_d) / dl.abs(),
        lambda_pair_nm: (e1.lambda_deg_nm, e2.lambda_deg_nm),
        lambda_mid_nm: 0.5 * (e1.lambda_deg_nm + e2.lambda_deg_nm),
    })
}

/// Default phase change (rad) at the band edge that counts as measurable.
pub const DEFAULT_PHASE_THRESHOLD: f64 = 2.5;

/// Smallest dispersion-length product (ps/nm) that produces `phase_threshold`
/// of quadratic phase at the edge of a band of full width `bandwidth_full`
/// (rad/ps) centered on `λ`.
pub fn min_measurable_dl(bandwidth_full: f64, phase_threshold: f64, lambda_nm: f64) -> f64 {
    let half = 0.5 * bandwidth_full;
    phase_threshold * 2.0 * std::f64::consts::PI * C_NM_PER_PS
        / (lambda_nm * lambda_nm * half * half)
}

/// Formats `value ± sigma` as `16.69(5)`: the uncertainty in units of the
/// last printed digit, two digits when its leading digit is 1.
pub fn format_measured(value: f64, sigma: f64) -> String {
    if !(sigma > 0.0) || !sigma.is_finite() || !value.is_finite() {
        return format!("{value}");
    }
    // no more digits than a double carries
    let sigma = sigma.max(value.abs() * 1e-12);
    let exp = sigma.log10().floor() as i32;
    let lead = (sigma / 10f64.powi(exp)).floor() as i32;
    let mut decimals = -exp + i32::from(lead == 1);
    // rounding σ can carry into a new digit (0.096 → 0.10)
    let mut digits = (sigma * 10f64.powi(decimals)).round();
    if lead != 1 && digits >= 10.0 {
        decimals -= 1;
        digits = (sigma * 10f64.powi(decimals)).round();
    }
    if decimals >= 0 {
        format!("{:.*}({})", decimals as usize, value, digits as i64)
    } else {
        let unit = 10f64.powi(-decimals);
        format!("{:.0}({:.0})", (value / unit).round() * unit, digits * unit)
    }
}

/// Parses `16.69(5)` into `(16.69, 0.05)`.
pub fn parse_measured(text: &str) -> Result<(f64, f64)> {
    let bad = || Error::InvalidInput(format!("'{text}' is not of the form 16.69(5)"));
    let t = text.trim();
    let (v, rest) = t.split_once('(').ok_or_else(bad)?;
    let u = rest.strip_suffix(')').ok_or_else(bad)?;
    let value: f64 = v.parse().map_err(|_| bad())?;
    if u.is_empty() || !u.bytes().all(|b| b.is_ascii_digit()) {
        return Err(bad());
    }
    let digits: f64 = u.parse().map_err(|_| bad())?;
    let decimals = v.split_once('.').map_or(0, |(_, f)| f.len()) as i32;
    Ok((value, digits * 10f64.powi(-decimals)))
}
