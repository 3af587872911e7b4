use serde::{Deserialize, Serialize};

use super::estimate::{
    estimate_dispersion, subtract_reference, DispersionEstimate, Method, PhaseDifference,
    PhaseEstimate,
};
use super::fit::{fit_raised_cosine, CurvatureSign, FitOptions, FitWindow};
use super::normalize::{normalize, NormalizeOptions, NormalizedSpectrum};
use super::pointwise::extract_phase_pointwise;
use crate::error::{Error, Result};
use crate::synthesis::{envelope_spectrum, Interferogram, SpdcEnvelope};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtractionOptions {
    /// Half-width of the fit window in rad/ps.
    #[serde(default = "default_half_width")]
    pub window_half_width: f64,
    #[serde(default = "default_method")]
    pub method: Method,
    #[serde(default = "default_true")]
    pub fit_c4: bool,
    #[serde(default)]
    pub curvature_sign: CurvatureSign,
    #[serde(default = "default_restarts")]
    pub max_restarts: usize,
    #[serde(default)]
    pub normalize: NormalizeOptions,
    /// Poisson resamples for the bootstrap uncertainty; 0 disables it.
    #[serde(default)]
    pub bootstrap_resamples: usize,
}

fn default_half_width() -> f64 {
    // 5 THz
    2.0 * std::f64::consts::PI * 5.0
}

fn default_method() -> Method {
    Method::Parametric
}

fn default_true() -> bool {
    true
}

fn default_restarts() -> usize {
    FitOptions::default().max_restarts
}

impl Default for ExtractionOptions {
    fn default() -> Self {
        ExtractionOptions {
            window_half_width: default_half_width(),
            method: default_method(),
            fit_c4: true,
            curvature_sign: CurvatureSign::Positive,
            max_restarts: default_restarts(),
            normalize: NormalizeOptions::default(),
            bootstrap_resamples: 0,
        }
    }
}

impl ExtractionOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.window_half_width > 0.0) || !self.window_half_width.is_finite() {
            return Err(Error::InvalidInput(format!(
                "window half-width must be positive, got {}",
                self.window_half_width
            )));
        }
        let n = &self.normalize;
        if !(0.0..1.0).contains(&n.floor_fraction) {
            return Err(Error::InvalidInput(format!(
                "envelope floor fraction must be in [0, 1), got {}",
                n.floor_fraction
            )));
        }
        if !(n.clip >= 1.0) {
            return Err(Error::InvalidInput(format!(
                "clip level must be at least 1, got {}",
                n.clip
            )));
        }
        if self.bootstrap_resamples != 0
            && self.bootstrap_resamples < super::bootstrap::MIN_RESAMPLES
        {
            return Err(Error::InvalidInput(format!(
                "bootstrap needs at least {} resamples, got {}",
                super::bootstrap::MIN_RESAMPLES,
                self.bootstrap_resamples
            )));
        }
        Ok(())
    }

    pub fn window(&self) -> FitWindow {
        FitWindow::symmetric(self.window_half_width)
    }

    pub fn fit_options(&self) -> FitOptions {
        FitOptions {
            fit_c4: self.fit_c4,
            curvature_sign: self.curvature_sign,
            max_restarts: self.max_restarts,
        }
    }
}

/// Single-source spectra used for normalization.
#[derive(Debug, Clone, PartialEq)]
pub enum Envelopes {
    /// Analytic envelopes evaluated on each measurement grid.
    Model(SpdcEnvelope, SpdcEnvelope),
    /// Measured envelopes, linearly interpolated onto each measurement grid.
    Sampled(Interferogram, Interferogram),
}

fn interpolate(src: &Interferogram, at: &[f64]) -> Interferogram {
    let x = &src.detuning;
    let y = &src.values;
    let values = at
        .iter()
        .map(|&d| {
            let k = x.partition_point(|v| *v < d);
            if k == 0 {
                if d == x[0] {
                    y[0]
                } else {
                    0.0
                }
            } else if k == x.len() {
                0.0
            } else {
                let t = (d - x[k - 1]) / (x[k] - x[k - 1]);
                y[k - 1] + t * (y[k] - y[k - 1])
            }
        })
        .collect();
    Interferogram {
        omega_deg: src.omega_deg,
        detuning: at.to_vec(),
        values,
        sigma: None,
        meta: src.meta.clone(),
    }
}

impl Envelopes {
    pub fn on_grid(&self, detuning: &[f64]) -> Result<(Interferogram, Interferogram)> {
        match self {
            Envelopes::Model(a, b) => Ok((
                envelope_spectrum(a, detuning),
                envelope_spectrum(b, detuning),
            )),
            Envelopes::Sampled(a, b) => {
                a.validate()?;
                b.validate()?;
                if a.is_empty() || b.is_empty() {
                    return Err(Error::InvalidInput("sampled envelope is empty".into()));
                }
                Ok((interpolate(a, detuning), interpolate(b, detuning)))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtractionInputs {
    pub with_fut: Interferogram,
    pub without_fut: Interferogram,
    pub envelopes: Envelopes,
    /// FUT length in meters; 0 for a reference-only check.
    pub length_m: f64,
    pub options: ExtractionOptions,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    pub visibility_with: Option<f64>,
    pub visibility_without: Option<f64>,
    pub clip_fraction_with: f64,
    pub clip_fraction_without: f64,
    pub residual_rms_with: Option<f64>,
    pub residual_rms_without: Option<f64>,
    /// RMS odd part of the pointwise FUT phase, rad.
    pub asymmetry: Option<f64>,
    pub asymmetry_expected: Option<f64>,
    pub points_in_window: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Extraction {
    /// `None` when the FUT length is zero.
    pub estimate: Option<DispersionEstimate>,
    pub difference: PhaseDifference,
    pub with_fut: PhaseEstimate,
    pub without_fut: PhaseEstimate,
    pub normalized_with: NormalizedSpectrum,
    pub normalized_without: NormalizedSpectrum,
    /// Pointwise FUT phase, when it could be traced.
    pub pointwise: Option<PhaseDifference>,
    pub diagnostics: Diagnostics,
}

fn phase_of(
    n: &NormalizedSpectrum,
    method: Method,
    options: &ExtractionOptions,
) -> Result<PhaseEstimate> {
    match method {
        Method::Parametric => Ok(PhaseEstimate::Parametric(fit_raised_cosine(
            n,
            options.window(),
            &options.fit_options(),
        )?)),
        Method::Pointwise => Ok(PhaseEstimate::Pointwise(extract_phase_pointwise(
            n,
            options.window(),
            options.curvature_sign,
        )?)),
    }
}

/// Normalize, recover the phase of both interferograms, subtract the
/// reference and convert the curvature difference into `D(λ_deg)`.
pub fn extract_dispersion(inputs: &ExtractionInputs) -> Result<Extraction> {
    let options = &inputs.options;
    options.validate()?;
    if !(inputs.length_m >= 0.0) || !inputs.length_m.is_finite() {
        return Err(Error::InvalidInput(format!(
            "fiber length must be non-negative, got {} m",
            inputs.length_m
        )));
    }
    let (w, wo) = (&inputs.with_fut, &inputs.without_fut);
    if (w.omega_deg - wo.omega_deg).abs() > 1e-9 * w.omega_deg.abs() {
        return Err(Error::GridMismatch(format!(
            "measurements are centered on different degeneracy frequencies ({} vs {} rad/ps)",
            w.omega_deg, wo.omega_deg
        )));
    }
    let (e1, e2) = inputs.envelopes.on_grid(&w.detuning)?;
    let normalized_with = normalize(w, &e1, &e2, &options.normalize)?;
    let (e1, e2) = inputs.envelopes.on_grid(&wo.detuning)?;
    let normalized_without = normalize(wo, &e1, &e2, &options.normalize)?;

    let with_fut = phase_of(&normalized_with, options.method, options)?;
    let without_fut = phase_of(&normalized_without, options.method, options)?;
    let difference = subtract_reference(&with_fut, &without_fut)?;

    // model-free cross-check; fails quietly on data it cannot unwrap
    let pointwise = if options.method == Method::Pointwise {
        Some(difference.clone())
    } else {
        let a = phase_of(&normalized_with, Method::Pointwise, options);
        let b = phase_of(&normalized_without, Method::Pointwise, options);
        match (a, b) {
            (Ok(a), Ok(b)) => subtract_reference(&a, &b).ok(),
            _ => None,
        }
    };

    let lambda_deg = crate::units::wavelength_from_omega(w.omega_deg);
    let estimate = if inputs.length_m > 0.0 {
        Some(estimate_dispersion(
            &difference,
            inputs.length_m,
            lambda_deg,
        )?)
    } else {
        None
    };

    let fit_stat = |p: &PhaseEstimate| match p {
        PhaseEstimate::Parametric(f) => (Some(f.visibility), Some(f.residual_rms), f.points),
        PhaseEstimate::Pointwise(t) => (None, None, t.masked_count()),
    };
    let (vw, rw, points) = fit_stat(&with_fut);
    let (vwo, rwo, _) = fit_stat(&without_fut);
    let trace = pointwise.as_ref().and_then(|p| p.trace.as_ref());
    let diagnostics = Diagnostics {
        visibility_with: vw,
        visibility_without: vwo,
        clip_fraction_with: normalized_with.clip_fraction,
        clip_fraction_without: normalized_without.clip_fraction,
        residual_rms_with: rw,
        residual_rms_without: rwo,
        asymmetry: trace.map(|t| t.asymmetry),
        asymmetry_expected: trace.map(|t| t.asymmetry_expected),
        points_in_window: points,
    };

    Ok(Extraction {
        estimate,
        difference,
        with_fut,
        without_fut,
        normalized_with,
        normalized_without,
        pointwise,
        diagnostics,
    })
}
