//! Simulate → measure → extract drivers shared by the CLI and the tests.

use crate::dispersion::{d_param, dispersion_slope};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::extraction::{
    bootstrap_uncertainty, extract_dispersion, format_measured, slope_from_two, Envelopes,
    Extraction, ExtractionInputs,
};
use crate::spectrometer::{
    histogram_to_spectrum, sample_events_with, SpectrometerConfig, TimeDelayHistogram,
};
use crate::synthesis::{coherence_check, synthesize_with, Interferogram};
use crate::units::lambda_deg_from_pump;

use super::config::{derive_seed, RunConfig};
use super::report::{Check, Provenance, PumpResult, Report, RoundtripSummary};

#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedSpectrum {
    pub pump_nm: f64,
    pub with_fut: bool,
    pub spectrum: Interferogram,
}

impl SimulatedSpectrum {
    pub fn file_stem(&self) -> String {
        spectrum_stem(self.pump_nm, self.with_fut)
    }
}

pub fn spectrum_stem(pump_nm: f64, with_fut: bool) -> String {
    format!(
        "spectrum_{pump_nm}nm_{}",
        if with_fut { "with_fut" } else { "without_fut" }
    )
}

/// Noiseless spectra for every pump: with and without the FUT, or only
/// without when the config has no FUT.
pub fn simulate(cfg: &RunConfig, exec: Exec) -> Result<Vec<SimulatedSpectrum>> {
    let grid = cfg.grid();
    let mut out = Vec::new();
    for &pump in &cfg.pumps_nm {
        let setup = cfg.setup_for(pump)?;
        if setup.fut.is_some() {
            out.push(SimulatedSpectrum {
                pump_nm: pump,
                with_fut: true,
                spectrum: synthesize_with(&setup, &grid, exec)?,
            });
        }
        out.push(SimulatedSpectrum {
            pump_nm: pump,
            with_fut: false,
            spectrum: synthesize_with(&setup.without_fut(), &grid, exec)?,
        });
    }
    Ok(out)
}

/// Spectrometer settings for one spectrum; the seed depends only on the
/// master seed and the generating setup.
pub fn spectrometer_for(cfg: &RunConfig, spectrum: &Interferogram) -> SpectrometerConfig {
    SpectrometerConfig {
        rng_seed: derive_seed(
            cfg.seed,
            &format!(
                "spectrometer/{}/{}",
                spectrum.meta.setup_hash, spectrum.meta.with_fut
            ),
        ),
        ..cfg.spectrometer
    }
}

pub struct Measurement {
    pub histogram: TimeDelayHistogram,
    pub recovered: Interferogram,
}

pub fn measure(
    cfg: &RunConfig,
    spectrum: &Interferogram,
    pump_nm: f64,
    exec: Exec,
) -> Result<Measurement> {
    let sc = spectrometer_for(cfg, spectrum);
    let histogram = sample_events_with(spectrum, &sc, pump_nm, exec)?;
    let mut recovered = histogram_to_spectrum(&histogram, pump_nm)?;
    recovered.meta = spectrum.meta.clone();
    Ok(Measurement {
        histogram,
        recovered,
    })
}

/// One pump's with/without pair.
pub struct PumpData {
    pub pump_nm: f64,
    pub with_fut: Interferogram,
    pub without_fut: Interferogram,
}

pub struct ExtractOutcome {
    pub report: Report,
    pub extractions: Vec<Extraction>,
}

/// Extraction for each pump plus the slope when two wavelengths are present.
pub fn extract_all(cfg: &RunConfig, data: &[PumpData], exec: Exec) -> Result<ExtractOutcome> {
    let mut pumps = Vec::new();
    let mut extractions = Vec::new();
    let mut warnings = Vec::new();
    for d in data {
        let setup = cfg.setup_for(d.pump_nm)?;
        let inputs = ExtractionInputs {
            with_fut: d.with_fut.clone(),
            without_fut: d.without_fut.clone(),
            envelopes: Envelopes::Model(setup.source1, setup.source2),
            length_m: cfg.fut_length_m(),
            options: cfg.extraction.clone(),
        };
        let x = extract_dispersion(&inputs)?;
        let mut estimate = x.estimate.clone();
        if cfg.extraction.bootstrap_resamples > 0 && estimate.is_some() {
            let seed = derive_seed(cfg.seed, &format!("bootstrap/{}", d.pump_nm));
            estimate = Some(bootstrap_uncertainty(
                &inputs,
                cfg.extraction.bootstrap_resamples,
                seed,
                exec,
            )?);
        }
        let diff = &x.difference;
        if diff.delta_c2.abs() <= 3.0 * diff.sigma_c2() {
            warnings.push(format!(
                "pump {} nm: FUT phase curvature {:.3e} rad·ps² is not significant (σ {:.3e}); with and without spectra may be identical",
                d.pump_nm,
                diff.delta_c2,
                diff.sigma_c2()
            ));
        }
        if !d.with_fut.meta.coherence_ok || !d.without_fut.meta.coherence_ok {
            warnings.push(format!(
                "pump {} nm: pump coherence check failed",
                d.pump_nm
            ));
        }
        if x.diagnostics.clip_fraction_with > 0.05 || x.diagnostics.clip_fraction_without > 0.05 {
            warnings.push(format!(
                "pump {} nm: more than 5% of normalized points were clipped",
                d.pump_nm
            ));
        }
        pumps.push(PumpResult {
            pump_nm: d.pump_nm,
            lambda_deg_nm: lambda_deg_from_pump(d.pump_nm),
            d_display: estimate.as_ref().map(|e| format_measured(e.d, e.sigma_d)),
            estimate,
            delta_c2: diff.delta_c2,
            sigma_delta_c2: diff.sigma_c2(),
            delta_c4: diff.delta_c4,
            diagnostics: x.diagnostics.clone(),
            coherence: coherence_check(setup.pump_linewidth_mhz, setup.path_mismatch_m).ok(),
        });
        extractions.push(x);
    }
    let slope = match pumps.as_slice() {
        [a, b] => match (&a.estimate, &b.estimate) {
            (Some(ea), Some(eb)) => Some(slope_from_two(ea, eb)?),
            _ => None,
        },
        _ => None,
    };
    let report = Report {
        experiment: cfg.name.clone(),
        provenance: Provenance {
            tool_version: crate::VERSION.to_string(),
            config_hash: cfg.hash(),
            seed: cfg.seed,
        },
        slope_display: slope.as_ref().map(|s| format_measured(s.s, s.sigma_s)),
        slope,
        pumps,
        warnings,
        roundtrip: None,
    };
    Ok(ExtractOutcome {
        report,
        extractions,
    })
}

/// Relative tolerance on `D` in the round trip.
pub const ROUNDTRIP_D_TOLERANCE: f64 = 0.01;
/// Slope and null checks pass within this many standard deviations.
pub const ROUNDTRIP_SIGMAS: f64 = 3.0;

/// Compares a report against the dispersion model in the config.
pub fn check_against_truth(cfg: &RunConfig, report: &Report) -> Result<RoundtripSummary> {
    let mut checks = Vec::new();
    let fut = cfg.setup.fut.as_ref().filter(|f| f.length_m > 0.0);
    for p in &report.pumps {
        match (fut, &p.estimate) {
            (Some(f), Some(e)) => {
                let truth = d_param(&f.model, p.lambda_deg_nm)?;
                let tol = ROUNDTRIP_D_TOLERANCE * truth.abs();
                checks.push(Check {
                    name: format!("D({:.1} nm)", p.lambda_deg_nm),
                    passed: (e.d - truth).abs() <= tol,
                    measured: e.d,
                    expected: truth,
                    tolerance: tol,
                });
            }
            (Some(_), None) => {
                return Err(Error::InvalidInput(
                    "report has no estimate for a fiber of positive length".into(),
                ))
            }
            (None, _) => {
                // without a FUT the recovered curvature must vanish
                let tol = ROUNDTRIP_SIGMAS * p.sigma_delta_c2 + 1e-9;
                checks.push(Check {
                    name: format!("delta_c2({:.1} nm) = 0", p.lambda_deg_nm),
                    passed: p.delta_c2.abs() <= tol,
                    measured: p.delta_c2,
                    expected: 0.0,
                    tolerance: tol,
                });
            }
        }
    }
    if let (Some(f), Some(s)) = (fut, &report.slope) {
        let truth = dispersion_slope(&f.model, s.lambda_mid_nm)?;
        let tol = ROUNDTRIP_SIGMAS * s.sigma_s;
        checks.push(Check {
            name: format!("slope({:.1} nm)", s.lambda_mid_nm),
            passed: (s.s - truth).abs() <= tol,
            measured: s.s,
            expected: truth,
            tolerance: tol,
        });
    }
    Ok(RoundtripSummary {
        passed: !checks.is_empty() && checks.iter().all(|c| c.passed),
        checks,
    })
}

/// Full in-memory pipeline with the pass/fail summary attached.
pub fn roundtrip(cfg: &RunConfig, exec: Exec) -> Result<ExtractOutcome> {
    let spectra = simulate(cfg, exec)?;
    let mut data = Vec::new();
    for &pump in &cfg.pumps_nm {
        let pick = |with: bool| {
            spectra
                .iter()
                .find(|s| s.pump_nm == pump && s.with_fut == with)
        };
        let without = pick(false).expect("simulate always yields the reference spectrum");
        let without_m = measure(cfg, &without.spectrum, pump, exec)?.recovered;
        // no FUT: a second, independent reference measurement stands in
        let with_m = match pick(true) {
            Some(w) => measure(cfg, &w.spectrum, pump, exec)?.recovered,
            None => {
                let mut sc = spectrometer_for(cfg, &without.spectrum);
                sc.rng_seed = derive_seed(cfg.seed, &format!("reference-repeat/{pump}"));
                let h = sample_events_with(&without.spectrum, &sc, pump, exec)?;
                histogram_to_spectrum(&h, pump)?
            }
        };
        data.push(PumpData {
            pump_nm: pump,
            with_fut: with_m,
            without_fut: without_m,
        });
    }
    let mut outcome = extract_all(cfg, &data, exec)?;
    outcome.report.roundtrip = Some(check_against_truth(cfg, &outcome.report)?);
    Ok(outcome)
}
