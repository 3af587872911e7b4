//! Parametric bootstrap: Poisson-resample the counted spectra and re-run the
//! extraction.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use super::estimate::DispersionEstimate;
use super::pipeline::{extract_dispersion, Envelopes, ExtractionInputs};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::synthesis::Interferogram;

pub const MIN_RESAMPLES: usize = 50;
/// Fraction of failed re-fits above which the bootstrap is rejected.
const MAX_FAILED_FRACTION: f64 = 0.2;

/// Draws a new spectrum with the same expected counts.
///
/// Counts are recovered from `(value/σ)²`; points without an uncertainty
/// are kept as they are.
pub fn poisson_resample(spectrum: &Interferogram, rng: &mut ChaCha8Rng) -> Interferogram {
    let Some(sigma) = &spectrum.sigma else {
        return spectrum.clone();
    };
    let mut values = Vec::with_capacity(spectrum.len());
    let mut new_sigma = Vec::with_capacity(spectrum.len());
    for (&v, &s) in spectrum.values.iter().zip(sigma) {
        if !(s > 0.0) {
            values.push(v);
            new_sigma.push(s);
            continue;
        }
        let counts = (v / s).powi(2).round();
        let scale = s / counts.max(1.0).sqrt();
        let drawn = if counts > 0.0 {
            Poisson::new(counts).map_or(counts, |p| p.sample(rng))
        } else {
            0.0
        };
        values.push(drawn * scale);
        new_sigma.push(drawn.max(1.0).sqrt() * scale);
    }
    Interferogram {
        values,
        sigma: Some(new_sigma),
        ..spectrum.clone()
    }
}

fn resample_inputs(inputs: &ExtractionInputs, seed: u64, index: usize) -> ExtractionInputs {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64 + 1);
    let envelopes = match &inputs.envelopes {
        Envelopes::Model(..) => inputs.envelopes.clone(),
        Envelopes::Sampled(a, b) => {
            Envelopes::Sampled(poisson_resample(a, &mut rng), poisson_resample(b, &mut rng))
        }
    };
    ExtractionInputs {
        with_fut: poisson_resample(&inputs.with_fut, &mut rng),
        without_fut: poisson_resample(&inputs.without_fut, &mut rng),
        envelopes,
        length_m: inputs.length_m,
        options: super::pipeline::ExtractionOptions {
            bootstrap_resamples: 0,
            ..inputs.options.clone()
        },
    }
}

/// Adds a resampling-based `σ_D` to the estimate from `inputs`.
pub fn bootstrap_uncertainty(
    inputs: &ExtractionInputs,
    n_resamples: usize,
    seed: u64,
    exec: Exec,
) -> Result<DispersionEstimate> {
    if n_resamples < MIN_RESAMPLES {
        return Err(Error::InvalidInput(format!(
            "bootstrap needs at least {MIN_RESAMPLES} resamples, got {n_resamples}"
        )));
    }
    let base = ExtractionInputs {
        options: super::pipeline::ExtractionOptions {
            bootstrap_resamples: 0,
            ..inputs.options.clone()
        },
        ..inputs.clone()
    };
    let mut estimate = extract_dispersion(&base)?
        .estimate
        .ok_or_else(|| Error::InvalidInput("bootstrap needs a positive fiber length".into()))?;

    let results: Vec<Option<f64>> = exec.map_indexed(n_resamples, |i| {
        extract_dispersion(&resample_inputs(inputs, seed, i))
            .ok()
            .and_then(|x| x.estimate)
            .map(|e| e.d)
    });
    let ds: Vec<f64> = results.iter().flatten().cloned().collect();
    let failed = n_resamples - ds.len();
    if failed as f64 > MAX_FAILED_FRACTION * n_resamples as f64 || ds.len() < 2 {
        return Err(Error::BootstrapFailed {
            failed,
            total: n_resamples,
        });
    }
    let mean = ds.iter().sum::<f64>() / ds.len() as f64;
    let var = ds.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (ds.len() - 1) as f64;
    estimate.sigma_d_bootstrap = Some(var.sqrt());
    Ok(estimate)
}
