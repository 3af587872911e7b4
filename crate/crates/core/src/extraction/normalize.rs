use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::synthesis::Interferogram;

/// How the single-source spectra are scaled before normalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeScale {
    /// `MatchTotal` for measurements with uncertainties (counted data),
    /// `Given` otherwise.
    #[default]
    Auto,
    /// Envelopes are already on the same intensity scale as the measurement.
    Given,
    /// Rescale both envelopes so their sum carries the same total as the
    /// measurement over the masked-in points. Needed for counted spectra.
    MatchTotal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormalizeOptions {
    /// Points where either envelope is below this fraction of its peak are masked.
    #[serde(default = "default_floor")]
    pub floor_fraction: f64,
    #[serde(default = "default_clip")]
    pub clip: f64,
    #[serde(default)]
    pub scale: EnvelopeScale,
}

fn default_floor() -> f64 {
    0.05
}

fn default_clip() -> f64 {
    1.2
}

impl Default for NormalizeOptions {
    fn default() -> Self {
        NormalizeOptions {
            floor_fraction: default_floor(),
            clip: default_clip(),
            scale: EnvelopeScale::Auto,
        }
    }
}

/// `n(δ) = (S − F1 − F2) / (2√(F1·F2))`, ideally `cos Φ(δ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizedSpectrum {
    pub omega_deg: f64,
    pub detuning: Vec<f64>,
    pub values: Vec<f64>,
    /// Propagated counting uncertainty of `n`, when the measurement has one.
    pub sigma: Option<Vec<f64>>,
    pub mask: Vec<bool>,
    /// Fraction of masked-in points whose `|n|` exceeded the clip level.
    pub clip_fraction: f64,
    /// Fraction of masked-in points with `|n| > 1`.
    pub over_unity_fraction: f64,
    /// Factor applied to the envelopes.
    pub envelope_scale: f64,
}

impl NormalizedSpectrum {
    pub fn masked_count(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }
}

pub(crate) fn same_grid(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len()
        && a.iter()
            .zip(b)
            .all(|(x, y)| (x - y).abs() <= 1e-9 * (1.0 + x.abs().max(y.abs())))
}

/// Divides out the single-source spectra.
pub fn normalize(
    measured: &Interferogram,
    env1: &Interferogram,
    env2: &Interferogram,
    options: &NormalizeOptions,
) -> Result<NormalizedSpectrum> {
    measured.validate()?;
    for (name, env) in [("source 1", env1), ("source 2", env2)] {
        if !same_grid(&measured.detuning, &env.detuning) {
            return Err(Error::GridMismatch(format!(
                "{name} envelope is sampled on a different detuning grid than the measurement"
            )));
        }
    }
    let peak1 = env1.values.iter().cloned().fold(0.0, f64::max);
    let peak2 = env2.values.iter().cloned().fold(0.0, f64::max);
    if !(peak1 > 0.0 && peak2 > 0.0) {
        return Err(Error::AllMasked);
    }
    let mask: Vec<bool> = env1
        .values
        .iter()
        .zip(&env2.values)
        .map(|(f1, f2)| {
            *f1 >= options.floor_fraction * peak1 && *f2 >= options.floor_fraction * peak2
        })
        .collect();
    let n_in = mask.iter().filter(|m| **m).count();
    if n_in == 0 {
        return Err(Error::AllMasked);
    }

    let scale = match options.scale {
        EnvelopeScale::Auto if measured.sigma.is_some() => EnvelopeScale::MatchTotal,
        EnvelopeScale::Auto => EnvelopeScale::Given,
        s => s,
    };
    let envelope_scale = match scale {
        EnvelopeScale::Given | EnvelopeScale::Auto => 1.0,
        EnvelopeScale::MatchTotal => {
            let (mut s, mut f) = (0.0, 0.0);
            for i in (0..measured.len()).filter(|&i| mask[i]) {
                s += measured.values[i];
                f += env1.values[i] + env2.values[i];
            }
            if !(s > 0.0) {
                return Err(Error::ZeroWeight);
            }
            s / f
        }
    };

    let mut values = vec![f64::NAN; measured.len()];
    let mut sigma = measured
        .sigma
        .as_ref()
        .map(|_| vec![f64::NAN; measured.len()]);
    let (mut clipped, mut over) = (0usize, 0usize);
    for i in (0..measured.len()).filter(|&i| mask[i]) {
        let f1 = envelope_scale * env1.values[i];
        let f2 = envelope_scale * env2.values[i];
        let denom = 2.0 * (f1 * f2).sqrt();
        let n = (measured.values[i] - f1 - f2) / denom;
        if n.abs() > 1.0 {
            over += 1;
        }
        if n.abs() > options.clip {
            clipped += 1;
        }
        values[i] = n.clamp(-options.clip, options.clip);
        if let (Some(out), Some(s)) = (sigma.as_mut(), measured.sigma.as_ref()) {
            out[i] = s[i] / denom;
        }
    }
    Ok(NormalizedSpectrum {
        omega_deg: measured.omega_deg,
        detuning: measured.detuning.clone(),
        values,
        sigma,
        mask,
        clip_fraction: clipped as f64 / n_in as f64,
        over_unity_fraction: over as f64 / n_in as f64,
        envelope_scale,
    })
}
