//! Model-free phase recovery: `Φ = arccos(n)` unwrapped by following the
//! fringe branches outward from `δ = 0`.
//!
//! Assumes `Φ` is monotone in `|δ|` across the window, which holds when the
//! quadratic term dominates.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::fit::{CurvatureSign, FitWindow};
use super::normalize::NormalizedSpectrum;
use crate::error::{Error, Result};

const MIN_SAMPLES_PER_FRINGE: f64 = 4.0;
const SIGMA_FLOOR: f64 = 1e-9;
/// Cap on `1/√(1 − n²)` near the fringe extrema.
const ONE_MINUS_N2_FLOOR: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseTrace {
    pub omega_deg: f64,
    pub detuning: Vec<f64>,
    /// rad; NaN where masked out
    pub phase: Vec<f64>,
    pub sigma: Vec<f64>,
    /// Odd part `(Φ(δ) − Φ(−δ))/2` removed by symmetrization.
    pub odd: Vec<f64>,
    pub mask: Vec<bool>,
    /// RMS of `(Φ(δ) − Φ(−δ))/2` before symmetrization.
    pub asymmetry: f64,
    /// Value of `asymmetry` expected from noise alone.
    pub asymmetry_expected: f64,
}

impl PhaseTrace {
    pub fn masked_count(&self) -> usize {
        self.mask.iter().filter(|m| **m).count()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.detuning.len();
        if self.phase.len() != n
            || self.sigma.len() != n
            || self.odd.len() != n
            || self.mask.len() != n
        {
            return Err(Error::InvalidInput(
                "phase trace columns differ in length".into(),
            ));
        }
        for i in (0..n).filter(|&i| self.mask[i]) {
            if !self.phase[i].is_finite() || !(self.sigma[i] > 0.0) {
                return Err(Error::InvalidInput(format!(
                    "phase trace point {i} is masked in but not finite with positive sigma"
                )));
            }
        }
        Ok(())
    }

    /// Index of the point closest to `δ = 0`.
    pub fn center_index(&self) -> usize {
        center_index(&self.detuning)
    }
}

fn center_index(detuning: &[f64]) -> usize {
    detuning
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

fn branch_phase(m: i64, a: f64) -> f64 {
    if m % 2 == 0 {
        m as f64 * PI + a
    } else {
        (m + 1) as f64 * PI - a
    }
}

/// Unwraps one half-axis. `a` starts at the center sample.
fn unwrap_half(a: &[f64], rising: bool) -> Vec<f64> {
    let mut m: i64 = if rising { 0 } else { 1 };
    let mut out = Vec::with_capacity(a.len());
    out.push(branch_phase(m, a[0]));
    for j in 1..a.len() {
        // linear extrapolation over up to four steps
        let k = (j - 1).min(4);
        let predicted = if k == 0 {
            out[j - 1]
        } else {
            out[j - 1] + (out[j - 1] - out[j - 1 - k]) / k as f64
        };
        let stay = branch_phase(m, a[j]);
        let next = branch_phase(m + 1, a[j]);
        if (next - predicted).abs() < (stay - predicted).abs() {
            m += 1;
            out.push(next);
        } else {
            out.push(stay);
        }
    }
    out
}

fn initially_rising(a: &[f64]) -> bool {
    let look = a.len().min(16);
    for &v in &a[1..look] {
        if (v - a[0]).abs() > 0.05 {
            return v > a[0];
        }
    }
    a.get(look - 1).is_none_or(|v| *v >= a[0])
}

fn interp(x: &[f64], y: &[f64], at: f64) -> f64 {
    // x ascending
    let k = x.partition_point(|v| *v < at);
    if k == 0 {
        return if at == x[0] { y[0] } else { f64::NAN };
    }
    if k == x.len() {
        return f64::NAN;
    }
    let t = (at - x[k - 1]) / (x[k] - x[k - 1]);
    y[k - 1] + t * (y[k] - y[k - 1])
}

/// Recovers an even, unwrapped phase trace from a normalized spectrum.
///
/// The returned phase rises away from `δ = 0` for `CurvatureSign::Positive`
/// and falls for `Negative`; its constant term carries the usual `2π`
/// ambiguity.
pub fn extract_phase_pointwise(
    normalized: &NormalizedSpectrum,
    window: FitWindow,
    sign: CurvatureSign,
) -> Result<PhaseTrace> {
    let det = &normalized.detuning;
    let n = det.len();
    let usable: Vec<bool> = (0..n)
        .map(|i| normalized.mask[i] && window.contains(det[i]) && normalized.values[i].is_finite())
        .collect();
    let c = center_index(det);
    if !usable[c] {
        return Err(Error::AllMasked);
    }
    // contiguous run around the center
    let mut hi = c;
    while hi + 1 < n && usable[hi + 1] {
        hi += 1;
    }
    let mut lo = c;
    while lo > 0 && usable[lo - 1] {
        lo -= 1;
    }
    if hi - c < 3 || c - lo < 3 {
        return Err(Error::TooFewPoints {
            found: hi - lo + 1,
            needed: 7,
        });
    }

    let clipped: Vec<f64> = normalized
        .values
        .iter()
        .map(|v| v.clamp(-1.0, 1.0))
        .collect();
    let a: Vec<f64> = clipped.iter().map(|v| v.acos()).collect();

    let right: Vec<f64> = a[c..=hi].to_vec();
    let left: Vec<f64> = a[lo..=c].iter().rev().cloned().collect();
    // decide the start branch from both sides together
    let both: Vec<f64> = right
        .iter()
        .zip(&left)
        .map(|(r, l)| 0.5 * (r + l))
        .collect();
    let rising = initially_rising(&both);
    let phi_r = unwrap_half(&right, rising);
    let phi_l = unwrap_half(&left, rising);

    let mut raw = vec![f64::NAN; n];
    for (k, v) in phi_r.iter().enumerate() {
        raw[c + k] = *v;
    }
    for (k, v) in phi_l.iter().enumerate() {
        raw[c - k] = *v;
    }

    // sampling check at both edges of the unwrapped run
    for (p, q) in [(hi, hi - 1), (lo, lo + 1)] {
        let step = (raw[p] - raw[q]).abs();
        if step > 0.0 {
            let spf = 2.0 * PI / step;
            if spf < MIN_SAMPLES_PER_FRINGE {
                return Err(Error::Undersampled {
                    samples_per_fringe: spf,
                });
            }
        }
    }

    let sigma_n = |i: usize| {
        normalized
            .sigma
            .as_ref()
            .map_or(SIGMA_FLOOR, |s| s[i].max(SIGMA_FLOOR))
    };
    let raw_sigma: Vec<f64> = (0..n)
        .map(|i| {
            sigma_n(i)
                / (1.0 - clipped[i] * clipped[i])
                    .max(ONE_MINUS_N2_FLOOR)
                    .sqrt()
        })
        .collect();

    // even symmetrization against the mirror side
    let run_x = &det[lo..=hi];
    let run_phi = &raw[lo..=hi];
    let run_sig = &raw_sigma[lo..=hi];
    let mut phase = vec![f64::NAN; n];
    let mut sigma = vec![f64::NAN; n];
    let mut odd = vec![f64::NAN; n];
    let mut mask = vec![false; n];
    let (mut asym2, mut expect2, mut pairs) = (0.0, 0.0, 0usize);
    for i in lo..=hi {
        let mirror = interp(run_x, run_phi, -det[i]);
        let mirror_sig = interp(run_x, run_sig, -det[i]);
        if mirror.is_finite() {
            let half = 0.5 * (raw[i] - mirror);
            odd[i] = half;
            asym2 += half * half;
            expect2 += 0.25 * (raw_sigma[i].powi(2) + mirror_sig.powi(2));
            pairs += 1;
            phase[i] = 0.5 * (raw[i] + mirror);
            sigma[i] = 0.5 * (raw_sigma[i].powi(2) + mirror_sig.powi(2)).sqrt();
        } else {
            phase[i] = raw[i];
            sigma[i] = raw_sigma[i];
        }
        mask[i] = true;
    }
    if sign == CurvatureSign::Negative {
        phase
            .iter_mut()
            .chain(odd.iter_mut())
            .for_each(|p| *p = -*p);
    }
    let pairs = pairs.max(1) as f64;
    let trace = PhaseTrace {
        omega_deg: normalized.omega_deg,
        detuning: det.clone(),
        phase,
        sigma,
        odd,
        mask,
        asymmetry: (asym2 / pairs).sqrt(),
        asymmetry_expected: (expect2 / pairs).sqrt(),
    };
    trace.validate()?;
    Ok(trace)
}
