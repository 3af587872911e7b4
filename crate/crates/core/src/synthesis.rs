//! Spectral interferogram of the two-source interferometer.
//!
//! Along the energy-conserving diagonal `ω_i = ω_p − ω_s` the output spectrum
//! is
//!
//! `S(ω) = F1(ω) + F2(ω) + 2·√(F1(ω)·F2(ω))·cos Φ(ω)`
//!
//! with `F1`, `F2` the single-source spectra and `Φ = Φ_int + Φ_FUT`. For
//! identical sources this is `2F·(1 + cos Φ)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dispersion::{phi_fut_detuning, FiberSegment};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::units::{omega_deg_from_pump, wavelength_from_omega, C_M_PER_S, FIBER_GROUP_INDEX};

/// `x` at which `sinc²(x) = 1/2`, with `sinc(x) = sin(x)/x`.
pub const SINC2_HALF_MAX_ARG: f64 = 1.391_557_378_251_51;

/// Minimum ratio of pump coherence length to path mismatch.
pub const COHERENCE_RATIO_MIN: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnvelopeShape {
    #[default]
    Gaussian,
    Sinc2,
}

/// Single-source biphoton spectrum `|F(ω)|²`, even about its degeneracy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpdcEnvelope {
    pub omega_deg: f64,
    /// Full width at half maximum of `|F|²`, rad/ps.
    pub fwhm: f64,
    pub shape: EnvelopeShape,
    pub peak: f64,
}

impl SpdcEnvelope {
    pub fn new(omega_deg: f64, fwhm: f64, shape: EnvelopeShape, peak: f64) -> Result<Self> {
        if !(fwhm.is_finite() && fwhm > 0.0) {
            return Err(Error::InvalidInput(format!(
                "envelope FWHM must be positive, got {fwhm}"
            )));
        }
        if !(peak.is_finite() && peak >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "envelope peak must be non-negative, got {peak}"
            )));
        }
        if !(omega_deg.is_finite() && omega_deg > 0.0) {
            return Err(Error::InvalidInput(format!(
                "degeneracy frequency must be positive, got {omega_deg}"
            )));
        }
        Ok(SpdcEnvelope {
            omega_deg,
            fwhm,
            shape,
            peak,
        })
    }

    pub fn at_detuning(&self, detuning: f64) -> f64 {
        let half = 0.5 * self.fwhm;
        match self.shape {
            EnvelopeShape::Gaussian => {
                let x = detuning / half;
                self.peak * (-(2f64.ln()) * x * x).exp()
            }
            EnvelopeShape::Sinc2 => {
                let x = SINC2_HALF_MAX_ARG * detuning / half;
                if x == 0.0 {
                    self.peak
                } else {
                    let s = x.sin() / x;
                    self.peak * s * s
                }
            }
        }
    }
}

/// `|F(ω)|²` of one source.
pub fn envelope_value(env: &SpdcEnvelope, omega: f64) -> f64 {
    env.at_detuning(omega - env.omega_deg)
}

/// Local fringe visibility `2√(F1F2)/(F1+F2)` from the two intensities.
pub fn visibility_from_intensities(f1: f64, f2: f64) -> Result<f64> {
    if !(f1 >= 0.0 && f2 >= 0.0) || f1 + f2 <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "visibility undefined for envelope values {f1}, {f2}"
        )));
    }
    Ok((2.0 * (f1 * f2).sqrt() / (f1 + f2)).min(1.0))
}

pub fn visibility(env1: &SpdcEnvelope, env2: &SpdcEnvelope, omega: f64) -> Result<f64> {
    visibility_from_intensities(envelope_value(env1, omega), envelope_value(env2, omega))
}

/// Interferometer phase in the middle section without the FUT: a list of fiber
/// segments (pigtails) plus an even polynomial in the detuning.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InternalPhase {
    #[serde(default)]
    pub segments: Vec<FiberSegment>,
    /// Coefficients of `δ⁰, δ², δ⁴, …` in rad, rad·ps², rad·ps⁴, ….
    #[serde(default)]
    pub even_poly: Vec<f64>,
}

impl InternalPhase {
    fn eval(&self, detuning: f64, omega_deg: f64) -> Result<f64> {
        let d2 = detuning * detuning;
        let poly = self.even_poly.iter().rev().fold(0.0, |acc, c| acc * d2 + c);
        self.segments.iter().try_fold(poly, |acc, seg| {
            Ok(acc + phi_fut_detuning(seg, detuning, omega_deg, true)?)
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterferometerSetup {
    pub pump_wavelength_nm: f64,
    pub source1: SpdcEnvelope,
    pub source2: SpdcEnvelope,
    pub internal: InternalPhase,
    pub fut: Option<FiberSegment>,
    pub pump_linewidth_mhz: f64,
    pub path_mismatch_m: f64,
}

impl InterferometerSetup {
    pub fn validate(&self) -> Result<()> {
        if !(self.pump_wavelength_nm.is_finite() && self.pump_wavelength_nm > 0.0) {
            return Err(Error::InvalidInput(format!(
                "pump wavelength must be positive, got {}",
                self.pump_wavelength_nm
            )));
        }
        let wdeg = self.omega_deg();
        for (name, src) in [("source1", &self.source1), ("source2", &self.source2)] {
            if (src.omega_deg - wdeg).abs() > 1e-12 * wdeg {
                return Err(Error::InvalidInput(format!(
                    "{name} degeneracy {} rad/ps does not equal half the pump frequency {wdeg} rad/ps",
                    src.omega_deg
                )));
            }
            SpdcEnvelope::new(src.omega_deg, src.fwhm, src.shape, src.peak)?;
        }
        for seg in self.internal.segments.iter().chain(self.fut.iter()) {
            seg.validate()?;
        }
        if self.internal.even_poly.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput(
                "internal phase polynomial must be finite".into(),
            ));
        }
        if !(self.path_mismatch_m.is_finite() && self.path_mismatch_m >= 0.0) {
            return Err(Error::InvalidInput(
                "path mismatch must be non-negative".into(),
            ));
        }
        Ok(())
    }

    pub fn omega_deg(&self) -> f64 {
        omega_deg_from_pump(self.pump_wavelength_nm)
    }

    pub fn without_fut(&self) -> InterferometerSetup {
        InterferometerSetup {
            fut: None,
            ..self.clone()
        }
    }

    /// Short stable hash of the serialized setup, used in file headers.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("setup serializes");
        short_hash(&json)
    }
}

pub(crate) fn short_hash(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    hex::encode(&digest[..8])
}

/// Uniform grid in detuning `δ = ω − ω_deg`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    pub detuning_min: f64,
    pub detuning_max: f64,
    pub points: usize,
}

impl FrequencyGrid {
    pub fn new(detuning_min: f64, detuning_max: f64, points: usize) -> Result<Self> {
        if points < 2 {
            return Err(Error::InvalidInput(format!(
                "grid needs at least 2 points, got {points}"
            )));
        }
        if !(detuning_min.is_finite() && detuning_max.is_finite() && detuning_max > detuning_min) {
            return Err(Error::InvalidInput(format!(
                "grid bounds must be finite and increasing, got [{detuning_min}, {detuning_max}]"
            )));
        }
        Ok(FrequencyGrid {
            detuning_min,
            detuning_max,
            points,
        })
    }

    pub fn symmetric(half_width: f64, points: usize) -> Result<Self> {
        Self::new(-half_width, half_width, points)
    }

    pub fn is_symmetric(&self) -> bool {
        self.detuning_min == -self.detuning_max
    }

    pub fn step(&self) -> f64 {
        (self.detuning_max - self.detuning_min) / (self.points - 1) as f64
    }

    /// Grid points. For symmetric grids point `i` and point `n−1−i` are exact
    /// negatives of each other.
    pub fn detunings(&self) -> Vec<f64> {
        let n = self.points;
        let last = (n - 1) as f64;
        if self.is_symmetric() {
            (0..n)
                .map(|i| {
                    let j = n - 1 - i;
                    if i < j {
                        -self.detuning_max * (j as f64 - i as f64) / last
                    } else {
                        self.detuning_max * (i as f64 - j as f64) / last
                    }
                })
                .collect()
        } else {
            (0..n)
                .map(|i| {
                    self.detuning_min + (self.detuning_max - self.detuning_min) * i as f64 / last
                })
                .collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct InterferogramMeta {
    pub setup_hash: String,
    pub with_fut: bool,
    /// False when the pump coherence check failed for the generating setup.
    pub coherence_ok: bool,
}

/// Spectral intensity sampled on strictly increasing detuning points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interferogram {
    pub omega_deg: f64,
    pub detuning: Vec<f64>,
    pub values: Vec<f64>,
    /// One-sigma counting uncertainty per point, when the data are measured.
    pub sigma: Option<Vec<f64>>,
    pub meta: InterferogramMeta,
}

impl Interferogram {
    pub fn new(
        omega_deg: f64,
        detuning: Vec<f64>,
        values: Vec<f64>,
        sigma: Option<Vec<f64>>,
    ) -> Result<Self> {
        let s = Interferogram {
            omega_deg,
            detuning,
            values,
            sigma,
            meta: InterferogramMeta {
                coherence_ok: true,
                ..Default::default()
            },
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.detuning.is_empty() || self.detuning.len() != self.values.len() {
            return Err(Error::InvalidInput(format!(
                "interferogram has {} detuning points and {} values",
                self.detuning.len(),
                self.values.len()
            )));
        }
        if let Some(s) = &self.sigma {
            if s.len() != self.values.len() || s.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::InvalidInput(
                    "sigma column must match values and be non-negative".into(),
                ));
            }
        }
        if self.detuning.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput(
                "detuning must be strictly increasing".into(),
            ));
        }
        if self.values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidInput(
                "intensities must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn wavelengths_nm(&self) -> Vec<f64> {
        self.detuning
            .iter()
            .map(|d| wavelength_from_omega(self.omega_deg + d))
            .collect()
    }

    /// Trapezoidal integral over detuning.
    pub fn integral(&self) -> f64 {
        self.detuning
            .windows(2)
            .zip(self.values.windows(2))
            .map(|(x, y)| 0.5 * (y[0] + y[1]) * (x[1] - x[0]))
            .sum()
    }
}

/// Interferometer phase `Φ(ω) = Φ_int(ω) + Φ_FUT(ω)`.
pub fn total_phase(setup: &InterferometerSetup, omega: f64) -> Result<f64> {
    let wdeg = setup.omega_deg();
    if !(omega > 0.0 && omega < 2.0 * wdeg) {
        return Err(Error::out_of_range(
            "angular frequency (rad/ps)",
            omega,
            0.0,
            2.0 * wdeg,
        ));
    }
    total_phase_detuning(setup, omega - wdeg)
}

pub fn total_phase_detuning(setup: &InterferometerSetup, detuning: f64) -> Result<f64> {
    let wdeg = setup.omega_deg();
    let mut phi = setup.internal.eval(detuning, wdeg)?;
    if let Some(fut) = &setup.fut {
        phi += phi_fut_detuning(fut, detuning, wdeg, true)?;
    }
    Ok(phi)
}

pub fn synthesize(setup: &InterferometerSetup, grid: &FrequencyGrid) -> Result<Interferogram> {
    synthesize_with(setup, grid, Exec::default())
}

pub fn synthesize_with(
    setup: &InterferometerSetup,
    grid: &FrequencyGrid,
    exec: Exec,
) -> Result<Interferogram> {
    setup.validate()?;
    let detuning = grid.detunings();
    let values = exec
        .map_slice(&detuning, |&d| -> Result<f64> {
            let f1 = setup.source1.at_detuning(d);
            let f2 = setup.source2.at_detuning(d);
            let phi = total_phase_detuning(setup, d)?;
            Ok((f1 + f2 + 2.0 * (f1 * f2).sqrt() * phi.cos()).max(0.0))
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let coherence = coherence_check(setup.pump_linewidth_mhz, setup.path_mismatch_m)?;
    Ok(Interferogram {
        omega_deg: setup.omega_deg(),
        detuning,
        values,
        sigma: None,
        meta: InterferogramMeta {
            setup_hash: setup.hash(),
            with_fut: setup.fut.is_some(),
            coherence_ok: coherence.passed,
        },
    })
}

/// Samples one source's spectrum on a set of detuning points.
pub fn envelope_spectrum(env: &SpdcEnvelope, detuning: &[f64]) -> Interferogram {
    Interferogram {
        omega_deg: env.omega_deg,
        detuning: detuning.to_vec(),
        values: detuning.iter().map(|&d| env.at_detuning(d)).collect(),
        sigma: None,
        meta: InterferogramMeta {
            coherence_ok: true,
            ..Default::default()
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherenceCheck {
    pub passed: bool,
    /// In-fiber pump coherence length `c/(π·Δν·n)`, m.
    pub coherence_length_m: f64,
    /// Coherence length over path mismatch; infinite for zero mismatch.
    pub ratio: f64,
}

/// Pump coherence criterion: the in-fiber coherence length must exceed the
/// pump/biphoton path mismatch by [`COHERENCE_RATIO_MIN`].
pub fn coherence_check(pump_linewidth_mhz: f64, path_mismatch_m: f64) -> Result<CoherenceCheck> {
    if !(pump_linewidth_mhz.is_finite() && pump_linewidth_mhz > 0.0) {
        return Err(Error::InvalidInput(format!(
            "pump linewidth must be positive, got {pump_linewidth_mhz} MHz"
        )));
    }
    let coherence_length_m = C_M_PER_S / (PI * pump_linewidth_mhz * 1e6) / FIBER_GROUP_INDEX;
    let ratio = if path_mismatch_m == 0.0 {
        f64::INFINITY
    } else {
        coherence_length_m / path_mismatch_m.abs()
    };
    Ok(CoherenceCheck {
        passed: ratio >= COHERENCE_RATIO_MIN,
        coherence_length_m,
        ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dispersion::DispersionModel;
    use crate::units::thz_to_radps;
    use approx::assert_relative_eq;

    fn env(peak: f64) -> SpdcEnvelope {
        SpdcEnvelope::new(
            omega_deg_from_pump(780.2),
            thz_to_radps(12.0),
            EnvelopeShape::Gaussian,
            peak,
        )
        .unwrap()
    }

    fn smf28(len: f64) -> FiberSegment {
        FiberSegment::new(
            "smf28",
            len,
            DispersionModel::spec_sheet(1313.0, 0.085).unwrap(),
        )
        .unwrap()
    }

    fn setup(
        fut: Option<FiberSegment>,
        internal: InternalPhase,
        peak2: f64,
    ) -> InterferometerSetup {
        InterferometerSetup {
            pump_wavelength_nm: 780.2,
            source1: env(1.0),
            source2: env(peak2),
            internal,
            fut,
            pump_linewidth_mhz: 0.1,
            path_mismatch_m: 0.03,
        }
    }

    #[test]
    fn gaussian_envelope_peak_and_half_max() {
        let e = env(2.0);
        assert_eq!(envelope_value(&e, e.omega_deg), 2.0);
        assert_relative_eq!(e.at_detuning(0.5 * e.fwhm), 1.0, max_relative = 1e-14);
        assert_relative_eq!(e.at_detuning(-0.5 * e.fwhm), 1.0, max_relative = 1e-14);
    }

    #[test]
    fn sinc2_half_max_constant_by_bisection() {
        // Independent root find of sin(x)^2/x^2 = 1/2 on [1, 2].
        let f = |x: f64| (x.sin() / x).powi(2) - 0.5;
        let (mut lo, mut hi) = (1.0f64, 2.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(lo) * f(mid) <= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        assert_relative_eq!(SINC2_HALF_MAX_ARG, 0.5 * (lo + hi), max_relative = 1e-14);

        let e = SpdcEnvelope::new(1200.0, 10.0, EnvelopeShape::Sinc2, 1.0).unwrap();
        assert_eq!(e.at_detuning(0.0), 1.0);
        assert_relative_eq!(e.at_detuning(5.0), 0.5, max_relative = 1e-12);
        // First zero at x = pi.
        let zero = PI / SINC2_HALF_MAX_ARG * 5.0;
        assert!(e.at_detuning(zero) < 1e-28);
        assert_eq!(e.at_detuning(3.3), e.at_detuning(-3.3));
    }

    #[test]
    fn envelope_rejects_bad_width() {
        assert!(SpdcEnvelope::new(1200.0, 0.0, EnvelopeShape::Gaussian, 1.0).is_err());
        assert!(SpdcEnvelope::new(1200.0, -1.0, EnvelopeShape::Gaussian, 1.0).is_err());
    }

    #[test]
    fn visibility_examples() {
        assert_eq!(visibility_from_intensities(1.0, 1.0).unwrap(), 1.0);
        assert_eq!(visibility_from_intensities(1.0, 0.0).unwrap(), 0.0);
        assert_relative_eq!(
            visibility_from_intensities(1.0, 0.25).unwrap(),
            0.8,
            max_relative = 1e-15
        );
        assert_relative_eq!(
            visibility_from_intensities(1.0, 0.47).unwrap(),
            0.932_742_122_503_543_5,
            max_relative = 1e-12
        );
        // 2*sqrt(r)/(1+r) = 0.75 solved independently: r = 0.203776612387035
        assert_relative_eq!(
            visibility_from_intensities(1.0, 0.203_776_612_387_035).unwrap(),
            0.75,
            max_relative = 1e-12
        );
        assert!(visibility_from_intensities(0.0, 0.0).is_err());
        let e1 = env(1.0);
        let e2 = env(0.25);
        assert_relative_eq!(
            visibility(&e1, &e2, e1.omega_deg + 7.0).unwrap(),
            0.8,
            max_relative = 1e-14
        );
    }

    #[test]
    fn total_phase_examples() {
        let empty = setup(None, InternalPhase::default(), 1.0);
        for d in [-20.0, 0.0, 13.0] {
            assert_eq!(total_phase_detuning(&empty, d).unwrap(), 0.0);
        }
        let with = setup(Some(smf28(5.0)), InternalPhase::default(), 1.0);
        let d = thz_to_radps(5.0);
        assert_relative_eq!(
            total_phase_detuning(&with, d).unwrap(),
            105.477_002_959_162_14,
            max_relative = 1e-10
        );
        let w = with.omega_deg();
        assert_relative_eq!(
            total_phase(&with, w + d).unwrap(),
            105.477_002_959_162_14,
            max_relative = 1e-9
        );

        let internal = InternalPhase {
            segments: vec![smf28(1.0)],
            even_poly: vec![0.3, 0.01],
        };
        let both = setup(Some(smf28(5.0)), internal.clone(), 1.0);
        let only_int = setup(None, internal, 1.0);
        for d in [-30.0, -2.0, 0.0, 4.0, 25.0] {
            let sum = total_phase_detuning(&only_int, d).unwrap()
                + total_phase_detuning(&with, d).unwrap();
            assert_relative_eq!(
                total_phase_detuning(&both, d).unwrap(),
                sum,
                max_relative = 1e-13
            );
        }
    }

    #[test]
    fn identical_sources_zero_phase_is_four_f() {
        let s = setup(None, InternalPhase::default(), 1.0);
        let grid = FrequencyGrid::symmetric(40.0, 201).unwrap();
        let out = synthesize(&s, &grid).unwrap();
        for (d, v) in out.detuning.iter().zip(&out.values) {
            assert_relative_eq!(*v, 4.0 * s.source1.at_detuning(*d), max_relative = 1e-14);
        }
        assert!(!out.meta.with_fut);
        assert!(out.meta.coherence_ok);
    }

    #[test]
    fn null_where_phase_is_pi() {
        let s = setup(
            None,
            InternalPhase {
                segments: vec![],
                even_poly: vec![PI],
            },
            1.0,
        );
        let grid = FrequencyGrid::symmetric(10.0, 11).unwrap();
        let out = synthesize(&s, &grid).unwrap();
        for v in &out.values {
            assert!(*v < 1e-14, "{v}");
        }
    }

    #[test]
    fn eq1_reduction_and_symmetry() {
        let internal = InternalPhase {
            segments: vec![smf28(1.3)],
            even_poly: vec![0.4],
        };
        let s = setup(Some(smf28(5.0)), internal, 1.0);
        let grid = FrequencyGrid::symmetric(44.0, 2001).unwrap();
        let out = synthesize(&s, &grid).unwrap();
        let n = out.len();
        for i in 0..n {
            let d = out.detuning[i];
            let f = s.source1.at_detuning(d);
            let phi = total_phase_detuning(&s, d).unwrap();
            let eq1 = 2.0 * f * (1.0 + phi.cos());
            assert!((out.values[i] - eq1).abs() <= 1e-12 * (4.0 * f));
            assert_eq!(out.detuning[n - 1 - i], -d);
            let mirror = out.values[n - 1 - i];
            assert!((out.values[i] - mirror).abs() <= 1e-12 * out.values[i].abs().max(f));
        }
    }

    #[test]
    fn removing_fut_reproduces_internal_only() {
        let internal = InternalPhase {
            segments: vec![smf28(0.8)],
            even_poly: vec![],
        };
        let s = setup(Some(smf28(5.0)), internal, 0.7);
        let grid = FrequencyGrid::symmetric(30.0, 301).unwrap();
        let a = synthesize(&s.without_fut(), &grid).unwrap();
        let b = synthesize(&setup(None, s.internal.clone(), 0.7), &grid).unwrap();
        assert_eq!(a.values, b.values);
    }

    #[test]
    fn fringe_minima_spacing_decreases() {
        let s = setup(Some(smf28(5.0)), InternalPhase::default(), 1.0);
        let grid = FrequencyGrid::new(0.0, 40.0, 40001).unwrap();
        let out = synthesize(&s, &grid).unwrap();
        let v = &out.values;
        let minima: Vec<f64> = (1..v.len() - 1)
            .filter(|&i| v[i] < v[i - 1] && v[i] <= v[i + 1])
            .map(|i| out.detuning[i])
            .collect();
        assert!(minima.len() > 10);
        let gaps: Vec<f64> = minima.windows(2).map(|w| w[1] - w[0]).collect();
        assert!(gaps.windows(2).all(|g| g[1] < g[0]), "{gaps:?}");
    }

    #[test]
    fn mismatched_sources_bounds() {
        let s = setup(Some(smf28(5.0)), InternalPhase::default(), 0.47);
        let grid = FrequencyGrid::symmetric(40.0, 801).unwrap();
        let out = synthesize(&s, &grid).unwrap();
        for (d, v) in out.detuning.iter().zip(&out.values) {
            let f1 = s.source1.at_detuning(*d);
            let f2 = s.source2.at_detuning(*d);
            let hi = f1 + f2 + 2.0 * (f1 * f2).sqrt();
            let lo = f1 + f2 - 2.0 * (f1 * f2).sqrt();
            assert!(*v <= hi * (1.0 + 1e-12) && *v >= lo * (1.0 - 1e-12) - 1e-15);
        }
    }

    #[test]
    fn synthesize_sequential_equals_parallel() {
        let s = setup(Some(smf28(5.0)), InternalPhase::default(), 0.9);
        let grid = FrequencyGrid::symmetric(44.0, 4001).unwrap();
        let a = synthesize_with(&s, &grid, Exec::Sequential).unwrap();
        let b = synthesize_with(&s, &grid, Exec::Parallel).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn source_degeneracy_must_match_pump() {
        let mut s = setup(None, InternalPhase::default(), 1.0);
        s.source2.omega_deg += 1.0;
        assert!(synthesize(&s, &FrequencyGrid::symmetric(1.0, 3).unwrap()).is_err());
    }

    #[test]
    fn coherence_examples() {
        let ok = coherence_check(0.1, 0.03).unwrap();
        assert!(ok.passed);
        assert_relative_eq!(
            ok.coherence_length_m,
            650.047_024_419_202,
            max_relative = 1e-9
        );
        assert!(ok.ratio > 1e4);
        let bad = coherence_check(1000.0, 10.0).unwrap();
        assert!(!bad.passed);
        assert_relative_eq!(
            bad.coherence_length_m,
            0.065_004_702_441_920_2,
            max_relative = 1e-9
        );
        assert!(coherence_check(1e6, 0.0).unwrap().passed);
        assert!(coherence_check(0.0, 1.0).is_err());
    }

    #[test]
    fn coherence_failure_is_flagged_not_fatal() {
        let mut s = setup(None, InternalPhase::default(), 1.0);
        s.pump_linewidth_mhz = 1000.0;
        s.path_mismatch_m = 10.0;
        let out = synthesize(&s, &FrequencyGrid::symmetric(1.0, 3).unwrap()).unwrap();
        assert!(!out.meta.coherence_ok);
    }

    #[test]
    fn grid_validation() {
        assert!(FrequencyGrid::new(0.0, 1.0, 1).is_err());
        assert!(FrequencyGrid::new(1.0, 1.0, 5).is_err());
        let g = FrequencyGrid::symmetric(3.0, 7).unwrap();
        assert_eq!(g.detunings(), vec![-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0]);
        assert_eq!(g.step(), 1.0);
    }
}
