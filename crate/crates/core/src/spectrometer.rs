//! Dispersive time-of-flight fiber spectrometer.
//!
//! A photon pair `(ω_s, ω_p − ω_s)` sent through a medium with dispersion-length
//! product `DL` (ps/nm) arrives with a coincidence delay
//! `Δt = DL·(λ_s − λ_i)`. The conjugate wavelength is computed exactly from
//! energy conservation; only the medium is treated as linear in wavelength.
//! Detector jitter is a single gaussian on `Δt`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::synthesis::{Interferogram, InterferogramMeta};
use crate::units::{omega_deg_from_pump, wavelength_from_omega, C_NM_PER_PS, FWHM_PER_SIGMA};

/// Number of independently seeded event shards. Fixed so that the histogram
/// does not depend on the thread count.
pub const EVENT_SHARDS: usize = 64;

const BISECTION_MAX_ITER: usize = 400;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JitterMode {
    /// `jitter_fwhm_ps` is already the jitter of the coincidence delay.
    #[default]
    Effective,
    /// `jitter_fwhm_ps` is per detector; two detectors add in quadrature.
    PerDetector,
}

fn default_window() -> (f64, f64) {
    (1400.0, 1750.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrometerConfig {
    /// Signed dispersion-length product of the dispersive medium, ps/nm.
    pub medium_dl_ps_per_nm: f64,
    pub jitter_fwhm_ps: f64,
    #[serde(default)]
    pub jitter_mode: JitterMode,
    pub bin_width_ps: f64,
    /// Expected number of detected pairs.
    pub pair_count: f64,
    /// Expected fraction of uniform background events in the histogram.
    #[serde(default)]
    pub dark_fraction: f64,
    #[serde(default)]
    pub rng_seed: u64,
    /// Calibrated wavelength window (nm); both photons of a pair must fall in it.
    #[serde(default = "default_window")]
    pub window_nm: (f64, f64),
}

impl Default for SpectrometerConfig {
    fn default() -> Self {
        SpectrometerConfig {
            medium_dl_ps_per_nm: 340.0,
            jitter_fwhm_ps: 256.0,
            jitter_mode: JitterMode::Effective,
            bin_width_ps: 16.0,
            pair_count: 1e6,
            dark_fraction: 0.0,
            rng_seed: 0,
            window_nm: default_window(),
        }
    }
}

impl SpectrometerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if !(self.medium_dl_ps_per_nm.is_finite() && self.medium_dl_ps_per_nm != 0.0) {
            return bad(format!(
                "medium DL must be finite and non-zero, got {}",
                self.medium_dl_ps_per_nm
            ));
        }
        if !(self.jitter_fwhm_ps.is_finite() && self.jitter_fwhm_ps >= 0.0) {
            return bad(format!(
                "jitter must be non-negative, got {}",
                self.jitter_fwhm_ps
            ));
        }
        if !(self.bin_width_ps.is_finite() && self.bin_width_ps > 0.0) {
            return bad(format!(
                "bin width must be positive, got {}",
                self.bin_width_ps
            ));
        }
        if !(self.pair_count.is_finite() && self.pair_count > 0.0) {
            return bad(format!(
                "pair count must be positive, got {}",
                self.pair_count
            ));
        }
        if !(0.0..1.0).contains(&self.dark_fraction) {
            return bad(format!(
                "dark fraction must be in [0, 1), got {}",
                self.dark_fraction
            ));
        }
        let (lo, hi) = self.window_nm;
        if !(lo > 0.0 && hi > lo && hi.is_finite()) {
            return bad(format!(
                "calibration window must be increasing and positive, got [{lo}, {hi}]"
            ));
        }
        Ok(())
    }

    /// FWHM of the gaussian jitter on the coincidence delay, ps.
    pub fn effective_jitter_fwhm_ps(&self) -> f64 {
        match self.jitter_mode {
            JitterMode::Effective => self.jitter_fwhm_ps,
            JitterMode::PerDetector => self.jitter_fwhm_ps * std::f64::consts::SQRT_2,
        }
    }

    /// Detuning interval (rad/ps) where signal and idler both lie inside the
    /// calibrated window.
    fn detuning_domain(&self, omega_deg: f64) -> Result<(f64, f64)> {
        let (wl_lo, wl_hi) = self.window_nm;
        let w_lo = 2.0 * std::f64::consts::PI * C_NM_PER_PS / wl_hi;
        let w_hi = 2.0 * std::f64::consts::PI * C_NM_PER_PS / wl_lo;
        let lo = (w_lo - omega_deg).max(omega_deg - w_hi);
        let hi = (w_hi - omega_deg).min(omega_deg - w_lo);
        if !(hi > lo) || lo > 0.0 || hi < 0.0 {
            return Err(Error::InvalidInput(format!(
                "degeneracy wavelength {} nm is not inside the calibration window [{wl_lo}, {wl_hi}] nm",
                wavelength_from_omega(omega_deg)
            )));
        }
        Ok((lo, hi))
    }

    fn delay_at(&self, detuning: f64, omega_deg: f64) -> f64 {
        let ls = wavelength_from_omega(omega_deg + detuning);
        let li = wavelength_from_omega(omega_deg - detuning);
        self.medium_dl_ps_per_nm * (ls - li)
    }

    /// `dΔt/dδ` in ps per rad/ps.
    fn delay_slope_at(&self, detuning: f64, omega_deg: f64) -> f64 {
        let k = 2.0 * std::f64::consts::PI * C_NM_PER_PS;
        let ws = omega_deg + detuning;
        let wi = omega_deg - detuning;
        -self.medium_dl_ps_per_nm * k * (1.0 / (ws * ws) + 1.0 / (wi * wi))
    }

    fn detuning_for_delay(&self, delay_ps: f64, omega_deg: f64) -> Result<f64> {
        let (lo, hi) = self.detuning_domain(omega_deg)?;
        let t_lo = self.delay_at(lo, omega_deg);
        let t_hi = self.delay_at(hi, omega_deg);
        let (t_min, t_max) = (t_lo.min(t_hi), t_lo.max(t_hi));
        if !(delay_ps >= t_min && delay_ps <= t_max) {
            return Err(Error::out_of_range(
                "coincidence delay (ps)",
                delay_ps,
                t_min,
                t_max,
            ));
        }
        if delay_ps == 0.0 {
            return Ok(0.0);
        }
        // delay is strictly monotone in the detuning; orient so f(a) <= target <= f(b).
        let increasing = t_hi > t_lo;
        let (mut a, mut b) = (lo, hi);
        for _ in 0..BISECTION_MAX_ITER {
            let mid = 0.5 * (a + b);
            if mid <= a || mid >= b {
                break;
            }
            let t = self.delay_at(mid, omega_deg);
            if (t < delay_ps) == increasing {
                a = mid;
            } else {
                b = mid;
            }
        }
        let ta = (self.delay_at(a, omega_deg) - delay_ps).abs();
        let tb = (self.delay_at(b, omega_deg) - delay_ps).abs();
        Ok(if ta <= tb { a } else { b })
    }
}

/// Coincidence delay (ps) of a pair whose signal is at `lambda_signal_nm`.
pub fn delay_map(
    config: &SpectrometerConfig,
    lambda_signal_nm: f64,
    lambda_pump_nm: f64,
) -> Result<f64> {
    config.validate()?;
    let omega_deg = omega_deg_from_pump(lambda_pump_nm);
    let detuning = crate::units::omega_from_wavelength(lambda_signal_nm) - omega_deg;
    let (lo, hi) = config.detuning_domain(omega_deg)?;
    if !(detuning >= lo && detuning <= hi) {
        let (wl_lo, wl_hi) = config.window_nm;
        return Err(Error::out_of_range(
            "signal wavelength (nm)",
            lambda_signal_nm,
            wl_lo,
            wl_hi,
        ));
    }
    Ok(config.delay_at(detuning, omega_deg))
}

/// Signal wavelength (nm) that produces the coincidence delay `delay_ps`.
pub fn inverse_delay_map(
    config: &SpectrometerConfig,
    delay_ps: f64,
    lambda_pump_nm: f64,
) -> Result<f64> {
    config.validate()?;
    let omega_deg = omega_deg_from_pump(lambda_pump_nm);
    let d = config.detuning_for_delay(delay_ps, omega_deg)?;
    Ok(wavelength_from_omega(omega_deg + d))
}

/// Spectral resolution (nm): effective jitter over `|DL|`, or the bin width
/// over `|DL|` when there is no jitter.
pub fn resolution(config: &SpectrometerConfig) -> f64 {
    let jitter = config.effective_jitter_fwhm_ps();
    let t = if jitter > 0.0 {
        jitter
    } else {
        config.bin_width_ps
    };
    t / config.medium_dl_ps_per_nm.abs()
}

/// Binned coincidence delays. Bin `k` is centered at `(first_bin + k)·bin_width`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeDelayHistogram {
    pub bin_width_ps: f64,
    pub first_bin: i64,
    pub counts: Vec<u64>,
    pub total_counts: u64,
    pub config: SpectrometerConfig,
    pub pump_wavelength_nm: f64,
    #[serde(default)]
    pub source_hash: String,
}

impl TimeDelayHistogram {
    pub fn bin_centers_ps(&self) -> Vec<f64> {
        (0..self.counts.len())
            .map(|k| (self.first_bin + k as i64) as f64 * self.bin_width_ps)
            .collect()
    }

    pub fn bin_edges_ps(&self) -> Vec<f64> {
        (0..=self.counts.len())
            .map(|k| ((self.first_bin + k as i64) as f64 - 0.5) * self.bin_width_ps)
            .collect()
    }

    pub fn lower_edge_ps(&self) -> f64 {
        (self.first_bin as f64 - 0.5) * self.bin_width_ps
    }

    pub fn upper_edge_ps(&self) -> f64 {
        (self.first_bin as f64 + self.counts.len() as f64 - 0.5) * self.bin_width_ps
    }

    fn bin_of(&self, delay_ps: f64) -> Option<usize> {
        let k = (delay_ps / self.bin_width_ps).round() as i64 - self.first_bin;
        (k >= 0 && (k as usize) < self.counts.len()).then_some(k as usize)
    }
}

/// Piecewise-linear density over the detuning grid with its exact inverse CDF.
struct InverseCdf<'a> {
    x: &'a [f64],
    y: &'a [f64],
    cumulative: Vec<f64>,
}

impl<'a> InverseCdf<'a> {
    fn new(x: &'a [f64], y: &'a [f64]) -> Result<Self> {
        let mut cumulative = Vec::with_capacity(x.len());
        let mut acc = 0.0;
        cumulative.push(0.0);
        for i in 0..x.len().saturating_sub(1) {
            acc += 0.5 * (y[i] + y[i + 1]) * (x[i + 1] - x[i]);
            cumulative.push(acc);
        }
        if !(acc > 0.0 && acc.is_finite()) {
            return Err(Error::ZeroWeight);
        }
        Ok(InverseCdf { x, y, cumulative })
    }

    fn total(&self) -> f64 {
        *self.cumulative.last().unwrap()
    }

    fn sample(&self, u: f64) -> f64 {
        let target = u * self.total();
        let cell = (self.cumulative.partition_point(|&c| c <= target) - 1).min(self.x.len() - 2);
        // skip zero-weight cells that share a cumulative value
        let r = target - self.cumulative[cell];
        let (a, b) = (self.y[cell], self.y[cell + 1]);
        let h = self.x[cell + 1] - self.x[cell];
        // solve a·s + (b − a)·s²/(2h) = r for s in [0, h]
        let disc = (a * a + 2.0 * (b - a) * r / h).max(0.0);
        let denom = a + disc.sqrt();
        let s = if denom > 0.0 { 2.0 * r / denom } else { 0.0 };
        self.x[cell] + s.clamp(0.0, h)
    }
}

/// Monte-Carlo measurement of a spectrum: draws `N ~ Poisson(pair_count)`
/// events, maps them to delays, adds jitter and background, and bins them.
pub fn sample_events(
    spectrum: &Interferogram,
    config: &SpectrometerConfig,
    lambda_pump_nm: f64,
) -> Result<TimeDelayHistogram> {
    sample_events_with(spectrum, config, lambda_pump_nm, Exec::default())
}

pub fn sample_events_with(
    spectrum: &Interferogram,
    config: &SpectrometerConfig,
    lambda_pump_nm: f64,
    exec: Exec,
) -> Result<TimeDelayHistogram> {
    config.validate()?;
    spectrum.validate()?;
    let omega_deg = omega_deg_from_pump(lambda_pump_nm);
    let (lo, hi) = config.detuning_domain(omega_deg)?;
    let d_first = spectrum.detuning[0];
    let d_last = *spectrum.detuning.last().unwrap();
    for d in [d_first, d_last] {
        if !(d >= lo && d <= hi) {
            let (wl_lo, wl_hi) = config.window_nm;
            return Err(Error::out_of_range(
                "spectrum wavelength (nm)",
                wavelength_from_omega(omega_deg + d),
                wl_lo,
                wl_hi,
            ));
        }
    }
    let cdf = if spectrum.len() == 1 {
        None
    } else {
        Some(InverseCdf::new(&spectrum.detuning, &spectrum.values)?)
    };
    if cdf.is_none() && spectrum.values[0] <= 0.0 {
        return Err(Error::ZeroWeight);
    }

    let t_a = config.delay_at(d_first, omega_deg);
    let t_b = config.delay_at(d_last, omega_deg);
    let (t_min, t_max) = (t_a.min(t_b), t_a.max(t_b));
    let bw = config.bin_width_ps;
    let first_bin = (t_min / bw).ceil() as i64;
    let last_bin = ((t_max / bw).floor() as i64).max(first_bin);
    let mut hist = TimeDelayHistogram {
        bin_width_ps: bw,
        first_bin,
        counts: vec![0; (last_bin - first_bin + 1) as usize],
        total_counts: 0,
        config: *config,
        pump_wavelength_nm: lambda_pump_nm,
        source_hash: spectrum.meta.setup_hash.clone(),
    };

    let mut master = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let n_events = Poisson::new(config.pair_count)
        .map_err(|e| Error::InvalidInput(format!("pair count: {e}")))?
        .sample(&mut master) as u64;

    let sigma = config.effective_jitter_fwhm_ps() / FWHM_PER_SIGMA;
    let (edge_lo, edge_hi) = (hist.lower_edge_ps(), hist.upper_edge_ps());
    let shard_len = |s: usize| {
        n_events / EVENT_SHARDS as u64 + u64::from((s as u64) < n_events % EVENT_SHARDS as u64)
    };

    let hist_ref = &hist;
    let shards = exec.map_indexed(EVENT_SHARDS, |s| {
        let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
        rng.set_stream(s as u64 + 1);
        let mut local = vec![0u64; hist_ref.counts.len()];
        for _ in 0..shard_len(s) {
            let delay = if config.dark_fraction > 0.0 && rng.random::<f64>() < config.dark_fraction
            {
                edge_lo + (edge_hi - edge_lo) * rng.random::<f64>()
            } else {
                let d = match &cdf {
                    Some(c) => c.sample(rng.random::<f64>()),
                    None => d_first,
                };
                let mut t = config.delay_at(d, omega_deg);
                if sigma > 0.0 {
                    let z: f64 = rng.sample(StandardNormal);
                    t += sigma * z;
                }
                t
            };
            if let Some(k) = hist_ref.bin_of(delay) {
                local[k] += 1;
            }
        }
        local
    });
    for local in shards {
        for (c, l) in hist.counts.iter_mut().zip(local) {
            *c += l;
        }
    }
    hist.total_counts = hist.counts.iter().sum();
    Ok(hist)
}

/// Maps histogram bins back to a spectral density over detuning.
///
/// Intensity is counts per rad/ps: `counts / bin_width · |dΔt/dδ|`, so a flat
/// spectral density stays flat. `sigma` is the Poisson uncertainty
/// `√counts` on the same scale, with empty bins carrying the one-count value.
pub fn histogram_to_spectrum(
    hist: &TimeDelayHistogram,
    lambda_pump_nm: f64,
) -> Result<Interferogram> {
    if hist.counts.is_empty() || hist.total_counts == 0 {
        return Err(Error::EmptyHistogram);
    }
    hist.config.validate()?;
    let omega_deg = omega_deg_from_pump(lambda_pump_nm);
    let mut rows = hist
        .bin_centers_ps()
        .into_iter()
        .zip(&hist.counts)
        .map(|(t, &c)| {
            let d = hist.config.detuning_for_delay(t, omega_deg)?;
            let jac = hist.config.delay_slope_at(d, omega_deg).abs() / hist.bin_width_ps;
            Ok((d, c as f64 * jac, (c.max(1) as f64).sqrt() * jac))
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out = Interferogram {
        omega_deg,
        detuning: rows.iter().map(|r| r.0).collect(),
        values: rows.iter().map(|r| r.1).collect(),
        sigma: Some(rows.iter().map(|r| r.2).collect()),
        meta: InterferogramMeta {
            setup_hash: hist.source_hash.clone(),
            with_fut: false,
            coherence_ok: true,
        },
    };
    out.validate()?;
    out.meta.with_fut = false;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthesis::{
        EnvelopeShape, FrequencyGrid, InterferometerSetup, InternalPhase, SpdcEnvelope,
    };
    use crate::units::thz_to_radps;
    use approx::assert_relative_eq;

    const PUMP: f64 = 780.2;

    fn cfg() -> SpectrometerConfig {
        SpectrometerConfig {
            rng_seed: 7,
            ..Default::default()
        }
    }

    // Conjugate wavelength from 1/λi = 1/λp − 1/λs, independent of the module.
    fn oracle_delay(dl: f64, ls: f64, lp: f64) -> f64 {
        let li = 1.0 / (1.0 / lp - 1.0 / ls);
        dl * (ls - li)
    }

    fn flat(half: f64, n: usize) -> Interferogram {
        let g = FrequencyGrid::symmetric(half, n).unwrap();
        Interferogram::new(omega_deg_from_pump(PUMP), g.detunings(), vec![1.0; n], None).unwrap()
    }

    #[test]
    fn delay_map_examples() {
        let c = cfg();
        assert_eq!(delay_map(&c, 2.0 * PUMP, PUMP).unwrap(), 0.0);
        let t = delay_map(&c, 1561.4, PUMP).unwrap();
        assert_relative_eq!(t, 679.564_772_145_358_8, max_relative = 1e-9);
        assert_relative_eq!(t, oracle_delay(340.0, 1561.4, PUMP), max_relative = 1e-9);
        let wdeg = omega_deg_from_pump(PUMP);
        for d in [0.1, 3.0, 25.0] {
            assert_eq!(c.delay_at(-d, wdeg), -c.delay_at(d, wdeg));
        }
        assert!(delay_map(&c, 1300.0, PUMP).is_err());
    }

    #[test]
    fn inverse_delay_examples() {
        let c = cfg();
        assert_relative_eq!(
            inverse_delay_map(&c, 0.0, PUMP).unwrap(),
            2.0 * PUMP,
            max_relative = 1e-15
        );
        let l = inverse_delay_map(&c, 679.564_772_145_358_8, PUMP).unwrap();
        assert_relative_eq!(l, 1561.4, max_relative = 1e-12);
        assert!(inverse_delay_map(&c, 1e7, PUMP).is_err());
    }

    #[test]
    fn inverse_round_trip_random_delays() {
        let c = cfg();
        let wdeg = omega_deg_from_pump(PUMP);
        let (lo, hi) = c.detuning_domain(wdeg).unwrap();
        let (ta, tb) = (c.delay_at(lo, wdeg), c.delay_at(hi, wdeg));
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for _ in 0..100 {
            let t = ta.min(tb) + (ta - tb).abs() * rng.random::<f64>();
            let l = inverse_delay_map(&c, t, PUMP).unwrap();
            let back = delay_map(&c, l, PUMP).unwrap();
            assert!((back - t).abs() < 1e-9, "{t} {back}");
        }
    }

    #[test]
    fn delay_monotone_over_window() {
        let c = cfg();
        let mut prev = f64::NEG_INFINITY;
        let mut l = 1450.0;
        while l < 1680.0 {
            let t = delay_map(&c, l, PUMP).unwrap();
            assert!(t > prev);
            prev = t;
            l += 0.5;
        }
        // negative DL flips the orientation
        let neg = SpectrometerConfig {
            medium_dl_ps_per_nm: -340.0,
            ..cfg()
        };
        assert_relative_eq!(
            delay_map(&neg, 1561.4, PUMP).unwrap(),
            -delay_map(&cfg(), 1561.4, PUMP).unwrap()
        );
        let t = delay_map(&neg, 1570.0, PUMP).unwrap();
        assert_relative_eq!(
            inverse_delay_map(&neg, t, PUMP).unwrap(),
            1570.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn resolution_examples() {
        let c = cfg();
        assert_relative_eq!(resolution(&c), 256.0 / 340.0, max_relative = 1e-15);
        assert!((resolution(&c) - 0.753).abs() < 5e-4);
        let zero = SpectrometerConfig {
            jitter_fwhm_ps: 0.0,
            ..c
        };
        assert_relative_eq!(resolution(&zero), c.bin_width_ps / 340.0);
        let doubled = SpectrometerConfig {
            medium_dl_ps_per_nm: 680.0,
            ..c
        };
        assert_relative_eq!(
            resolution(&doubled),
            0.5 * resolution(&c),
            max_relative = 1e-15
        );
        let per_det = SpectrometerConfig {
            jitter_mode: JitterMode::PerDetector,
            ..c
        };
        assert_relative_eq!(
            resolution(&per_det),
            2f64.sqrt() * resolution(&c),
            max_relative = 1e-15
        );
    }

    #[test]
    fn config_validation() {
        assert!(SpectrometerConfig {
            medium_dl_ps_per_nm: 0.0,
            ..cfg()
        }
        .validate()
        .is_err());
        assert!(SpectrometerConfig {
            jitter_fwhm_ps: -1.0,
            ..cfg()
        }
        .validate()
        .is_err());
        assert!(SpectrometerConfig {
            bin_width_ps: 0.0,
            ..cfg()
        }
        .validate()
        .is_err());
        assert!(SpectrometerConfig {
            pair_count: 0.0,
            ..cfg()
        }
        .validate()
        .is_err());
        assert!(SpectrometerConfig {
            dark_fraction: 1.0,
            ..cfg()
        }
        .validate()
        .is_err());
    }

    #[test]
    fn total_counts_track_pair_count() {
        let s = flat(20.0, 101);
        let c = SpectrometerConfig {
            pair_count: 10_000.0,
            jitter_fwhm_ps: 0.0,
            ..cfg()
        };
        for seed in 0..100 {
            let h = sample_events(
                &s,
                &SpectrometerConfig {
                    rng_seed: seed,
                    ..c
                },
                PUMP,
            )
            .unwrap();
            assert_eq!(h.total_counts, h.counts.iter().sum::<u64>());
            assert!(
                (h.total_counts as f64 - 1e4).abs() < 5.0 * 100.0,
                "{}",
                h.total_counts
            );
        }
    }

    #[test]
    fn delta_like_spectrum_lands_in_two_bins() {
        let g = FrequencyGrid::symmetric(20.0, 4001).unwrap();
        let mut v = vec![0.0; 4001];
        v[2600] = 1.0;
        let s = Interferogram::new(omega_deg_from_pump(PUMP), g.detunings(), v, None).unwrap();
        let c = SpectrometerConfig {
            jitter_fwhm_ps: 0.0,
            bin_width_ps: 32.0,
            pair_count: 5e4,
            ..cfg()
        };
        let h = sample_events(&s, &c, PUMP).unwrap();
        let hit: Vec<usize> = (0..h.counts.len()).filter(|&k| h.counts[k] > 0).collect();
        assert!(!hit.is_empty() && hit.len() <= 2, "{hit:?}");
        assert!(hit.len() < 2 || hit[1] == hit[0] + 1);
    }

    #[test]
    fn flat_spectrum_gives_uniform_histogram() {
        let s = flat(30.0, 3001);
        let c = SpectrometerConfig {
            jitter_fwhm_ps: 0.0,
            bin_width_ps: 64.0,
            pair_count: 2e6,
            ..cfg()
        };
        let h = sample_events(&s, &c, PUMP).unwrap();
        // interior bins only; edge bins are partially covered by the window
        let inner = &h.counts[1..h.counts.len() - 1];
        let mean = inner.iter().sum::<u64>() as f64 / inner.len() as f64;
        let chi2: f64 = inner
            .iter()
            .map(|&c| (c as f64 - mean).powi(2) / mean)
            .sum();
        for &c in inner {
            assert!((c as f64 - mean).abs() < 4.0 * mean.sqrt(), "{c} vs {mean}");
        }
        // dof ~ 820; chi2 99.9th percentile ≈ dof + 3.09·sqrt(2·dof)
        let dof = (inner.len() - 1) as f64;
        assert!(
            chi2 < dof + 3.09 * (2.0 * dof).sqrt(),
            "chi2 {chi2} dof {dof}"
        );
    }

    #[test]
    fn seed_determinism_and_exec_equivalence() {
        let s = flat(30.0, 601);
        let c = SpectrometerConfig {
            pair_count: 2e5,
            dark_fraction: 0.05,
            ..cfg()
        };
        let a = sample_events_with(&s, &c, PUMP, Exec::Sequential).unwrap();
        let b = sample_events_with(&s, &c, PUMP, Exec::Parallel).unwrap();
        let c2 = sample_events_with(&s, &c, PUMP, Exec::Parallel).unwrap();
        assert_eq!(a, b);
        assert_eq!(b, c2);
        let other = sample_events(&s, &SpectrometerConfig { rng_seed: 8, ..c }, PUMP).unwrap();
        assert_ne!(a.counts, other.counts);
    }

    #[test]
    fn zero_weight_and_out_of_window_spectra() {
        let g = FrequencyGrid::symmetric(10.0, 11).unwrap();
        let s = Interferogram::new(
            omega_deg_from_pump(PUMP),
            g.detunings(),
            vec![0.0; 11],
            None,
        )
        .unwrap();
        assert!(matches!(
            sample_events(&s, &cfg(), PUMP),
            Err(Error::ZeroWeight)
        ));
        let wide = flat(200.0, 11);
        assert!(matches!(
            sample_events(&wide, &cfg(), PUMP),
            Err(Error::OutOfRange { .. })
        ));
    }

    #[test]
    fn flat_spectrum_recovers_flat() {
        let s = flat(30.0, 3001);
        let c = SpectrometerConfig {
            jitter_fwhm_ps: 0.0,
            bin_width_ps: 64.0,
            pair_count: 4e6,
            ..cfg()
        };
        let h = sample_events(&s, &c, PUMP).unwrap();
        let r = histogram_to_spectrum(&h, PUMP).unwrap();
        let n = r.len();
        let inner = &r.values[1..n - 1];
        let mean = inner.iter().sum::<f64>() / inner.len() as f64;
        // expected density: counts per rad/ps = N / (60 rad/ps)
        assert_relative_eq!(mean, h.total_counts as f64 / 60.0, max_relative = 0.01);
        let sig = r.sigma.as_ref().unwrap();
        for (v, s) in inner.iter().zip(&sig[1..n - 1]) {
            assert!((v - mean).abs() < 4.5 * s, "{v} {mean} {s}");
        }
    }

    #[test]
    fn single_bin_histogram() {
        let c = cfg();
        let h = TimeDelayHistogram {
            bin_width_ps: 16.0,
            first_bin: 42,
            counts: vec![10],
            total_counts: 10,
            config: c,
            pump_wavelength_nm: PUMP,
            source_hash: String::new(),
        };
        let r = histogram_to_spectrum(&h, PUMP).unwrap();
        assert_eq!(r.len(), 1);
        let l = r.wavelengths_nm()[0];
        assert_relative_eq!(
            delay_map(&c, l, PUMP).unwrap(),
            42.0 * 16.0,
            max_relative = 1e-9
        );
        let empty = TimeDelayHistogram {
            counts: vec![0, 0],
            total_counts: 0,
            ..h
        };
        assert!(matches!(
            histogram_to_spectrum(&empty, PUMP),
            Err(Error::EmptyHistogram)
        ));
    }

    fn interferogram_setup() -> InterferometerSetup {
        let wdeg = omega_deg_from_pump(PUMP);
        let env =
            SpdcEnvelope::new(wdeg, thz_to_radps(12.0), EnvelopeShape::Gaussian, 1.0).unwrap();
        InterferometerSetup {
            pump_wavelength_nm: PUMP,
            source1: env,
            source2: env,
            internal: InternalPhase {
                segments: vec![],
                even_poly: vec![0.0, 0.12],
            },
            fut: None,
            pump_linewidth_mhz: 0.1,
            path_mismatch_m: 0.03,
        }
    }

    #[test]
    fn noiseless_round_trip_central_window() {
        let setup = interferogram_setup();
        let grid = FrequencyGrid::symmetric(40.0, 8001).unwrap();
        let s = crate::synthesis::synthesize(&setup, &grid).unwrap();
        let c = SpectrometerConfig {
            jitter_fwhm_ps: 0.0,
            bin_width_ps: 16.0,
            pair_count: 1e8,
            ..cfg()
        };
        let h = sample_events(&s, &c, PUMP).unwrap();
        let r = histogram_to_spectrum(&h, PUMP).unwrap();
        let scale = h.total_counts as f64 / s.integral();
        let (mut num, mut den) = (0.0, 0.0);
        for (d, v) in r.detuning.iter().zip(&r.values) {
            if d.abs() > 0.8 * 40.0 {
                continue;
            }
            let truth = scale * exact(&setup, *d);
            num += (v - truth).powi(2);
            den += truth * truth;
        }
        let rel_rms = (num / den).sqrt();
        assert!(rel_rms < 0.01, "relative RMS {rel_rms}");
    }

    fn exact(setup: &InterferometerSetup, d: f64) -> f64 {
        let f = setup.source1.at_detuning(d);
        2.0 * f
            * (1.0
                + crate::synthesis::total_phase_detuning(setup, d)
                    .unwrap()
                    .cos())
    }

    // Fringe contrast of the recovered spectrum relative to the envelope sum.
    fn contrast(r: &Interferogram, setup: &InterferometerSetup, scale: f64) -> f64 {
        let mut acc = 0.0;
        let mut n = 0.0;
        for (d, v) in r.detuning.iter().zip(&r.values) {
            if d.abs() > 25.0 {
                continue;
            }
            let f = 2.0 * setup.source1.at_detuning(*d) * scale;
            acc += (v / f - 1.0).powi(2);
            n += 1.0;
        }
        (2.0 * acc / n).sqrt()
    }

    #[test]
    fn jitter_reduces_visibility_monotonically() {
        let setup = interferogram_setup();
        let grid = FrequencyGrid::symmetric(40.0, 8001).unwrap();
        let s = crate::synthesis::synthesize(&setup, &grid).unwrap();
        let mut prev = f64::INFINITY;
        for jitter in [0.0, 128.0, 256.0, 512.0] {
            let c = SpectrometerConfig {
                jitter_fwhm_ps: jitter,
                pair_count: 4e6,
                ..cfg()
            };
            let h = sample_events(&s, &c, PUMP).unwrap();
            let r = histogram_to_spectrum(&h, PUMP).unwrap();
            let v = contrast(&r, &setup, h.total_counts as f64 / s.integral());
            assert!(v < prev, "jitter {jitter}: {v} !< {prev}");
            prev = v;
        }
    }

    #[test]
    fn two_lines_two_resolutions_apart_are_resolved() {
        let c = SpectrometerConfig {
            pair_count: 2e5,
            bin_width_ps: 16.0,
            ..cfg()
        };
        let wdeg = omega_deg_from_pump(PUMP);
        let l0 = 2.0 * PUMP + 10.0;
        let l1 = l0 + 2.0 * resolution(&c);
        let g = FrequencyGrid::symmetric(30.0, 60001).unwrap();
        let det = g.detunings();
        let mut v = vec![0.0; det.len()];
        for l in [l0, l1] {
            let d = crate::units::omega_from_wavelength(l) - wdeg;
            let i = det.partition_point(|x| *x < d);
            v[i] = 1.0;
        }
        let s = Interferogram::new(wdeg, det, v, None).unwrap();
        let h = sample_events(&s, &c, PUMP).unwrap();
        let t0 = delay_map(&c, l0, PUMP).unwrap();
        let t1 = delay_map(&c, l1, PUMP).unwrap();
        let at = |t: f64| {
            let k = h.bin_of(t).unwrap();
            // average three bins around the point
            (h.counts[k - 1] + h.counts[k] + h.counts[k + 1]) as f64 / 3.0
        };
        let valley = at(0.5 * (t0 + t1));
        let peak = at(t0).min(at(t1));
        assert!(valley < 0.8 * peak, "valley {valley} peak {peak}");
    }
}
