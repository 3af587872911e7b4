//! Property checks shared by the integration tests and the acceptance driver.
//! Each returns `Err` with a description of the first counterexample.

#![allow(dead_code)]

use biphoton_dispersion::dispersion::{
    d_from_k2, k2_from_d, phi_fut, phi_fut_detuning, DispersionModel, FiberSegment,
};
use biphoton_dispersion::extraction::{
    extract_dispersion, Envelopes, Extraction, ExtractionInputs, ExtractionOptions,
};
use biphoton_dispersion::presets::{reference_grid, reference_setup, PUMP_TYPE0_NM};
use biphoton_dispersion::spectrometer::{
    delay_map, histogram_to_spectrum, inverse_delay_map, sample_events_with, SpectrometerConfig,
};
use biphoton_dispersion::synthesis::{
    synthesize, total_phase_detuning, visibility_from_intensities, Interferogram,
};
use biphoton_dispersion::units::{omega_deg_from_pump, omega_from_wavelength};
use biphoton_dispersion::Exec;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

pub type Check = Result<(), String>;

fn runner(cases: u32) -> TestRunner {
    let config = Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha))
}

fn model() -> impl Strategy<Value = DispersionModel> {
    prop_oneof![
        (1250.0..1400.0f64, 0.05..0.1f64)
            .prop_map(|(l0, s0)| DispersionModel::spec_sheet(l0, s0).unwrap()),
        (-30.0..30.0f64, -0.2..0.2f64, -1e-3..1e-3f64).prop_map(|(k2, k3, k4)| {
            DispersionModel::taylor_beta(omega_from_wavelength(1560.0), k2, k3, k4).unwrap()
        }),
        (1.0..20.0f64, 10.0..20.0f64).prop_map(|(d0, d1)| {
            DispersionModel::tabulated(vec![(1450.0, d0), (1560.0, d1), (1650.0, d1 + 4.0)])
                .unwrap()
        }),
    ]
}

fn pump() -> impl Strategy<Value = f64> {
    760.0..790.0f64
}

/// `phi_fut` is even in the detuning, bit for bit.
pub fn phi_fut_even() -> Check {
    let strat = (model(), 0.0..200.0f64, pump(), 0.0..80.0f64, -5.0..5.0f64);
    runner(500)
        .run(&strat, |(model, len, p, d, off)| {
            let seg = FiberSegment {
                label: "fut".into(),
                length_m: len,
                model,
                offset_rad: off,
            };
            let wp = 2.0 * omega_deg_from_pump(p);
            let wd = 0.5 * wp;
            let a = phi_fut_detuning(&seg, d, wd, true).unwrap();
            let b = phi_fut_detuning(&seg, -d, wd, true).unwrap();
            prop_assert_eq!(a, b);
            let c = phi_fut(&seg, wd + d, wp, false).unwrap();
            let e = phi_fut(&seg, wd - d, wp, false).unwrap();
            // the two absolute frequencies round differently, so compare relative
            prop_assert!((c - e).abs() <= 1e-9 * c.abs().max(1e-9), "{} vs {}", c, e);
            Ok(())
        })
        .map_err(|e| e.to_string())
}

/// Phase is exactly linear in the segment length.
pub fn phi_fut_linear_in_length() -> Check {
    let strat = (model(), 0.1..100.0f64, 0.0..60.0f64);
    runner(300)
        .run(&strat, |(model, len, d)| {
            let wd = omega_deg_from_pump(PUMP_TYPE0_NM);
            let seg = |l: f64| FiberSegment::new("fut", l, model.clone()).unwrap();
            let one = phi_fut_detuning(&seg(len), d, wd, false).unwrap();
            let three = phi_fut_detuning(&seg(3.0 * len), d, wd, false).unwrap();
            prop_assert!((three - 3.0 * one).abs() <= 1e-12 * three.abs().max(1e-300));
            Ok(())
        })
        .map_err(|e| e.to_string())
}

/// `D ↔ k2` at fixed wavelength.
pub fn d_k2_bijection() -> Check {
    runner(1000)
        .run(&(-200.0..200.0f64, 1200.0..1700.0f64), |(d, l)| {
            let back = d_from_k2(k2_from_d(d, l), l);
            prop_assert!((back - d).abs() <= 1e-12 * d.abs().max(1e-12));
            Ok(())
        })
        .map_err(|e| e.to_string())
}

/// Identical sources reduce the interferogram to `2F(1 + cos Φ)`.
pub fn identical_source_reduction() -> Check {
    runner(20)
        .run(&(pump(), 0.0..20.0f64, 0.2..2.0f64), |(p, len, peak)| {
            let mut setup = reference_setup(p, len).unwrap();
            setup.source1.peak = peak;
            setup.source2 = setup.source1;
            let s = synthesize(&setup, &reference_grid()).unwrap();
            for (d, v) in s.detuning.iter().zip(&s.values) {
                let f = setup.source1.at_detuning(*d);
                let expect = 2.0 * f * (1.0 + total_phase_detuning(&setup, *d).unwrap().cos());
                prop_assert!(
                    (v - expect).abs() <= 1e-12 * (2.0 * f).max(1e-300),
                    "δ {}: {} vs {}",
                    d,
                    v,
                    expect
                );
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

/// Symmetric setups give spectra even about degeneracy.
pub fn interferogram_even() -> Check {
    runner(20)
        .run(&(pump(), 0.0..20.0f64), |(p, len)| {
            let s = synthesize(&reference_setup(p, len).unwrap(), &reference_grid()).unwrap();
            let n = s.len();
            let peak = s.values.iter().cloned().fold(0.0, f64::max);
            for i in 0..n / 2 {
                prop_assert!((s.values[i] - s.values[n - 1 - i]).abs() <= 1e-12 * peak);
            }
            Ok(())
        })
        .map_err(|e| e.to_string())
}

/// Delay map is strictly monotone and its inverse recovers the wavelength.
pub fn delay_map_bijection() -> Check {
    let strat = (
        1500.0..1620.0f64,
        prop_oneof![Just(340.0), Just(-340.0), 50.0..1000.0f64],
    );
    runner(500)
        .run(&strat, |(l, dl)| {
            let sc = SpectrometerConfig {
                medium_dl_ps_per_nm: dl,
                ..SpectrometerConfig::default()
            };
            let t = delay_map(&sc, l, PUMP_TYPE0_NM).unwrap();
            let back = inverse_delay_map(&sc, t, PUMP_TYPE0_NM).unwrap();
            let t2 = delay_map(&sc, back, PUMP_TYPE0_NM).unwrap();
            prop_assert!((t2 - t).abs() <= 1e-9, "{} vs {}", t, t2);
            let t_up = delay_map(&sc, l + 0.01, PUMP_TYPE0_NM).unwrap();
            prop_assert!((t_up - t) * dl.signum() > 0.0);
            Ok(())
        })
        .map_err(|e| e.to_string())
}

/// Same seed gives the same histogram for both execution strategies;
/// another seed does not.
pub fn seed_determinism() -> Check {
    let s = synthesize(
        &reference_setup(PUMP_TYPE0_NM, 5.0).unwrap(),
        &reference_grid(),
    )
    .unwrap();
    runner(4)
        .run(&any::<u64>(), |seed| {
            let sc = SpectrometerConfig {
                rng_seed: seed,
                pair_count: 2e5,
                ..SpectrometerConfig::default()
            };
            let a = sample_events_with(&s, &sc, PUMP_TYPE0_NM, Exec::Sequential).unwrap();
            let b = sample_events_with(&s, &sc, PUMP_TYPE0_NM, Exec::Parallel).unwrap();
            let c = sample_events_with(&s, &sc, PUMP_TYPE0_NM, Exec::Parallel).unwrap();
            prop_assert!(a == b && b == c);
            let other = SpectrometerConfig {
                rng_seed: seed.wrapping_add(1),
                ..sc
            };
            let d = sample_events_with(&s, &other, PUMP_TYPE0_NM, Exec::Parallel).unwrap();
            prop_assert!(d.counts != a.counts);
            Ok(())
        })
        .map_err(|e| e.to_string())
}

/// Two-source visibility stays in `[0, 1]`.
pub fn visibility_bounds() -> Check {
    runner(2000)
        .run(&(0.0..1e6f64, 0.0..1e6f64), |(f1, f2)| {
            prop_assume!(f1 + f2 > 0.0);
            let v = visibility_from_intensities(f1, f2).unwrap();
            prop_assert!((0.0..=1.0).contains(&v), "{}", v);
            Ok(())
        })
        .map_err(|e| e.to_string())
}

pub fn inputs(
    pump: f64,
    with_fut: Interferogram,
    without_fut: Interferogram,
    length_m: f64,
) -> ExtractionInputs {
    let setup = reference_setup(pump, length_m).unwrap();
    ExtractionInputs {
        with_fut,
        without_fut,
        envelopes: Envelopes::Model(setup.source1, setup.source2),
        length_m,
        options: ExtractionOptions::default(),
    }
}

/// Noiseless extraction for the reference setup at `pump`.
pub fn noiseless(pump: f64, length_m: f64) -> Extraction {
    let setup = reference_setup(pump, length_m).unwrap();
    let grid = reference_grid();
    let with = synthesize(&setup, &grid).unwrap();
    let without = synthesize(&setup.without_fut(), &grid).unwrap();
    extract_dispersion(&inputs(pump, with, without, length_m)).unwrap()
}

/// Doubling the FUT length doubles the curvature and leaves `D` unchanged.
pub fn length_scaling() -> Check {
    for len in [1.0, 2.5, 5.0, 8.0] {
        let a = noiseless(PUMP_TYPE0_NM, len);
        let b = noiseless(PUMP_TYPE0_NM, 2.0 * len);
        let ratio = b.difference.delta_c2 / a.difference.delta_c2;
        if (ratio - 2.0).abs() > 1e-4 {
            return Err(format!("L = {len} m: Δc2 ratio {ratio}"));
        }
        let (da, db) = (a.estimate.unwrap().d, b.estimate.unwrap().d);
        if (da - db).abs() > 1e-4 * da.abs() {
            return Err(format!("L = {len} m: D {da} vs {db}"));
        }
    }
    Ok(())
}

/// The pointwise FUT phase has no odd part beyond its noise expectation.
pub fn extracted_phase_even() -> Check {
    for len in [2.0, 5.0, 10.0] {
        let x = noiseless(PUMP_TYPE0_NM, len);
        let d = &x.diagnostics;
        let (Some(a), Some(e)) = (d.asymmetry, d.asymmetry_expected) else {
            return Err(format!("L = {len} m: no pointwise trace"));
        };
        if a > 3.0 * e {
            return Err(format!("L = {len} m: asymmetry {a:.3e} > 3 × {e:.3e}"));
        }
    }
    Ok(())
}

/// Fitted fringe visibility of a measured 5 m spectrum for each jitter FWHM.
pub fn visibility_vs_jitter(jitters: &[f64], pairs: f64, seed: u64) -> Vec<f64> {
    let setup = reference_setup(PUMP_TYPE0_NM, 5.0).unwrap();
    let grid = reference_grid();
    let with = synthesize(&setup, &grid).unwrap();
    let without = synthesize(&setup.without_fut(), &grid).unwrap();
    jitters
        .iter()
        .map(|&j| {
            let sc = SpectrometerConfig {
                jitter_fwhm_ps: j,
                pair_count: pairs,
                rng_seed: seed,
                ..SpectrometerConfig::default()
            };
            let m = |s: &Interferogram| {
                let h = sample_events_with(s, &sc, PUMP_TYPE0_NM, Exec::default()).unwrap();
                histogram_to_spectrum(&h, PUMP_TYPE0_NM).unwrap()
            };
            let x = extract_dispersion(&inputs(PUMP_TYPE0_NM, m(&with), m(&without), 5.0)).unwrap();
            x.diagnostics.visibility_with.unwrap()
        })
        .collect()
}

/// Visibility degrades monotonically as the timing jitter grows.
pub fn jitter_monotone() -> Check {
    let v = visibility_vs_jitter(&[0.0, 128.0, 256.0, 512.0], 4e6, 7);
    if v.windows(2).all(|w| w[1] < w[0]) && v.iter().all(|x| (0.0..=1.05).contains(x)) {
        Ok(())
    } else {
        Err(format!("visibilities {v:?}"))
    }
}

pub type Property = (&'static str, fn() -> Check);

pub const PROPERTIES: &[Property] = &[
    ("phi_fut even symmetry", phi_fut_even),
    ("phi_fut linear in length", phi_fut_linear_in_length),
    ("D <-> k2 bijection", d_k2_bijection),
    ("identical-source reduction", identical_source_reduction),
    ("interferogram even symmetry", interferogram_even),
    ("delay map bijection", delay_map_bijection),
    ("seed determinism", seed_determinism),
    ("visibility bounds", visibility_bounds),
    ("length scaling of D", length_scaling),
    ("extracted phase even symmetry", extracted_phase_even),
    ("jitter-monotone visibility", jitter_monotone),
];
