//! Weighted Levenberg–Marquardt fit of the raised-cosine fringe model
//!
//! `n(δ) ≈ A·(1 + V·cos(c0 + c2·δ² + c4·δ⁴)) − 1`.
//!
//! For a perfectly normalized spectrum `A = V = 1`. `A` absorbs a residual
//! scale error between measurement and envelopes; `V` absorbs fringe washout.
//! The intensity only fixes `Φ` up to its sign, so the fit reports the
//! solution whose curvature has the requested sign.

use std::f64::consts::PI;

use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use super::normalize::NormalizedSpectrum;
use crate::error::{Error, Result};

const NPAR: usize = 5;
type Mat = SMatrix<f64, NPAR, NPAR>;
type Vector = SVector<f64, NPAR>;

const I_C0: usize = 0;
const I_C2: usize = 1;
const I_C4: usize = 2;
const I_V: usize = 3;
const I_A: usize = 4;

const MIN_POINTS: usize = 50;
const MIN_FRINGES: f64 = 8.0;
const MAX_ITER: usize = 500;
const VISIBILITY_MAX: f64 = 1.05;

/// Sign convention for the fitted phase curvature.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurvatureSign {
    /// `c2 ≥ 0`: anomalous-dispersion fiber (`k2 < 0`) in the middle section.
    #[default]
    Positive,
    Negative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitOptions {
    #[serde(default = "default_true")]
    pub fit_c4: bool,
    #[serde(default)]
    pub curvature_sign: CurvatureSign,
    /// Extra starting points tried around the fringe-ladder seed.
    #[serde(default = "default_restarts")]
    pub max_restarts: usize,
}

fn default_true() -> bool {
    true
}

fn default_restarts() -> usize {
    11
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            fit_c4: true,
            curvature_sign: CurvatureSign::Positive,
            max_restarts: default_restarts(),
        }
    }
}

/// Detuning interval (rad/ps) used by the fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitWindow {
    pub min: f64,
    pub max: f64,
}

impl FitWindow {
    pub fn symmetric(half_width: f64) -> Self {
        FitWindow {
            min: -half_width,
            max: half_width,
        }
    }

    pub fn contains(&self, d: f64) -> bool {
        d >= self.min && d <= self.max
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RaisedCosineFit {
    /// rad
    pub c0: f64,
    /// rad·ps²
    pub c2: f64,
    /// rad·ps⁴
    pub c4: f64,
    pub visibility: f64,
    pub amplitude: f64,
    /// Covariance of `(c0, c2, c4, V, A)`.
    pub covariance: [[f64; NPAR]; NPAR],
    pub residual_rms: f64,
    pub reduced_chi2: f64,
    pub window: FitWindow,
    pub points: usize,
    pub weighted: bool,
    pub fit_c4: bool,
    pub iterations: usize,
    pub starts: usize,
}

impl RaisedCosineFit {
    pub fn phase_at(&self, detuning: f64) -> f64 {
        let d2 = detuning * detuning;
        self.c0 + self.c2 * d2 + self.c4 * d2 * d2
    }

    pub fn model_at(&self, detuning: f64) -> f64 {
        self.amplitude * (1.0 + self.visibility * self.phase_at(detuning).cos()) - 1.0
    }

    pub fn sigma_c2(&self) -> f64 {
        self.covariance[I_C2][I_C2].sqrt()
    }

    pub fn sigma_c4(&self) -> f64 {
        self.covariance[I_C4][I_C4].sqrt()
    }

    /// Covariance block of `(c2, c4)`.
    pub fn curvature_covariance(&self) -> [[f64; 2]; 2] {
        let c = &self.covariance;
        [
            [c[I_C2][I_C2], c[I_C2][I_C4]],
            [c[I_C4][I_C2], c[I_C4][I_C4]],
        ]
    }
}

struct Problem {
    /// detuning scaled by `scale` into [−1, 1]
    u: Vec<f64>,
    n: Vec<f64>,
    w: Vec<f64>,
    free: [bool; NPAR],
}

fn model_and_grad(p: &Vector, u: f64) -> (f64, [f64; NPAR]) {
    let u2 = u * u;
    let u4 = u2 * u2;
    let phi = p[I_C0] + p[I_C2] * u2 + p[I_C4] * u4;
    let (s, c) = phi.sin_cos();
    let (v, a) = (p[I_V], p[I_A]);
    let m = a * (1.0 + v * c) - 1.0;
    let ds = -a * v * s;
    (m, [ds, ds * u2, ds * u4, a * c, 1.0 + v * c])
}

impl Problem {
    fn cost(&self, p: &Vector) -> f64 {
        self.u
            .iter()
            .zip(&self.n)
            .zip(&self.w)
            .map(|((u, n), w)| {
                let r = w * (n - model_and_grad(p, *u).0);
                r * r
            })
            .sum()
    }

    fn normal_equations(&self, p: &Vector) -> (Mat, Vector, f64) {
        let mut jtj = Mat::zeros();
        let mut jtr = Vector::zeros();
        let mut cost = 0.0;
        for ((u, n), w) in self.u.iter().zip(&self.n).zip(&self.w) {
            let (m, g) = model_and_grad(p, *u);
            let r = w * (n - m);
            cost += r * r;
            let gw = Vector::from_fn(|i, _| if self.free[i] { w * g[i] } else { 0.0 });
            jtj += gw * gw.transpose();
            jtr += gw * r;
        }
        for i in 0..NPAR {
            if !self.free[i] {
                jtj[(i, i)] = 1.0;
            }
        }
        (jtj, jtr, cost)
    }

    fn levenberg_marquardt(&self, start: Vector) -> (Vector, f64, usize) {
        let mut p = start;
        let mut lambda = 1e-3;
        let (mut jtj, mut jtr, mut cost) = self.normal_equations(&p);
        let mut iter = 0;
        while iter < MAX_ITER {
            iter += 1;
            let mut accepted = false;
            for _ in 0..30 {
                let mut h = jtj;
                for i in 0..NPAR {
                    h[(i, i)] += lambda * jtj[(i, i)].max(1e-12);
                }
                let Some(step) = h.cholesky().map(|c| c.solve(&jtr)) else {
                    lambda *= 4.0;
                    continue;
                };
                let trial = p + step;
                let trial_cost = self.cost(&trial);
                if trial_cost.is_finite() && trial_cost < cost {
                    let improvement = cost - trial_cost;
                    p = trial;
                    (jtj, jtr, cost) = self.normal_equations(&p);
                    lambda = (lambda / 3.0).max(1e-15);
                    accepted = true;
                    if improvement <= 1e-13 * cost || step.norm() <= 1e-14 * (1.0 + p.norm()) {
                        return (p, cost, iter);
                    }
                    break;
                }
                lambda *= 4.0;
            }
            if !accepted {
                break;
            }
        }
        (p, cost, iter)
    }
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let j = (i + 1).min(sorted.len() - 1);
    sorted[i] + (sorted[j] - sorted[i]) * (pos - i as f64)
}

struct Seed {
    c0: f64,
    c2: f64,
    visibility: f64,
    amplitude: f64,
}

/// Fringe-ladder initialization: locate fringe minima outward from `δ = 0`,
/// assign the k-th one `Φ = (2k − 1)π` and regress `Φ` on `δ²`.
fn ladder_seed(detuning: &[f64], n: &[f64]) -> Seed {
    let mut sorted = n.to_vec();
    sorted.sort_by(f64::total_cmp);
    let center = percentile(&sorted, 0.5);
    let amp = (0.5 * (percentile(&sorted, 0.95) - percentile(&sorted, 0.05))).max(1e-6);

    let mut folded: Vec<(f64, f64)> = detuning
        .iter()
        .map(|d| d.abs())
        .zip(n.iter().cloned())
        .collect();
    folded.sort_by(|a, b| a.0.total_cmp(&b.0));
    // light smoothing over neighbours in |δ| (merges the two half-axes)
    let smooth: Vec<f64> = (0..folded.len())
        .map(|i| {
            let lo = i.saturating_sub(1);
            let hi = (i + 1).min(folded.len() - 1);
            folded[lo..=hi].iter().map(|p| p.1).sum::<f64>() / (hi - lo + 1) as f64
        })
        .collect();

    let lo_th = center - 0.4 * amp;
    let hi_th = center + 0.4 * amp;
    let mut minima = Vec::new();
    let mut below = smooth[0] < lo_th;
    let mut best = (smooth[0], folded[0].0);
    for (i, &v) in smooth.iter().enumerate() {
        if below {
            if v < best.0 {
                best = (v, folded[i].0);
            }
            if v > hi_th {
                minima.push(best.1);
                below = false;
            }
        } else if v < lo_th {
            below = true;
            best = (v, folded[i].0);
        }
    }
    if below {
        minima.push(best.1);
    }

    let amplitude = 1.0 + center;
    let visibility = (amp / amplitude.max(1e-6)).clamp(0.05, 1.0);
    let c0_from_center = |value: f64| ((value - center) / amp).clamp(-1.0, 1.0).acos();
    let (c0, c2) = match minima.len() {
        0 => (c0_from_center(smooth[0]), 0.0),
        1 => {
            let c0 = c0_from_center(smooth[0]);
            let d2 = minima[0] * minima[0];
            (
                c0,
                if d2 > 0.0 {
                    (PI - c0).max(0.0) / d2
                } else {
                    0.0
                },
            )
        }
        _ => {
            let xs: Vec<f64> = minima.iter().map(|d| d * d).collect();
            let ys: Vec<f64> = (1..=minima.len())
                .map(|k| (2 * k - 1) as f64 * PI)
                .collect();
            let k = xs.len() as f64;
            let mx = xs.iter().sum::<f64>() / k;
            let my = ys.iter().sum::<f64>() / k;
            let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
            let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
            let slope = sxy / sxx;
            (my - slope * mx, slope)
        }
    };
    Seed {
        c0,
        c2,
        visibility,
        amplitude,
    }
}

fn wrap_phase(x: f64) -> f64 {
    let y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y - 2.0 * PI
    } else {
        y
    }
}

/// Fits the raised cosine with an even phase polynomial inside `window`.
pub fn fit_raised_cosine(
    normalized: &NormalizedSpectrum,
    window: FitWindow,
    options: &FitOptions,
) -> Result<RaisedCosineFit> {
    let idx: Vec<usize> = (0..normalized.detuning.len())
        .filter(|&i| {
            normalized.mask[i]
                && window.contains(normalized.detuning[i])
                && normalized.values[i].is_finite()
        })
        .collect();
    let detuning: Vec<f64> = idx.iter().map(|&i| normalized.detuning[i]).collect();
    let values: Vec<f64> = idx.iter().map(|&i| normalized.values[i]).collect();
    if detuning.len() < 8 {
        return Err(Error::TooFewPoints {
            found: detuning.len(),
            needed: MIN_POINTS,
        });
    }
    let seed = ladder_seed(&detuning, &values);
    let scale = detuning.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    let fringes = seed.c2.abs() * scale * scale / (2.0 * PI);
    if detuning.len() < MIN_POINTS && fringes < MIN_FRINGES {
        return Err(Error::TooFewPoints {
            found: detuning.len(),
            needed: MIN_POINTS,
        });
    }

    let weighted = normalized.sigma.is_some();
    let w: Vec<f64> = match &normalized.sigma {
        Some(s) => {
            let sig: Vec<f64> = idx.iter().map(|&i| s[i]).collect();
            let floor = sig
                .iter()
                .cloned()
                .filter(|x| *x > 0.0)
                .fold(f64::INFINITY, f64::min);
            if !floor.is_finite() {
                return Err(Error::InvalidInput(
                    "all normalized uncertainties are zero".into(),
                ));
            }
            sig.iter().map(|x| 1.0 / x.max(floor)).collect()
        }
        None => vec![1.0; detuning.len()],
    };
    let problem = Problem {
        u: detuning.iter().map(|d| d / scale).collect(),
        n: values,
        w,
        free: [true, true, options.fit_c4, true, true],
    };

    let c2s = seed.c2 * scale * scale;
    let mut starts = Vec::new();
    let c0_offsets = [0.0, 0.5 * PI, -0.5 * PI, PI];
    let c2_offsets = [0.0, PI, -PI];
    for dc2 in c2_offsets {
        for dc0 in c0_offsets {
            starts.push(Vector::from([
                seed.c0 + dc0,
                c2s + dc2,
                0.0,
                seed.visibility,
                seed.amplitude,
            ]));
        }
    }
    starts.truncate(1 + options.max_restarts);

    let mut best: Option<(Vector, f64, usize)> = None;
    let mut best_any = (f64::INFINITY, f64::NAN);
    let mut total_iter = 0;
    for start in &starts {
        let (mut p, cost, it) = problem.levenberg_marquardt(*start);
        total_iter += it;
        if !cost.is_finite() {
            continue;
        }
        if p[I_V] < 0.0 {
            p[I_V] = -p[I_V];
            p[I_C0] += PI;
        }
        if cost < best_any.0 {
            best_any = (cost, p[I_C2] / (scale * scale));
        }
        if p[I_V] > VISIBILITY_MAX || p[I_A] <= 0.0 {
            continue;
        }
        if best.as_ref().is_none_or(|b| cost < b.1) {
            best = Some((p, cost, it));
        }
    }
    let Some((mut p, cost, _)) = best else {
        return Err(Error::FitFailed {
            restarts: starts.len(),
            best_cost: best_any.0,
            best_c2: best_any.1,
        });
    };

    // covariance from the final linearization
    let (jtj, _, _) = problem.normal_equations(&p);
    let free_count = problem.free.iter().filter(|f| **f).count();
    let dof = (problem.u.len() - free_count).max(1) as f64;
    let reduced_chi2 = cost / dof;
    let inv = jtj.try_inverse().ok_or_else(|| Error::FitFailed {
        restarts: starts.len(),
        best_cost: cost,
        best_c2: p[I_C2] / (scale * scale),
    })?;
    let mut cov = inv * reduced_chi2;
    for i in 0..NPAR {
        if !problem.free[i] {
            for j in 0..NPAR {
                cov[(i, j)] = 0.0;
                cov[(j, i)] = 0.0;
            }
        }
    }

    // Φ → −Φ leaves the intensity unchanged
    let want_positive = options.curvature_sign == CurvatureSign::Positive;
    if (p[I_C2] < 0.0 && want_positive) || (p[I_C2] > 0.0 && !want_positive) {
        for i in [I_C0, I_C2, I_C4] {
            p[i] = -p[i];
        }
        let flip = Vector::from([-1.0, -1.0, -1.0, 1.0, 1.0]);
        cov = Mat::from_fn(|i, j| cov[(i, j)] * flip[i] * flip[j]);
    }
    p[I_C0] = wrap_phase(p[I_C0]);

    // undo the detuning scaling
    let unscale = Vector::from([1.0, scale.powi(-2), scale.powi(-4), 1.0, 1.0]);
    let covariance: [[f64; NPAR]; NPAR] =
        std::array::from_fn(|i| std::array::from_fn(|j| cov[(i, j)] * unscale[i] * unscale[j]));

    let fit = RaisedCosineFit {
        c0: p[I_C0],
        c2: p[I_C2] * unscale[I_C2],
        c4: p[I_C4] * unscale[I_C4],
        visibility: p[I_V],
        amplitude: p[I_A],
        covariance,
        residual_rms: 0.0,
        reduced_chi2,
        window,
        points: problem.u.len(),
        weighted,
        fit_c4: options.fit_c4,
        iterations: total_iter,
        starts: starts.len(),
    };
    let rms = (detuning
        .iter()
        .zip(&problem.n)
        .map(|(d, n)| (n - fit.model_at(*d)).powi(2))
        .sum::<f64>()
        / detuning.len() as f64)
        .sqrt();
    Ok(RaisedCosineFit {
        residual_rms: rms,
        ..fit
    })
}
