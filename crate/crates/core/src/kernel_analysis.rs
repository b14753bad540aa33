// Copyright 2026 OpenWG Contributors
// SPDX-License-Identifier: Apache-2.0

//! Memory kernel, bath densities and scalar extraction from energy traces.
//!
//! Trace-level extraction (decay fits, revival peaks) uses topographic
//! prominence: a local extremum counts only if the trace has to travel at
//! least `prominence * E(0)` before it reaches a more extreme value.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::dd_control::ModulationSchedule;
use crate::error::{Error, Result};
use crate::interp::MonotoneCubic;
use crate::propagator::StateTrace;
use crate::star_model::{build_hamiltonian, coupling_spectrum, Geometry, StarHamiltonian};

/// Environment width used to tabulate `g^2(n)` when the geometry is narrower.
pub const REFERENCE_ENV_WIDTH: f64 = 20.0;

/// Lag window for the kernel width (um). Shorter than the first kernel
/// revival `2 w_e tanχ` of a 5 um environment, so it measures the main lobe.
pub const KERNEL_WIDTH_WINDOW: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    /// Fraction of `E(0)` that must be lost before the decay window opens.
    pub decay_skip_fraction: f64,
    /// The decay window closes once `E < decay_floor_fraction * E(0)`.
    pub decay_floor_fraction: f64,
    /// Minimum prominence of extrema, as a fraction of `E(0)`.
    pub prominence_fraction: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            decay_skip_fraction: 0.02,
            decay_floor_fraction: 0.05,
            prominence_fraction: 0.02,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelTrace {
    pub tau_grid: Vec<f64>,
    pub values: Vec<Complex64>,
}

impl KernelTrace {
    /// RMS width `sqrt(∫τ²|K| / ∫|K|)` by the trapezoid rule on the grid.
    pub fn width(&self) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 1..self.tau_grid.len() {
            let h = self.tau_grid[i] - self.tau_grid[i - 1];
            let (t0, t1) = (self.tau_grid[i - 1], self.tau_grid[i]);
            let (k0, k1) = (self.values[i - 1].norm(), self.values[i].norm());
            num += 0.5 * h * (t0 * t0 * k0 + t1 * t1 * k1);
            den += 0.5 * h * (k0 + k1);
        }
        (num / den).sqrt()
    }

    /// First τ > 0 where `Re K` changes sign, linearly interpolated.
    pub fn first_zero_crossing(&self) -> Option<f64> {
        self.tau_grid
            .windows(2)
            .zip(self.values.windows(2))
            .find(|(_, v)| v[0].re > 0.0 && v[1].re <= 0.0)
            .map(|(t, v)| t[0] + (t[1] - t[0]) * v[0].re / (v[0].re - v[1].re))
    }
}

/// `K(τ) = Σ_j g_j² exp(-i(β_0 - β_j)τ)`.
pub fn memory_kernel(h: &StarHamiltonian, tau_grid: &[f64]) -> KernelTrace {
    let values = tau_grid.iter().map(|&tau| kernel_at(h, tau)).collect();
    KernelTrace {
        tau_grid: tau_grid.to_vec(),
        values,
    }
}

fn kernel_at(h: &StarHamiltonian, tau: f64) -> Complex64 {
    h.betas
        .iter()
        .zip(&h.couplings)
        .map(|(b, g)| Complex64::from_polar(g * g, -(h.beta0 - b) * tau))
        .sum()
}

/// Kernel RMS width over `[0, tau_max]` sampled every `dtau`.
pub fn kernel_width(h: &StarHamiltonian, tau_max: f64, dtau: f64) -> f64 {
    let n = (tau_max / dtau).round() as usize;
    let grid: Vec<f64> = (0..=n).map(|i| i as f64 * tau_max / n as f64).collect();
    memory_kernel(h, &grid).width()
}

/// Environment mode density per unit index, `(k w_e / π) n / sqrt(n_d² - n²)`.
pub fn mode_density(n: f64, env_width: f64, core_index: f64, k: f64) -> Result<f64> {
    if !(n > 1.0 && n < core_index) {
        return Err(Error::DomainError {
            value: n,
            lo: 1.0,
            hi: core_index,
        });
    }
    Ok(k * env_width / PI * n / (core_index * core_index - n * n).sqrt())
}

/// `J(n) = g²(n) w_e n / sqrt(n_d² - n²)` with `g² w_e` interpolated from the
/// discrete coupling spectrum.
#[derive(Debug, Clone)]
pub struct SpectralDensity {
    pub reference_env_width: f64,
    core_index: f64,
    coupling: MonotoneCubic,
}

impl SpectralDensity {
    pub fn new(geometry: &Geometry) -> Result<Self> {
        let reference = geometry.with_env_width(geometry.env_width.max(REFERENCE_ENV_WIDTH));
        let spectrum = coupling_spectrum(&reference)?;
        let (n, g2w): (Vec<f64>, Vec<f64>) = spectrum.into_iter().unzip();
        Ok(Self {
            reference_env_width: reference.env_width,
            core_index: geometry.core_index,
            coupling: MonotoneCubic::new(n, g2w)?,
        })
    }

    pub fn eval(&self, n: f64) -> Result<f64> {
        let nd = self.core_index;
        if !(n > 1.0 && n < nd) {
            return Err(Error::DomainError {
                value: n,
                lo: 1.0,
                hi: nd,
            });
        }
        Ok(self.coupling.eval(n) * n / (nd * nd - n * n).sqrt())
    }
}

pub fn spectral_density(geometry: &Geometry, n: f64) -> Result<f64> {
    SpectralDensity::new(geometry)?.eval(n)
}

/// Closed-form decay length at system index `n0`; grows as `exp(2 k sqrt(n0²-1) d)`.
pub fn decay_length_closed_form(geometry: &Geometry, n0: f64) -> f64 {
    let k = geometry.k();
    let nd = geometry.core_index;
    let q = n0 * n0 - 1.0;
    let l0 = n0 * (nd * nd - 1.0).powi(2) * (k * geometry.system_width + 2.0 / q.sqrt())
        / (8.0 * k * q * (nd * nd - n0 * n0).powf(1.5));
    l0 * (2.0 * k * q.sqrt() * geometry.gap).exp()
}

/// Closed-form decay length with `n0 = β_0 / k` of the assembled Hamiltonian.
pub fn decay_length_analytic(geometry: &Geometry) -> Result<f64> {
    let h = build_hamiltonian(geometry)?;
    Ok(decay_length_closed_form(geometry, h.system_index()))
}

/// Continuum spectral density implied by the closed-form decay length, `1 / (2L)`.
pub fn spectral_density_analytic(geometry: &Geometry) -> Result<f64> {
    Ok(0.5 / decay_length_analytic(geometry)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub l_fit: f64,
    pub fit_window: (f64, f64),
    pub r_squared: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Ordinary least squares `y = slope x + intercept`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InvalidParameter(
            "linear fit needs two or more paired samples".into(),
        ));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter(
            "linear fit abscissae are all equal".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - slope * a - intercept).powi(2))
        .sum();
    let r_squared = if syy > 0.0 {
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    } else {
        1.0
    };
    Ok(LinearFit {
        slope,
        intercept,
        r_squared,
    })
}

/// Indices of interior local maxima with their topographic prominence.
/// A flat top is reported at its middle sample.
pub fn prominent_maxima(values: &[f64], min_prominence: f64) -> Vec<(usize, f64)> {
    let n = values.len();
    let mut out = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if values[i] > values[i - 1] {
            let mut j = i;
            while j + 1 < n && values[j + 1] == values[i] {
                j += 1;
            }
            if j + 1 < n && values[j + 1] < values[i] {
                let peak = (i + j) / 2;
                let p = prominence(values, peak, i, j);
                if p >= min_prominence {
                    out.push((peak, p));
                }
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    out
}

/// Same as [`prominent_maxima`] for local minima.
pub fn prominent_minima(values: &[f64], min_prominence: f64) -> Vec<(usize, f64)> {
    let neg: Vec<f64> = values.iter().map(|v| -v).collect();
    prominent_maxima(&neg, min_prominence)
}

fn prominence(values: &[f64], peak: usize, left_edge: usize, right_edge: usize) -> f64 {
    let top = values[peak];
    let mut left_min = top;
    for &v in values[..left_edge].iter().rev() {
        if v > top {
            break;
        }
        left_min = left_min.min(v);
    }
    let mut right_min = top;
    for &v in &values[right_edge + 1..] {
        if v > top {
            break;
        }
        right_min = right_min.min(v);
    }
    top - left_min.max(right_min)
}

/// Log-linear fit `E ∝ exp(-z/L)` over the initial decay.
///
/// The window opens once `decay_skip_fraction` of `E(0)` is lost and closes
/// at the earlier of the first prominent minimum and the first sample below
/// `decay_floor_fraction * E(0)`.
pub fn fit_decay(energy: &[(f64, f64)], cfg: &AnalysisConfig) -> Result<DecayFit> {
    if energy.len() < 3 {
        return Err(Error::NonDecayingTrace);
    }
    let e0 = energy[0].1;
    if !(e0 > 0.0) || !(energy[1].1 < e0) {
        return Err(Error::NonDecayingTrace);
    }
    let values: Vec<f64> = energy.iter().map(|p| p.1).collect();
    let lo = values
        .iter()
        .position(|&v| v <= (1.0 - cfg.decay_skip_fraction) * e0)
        .ok_or(Error::NonDecayingTrace)?;
    let mut hi = values.len() - 1;
    if let Some(&(m, _)) = prominent_minima(&values, cfg.prominence_fraction * e0).first() {
        hi = hi.min(m);
    }
    if let Some(f) = values
        .iter()
        .position(|&v| v < cfg.decay_floor_fraction * e0)
    {
        hi = hi.min(f);
    }
    if hi < lo + 2 {
        return Err(Error::NonDecayingTrace);
    }
    let window = &energy[lo..=hi];
    if window.iter().any(|p| !(p.1 > 0.0)) {
        return Err(Error::NonDecayingTrace);
    }
    let z: Vec<f64> = window.iter().map(|p| p.0).collect();
    let ln_e: Vec<f64> = window.iter().map(|p| p.1.ln()).collect();
    let fit = linear_fit(&z, &ln_e)?;
    if !(fit.slope < 0.0) {
        return Err(Error::NonDecayingTrace);
    }
    Ok(DecayFit {
        l_fit: -1.0 / fit.slope,
        fit_window: (z[0], z[z.len() - 1]),
        r_squared: fit.r_squared,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RevivalPeak {
    pub z: f64,
    pub energy: f64,
    pub prominence: f64,
}

/// First local maximum of `E(z)` whose prominence reaches
/// `prominence_fraction * E(0)`.
pub fn revival_peak(energy: &[(f64, f64)], cfg: &AnalysisConfig) -> Result<RevivalPeak> {
    let e0 = energy.first().ok_or(Error::NoRevivalFound)?.1;
    let values: Vec<f64> = energy.iter().map(|p| p.1).collect();
    let (i, p) = *prominent_maxima(&values, cfg.prominence_fraction * e0)
        .first()
        .ok_or(Error::NoRevivalFound)?;
    Ok(RevivalPeak {
        z: energy[i].0,
        energy: values[i],
        prominence: p,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RevivalFit {
    pub r: f64,
    /// `R - 2 w_e tanχ`.
    pub r0: f64,
    pub chi: f64,
}

/// Ray angle inside the core medium, measured from the guide normal:
/// `sinχ = β_0 / (n_d k)`.
pub fn ray_angle(geometry: &Geometry, beta0: f64) -> Result<f64> {
    let s = beta0 / (geometry.core_index * geometry.k());
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::DomainError {
            value: beta0 / geometry.k(),
            lo: 0.0,
            hi: geometry.core_index,
        });
    }
    Ok(s.asin())
}

pub fn revival_period(
    energy: &[(f64, f64)],
    geometry: &Geometry,
    beta0: f64,
    cfg: &AnalysisConfig,
) -> Result<RevivalFit> {
    let peak = revival_peak(energy, cfg)?;
    let chi = ray_angle(geometry, beta0)?;
    Ok(RevivalFit {
        r: peak.z,
        r0: peak.z - 2.0 * geometry.env_width * chi.tan(),
        chi,
    })
}

/// `R = 2 w_e tanχ + R_0`.
pub fn revival_analytic(geometry: &Geometry, beta0: f64, r0: f64) -> Result<f64> {
    Ok(2.0 * geometry.env_width * ray_angle(geometry, beta0)?.tan() + r0)
}

/// Hann-windowed spectrum of the lab-frame system amplitude on the
/// effective-index axis, peak-normalized and sorted by index. `a(z)` evolves
/// as `exp(-iβz)`, so the positive-exponent transform puts free propagation
/// at `n = β_0 / k`. `pad` > 1 zero-pads for a finer grid.
pub fn field_spectrum(trace: &StateTrace, k: f64, pad: usize) -> Result<Vec<(f64, f64)>> {
    let m = trace.uniform_len();
    if m < 4 {
        return Err(Error::InvalidParameter(
            "spectrum needs four or more uniform samples".into(),
        ));
    }
    let dz = trace.dz_out;
    let len = m * pad.max(1);
    let mut buf = vec![Complex64::default(); len];
    for (i, s) in trace.states[..m].iter().enumerate() {
        let w = 0.5 * (1.0 - (2.0 * PI * i as f64 / (m - 1) as f64).cos());
        buf[i] = s.a * w;
    }
    FftPlanner::new().plan_fft_inverse(len).process(&mut buf);
    let peak = buf.iter().map(|c| c.norm_sqr()).fold(0.0, f64::max);
    let mut out: Vec<(f64, f64)> = buf
        .iter()
        .enumerate()
        .map(|(q, c)| {
            let signed = if q <= len / 2 {
                q as f64
            } else {
                q as f64 - len as f64
            };
            let beta = 2.0 * PI * signed / (len as f64 * dz);
            (beta / k, if peak > 0.0 { c.norm_sqr() / peak } else { 0.0 })
        })
        .collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(out)
}

/// Index spacing of one unpadded frequency bin for a trace of length `z_span`.
pub fn spectrum_bin_width(z_span: f64, k: f64) -> f64 {
    2.0 * PI / (z_span * k)
}

/// Location of the spectral maximum.
pub fn spectral_peak(spectrum: &[(f64, f64)]) -> f64 {
    spectrum
        .iter()
        .copied()
        .fold((f64::NAN, f64::NEG_INFINITY), |best, p| {
            if p.1 > best.1 {
                p
            } else {
                best
            }
        })
        .0
}

/// Maps an angle to `(-π, π]`.
pub fn wrap_phase(phi: f64) -> f64 {
    let w = phi - 2.0 * PI * ((phi - PI) / (2.0 * PI)).ceil();
    if w <= -PI {
        w + 2.0 * PI
    } else {
        w
    }
}

/// `Δñ = N φ_wrapped / (k z_max)`.
pub fn effective_index_shift(schedule: &ModulationSchedule, k: f64) -> f64 {
    schedule.n_kicks as f64 * wrap_phase(schedule.phi) / (k * schedule.z_max)
}

/// Solves the integro-differential equation for the slowly varying system
/// amplitude `ã(z) = a(z) e^{iβ_0 z}`,
/// `dã/dz = -∫_0^z K(τ - z) ã(τ) dτ`, with the trapezoid rule on a uniform
/// step for both the memory integral and the z-stepping. Returns `(z, |a|²)`.
pub fn solve_kernel_equation(
    h: &StarHamiltonian,
    z_max: f64,
    step: f64,
) -> Result<Vec<(f64, f64)>> {
    if !(z_max > 0.0 && step > 0.0 && step < z_max) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < step < z_max, got step = {step}, z_max = {z_max}"
        )));
    }
    let n = (z_max / step).round() as usize;
    let dz = z_max / n as f64;
    // K(τ - z) = conj K(z - τ); tabulate conj K at lags q dz.
    let lag: Vec<Complex64> = (0..=n)
        .map(|q| kernel_at(h, q as f64 * dz).conj())
        .collect();
    let k0 = lag[0].re;
    let memory = |amp: &[Complex64], upto: usize| -> Complex64 {
        // Trapezoid sum of conj K(z_upto - z_m) ã_m over m = 0..upto.
        let mut s = 0.5 * amp[0] * lag[upto];
        for m in 1..upto {
            s += amp[m] * lag[upto - m];
        }
        s
    };
    let mut amp = Vec::with_capacity(n + 1);
    amp.push(Complex64::new(1.0, 0.0));
    let mut f_prev = Complex64::default();
    for i in 0..n {
        let partial = memory(&amp, i + 1);
        let next =
            (amp[i] + 0.5 * dz * f_prev - 0.5 * dz * dz * partial) / (1.0 + 0.25 * dz * dz * k0);
        amp.push(next);
        f_prev = -dz * (partial + 0.5 * next * k0);
    }
    Ok(amp
        .iter()
        .enumerate()
        .map(|(i, a)| (i as f64 * dz, a.norm_sqr()))
        .collect())
}
