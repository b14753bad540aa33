// Copyright 2026 OpenWG Contributors
// SPDX-License-Identifier: Apache-2.0

//! z-evolution of the single-excitation amplitudes under `i dψ/dz = H ψ`.
//!
//! Two independent paths share one event loop (output samples and phase
//! kicks): an adaptive DOP853 integration of the star equations in the lab
//! frame, and an exact spectral propagator `V exp(-iΛΔz) Vᵀ` built from
//! the eigendecomposition of the real symmetric Hamiltonian.

use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dd_control::ModulationSchedule;
use crate::error::{Error, Result};
use crate::rk::{Dop853, Tolerance};
use crate::star_model::StarHamiltonian;

pub const DEFAULT_DZ_OUT: f64 = 0.05;
pub const DEFAULT_Z_MAX: f64 = 50.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    pub a: Complex64,
    pub b: Vec<Complex64>,
}

impl StateVector {
    /// Light launched in the system guide: `a = 1`, `b_j = 0`.
    pub fn system_excited(env_modes: usize) -> Self {
        Self {
            a: Complex64::new(1.0, 0.0),
            b: vec![Complex64::default(); env_modes],
        }
    }

    pub fn norm_sq(&self) -> f64 {
        self.a.norm_sqr() + self.env_energy()
    }

    pub fn env_energy(&self) -> f64 {
        self.b.iter().map(|x| x.norm_sqr()).sum()
    }

    pub fn conj(&self) -> Self {
        Self {
            a: self.a.conj(),
            b: self.b.iter().map(|x| x.conj()).collect(),
        }
    }

    fn to_vec(&self) -> Vec<Complex64> {
        let mut v = Vec::with_capacity(self.b.len() + 1);
        v.push(self.a);
        v.extend_from_slice(&self.b);
        v
    }

    fn from_slice(v: &[Complex64]) -> Self {
        Self {
            a: v[0],
            b: v[1..].to_vec(),
        }
    }
}

/// `a -> a e^{i phi}`; environment amplitudes untouched.
pub fn apply_kick(state: &StateVector, phi: f64) -> StateVector {
    StateVector {
        a: state.a * Complex64::from_polar(1.0, phi),
        b: state.b.clone(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KickRecord {
    pub z: f64,
    pub before: StateVector,
    pub after: StateVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateTrace {
    /// Uniform output grid `m * dz_out`, plus `z_max` when it is off-grid.
    pub z_grid: Vec<f64>,
    pub states: Vec<StateVector>,
    pub kick_positions: Vec<f64>,
    /// Pre- and post-kick states. A regular sample that coincides with a kick
    /// holds the pre-kick state.
    pub kicks: Vec<KickRecord>,
    pub dz_out: f64,
}

impl StateTrace {
    pub fn final_state(&self) -> &StateVector {
        self.states.last().expect("trace is never empty")
    }

    /// Samples on the uniform grid only (drops an off-grid final point).
    pub fn uniform_len(&self) -> usize {
        let n = self.z_grid.len();
        if n >= 2 {
            let last_gap = self.z_grid[n - 1] - self.z_grid[n - 2];
            if (last_gap - self.dz_out).abs() > 1e-9 * self.dz_out {
                return n - 1;
            }
        }
        n
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "z (um),re_a,im_a,energy_sys,energy_env_total")?;
        for (z, s) in self.z_grid.iter().zip(&self.states) {
            writeln!(
                out,
                "{:?},{:?},{:?},{:?},{:?}",
                z,
                s.a.re,
                s.a.im,
                s.a.norm_sqr(),
                s.env_energy()
            )?;
        }
        Ok(())
    }
}

/// `(z, |a(z)|^2)` pairs.
pub fn energy_trace(trace: &StateTrace) -> Vec<(f64, f64)> {
    trace
        .z_grid
        .iter()
        .zip(&trace.states)
        .map(|(&z, s)| (z, s.a.norm_sqr()))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Adaptive DOP853 in the lab frame.
    #[default]
    RungeKutta,
    /// Eigendecomposition of H, exact between events.
    Spectral,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Propagator {
    pub method: Method,
    pub tolerance: Tolerance,
}

impl Default for Propagator {
    fn default() -> Self {
        Self {
            method: Method::RungeKutta,
            tolerance: Tolerance::default(),
        }
    }
}

enum Event {
    Sample,
    Kick,
}

fn build_events(z_max: f64, dz_out: f64, kicks: &[f64]) -> Vec<(f64, Event)> {
    let n = (z_max / dz_out + 1e-9).floor() as usize;
    let mut events: Vec<(f64, Event)> = (0..=n)
        .map(|m| ((m as f64 * dz_out).min(z_max), Event::Sample))
        .collect();
    if z_max - n as f64 * dz_out > 1e-9 * dz_out {
        events.push((z_max, Event::Sample));
    }
    events.extend(kicks.iter().map(|&z| (z, Event::Kick)));
    // Stable sort keeps samples ahead of kicks at the same z.
    events.sort_by(|a, b| a.0.total_cmp(&b.0));
    events
}

trait Stepper {
    fn advance(&mut self, psi: &mut [Complex64], z0: f64, z1: f64) -> Result<()>;
}

struct RkStepper<F: Fn(&[Complex64], &mut [Complex64])>(Dop853<F>);

impl<F: Fn(&[Complex64], &mut [Complex64])> Stepper for RkStepper<F> {
    fn advance(&mut self, psi: &mut [Complex64], z0: f64, z1: f64) -> Result<()> {
        self.0.integrate(psi, z0, z1)
    }
}

struct SpectralStepper {
    vectors: DMatrix<f64>,
    values: Vec<f64>,
}

impl SpectralStepper {
    fn new(h: &StarHamiltonian) -> Self {
        let eig = SymmetricEigen::new(h.matrix());
        Self {
            vectors: eig.eigenvectors,
            values: eig.eigenvalues.iter().copied().collect(),
        }
    }
}

impl Stepper for SpectralStepper {
    fn advance(&mut self, psi: &mut [Complex64], z0: f64, z1: f64) -> Result<()> {
        let dz = z1 - z0;
        let n = psi.len();
        let v = &self.vectors;
        let mut coeff = vec![Complex64::default(); n];
        for (m, c) in coeff.iter_mut().enumerate() {
            let mut acc = Complex64::default();
            for (i, p) in psi.iter().enumerate() {
                acc += p * v[(i, m)];
            }
            *c = acc * Complex64::from_polar(1.0, -self.values[m] * dz);
        }
        for (i, p) in psi.iter_mut().enumerate() {
            let mut acc = Complex64::default();
            for (m, c) in coeff.iter().enumerate() {
                acc += c * v[(i, m)];
            }
            *p = acc;
        }
        Ok(())
    }
}

fn star_rhs(h: &StarHamiltonian) -> impl Fn(&[Complex64], &mut [Complex64]) + '_ {
    let minus_i = Complex64::new(0.0, -1.0);
    move |y: &[Complex64], dy: &mut [Complex64]| {
        let a = y[0];
        let mut acc = a * h.beta0;
        for j in 0..h.betas.len() {
            let b = y[j + 1];
            acc += b * h.couplings[j];
            dy[j + 1] = minus_i * (b * h.betas[j] + a * h.couplings[j]);
        }
        dy[0] = minus_i * acc;
    }
}

impl Propagator {
    pub fn spectral() -> Self {
        Self {
            method: Method::Spectral,
            ..Self::default()
        }
    }

    pub fn with_tolerance(mut self, rtol: f64, atol: f64) -> Self {
        self.tolerance = Tolerance { rtol, atol };
        self
    }

    pub fn evolve(
        &self,
        h: &StarHamiltonian,
        initial: &StateVector,
        z_max: f64,
        dz_out: f64,
        schedule: Option<&ModulationSchedule>,
    ) -> Result<StateTrace> {
        if !(z_max > 0.0 && z_max.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "z_max must be > 0, got {z_max}"
            )));
        }
        if !(dz_out > 0.0 && dz_out.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "dz_out must be > 0, got {dz_out}"
            )));
        }
        if initial.b.len() != h.env_mode_count() {
            return Err(Error::InvalidParameter(format!(
                "state has {} environment amplitudes, Hamiltonian has {}",
                initial.b.len(),
                h.env_mode_count()
            )));
        }
        if !(initial.norm_sq() > 0.0) {
            return Err(Error::InvalidParameter(
                "initial state has zero norm".into(),
            ));
        }
        let (kick_positions, phi) = match schedule {
            Some(s) => {
                if s.positions.iter().any(|&p| p > z_max) {
                    log::debug!("kicks beyond z_max = {z_max} are ignored");
                }
                (
                    s.positions
                        .iter()
                        .copied()
                        .filter(|&p| p <= z_max)
                        .collect::<Vec<_>>(),
                    s.phi,
                )
            }
            None => (Vec::new(), 0.0),
        };
        let events = build_events(z_max, dz_out, &kick_positions);
        match self.method {
            Method::RungeKutta => {
                let stepper = RkStepper(Dop853::new(star_rhs(h), h.dim(), self.tolerance));
                run_events(stepper, initial, &events, kick_positions, phi, dz_out)
            }
            Method::Spectral => {
                let stepper = SpectralStepper::new(h);
                run_events(stepper, initial, &events, kick_positions, phi, dz_out)
            }
        }
    }
}

fn run_events<S: Stepper>(
    mut stepper: S,
    initial: &StateVector,
    events: &[(f64, Event)],
    kick_positions: Vec<f64>,
    phi: f64,
    dz_out: f64,
) -> Result<StateTrace> {
    let mut psi = initial.to_vec();
    let mut z = 0.0;
    let mut z_grid = Vec::new();
    let mut states = Vec::new();
    let mut kicks = Vec::with_capacity(kick_positions.len());
    for (ze, ev) in events {
        if *ze > z {
            stepper.advance(&mut psi, z, *ze)?;
            z = *ze;
        }
        match ev {
            Event::Sample => {
                z_grid.push(*ze);
                states.push(StateVector::from_slice(&psi));
            }
            Event::Kick => {
                let before = StateVector::from_slice(&psi);
                let after = apply_kick(&before, phi);
                psi[0] = after.a;
                kicks.push(KickRecord {
                    z: *ze,
                    before,
                    after,
                });
            }
        }
    }
    Ok(StateTrace {
        z_grid,
        states,
        kick_positions,
        kicks,
        dz_out,
    })
}

/// Adaptive Runge–Kutta evolution with default tolerances.
pub fn evolve(
    h: &StarHamiltonian,
    initial: &StateVector,
    z_max: f64,
    dz_out: f64,
    schedule: Option<&ModulationSchedule>,
) -> Result<StateTrace> {
    Propagator::default().evolve(h, initial, z_max, dz_out, schedule)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dd_control::make_schedule;
    use std::f64::consts::PI;

    fn two_mode(beta0: f64, beta1: f64, g: f64) -> StarHamiltonian {
        StarHamiltonian::from_parts(4.0, beta0, vec![beta1], vec![g]).unwrap()
    }

    #[test]
    fn kick_identities() {
        let s = StateVector {
            a: Complex64::new(0.3, -0.4),
            b: vec![Complex64::new(0.1, 0.2)],
        };
        assert_eq!(apply_kick(&s, 0.0), s);
        let full = apply_kick(&s, 2.0 * PI);
        assert!((full.a - s.a).norm() < 1e-15);
        let flip = apply_kick(&s, PI);
        assert!((flip.a + s.a).norm() < 1e-15);
        assert_eq!(flip.b, s.b);
        assert!((flip.norm_sq() - s.norm_sq()).abs() < 1e-16);
    }

    #[test]
    fn decoupled_system_is_a_pure_phasor() {
        let h = two_mode(11.0, 9.0, 0.0);
        let tr = evolve(&h, &StateVector::system_excited(1), 10.0, 0.05, None).unwrap();
        for (z, s) in tr.z_grid.iter().zip(&tr.states) {
            let exact = Complex64::from_polar(1.0, -11.0 * z);
            assert!((s.a - exact).norm() < 1e-9);
        }
        assert!(energy_trace(&tr)
            .iter()
            .all(|(_, e)| (e - 1.0).abs() < 1e-10));
        assert_eq!(energy_trace(&tr)[0], (0.0, 1.0));
    }

    #[test]
    fn generalized_rabi_formula() {
        let (b0, b1, g) = (11.3, 11.1, 0.25);
        let h = two_mode(b0, b1, g);
        let delta = b1 - b0;
        let omega = (g * g + delta * delta / 4.0).sqrt();
        for prop in [Propagator::default(), Propagator::spectral()] {
            let tr = prop
                .evolve(&h, &StateVector::system_excited(1), 40.0, 0.05, None)
                .unwrap();
            let sq: f64 = energy_trace(&tr)
                .iter()
                .map(|&(z, e)| {
                    let exact = 1.0 - (g * g / (omega * omega)) * (omega * z).sin().powi(2);
                    (e - exact).powi(2)
                })
                .sum();
            let rms = (sq / tr.z_grid.len() as f64).sqrt();
            assert!(rms < 1e-8, "{:?}: rms {rms}", prop.method);
        }
    }

    #[test]
    fn degenerate_pair_transfers_fully() {
        let g = 0.2;
        let h = two_mode(11.0, 11.0, g);
        let z_half = PI / (2.0 * g);
        let tr = evolve(&h, &StateVector::system_excited(1), z_half, 0.05, None).unwrap();
        assert_eq!(*tr.z_grid.last().unwrap(), z_half);
        assert!(tr.final_state().a.norm_sqr() < 1e-6);
    }

    #[test]
    fn kicks_recorded_on_both_sides() {
        let h = two_mode(11.0, 10.9, 0.2);
        let sched = make_schedule(4, PI / 3.0, 10.0);
        let tr = evolve(
            &h,
            &StateVector::system_excited(1),
            10.0,
            0.05,
            Some(&sched),
        )
        .unwrap();
        assert_eq!(tr.kicks.len(), 4);
        for k in &tr.kicks {
            assert!((k.after.a - k.before.a * Complex64::from_polar(1.0, PI / 3.0)).norm() < 1e-15);
        }
        // Kick at 1.25 falls on the grid: the stored sample is pre-kick.
        let idx = tr
            .z_grid
            .iter()
            .position(|&z| (z - 1.25).abs() < 1e-12)
            .unwrap();
        assert_eq!(tr.states[idx], tr.kicks[0].before);
        for w in tr.z_grid.windows(2) {
            assert!(w[1] > w[0]);
        }
    }

    #[test]
    fn rk_and_spectral_agree_with_kicks() {
        let h = StarHamiltonian::from_parts(
            4.0,
            11.6,
            vec![13.0, 12.1, 11.7, 11.5, 10.2],
            vec![0.05, 0.1, 0.2, 0.15, 0.08],
        )
        .unwrap();
        let sched = make_schedule(7, 2.1, 30.0);
        let init = StateVector::system_excited(5);
        let a = Propagator::default()
            .evolve(&h, &init, 30.0, 0.05, Some(&sched))
            .unwrap();
        let b = Propagator::spectral()
            .evolve(&h, &init, 30.0, 0.05, Some(&sched))
            .unwrap();
        for (x, y) in a.states.iter().zip(&b.states) {
            assert!((x.a - y.a).norm() < 1e-9);
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        let h = two_mode(11.0, 11.0, 0.2);
        let s = StateVector::system_excited(1);
        assert!(evolve(&h, &s, -1.0, 0.05, None).is_err());
        assert!(evolve(&h, &s, 1.0, 0.0, None).is_err());
        assert!(evolve(&h, &StateVector::system_excited(2), 1.0, 0.05, None).is_err());
        let zero = StateVector {
            a: Complex64::default(),
            b: vec![Complex64::default()],
        };
        assert!(evolve(&h, &zero, 1.0, 0.05, None).is_err());
    }

    #[test]
    fn csv_layout() {
        let h = two_mode(11.0, 11.0, 0.2);
        let tr = evolve(&h, &StateVector::system_excited(1), 0.1, 0.05, None).unwrap();
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "z (um),re_a,im_a,energy_sys,energy_env_total");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("0.0,1.0,0.0,1.0,0.0"));
    }
}
