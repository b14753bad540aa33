// Copyright 2026 OpenWG Contributors
// SPDX-License-Identifier: Apache-2.0

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel_analysis::wrap_phase;
use crate::propagator::{Propagator, StateVector};
use crate::star_model::{build_hamiltonian, Geometry, StarHamiltonian};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulationSchedule {
    pub n_kicks: usize,
    pub phi: f64,
    pub z_max: f64,
    pub positions: Vec<f64>,
}

/// `n_kicks` equally spaced kicks at interval midpoints `(m - 1/2) z_max / N`.
pub fn make_schedule(n_kicks: usize, phi: f64, z_max: f64) -> ModulationSchedule {
    let spacing = z_max / n_kicks.max(1) as f64;
    ModulationSchedule {
        n_kicks,
        phi,
        z_max,
        positions: (1..=n_kicks).map(|m| (m as f64 - 0.5) * spacing).collect(),
    }
}

impl ModulationSchedule {
    pub fn with_positions(phi: f64, z_max: f64, positions: Vec<f64>) -> Result<Self> {
        let ordered = positions.windows(2).all(|w| w[1] > w[0]);
        let inside = positions.iter().all(|&p| p > 0.0 && p < z_max);
        if !ordered || !inside {
            return Err(Error::InvalidParameter(
                "kick positions must be strictly increasing inside (0, z_max)".into(),
            ));
        }
        Ok(Self {
            n_kicks: positions.len(),
            phi,
            z_max,
            positions,
        })
    }
}

/// Microdisk side-coupled to the system guide, seen only through its
/// stationary transmission. Rates share one arbitrary frequency unit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WgmModulator {
    pub kappa_e: f64,
    pub kappa_i: f64,
    /// Keep only the phase of `T` (`|T| = 1`).
    pub unit_magnitude: bool,
}

impl WgmModulator {
    pub fn new(kappa_e: f64, kappa_i: f64) -> Result<Self> {
        let m = Self {
            kappa_e,
            kappa_i,
            unit_magnitude: false,
        };
        m.validate()?;
        Ok(m)
    }

    /// `kappa_e = 1`, so detunings are in units of `kappa_e`.
    pub fn normalized(kappa_i_over_kappa_e: f64) -> Result<Self> {
        Self::new(1.0, kappa_i_over_kappa_e)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa_i >= 0.0 && self.kappa_e > self.kappa_i && self.kappa_e.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "WGM must be overcoupled with kappa_e > kappa_i >= 0, got kappa_e = {}, kappa_i = {}",
                self.kappa_e, self.kappa_i
            )));
        }
        Ok(())
    }
}

/// `T(Δ) = (iΔ - (κ_e - κ_i)) / (iΔ + (κ_e + κ_i))`.
pub fn wgm_transmission(delta: f64, m: &WgmModulator) -> Complex64 {
    let num = Complex64::new(-(m.kappa_e - m.kappa_i), delta);
    let den = Complex64::new(m.kappa_e + m.kappa_i, delta);
    let t = num / den;
    if m.unit_magnitude {
        Complex64::from_polar(1.0, wgm_phase(delta, m))
    } else {
        t
    }
}

/// `arg T(Δ)` in `(-π, π]`; exactly `π` on resonance.
pub fn wgm_phase(delta: f64, m: &WgmModulator) -> f64 {
    let num = delta.atan2(-(m.kappa_e - m.kappa_i));
    let den = delta.atan2(m.kappa_e + m.kappa_i);
    wrap_phase(num - den)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DdRow {
    pub n_kicks: usize,
    pub phi: f64,
    pub energy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WgmRow {
    /// Detuning in units of `kappa_e`.
    pub delta: f64,
    pub phi: f64,
    pub energy: f64,
}

/// `|a(z_probe)|²` after `n_kicks` midpoint kicks of phase `phi` over `[0, z_probe]`.
pub fn probe_energy(
    h: &StarHamiltonian,
    propagator: &Propagator,
    n_kicks: usize,
    phi: f64,
    z_probe: f64,
) -> Result<f64> {
    let schedule = make_schedule(n_kicks, phi, z_probe);
    let initial = StateVector::system_excited(h.env_mode_count());
    let trace = propagator.evolve(h, &initial, z_probe, z_probe, Some(&schedule))?;
    Ok(trace.final_state().a.norm_sqr())
}

pub fn dd_scan(
    geometry: &Geometry,
    n_kicks_list: &[usize],
    phi_grid: &[f64],
    z_probe: f64,
) -> Result<Vec<DdRow>> {
    let h = build_hamiltonian(geometry)?;
    dd_scan_with(&h, &Propagator::default(), n_kicks_list, phi_grid, z_probe)
}

/// Rows sorted by `(N, φ)`; grid points run in parallel.
pub fn dd_scan_with(
    h: &StarHamiltonian,
    propagator: &Propagator,
    n_kicks_list: &[usize],
    phi_grid: &[f64],
    z_probe: f64,
) -> Result<Vec<DdRow>> {
    let mut points: Vec<(usize, f64)> = n_kicks_list
        .iter()
        .flat_map(|&n| phi_grid.iter().map(move |&phi| (n, phi)))
        .collect();
    points.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    points
        .into_par_iter()
        .map(|(n, phi)| {
            probe_energy(h, propagator, n, phi, z_probe).map(|energy| DdRow {
                n_kicks: n,
                phi,
                energy,
            })
        })
        .collect()
}

pub fn wgm_scan(
    geometry: &Geometry,
    m: &WgmModulator,
    n_kicks: usize,
    delta_grid: &[f64],
    z_probe: f64,
) -> Result<Vec<WgmRow>> {
    let h = build_hamiltonian(geometry)?;
    wgm_scan_with(&h, &Propagator::default(), m, n_kicks, delta_grid, z_probe)
}

/// Every kick carries `wgm_phase(Δ κ_e)`; rows keep the order of `delta_grid`.
pub fn wgm_scan_with(
    h: &StarHamiltonian,
    propagator: &Propagator,
    m: &WgmModulator,
    n_kicks: usize,
    delta_grid: &[f64],
    z_probe: f64,
) -> Result<Vec<WgmRow>> {
    m.validate()?;
    delta_grid
        .par_iter()
        .map(|&delta| {
            let phi = wgm_phase(delta * m.kappa_e, m);
            probe_energy(h, propagator, n_kicks, phi, z_probe).map(|energy| WgmRow {
                delta,
                phi,
                energy,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn two_mode() -> StarHamiltonian {
        StarHamiltonian::from_parts(4.0, 10.0, vec![10.02], vec![0.05]).unwrap()
    }

    #[test]
    fn midpoint_positions() {
        let s = make_schedule(10, PI, 50.0);
        let expected: Vec<f64> = (0..10).map(|i| 2.5 + 5.0 * i as f64).collect();
        for (a, b) in s.positions.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(make_schedule(1, 0.3, 50.0).positions, vec![25.0]);
        assert!(make_schedule(0, PI, 50.0).positions.is_empty());
    }

    #[test]
    fn custom_positions_validated() {
        assert!(ModulationSchedule::with_positions(1.0, 10.0, vec![1.0, 5.0]).is_ok());
        assert!(ModulationSchedule::with_positions(1.0, 10.0, vec![5.0, 1.0]).is_err());
        assert!(ModulationSchedule::with_positions(1.0, 10.0, vec![0.0]).is_err());
        assert!(ModulationSchedule::with_positions(1.0, 10.0, vec![10.0]).is_err());
    }

    #[test]
    fn transmission_reference_points() {
        let m = WgmModulator::normalized(0.0).unwrap();
        let t0 = wgm_transmission(0.0, &m);
        assert_eq!(t0, Complex64::new(-1.0, 0.0));
        assert_eq!(wgm_phase(0.0, &m), PI);
        // (i - 1) / (i + 1) = i
        let t1 = wgm_transmission(1.0, &m);
        assert!((t1 - Complex64::new(0.0, 1.0)).norm() < 1e-15);
        assert!((wgm_phase(1.0, &m) - PI / 2.0).abs() < 1e-15);
        assert!((wgm_phase(-1.0, &m) + PI / 2.0).abs() < 1e-15);
        assert!((wgm_transmission(1e9, &m) - Complex64::new(1.0, 0.0)).norm() < 1e-8);
    }

    #[test]
    fn phase_matches_closed_form_without_loss() {
        let m = WgmModulator::normalized(0.0).unwrap();
        for i in 0..=200 {
            let d = i as f64 * 0.1;
            let closed = PI - 2.0 * d.atan();
            assert!((wgm_phase(d, &m) - closed).abs() < 1e-13, "delta = {d}");
        }
    }

    #[test]
    fn phase_decreases_from_pi() {
        let m = WgmModulator::normalized(0.05).unwrap();
        let mut prev = wgm_phase(0.0, &m);
        assert_eq!(prev, PI);
        for i in 1..=500 {
            let p = wgm_phase(i as f64 * 0.05, &m);
            assert!(p < prev && p > 0.0);
            prev = p;
        }
    }

    #[test]
    fn lossy_disk_magnitude() {
        let m = WgmModulator::normalized(0.001).unwrap();
        assert_eq!(wgm_phase(0.0, &m), PI);
        let t = wgm_transmission(0.0, &m).norm();
        assert!((t - 0.999 / 1.001).abs() < 1e-15);
        for i in -100..=100 {
            assert!(wgm_transmission(i as f64 * 0.3, &m).norm() <= 1.0);
        }
        let ideal = WgmModulator {
            unit_magnitude: true,
            ..m
        };
        assert!((wgm_transmission(0.7, &ideal).norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn underdamped_rejected() {
        assert!(WgmModulator::new(1.0, 1.0).is_err());
        assert!(WgmModulator::new(1.0, -0.1).is_err());
    }

    #[test]
    fn scan_rows_sorted_and_bounded() {
        let h = two_mode();
        let p = Propagator::default();
        let rows = dd_scan_with(&h, &p, &[3, 1], &[PI, 0.0, 1.0], 20.0).unwrap();
        let keys: Vec<(usize, f64)> = rows.iter().map(|r| (r.n_kicks, r.phi)).collect();
        assert_eq!(
            keys,
            vec![(1, 0.0), (1, 1.0), (1, PI), (3, 0.0), (3, 1.0), (3, PI)]
        );
        assert!(rows.iter().all(|r| (0.0..=1.0).contains(&r.energy)));
        assert!((rows[0].energy - rows[3].energy).abs() < 1e-10);
    }

    #[test]
    fn wgm_scan_matches_dd_scan() {
        let h = two_mode();
        let p = Propagator::default();
        let m = WgmModulator::normalized(0.0).unwrap();
        let deltas = [-3.0, -0.5, 0.0, 0.25, 2.0];
        let w = wgm_scan_with(&h, &p, &m, 4, &deltas, 20.0).unwrap();
        for row in &w {
            let d = dd_scan_with(&h, &p, &[4], &[row.phi], 20.0).unwrap();
            assert_eq!(d[0].energy, row.energy);
        }
    }
}
