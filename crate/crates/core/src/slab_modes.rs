// Copyright 2026 OpenWG Contributors
// SPDX-License-Identifier: Apache-2.0

//! Guided TE modes of an isolated symmetric dielectric slab.
//!
//! The slab occupies `|x| <= w/2` with core index `n_d`, surrounded by a
//! cladding of index 1. With `kappa = k sqrt(n_d^2 - n^2)` and
//! `gamma = k sqrt(n^2 - 1)` the guided modes solve
//!
//! ```text
//! even:  kappa tan(kappa w/2) = gamma
//! odd:  -kappa cot(kappa w/2) = gamma
//! ```
//!
//! Roots are located in the transverse phase `u = kappa w / 2`. Each
//! quarter-period `[m pi/2, (m+1) pi/2)` below the cutoff radius
//! `R = (w/2) k sqrt(n_d^2 - 1)` holds exactly one root, even for even `m`
//! and odd for odd `m`, so the brackets are known without scanning.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CLADDING_INDEX: f64 = 1.0;

const ROOT_TOL: f64 = 1e-13;
const MAX_BISECTIONS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlabSpec {
    pub core_index: f64,
    pub clad_index: f64,
    /// Slab width in um.
    pub width: f64,
    /// Vacuum wavelength in um.
    pub wavelength: f64,
}

impl SlabSpec {
    pub fn new(core_index: f64, width: f64, wavelength: f64) -> Result<Self> {
        let spec = Self {
            core_index,
            clad_index: CLADDING_INDEX,
            width,
            wavelength,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.clad_index >= 1.0 && self.core_index > self.clad_index) {
            return Err(Error::InvalidParameter(format!(
                "core index {} must exceed cladding index {} >= 1",
                self.core_index, self.clad_index
            )));
        }
        if !(self.width > 0.0 && self.width.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "slab width {} must be > 0",
                self.width
            )));
        }
        if !(self.wavelength > 0.0 && self.wavelength.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "wavelength {} must be > 0",
                self.wavelength
            )));
        }
        Ok(())
    }

    /// Vacuum wavenumber `2 pi / lambda`.
    pub fn k(&self) -> f64 {
        2.0 * PI / self.wavelength
    }

    /// Normalized frequency `k w sqrt(n_d^2 - n_c^2)`.
    pub fn v_number(&self) -> f64 {
        self.k() * self.width * self.index_contrast()
    }

    fn index_contrast(&self) -> f64 {
        (self.core_index.powi(2) - self.clad_index.powi(2)).sqrt()
    }

    pub fn kappa(&self, n: f64) -> f64 {
        self.k() * (self.core_index.powi(2) - n * n).max(0.0).sqrt()
    }

    pub fn gamma(&self, n: f64) -> f64 {
        self.k() * (n * n - self.clad_index.powi(2)).max(0.0).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Parity {
    Even,
    Odd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GuidedMode {
    pub n_eff: f64,
    pub parity: Parity,
    pub order: usize,
    /// Transverse wavenumber in the core (1/um).
    pub kappa: f64,
    /// Evanescent decay rate in the cladding (1/um).
    pub gamma: f64,
    /// Normalization constant (um^-1/2), always positive.
    pub amplitude: f64,
    /// +1 or -1. Even modes are positive at the core centre, odd modes at
    /// `x = +w/4`.
    pub sign: f64,
}

/// Number of guided TE modes, `1 + floor(V / pi)`.
pub fn count_modes(spec: &SlabSpec) -> usize {
    1 + (spec.v_number() / PI).floor() as usize
}

/// Residual of the pole-free characteristic function, divided by
/// `k sqrt(n_d^2 - 1)` so that it is dimensionless.
///
/// even: `kappa sin(kappa w/2) - gamma cos(kappa w/2)`
/// odd:  `kappa cos(kappa w/2) + gamma sin(kappa w/2)`
pub fn characteristic_residual(spec: &SlabSpec, parity: Parity, n: f64) -> f64 {
    let kappa = spec.kappa(n);
    let gamma = spec.gamma(n);
    let u = 0.5 * kappa * spec.width;
    let (s, c) = u.sin_cos();
    let f = match parity {
        Parity::Even => kappa * s - gamma * c,
        Parity::Odd => kappa * c + gamma * s,
    };
    f / (spec.k() * spec.index_contrast())
}

/// Effective index for a given transverse phase `u = kappa w / 2`.
fn index_at_phase(spec: &SlabSpec, u: f64) -> f64 {
    let kappa = 2.0 * u / spec.width;
    (spec.core_index.powi(2) - (kappa / spec.k()).powi(2))
        .max(spec.clad_index.powi(2))
        .sqrt()
}

fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64) -> Result<f64> {
    let (a0, b0) = (lo, hi);
    let mut f_lo = f(lo);
    let f_hi = f(hi);
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::RootBracketFailure { lo: a0, hi: b0 });
    }
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        // Run to machine precision: near n_d the characteristic function is
        // steep enough that a 1e-13 interval still leaves a 1e-9 residual.
        if mid <= lo || mid >= hi {
            return Ok(mid);
        }
        let f_mid = f(mid);
        if f_mid == 0.0 {
            return Ok(mid);
        }
        if f_mid.signum() == f_lo.signum() {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    if hi - lo < ROOT_TOL {
        return Ok(0.5 * (lo + hi));
    }
    Err(Error::RootBracketFailure { lo: a0, hi: b0 })
}

/// All guided modes, sorted by descending effective index.
pub fn solve_modes(spec: &SlabSpec) -> Result<Vec<GuidedMode>> {
    spec.validate()?;
    let radius = 0.5 * spec.v_number();
    let count = count_modes(spec);
    let mut modes = Vec::with_capacity(count);
    for order in 0..count {
        let u_lo = order as f64 * FRAC_PI_2;
        let u_hi = ((order + 1) as f64 * FRAC_PI_2).min(radius);
        let parity = if order % 2 == 0 {
            Parity::Even
        } else {
            Parity::Odd
        };
        // u increasing maps to n decreasing.
        let n_hi = index_at_phase(spec, u_lo).min(spec.core_index - 1e-15);
        let n_lo = index_at_phase(spec, u_hi).max(spec.clad_index + 1e-15);
        let n_eff = bisect(|n| characteristic_residual(spec, parity, n), n_lo, n_hi)?;
        modes.push(build_mode(spec, parity, order, n_eff));
    }
    modes.sort_by(|a, b| b.n_eff.total_cmp(&a.n_eff));
    Ok(modes)
}

fn build_mode(spec: &SlabSpec, parity: Parity, order: usize, n_eff: f64) -> GuidedMode {
    let kappa = spec.kappa(n_eff);
    let gamma = spec.gamma(n_eff);
    let w = spec.width;
    let half = 0.5 * w;
    let (s, c) = (kappa * half).sin_cos();
    let norm = match parity {
        Parity::Even => half + (kappa * w).sin() / (2.0 * kappa) + c * c / gamma,
        Parity::Odd => half - (kappa * w).sin() / (2.0 * kappa) + s * s / gamma,
    };
    let sign = match parity {
        Parity::Even => 1.0,
        Parity::Odd => {
            if (kappa * 0.25 * w).sin() < 0.0 {
                -1.0
            } else {
                1.0
            }
        }
    };
    GuidedMode {
        n_eff,
        parity,
        order,
        kappa,
        gamma,
        amplitude: norm.sqrt().recip(),
        sign,
    }
}

/// Transverse profile at `x` measured from the core centre (um^-1/2).
pub fn field_profile(mode: &GuidedMode, spec: &SlabSpec, x: f64) -> f64 {
    let half = 0.5 * spec.width;
    let a = mode.amplitude * mode.sign;
    let ax = x.abs();
    match mode.parity {
        Parity::Even => {
            if ax <= half {
                a * (mode.kappa * x).cos()
            } else {
                a * (mode.kappa * half).cos() * (-mode.gamma * (ax - half)).exp()
            }
        }
        Parity::Odd => {
            if ax <= half {
                a * (mode.kappa * x).sin()
            } else {
                x.signum() * a * (mode.kappa * half).sin() * (-mode.gamma * (ax - half)).exp()
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn silicon(width: f64) -> SlabSpec {
        SlabSpec::new(3.5, width, 1.55).unwrap()
    }

    /// Independent count: sign changes of the even and odd characteristic
    /// functions on a dense uniform grid in n.
    fn dense_grid_root_count(spec: &SlabSpec, points: usize) -> usize {
        let lo = 1.0 + 1e-12;
        let hi = spec.core_index - 1e-12;
        let mut count = 0;
        for parity in [Parity::Even, Parity::Odd] {
            let mut prev = characteristic_residual(spec, parity, lo);
            for i in 1..=points {
                let n = lo + (hi - lo) * i as f64 / points as f64;
                let cur = characteristic_residual(spec, parity, n);
                if cur.signum() != prev.signum() {
                    count += 1;
                }
                prev = cur;
            }
        }
        count
    }

    #[test]
    fn count_modes_reference_values() {
        assert_eq!(count_modes(&silicon(0.23)), 1);
        assert_eq!(count_modes(&silicon(1e-6)), 1);
        assert_eq!(count_modes(&silicon(5.0)), 22);
        assert_eq!(count_modes(&silicon(10.0)), 44);
    }

    #[test]
    fn count_matches_dense_grid_oracle() {
        let mut w = 0.1;
        while w <= 15.0 {
            let spec = silicon(w);
            assert_eq!(
                count_modes(&spec),
                dense_grid_root_count(&spec, 200_000),
                "w = {w}"
            );
            w += 0.37;
        }
        assert_eq!(dense_grid_root_count(&silicon(5.0), 200_000), 22);
    }

    #[test]
    fn single_mode_system_guide() {
        let spec = silicon(0.23);
        let modes = solve_modes(&spec).unwrap();
        assert_eq!(modes.len(), 1);
        assert_eq!(modes[0].parity, Parity::Even);
        // Oracle: bisection on kappa tan(kappa w/2) - gamma over a 10^4-point
        // bracketing grid, restricted to the first tangent branch.
        let k = spec.k();
        let f = |n: f64| {
            let kappa = k * (3.5f64 * 3.5 - n * n).sqrt();
            let gamma = k * (n * n - 1.0).sqrt();
            kappa * (kappa * 0.115).tan() - gamma
        };
        let grid: Vec<f64> = (1..10_000)
            .map(|i| 1.0 + 2.5 * i as f64 / 10_000.0)
            .collect();
        let mut root = None;
        for w in grid.windows(2) {
            let (fa, fb) = (f(w[0]), f(w[1]));
            if fa.signum() != fb.signum() && fa.abs() < 1e3 && fb.abs() < 1e3 {
                let (mut a, mut b) = (w[0], w[1]);
                for _ in 0..100 {
                    let m = 0.5 * (a + b);
                    if f(m).signum() == f(a).signum() {
                        a = m;
                    } else {
                        b = m;
                    }
                }
                root = Some(0.5 * (a + b));
            }
        }
        let root = root.unwrap();
        assert!((root - 2.87).abs() < 0.01, "oracle root {root}");
        assert!((modes[0].n_eff - root).abs() < 1e-11);
    }

    #[test]
    fn dispersion_identity_and_residual() {
        for w in [0.23, 1.0, 5.0, 10.0, 40.0] {
            let spec = silicon(w);
            let k = spec.k();
            let modes = solve_modes(&spec).unwrap();
            assert_eq!(modes.len(), count_modes(&spec));
            for m in &modes {
                assert!(m.n_eff > 1.0 && m.n_eff < 3.5);
                let lhs = m.kappa.powi(2) + m.gamma.powi(2);
                let rhs = k * k * (3.5f64.powi(2) - 1.0);
                assert_relative_eq!(lhs, rhs, max_relative = 1e-10);
                assert!(characteristic_residual(&spec, m.parity, m.n_eff).abs() < 1e-10);
            }
            for pair in modes.windows(2) {
                assert!(pair[0].n_eff > pair[1].n_eff);
            }
        }
    }

    #[test]
    fn profile_values_and_continuity() {
        let spec = silicon(3.0);
        let modes = solve_modes(&spec).unwrap();
        for m in &modes {
            let half = 0.5 * spec.width;
            let inside = field_profile(m, &spec, half);
            let outside = field_profile(m, &spec, half * (1.0 + 1e-14));
            assert!((inside - outside).abs() < 1e-9);
            match m.parity {
                Parity::Even => {
                    assert_relative_eq!(field_profile(m, &spec, 0.0), m.amplitude);
                }
                Parity::Odd => {
                    assert_eq!(field_profile(m, &spec, 0.0), 0.0);
                    assert!(field_profile(m, &spec, 0.25 * spec.width) > 0.0);
                }
            }
        }
    }

    fn riemann_overlap(spec: &SlabSpec, a: &GuidedMode, b: &GuidedMode) -> f64 {
        // Fine midpoint rule on a wide window; the oracle is deliberately
        // different from the closed-form normalization used in build_mode.
        let span = 0.5 * spec.width + 40.0 / a.gamma.min(b.gamma);
        let n = 400_000;
        let h = 2.0 * span / n as f64;
        (0..n)
            .map(|i| {
                let x = -span + (i as f64 + 0.5) * h;
                field_profile(a, spec, x) * field_profile(b, spec, x)
            })
            .sum::<f64>()
            * h
    }

    #[test]
    fn closed_form_normalization_against_quadrature() {
        use crate::quadrature::{integrate_pieces, QuadConfig};
        let spec = silicon(0.23);
        let m = solve_modes(&spec).unwrap()[0];
        let half = 0.5 * spec.width;
        let tail = 60.0 / m.gamma;
        let cfg = QuadConfig::default();
        let v = integrate_pieces(
            |x| field_profile(&m, &spec, x).powi(2),
            &[-half - tail, -half, half, half + tail],
            &cfg,
        )
        .unwrap();
        assert!((v - 1.0).abs() < 1e-8);
    }

    #[test]
    fn modes_are_orthonormal() {
        let spec = silicon(2.0);
        let modes = solve_modes(&spec).unwrap();
        assert!(modes.len() >= 4);
        for (i, a) in modes.iter().enumerate() {
            for (j, b) in modes.iter().enumerate() {
                let o = riemann_overlap(&spec, a, b);
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((o - expect).abs() < 1e-7, "({i},{j}) -> {o}");
            }
        }
    }

    #[test]
    fn effective_index_grows_with_width() {
        let mut prev: Option<Vec<GuidedMode>> = None;
        for i in 0..40 {
            let w = 0.2 + 0.25 * i as f64;
            let modes = solve_modes(&silicon(w)).unwrap();
            if let Some(p) = &prev {
                for (old, new) in p.iter().zip(&modes) {
                    assert!(new.n_eff > old.n_eff);
                }
            }
            prev = Some(modes);
        }
    }

    #[test]
    fn rejects_invalid_specs() {
        assert!(SlabSpec::new(0.9, 1.0, 1.55).is_err());
        assert!(SlabSpec::new(3.5, -1.0, 1.55).is_err());
        assert!(SlabSpec::new(3.5, 1.0, 0.0).is_err());
    }
}
