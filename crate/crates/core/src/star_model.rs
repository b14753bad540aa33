// Copyright 2026 OpenWG Contributors
// SPDX-License-Identifier: Apache-2.0

//! Star-topology Hamiltonian of a single-mode system slab coupled to the
//! guided modes of a second (environment) slab.
//!
//! Coordinates: the system core occupies `[-d - w_s, -d]`, the environment
//! core `[0, w_e]`, and the gap `(-d, 0)` is air.
//!
//! Overlap coefficients (all in 1/um):
//!
//! ```text
//! m_11^s = ∫ φ_s V^e φ_s dx / (2 n_s k)      self shift of the system mode
//! m_jj^e = ∫ φ_j V^s φ_j dx / (2 n_j k)      self shift of environment mode j
//! g_1j^s = ∫ φ_s V^s φ_j dx / (2 n_s k)
//! g_1j^e = ∫ φ_j V^e φ_s dx / (2 n_j k)
//! ```
//!
//! The self shifts use the potential of the *other* core: that is the
//! first-order perturbation each isolated mode feels from its neighbour.
//! The Hamiltonian is then
//! `beta_0 = n_s k + m_11^s`, `beta_j = n_j k + m_jj^e`,
//! `g_j = sqrt(g_1j^s g_1j^e)`; environment cross terms are dropped.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{integrate, QuadConfig};
use crate::slab_modes::{count_modes, field_profile, solve_modes, GuidedMode, SlabSpec};

/// Upper bound on `|m_11^s| / k` relative to `n_s` inside the weak-coupling regime.
pub const WEAK_COUPLING_BOUND: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    /// System waveguide width w_s (um).
    pub system_width: f64,
    /// Environment waveguide width w_e (um).
    pub env_width: f64,
    /// Air gap d between the cores (um).
    pub gap: f64,
    /// Core refractive index n_d.
    pub core_index: f64,
    /// Vacuum wavelength (um).
    pub wavelength: f64,
}

impl Default for Geometry {
    fn default() -> Self {
        Self {
            system_width: 0.23,
            env_width: 10.0,
            gap: 0.15,
            core_index: 3.5,
            wavelength: 1.55,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Waveguide {
    System,
    Environment,
}

impl Geometry {
    pub fn new(system_width: f64, env_width: f64, gap: f64) -> Self {
        Self {
            system_width,
            env_width,
            gap,
            ..Self::default()
        }
    }

    pub fn with_env_width(mut self, env_width: f64) -> Self {
        self.env_width = env_width;
        self
    }

    pub fn with_gap(mut self, gap: f64) -> Self {
        self.gap = gap;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("system width", self.system_width),
            ("environment width", self.env_width),
            ("gap", self.gap),
            ("wavelength", self.wavelength),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be > 0, got {v}"
                )));
            }
        }
        if !(self.core_index > 1.0 && self.core_index.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "core index must be > 1, got {}",
                self.core_index
            )));
        }
        Ok(())
    }

    pub fn k(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.wavelength
    }

    pub fn system_slab(&self) -> SlabSpec {
        SlabSpec::new(self.core_index, self.system_width, self.wavelength)
            .expect("geometry validated")
    }

    pub fn env_slab(&self) -> SlabSpec {
        SlabSpec::new(self.core_index, self.env_width, self.wavelength).expect("geometry validated")
    }

    pub fn core_interval(&self, which: Waveguide) -> (f64, f64) {
        match which {
            Waveguide::System => (-self.gap - self.system_width, -self.gap),
            Waveguide::Environment => (0.0, self.env_width),
        }
    }

    pub fn core_center(&self, which: Waveguide) -> f64 {
        let (a, b) = self.core_interval(which);
        0.5 * (a + b)
    }

    /// Peak of the perturbation potential, `(n_d^2 - 1) k^2`.
    pub fn potential_depth(&self) -> f64 {
        (self.core_index.powi(2) - 1.0) * self.k().powi(2)
    }
}

/// `V^s(x)` or `V^e(x)` in 1/um^2.
pub fn perturbation_potential(geometry: &Geometry, which: Waveguide, x: f64) -> f64 {
    let (a, b) = geometry.core_interval(which);
    if x >= a && x <= b {
        geometry.potential_depth()
    } else {
        0.0
    }
}

/// Isolated-slab modes placed in the two-guide coordinate frame.
#[derive(Debug, Clone)]
pub struct CoupledModes {
    pub geometry: Geometry,
    pub system: GuidedMode,
    pub environment: Vec<GuidedMode>,
}

impl CoupledModes {
    pub fn solve(geometry: &Geometry) -> Result<Self> {
        geometry.validate()?;
        let sys_spec = geometry.system_slab();
        let n_sys = count_modes(&sys_spec);
        if n_sys != 1 {
            return Err(Error::SystemNotSingleMode(n_sys));
        }
        let system = solve_modes(&sys_spec)?[0];
        let environment = solve_modes(&geometry.env_slab())?;
        Ok(Self {
            geometry: *geometry,
            system,
            environment,
        })
    }

    pub fn system_profile(&self, x: f64) -> f64 {
        let g = &self.geometry;
        field_profile(
            &self.system,
            &g.system_slab(),
            x - g.core_center(Waveguide::System),
        )
    }

    pub fn env_profile(&self, j: usize, x: f64) -> f64 {
        let g = &self.geometry;
        field_profile(
            &self.environment[j],
            &g.env_slab(),
            x - g.core_center(Waveguide::Environment),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapTable {
    /// m_11^s (1/um).
    pub m_self_sys: f64,
    /// m_jj^e (1/um).
    pub m_self_env: Vec<f64>,
    /// g_1j^s (1/um).
    pub g_sys_env: Vec<f64>,
    /// g_1j^e (1/um).
    pub g_env_sys: Vec<f64>,
}

fn overlap_quad() -> QuadConfig {
    QuadConfig {
        rel_tol: 1e-10,
        ..QuadConfig::default()
    }
}

pub fn compute_overlaps(geometry: &Geometry) -> Result<OverlapTable> {
    let modes = CoupledModes::solve(geometry)?;
    overlaps_for(&modes)
}

pub fn overlaps_for(modes: &CoupledModes) -> Result<OverlapTable> {
    let g = &modes.geometry;
    let k = g.k();
    let depth = g.potential_depth();
    let cfg = overlap_quad();
    let (s0, s1) = g.core_interval(Waveguide::System);
    let (e0, e1) = g.core_interval(Waveguide::Environment);
    let n_s = modes.system.n_eff;

    let m_self_sys =
        depth / (2.0 * n_s * k) * integrate(|x| modes.system_profile(x).powi(2), e0, e1, &cfg)?;

    let n_env = modes.environment.len();
    let mut m_self_env = Vec::with_capacity(n_env);
    let mut g_sys_env = Vec::with_capacity(n_env);
    let mut g_env_sys = Vec::with_capacity(n_env);
    for (j, mode) in modes.environment.iter().enumerate() {
        let n_j = mode.n_eff;
        let m = integrate(|x| modes.env_profile(j, x).powi(2), s0, s1, &cfg)?;
        m_self_env.push(depth / (2.0 * n_j * k) * m);
        let gs = integrate(
            |x| modes.system_profile(x) * modes.env_profile(j, x),
            s0,
            s1,
            &cfg,
        )?;
        g_sys_env.push(depth / (2.0 * n_s * k) * gs);
        let ge = integrate(
            |x| modes.env_profile(j, x) * modes.system_profile(x),
            e0,
            e1,
            &cfg,
        )?;
        g_env_sys.push(depth / (2.0 * n_j * k) * ge);
    }
    Ok(OverlapTable {
        m_self_sys,
        m_self_env,
        g_sys_env,
        g_env_sys,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StarHamiltonian {
    /// Vacuum wavenumber (1/um).
    pub k: f64,
    /// System propagation constant beta_0 (1/um).
    pub beta0: f64,
    /// Environment propagation constants beta_j (1/um), strictly decreasing.
    pub betas: Vec<f64>,
    /// Couplings g_j >= 0 (1/um).
    pub couplings: Vec<f64>,
    /// Bare effective indices n_j^e of the isolated environment slab.
    pub env_mode_indices: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<Geometry>,
}

impl StarHamiltonian {
    /// Hamiltonian assembled directly from its parameters, without geometry.
    pub fn from_parts(k: f64, beta0: f64, betas: Vec<f64>, couplings: Vec<f64>) -> Result<Self> {
        if betas.len() != couplings.len() {
            return Err(Error::InvalidParameter(format!(
                "{} propagation constants but {} couplings",
                betas.len(),
                couplings.len()
            )));
        }
        let env_mode_indices = betas.iter().map(|b| b / k).collect();
        Ok(Self {
            k,
            beta0,
            betas,
            couplings,
            env_mode_indices,
            geometry: None,
        })
    }

    pub fn env_mode_count(&self) -> usize {
        self.betas.len()
    }

    pub fn dim(&self) -> usize {
        self.betas.len() + 1
    }

    /// `n_0 = beta_0 / k`.
    pub fn system_index(&self) -> f64 {
        self.beta0 / self.k
    }

    /// Dense real-symmetric matrix; index 0 is the system mode.
    pub fn matrix(&self) -> DMatrix<f64> {
        let n = self.dim();
        let mut h = DMatrix::zeros(n, n);
        h[(0, 0)] = self.beta0;
        for (j, (&b, &g)) in self.betas.iter().zip(&self.couplings).enumerate() {
            h[(j + 1, j + 1)] = b;
            h[(0, j + 1)] = g;
            h[(j + 1, 0)] = g;
        }
        h
    }

    /// `sum_j g_j^2`.
    pub fn total_coupling_sq(&self) -> f64 {
        self.couplings.iter().map(|g| g * g).sum()
    }

    /// `(beta_j / k, g_j^2 w_e)` sorted by index. Requires a geometry.
    pub fn coupling_spectrum(&self) -> Vec<(f64, f64)> {
        let w_e = self.geometry.map(|g| g.env_width).unwrap_or(1.0);
        let mut pts: Vec<(f64, f64)> = self
            .betas
            .iter()
            .zip(&self.couplings)
            .map(|(b, g)| (b / self.k, g * g * w_e))
            .collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        pts
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("hamiltonian serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::InvalidParameter(e.to_string()))
    }
}

pub fn build_hamiltonian(geometry: &Geometry) -> Result<StarHamiltonian> {
    let modes = CoupledModes::solve(geometry)?;
    hamiltonian_from_modes(&modes)
}

pub fn hamiltonian_from_modes(modes: &CoupledModes) -> Result<StarHamiltonian> {
    let geometry = modes.geometry;
    let k = geometry.k();
    let table = overlaps_for(modes)?;
    let n_s = modes.system.n_eff;
    if (table.m_self_sys / k).abs() >= WEAK_COUPLING_BOUND * n_s {
        log::warn!(
            "self shift m_11/k = {:.4} exceeds {} n_s: gap {} um is outside the weak-coupling regime",
            table.m_self_sys / k,
            WEAK_COUPLING_BOUND,
            geometry.gap
        );
    }
    let beta0 = n_s * k + table.m_self_sys;
    let mut betas = Vec::with_capacity(modes.environment.len());
    let mut couplings = Vec::with_capacity(modes.environment.len());
    for (j, mode) in modes.environment.iter().enumerate() {
        let product = table.g_sys_env[j] * table.g_env_sys[j];
        if product < 0.0 {
            return Err(Error::NegativeCouplingProduct { mode: j, product });
        }
        betas.push(mode.n_eff * k + table.m_self_env[j]);
        couplings.push(product.sqrt());
    }
    Ok(StarHamiltonian {
        k,
        beta0,
        betas,
        couplings,
        env_mode_indices: modes.environment.iter().map(|m| m.n_eff).collect(),
        geometry: Some(geometry),
    })
}

pub fn coupling_spectrum(geometry: &Geometry) -> Result<Vec<(f64, f64)>> {
    Ok(build_hamiltonian(geometry)?.coupling_spectrum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn potential_regions() {
        let g = Geometry::default();
        assert_eq!(perturbation_potential(&g, Waveguide::System, -0.05), 0.0);
        assert_eq!(
            perturbation_potential(&g, Waveguide::Environment, -0.05),
            0.0
        );
        let depth = perturbation_potential(&g, Waveguide::Environment, 5.0);
        let k = 2.0 * std::f64::consts::PI / 1.55;
        assert_relative_eq!(depth, (3.5f64.powi(2) - 1.0) * k * k, max_relative = 1e-15);
        assert!((depth - 184.9).abs() < 0.1);
        assert_eq!(perturbation_potential(&g, Waveguide::System, 5.0), 0.0);
        let mut x = -1.0;
        while x < 11.0 {
            let vs = perturbation_potential(&g, Waveguide::System, x);
            let ve = perturbation_potential(&g, Waveguide::Environment, x);
            assert_eq!(vs * ve, 0.0);
            x += 0.001;
        }
    }

    /// Closed-form overlaps for cos/exp profiles; independent of quadrature.
    fn closed_form_g_sys(modes: &CoupledModes, j: usize) -> f64 {
        let g = &modes.geometry;
        let s = &modes.system;
        let e = &modes.environment[j];
        let k = g.k();
        let (s0, s1) = g.core_interval(Waveguide::System);
        let cs = g.core_center(Waveguide::System);
        // Environment tail in the system core: phi_j(0) * exp(gamma_j x).
        let edge = modes.env_profile(j, 0.0);
        let (kap, gam) = (s.kappa, e.gamma);
        let prim = |x: f64| {
            let u = x - cs;
            (gam * (kap * u).cos() + kap * (kap * u).sin()) * (gam * x).exp()
                / (gam * gam + kap * kap)
        };
        let integral = s.amplitude * edge * (prim(s1) - prim(s0));
        g.potential_depth() / (2.0 * s.n_eff * k) * integral
    }

    #[test]
    fn quadrature_matches_closed_form_overlap() {
        let modes = CoupledModes::solve(&Geometry::default()).unwrap();
        let table = overlaps_for(&modes).unwrap();
        for j in [0, 5, 20, 43] {
            let exact = closed_form_g_sys(&modes, j);
            assert_relative_eq!(table.g_sys_env[j], exact, max_relative = 1e-8);
        }
    }

    #[test]
    fn couplings_vanish_for_wide_gaps() {
        // g_j^2 = g_1j^s g_1j^e decays as exp(-(gamma_s + gamma_j) d); the
        // one-sided g_1j^s of near-cutoff modes (gamma_j -> 0) does not.
        let near = build_hamiltonian(&Geometry::default()).unwrap();
        let far = build_hamiltonian(&Geometry::default().with_gap(3.0)).unwrap();
        for (a, b) in near.couplings.iter().zip(&far.couplings) {
            assert!(*b < 1e-6 * a, "{b} vs {a}");
        }
    }

    #[test]
    fn gap_ratio_follows_system_decay() {
        let g1 = Geometry::default();
        let modes = CoupledModes::solve(&g1).unwrap();
        let near = overlaps_for(&modes).unwrap();
        let far = compute_overlaps(&g1.with_gap(0.3)).unwrap();
        let n_s = modes.system.n_eff;
        let j = modes
            .environment
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1.n_eff - n_s).abs().total_cmp(&(b.1.n_eff - n_s).abs()))
            .unwrap()
            .0;
        let ratio = far.g_sys_env[j] / near.g_sys_env[j];
        let expect = (-modes.system.gamma * 0.15).exp();
        assert!((ratio / expect - 1.0).abs() < 0.2, "{ratio} vs {expect}");
    }

    #[test]
    fn identical_guides_are_symmetric() {
        let g = Geometry::new(0.23, 0.23, 0.15);
        let table = compute_overlaps(&g).unwrap();
        assert_eq!(table.g_sys_env.len(), 1);
        assert_relative_eq!(table.g_sys_env[0], table.g_env_sys[0], max_relative = 1e-9);
        assert_relative_eq!(table.m_self_sys, table.m_self_env[0], max_relative = 1e-9);
        let h = build_hamiltonian(&g).unwrap();
        assert_eq!(h.env_mode_count(), 1);
        assert!((h.beta0 - h.betas[0]).abs() < 1e-9 * h.beta0);
    }

    #[test]
    fn wide_environment_structure() {
        let h = build_hamiltonian(&Geometry::default()).unwrap();
        assert_eq!(h.env_mode_count(), 44);
        assert_eq!(h.couplings.len(), 44);
        assert_eq!(h.env_mode_indices.len(), 44);
        for w in h.betas.windows(2) {
            assert!(w[0] > w[1]);
        }
        for &b in &h.betas {
            assert!(b > h.k * 0.999 && b < 3.5 * h.k * 1.001);
        }
        assert!(h.couplings.iter().all(|&g| g >= 0.0 && g.is_finite()));
        let m = h.matrix();
        assert_eq!(m, m.transpose());
    }

    #[test]
    fn multimode_system_is_rejected() {
        let g = Geometry::new(0.5, 10.0, 0.15);
        assert!(matches!(build_hamiltonian(&g), Err(Error::SystemNotSingleMode(n)) if n > 1));
    }

    #[test]
    fn self_shift_is_small() {
        for d in [0.1, 0.15, 0.25] {
            let g = Geometry::default().with_gap(d);
            let modes = CoupledModes::solve(&g).unwrap();
            let t = overlaps_for(&modes).unwrap();
            assert!((t.m_self_sys / g.k()).abs() < WEAK_COUPLING_BOUND * modes.system.n_eff);
        }
    }

    #[test]
    fn json_round_trip() {
        let h = build_hamiltonian(&Geometry::new(0.23, 2.0, 0.15)).unwrap();
        let back = StarHamiltonian::from_json(&h.to_json()).unwrap();
        assert_eq!(h, back);
        let v: serde_json::Value = serde_json::from_str(&h.to_json()).unwrap();
        for key in [
            "k",
            "beta0",
            "betas",
            "couplings",
            "env_mode_indices",
            "geometry",
        ] {
            assert!(v.get(key).is_some(), "missing {key}");
        }
    }
}
