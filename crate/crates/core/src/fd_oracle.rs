// Copyright 2026 OpenWG Contributors
// SPDX-License-Identifier: Apache-2.0

//! Full-field reference propagation of the scalar wave equation.
//!
//! The slowly varying envelope `ψ(x, z)` of `E = ψ e^{-iβ_ref z}` obeys the
//! paraxial equation
//!
//! ```text
//! ∂ψ/∂z = -i/(2β_ref) [∂²ψ/∂x² + k²(n²(x) - n_ref²) ψ]
//! ```
//!
//! with `β_ref = n_ref k`. Near both x-boundaries the coordinate is stretched
//! into the complex plane, `∂/∂x -> (1 - iσ(x))⁻¹ ∂/∂x` with a quadratic
//! `σ(x)`, so outgoing waves decay inside the layer without reflecting. The
//! equation is stepped with Crank–Nicolson on a uniform grid; the tridiagonal
//! system is factored once. Guided modes are stationary up to the
//! `(β² - β_ref²)/(2β_ref)` phase, and phase matching at `β_ref` is exact.
//! `OracleOptions::wide_angle` swaps the operator `P` in brackets for its
//! Padé (1,1) form `(1 + P/(4β_ref²))⁻¹ P`.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dd_control::ModulationSchedule;
use crate::error::{Error, Result};
use crate::io::{write_atomic, write_csv, write_json};
use crate::kernel_analysis::{linear_fit, prominent_maxima};
use crate::slab_modes::{field_profile, solve_modes, GuidedMode, SlabSpec, CLADDING_INDEX};
use crate::star_model::{Geometry, Waveguide};

pub const DEFAULT_DX: f64 = 0.02;
pub const DEFAULT_DZ: f64 = 0.02;
pub const DEFAULT_ABSORBER_WIDTH: f64 = 1.0;
/// Peak imaginary stretching `σ` at the outer edge of the absorbing layer.
pub const DEFAULT_ABSORBER_STRENGTH: f64 = 10.0;
/// Cladding kept between each core and the absorber (um).
pub const CLADDING_MARGIN: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub dx: f64,
    pub dz: f64,
    pub z_max: f64,
    pub absorber_width: f64,
}

impl GridSpec {
    /// Default spacing, with `CLADDING_MARGIN` of cladding outside both cores.
    pub fn for_geometry(geometry: &Geometry, z_max: f64) -> Self {
        let (s_lo, _) = geometry.core_interval(Waveguide::System);
        let (_, e_hi) = geometry.core_interval(Waveguide::Environment);
        let pad = CLADDING_MARGIN + DEFAULT_ABSORBER_WIDTH;
        Self {
            x_min: s_lo - pad,
            x_max: e_hi + pad,
            dx: DEFAULT_DX,
            dz: DEFAULT_DZ,
            z_max,
            absorber_width: DEFAULT_ABSORBER_WIDTH,
        }
    }

    pub fn with_spacing(mut self, dx: f64, dz: f64) -> Self {
        self.dx = dx;
        self.dz = dz;
        self
    }

    pub fn resolution_bound(wavelength: f64, core_index: f64) -> f64 {
        wavelength / (10.0 * core_index)
    }

    pub fn validate(&self, geometry: &Geometry) -> Result<()> {
        for (name, v) in [
            ("dx", self.dx),
            ("dz", self.dz),
            ("z_max", self.z_max),
            ("absorber width", self.absorber_width),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be > 0, got {v}"
                )));
            }
        }
        let bound = Self::resolution_bound(geometry.wavelength, geometry.core_index);
        if self.dx > bound {
            return Err(Error::GridTooCoarse { dx: self.dx, bound });
        }
        let (s_lo, _) = geometry.core_interval(Waveguide::System);
        let (_, e_hi) = geometry.core_interval(Waveguide::Environment);
        let need = CLADDING_MARGIN + self.absorber_width - 1e-9;
        if s_lo - self.x_min < need || self.x_max - e_hi < need {
            return Err(Error::InvalidParameter(format!(
                "domain [{}, {}] must keep {CLADDING_MARGIN} um of cladding plus the absorber beyond both cores",
                self.x_min, self.x_max
            )));
        }
        Ok(())
    }

    pub fn nx(&self) -> usize {
        ((self.x_max - self.x_min) / self.dx).round() as usize + 1
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.dx
    }

    pub fn steps(&self) -> usize {
        (self.z_max / self.dz).round() as usize
    }
}

/// Which cores are present in the refractive-index profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexProfile {
    BothGuides,
    SystemOnly,
    /// Homogeneous medium of the given index.
    Uniform(f64),
}

/// How a phase plate acts on the field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlateModel {
    /// Samples with `x` inside the system core are multiplied by `e^{iφ}`.
    CoreSamples,
    /// Only the system-mode component is multiplied by `e^{iφ}`.
    ModeProjector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleOptions {
    pub profile: IndexProfile,
    /// Field rows are stored every `sample_dz` (a multiple of `dz`).
    pub sample_dz: f64,
    pub absorber_strength: f64,
    pub launch: Waveguide,
    pub plates: Option<ModulationSchedule>,
    pub plate_model: PlateModel,
    /// Padé (1,1) wide-angle operator instead of the paraxial one.
    pub wide_angle: bool,
    /// Defaults to the effective index of the launched mode.
    pub reference_index: Option<f64>,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            profile: IndexProfile::BothGuides,
            sample_dz: 0.1,
            absorber_strength: DEFAULT_ABSORBER_STRENGTH,
            launch: Waveguide::System,
            plates: None,
            plate_model: PlateModel::CoreSamples,
            wide_angle: false,
            reference_index: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldMap {
    pub grid: GridSpec,
    pub geometry: Geometry,
    pub reference_index: f64,
    pub z: Vec<f64>,
    /// Row-major, x fastest: `values[iz * nx + ix]`.
    pub values: Vec<Complex64>,
}

impl FieldMap {
    pub fn nx(&self) -> usize {
        self.grid.nx()
    }

    pub fn row(&self, iz: usize) -> &[Complex64] {
        let nx = self.nx();
        &self.values[iz * nx..(iz + 1) * nx]
    }

    pub fn total_power(&self, iz: usize) -> f64 {
        self.row(iz).iter().map(|c| c.norm_sqr()).sum::<f64>() * self.grid.dx
    }

    /// Flat little-endian `(re, im)` pairs plus `<stem>.json` header.
    pub fn write_binary(&self, dir: &Path, stem: &str) -> Result<()> {
        let mut bytes = Vec::with_capacity(self.values.len() * 16);
        for c in &self.values {
            bytes.extend_from_slice(&c.re.to_le_bytes());
            bytes.extend_from_slice(&c.im.to_le_bytes());
        }
        write_atomic(&dir.join(format!("{stem}.bin")), &bytes)?;
        let header = serde_json::json!({
            "layout": "row-major, x fastest, little-endian f64 (re, im) pairs",
            "nx": self.nx(),
            "nz": self.z.len(),
            "x_min": self.grid.x_min,
            "dx": self.grid.dx,
            "z": self.z,
            "grid": self.grid,
            "geometry": self.geometry,
            "reference_index": self.reference_index,
            "method": "paraxial Crank-Nicolson propagation with complex coordinate-stretching absorbers",
        });
        write_json(&dir.join(format!("{stem}.json")), &header)
    }

    /// `|ψ|²` on every `x_stride`-th column and `z_stride`-th row.
    pub fn write_intensity_csv(&self, path: &Path, x_stride: usize, z_stride: usize) -> Result<()> {
        let (xs, zs) = (x_stride.max(1), z_stride.max(1));
        let nx = self.nx();
        let rows = (0..self.z.len()).step_by(zs).flat_map(|iz| {
            let row = self.row(iz);
            let z = self.z[iz];
            (0..nx)
                .step_by(xs)
                .map(move |ix| vec![z, self.grid.x(ix), row[ix].norm_sqr()])
        });
        write_csv(path, &["z (um)", "x (um)", "intensity"], rows)
    }
}

fn cell_fraction(x: f64, dx: f64, (a, b): (f64, f64)) -> f64 {
    let lo = (x - 0.5 * dx).max(a);
    let hi = (x + 0.5 * dx).min(b);
    ((hi - lo) / dx).clamp(0.0, 1.0)
}

/// Cell-averaged `n²` at every grid point.
pub fn index_squared(geometry: &Geometry, grid: &GridSpec, profile: IndexProfile) -> Vec<f64> {
    let nd2 = geometry.core_index.powi(2);
    let clad2 = CLADDING_INDEX * CLADDING_INDEX;
    let cores: Vec<(f64, f64)> = match profile {
        IndexProfile::BothGuides => vec![
            geometry.core_interval(Waveguide::System),
            geometry.core_interval(Waveguide::Environment),
        ],
        IndexProfile::SystemOnly => vec![geometry.core_interval(Waveguide::System)],
        IndexProfile::Uniform(n) => return vec![n * n; grid.nx()],
    };
    (0..grid.nx())
        .map(|i| {
            let x = grid.x(i);
            let f: f64 = cores.iter().map(|&c| cell_fraction(x, grid.dx, c)).sum();
            clad2 + f * (nd2 - clad2)
        })
        .collect()
}

/// Stretching factor `1 - iσ(x)` with `σ` rising quadratically to `strength`;
/// the sign matches the `e^{-iβz}` convention.
fn stretch(grid: &GridSpec, strength: f64, x: f64) -> Complex64 {
    let w = grid.absorber_width;
    let depth = ((grid.x_min + w - x).max(x - (grid.x_max - w)).max(0.0) / w).min(1.0);
    Complex64::new(1.0, -strength * depth * depth)
}

/// Sub-, main and super-diagonal of the stretched second difference.
fn second_difference(
    grid: &GridSpec,
    strength: f64,
) -> (Vec<Complex64>, Vec<Complex64>, Vec<Complex64>) {
    let nx = grid.nx();
    let inv_dx2 = 1.0 / (grid.dx * grid.dx);
    let mut lower = vec![Complex64::default(); nx];
    let mut main = vec![Complex64::default(); nx];
    let mut upper = vec![Complex64::default(); nx];
    for i in 0..nx {
        let x = grid.x(i);
        let s = stretch(grid, strength, x);
        let left = inv_dx2 / (s * stretch(grid, strength, x - 0.5 * grid.dx));
        let right = inv_dx2 / (s * stretch(grid, strength, x + 0.5 * grid.dx));
        lower[i] = left;
        upper[i] = right;
        main[i] = -(left + right);
    }
    (lower, main, upper)
}

/// Mode sampled on the grid and scaled so that `Σ|φ|² dx = 1`.
pub fn sampled_mode(mode: &GuidedMode, spec: &SlabSpec, center: f64, grid: &GridSpec) -> Vec<f64> {
    let mut v: Vec<f64> = (0..grid.nx())
        .map(|i| field_profile(mode, spec, grid.x(i) - center))
        .collect();
    let norm = (v.iter().map(|a| a * a).sum::<f64>() * grid.dx).sqrt();
    v.iter_mut().for_each(|a| *a /= norm);
    v
}

fn launch_spec(geometry: &Geometry, which: Waveguide) -> SlabSpec {
    match which {
        Waveguide::System => geometry.system_slab(),
        Waveguide::Environment => geometry.env_slab(),
    }
}

/// Sampled fundamental mode of `which`.
pub fn sampled_fundamental(
    geometry: &Geometry,
    grid: &GridSpec,
    which: Waveguide,
) -> Result<Vec<f64>> {
    let spec = launch_spec(geometry, which);
    let mode = solve_modes(&spec)?[0];
    Ok(sampled_mode(
        &mode,
        &spec,
        geometry.core_center(which),
        grid,
    ))
}

/// Tridiagonal solve, factored once.
struct Tridiagonal {
    lower: Vec<Complex64>,
    c_prime: Vec<Complex64>,
    inv_den: Vec<Complex64>,
}

impl Tridiagonal {
    fn new(lower: Vec<Complex64>, diag: &[Complex64], upper: &[Complex64]) -> Self {
        let n = diag.len();
        let mut c_prime = vec![Complex64::default(); n];
        let mut inv_den = vec![Complex64::default(); n];
        let mut prev = Complex64::default();
        for i in 0..n {
            let den = diag[i] - lower[i] * prev;
            inv_den[i] = den.inv();
            prev = upper[i] * inv_den[i];
            c_prime[i] = prev;
        }
        Self {
            lower,
            c_prime,
            inv_den,
        }
    }

    fn solve(&self, rhs: &mut [Complex64]) {
        let n = rhs.len();
        let mut prev = Complex64::default();
        for i in 0..n {
            rhs[i] = (rhs[i] - self.lower[i] * prev) * self.inv_den[i];
            prev = rhs[i];
        }
        for i in (0..n - 1).rev() {
            let next = rhs[i + 1];
            rhs[i] -= self.c_prime[i] * next;
        }
    }
}

/// Propagates the launched fundamental mode with default options.
pub fn propagate_field(
    geometry: &Geometry,
    grid: &GridSpec,
    source: &GuidedMode,
) -> Result<FieldMap> {
    propagate_field_with(geometry, grid, source, &OracleOptions::default())
}

pub fn propagate_field_with(
    geometry: &Geometry,
    grid: &GridSpec,
    source: &GuidedMode,
    opts: &OracleOptions,
) -> Result<FieldMap> {
    geometry.validate()?;
    grid.validate(geometry)?;
    let spec = launch_spec(geometry, opts.launch);
    let initial: Vec<Complex64> =
        sampled_mode(source, &spec, geometry.core_center(opts.launch), grid)
            .into_iter()
            .map(|v| Complex64::new(v, 0.0))
            .collect();
    let n_ref = opts.reference_index.unwrap_or(source.n_eff);
    propagate_envelope(geometry, grid, initial, n_ref, opts)
}

/// Propagates an arbitrary initial envelope sampled on the grid.
pub fn propagate_envelope(
    geometry: &Geometry,
    grid: &GridSpec,
    initial: Vec<Complex64>,
    n_ref: f64,
    opts: &OracleOptions,
) -> Result<FieldMap> {
    geometry.validate()?;
    grid.validate(geometry)?;
    let nx = grid.nx();
    if initial.len() != nx {
        return Err(Error::InvalidParameter(format!(
            "initial field has {} samples, grid has {nx}",
            initial.len()
        )));
    }
    let stride = (opts.sample_dz / grid.dz).round() as usize;
    if stride == 0 || ((stride as f64) * grid.dz - opts.sample_dz).abs() > 1e-9 * opts.sample_dz {
        return Err(Error::InvalidParameter(format!(
            "sample_dz = {} must be a positive multiple of dz = {}",
            opts.sample_dz, grid.dz
        )));
    }
    let k = geometry.k();
    let beta_ref = n_ref * k;
    let n2 = index_squared(geometry, grid, opts.profile);
    let (d2_lower, d2_main, d2_upper) = second_difference(grid, opts.absorber_strength);

    // P = D2 + k²(n² - n_ref²) as P ψ_i = l_i ψ_{i-1} + p_i ψ_i + u_i ψ_{i+1}.
    // Paraxial: ∂ψ/∂z = -i/(2β) P ψ. Wide angle (Padé 1,1):
    // (1 + P/(4β²)) ∂ψ/∂z = -i/(2β) P ψ. Crank–Nicolson in both cases.
    let p_diag: Vec<Complex64> = (0..nx)
        .map(|i| d2_main[i] + k * k * (n2[i] - n_ref * n_ref))
        .collect();
    let pade = if opts.wide_angle {
        1.0 / (4.0 * beta_ref * beta_ref)
    } else {
        0.0
    };
    let half_step = Complex64::new(0.0, -0.5 * grid.dz / (2.0 * beta_ref));
    let minus = pade - half_step;
    let plus = pade + half_step;
    let solver = Tridiagonal::new(
        d2_lower.iter().map(|v| minus * v).collect(),
        &p_diag.iter().map(|p| 1.0 + minus * p).collect::<Vec<_>>(),
        &d2_upper.iter().map(|v| minus * v).collect::<Vec<_>>(),
    );
    let mut psi = initial;

    let sys_mode = if opts.plates.is_some() && opts.plate_model == PlateModel::ModeProjector {
        Some(sampled_fundamental(geometry, grid, Waveguide::System)?)
    } else {
        None
    };
    let core = geometry.core_interval(Waveguide::System);
    let core_mask: Vec<bool> = (0..nx)
        .map(|i| {
            let x = grid.x(i);
            x >= core.0 && x <= core.1
        })
        .collect();
    let (plate_steps, plate_phase) = match &opts.plates {
        Some(s) => (
            s.positions
                .iter()
                .map(|p| (p / grid.dz).round() as usize)
                .collect::<Vec<_>>(),
            Complex64::from_polar(1.0, s.phi),
        ),
        None => (Vec::new(), Complex64::new(1.0, 0.0)),
    };

    let steps = grid.steps();
    let mut z = Vec::with_capacity(steps / stride + 1);
    let mut values = Vec::with_capacity((steps / stride + 1) * nx);
    z.push(0.0);
    values.extend_from_slice(&psi);
    let mut rhs = vec![Complex64::default(); nx];
    let mut next_plate = 0;
    for step in 1..=steps {
        for i in 0..nx {
            let left = if i > 0 {
                psi[i - 1]
            } else {
                Complex64::default()
            };
            let right = if i + 1 < nx {
                psi[i + 1]
            } else {
                Complex64::default()
            };
            rhs[i] =
                psi[i] + plus * (d2_lower[i] * left + p_diag[i] * psi[i] + d2_upper[i] * right);
        }
        solver.solve(&mut rhs);
        std::mem::swap(&mut psi, &mut rhs);
        if step % stride == 0 {
            z.push(step as f64 * grid.dz);
            values.extend_from_slice(&psi);
        }
        while next_plate < plate_steps.len() && plate_steps[next_plate] == step {
            match &sys_mode {
                Some(m) => {
                    let amp: Complex64 =
                        m.iter().zip(&psi).map(|(a, p)| p * *a).sum::<Complex64>() * grid.dx;
                    let delta = amp * (plate_phase - 1.0);
                    psi.iter_mut().zip(m).for_each(|(p, a)| *p += delta * *a);
                }
                None => psi
                    .iter_mut()
                    .zip(&core_mask)
                    .filter(|(_, &inside)| inside)
                    .for_each(|(p, _)| *p *= plate_phase),
            }
            next_plate += 1;
        }
    }
    Ok(FieldMap {
        grid: *grid,
        geometry: *geometry,
        reference_index: n_ref,
        z,
        values,
    })
}

/// `|<φ|ψ(z)>|²` against a sampled, normalized mode.
pub fn project_onto(map: &FieldMap, mode: &[f64]) -> Vec<(f64, f64)> {
    (0..map.z.len())
        .map(|iz| {
            let amp: Complex64 = mode
                .iter()
                .zip(map.row(iz))
                .map(|(a, p)| p * *a)
                .sum::<Complex64>()
                * map.grid.dx;
            (map.z[iz], amp.norm_sqr())
        })
        .collect()
}

/// Energy in the system guide's fundamental mode.
pub fn project_energy(map: &FieldMap, geometry: &Geometry) -> Result<Vec<(f64, f64)>> {
    let mode = sampled_fundamental(geometry, &map.grid, Waveguide::System)?;
    Ok(project_onto(map, &mode))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RayAngle {
    /// Angle from the guide normal.
    pub chi: f64,
    pub sin_chi: f64,
    /// `dz/dx` of the leakage front.
    pub slope: f64,
    pub r_squared: f64,
    pub rows: usize,
}

/// Tracks the leading edge of the leaked beam across the environment.
///
/// For each x-row between `edge` um inside both environment faces, the front
/// is the first z where `|ψ|²` reaches half of the row's first prominent
/// maximum. `dz/dx` of the front is `tanχ`.
pub fn leakage_angle(map: &FieldMap, edge: f64) -> Result<RayAngle> {
    let (e_lo, e_hi) = map.geometry.core_interval(Waveguide::Environment);
    let nx = map.nx();
    let nz = map.z.len();
    let mut xs = Vec::new();
    let mut zs = Vec::new();
    for ix in 0..nx {
        let x = map.grid.x(ix);
        if x < e_lo + edge || x > e_hi - edge {
            continue;
        }
        let col: Vec<f64> = (0..nz)
            .map(|iz| map.values[iz * nx + ix].norm_sqr())
            .collect();
        let top = col.iter().cloned().fold(0.0, f64::max);
        let Some(&(ip, _)) = prominent_maxima(&col, 0.1 * top).first() else {
            continue;
        };
        let level = 0.5 * col[ip];
        if let Some(j) = (1..=ip).find(|&j| col[j] >= level) {
            let t = (level - col[j - 1]) / (col[j] - col[j - 1]);
            xs.push(x);
            zs.push(map.z[j - 1] + t * (map.z[j] - map.z[j - 1]));
        }
    }
    if xs.len() < 3 {
        return Err(Error::InvalidParameter(
            "too few rows with a leakage front".into(),
        ));
    }
    let fit = linear_fit(&xs, &zs)?;
    let slope = fit.slope;
    let sin_chi = slope / (1.0 + slope * slope).sqrt();
    Ok(RayAngle {
        chi: sin_chi.asin(),
        sin_chi,
        slope,
        r_squared: fit.r_squared,
        rows: xs.len(),
    })
}
