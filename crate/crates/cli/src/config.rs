// Copyright 2026 OpenWG Contributors
// SPDX-License-Identifier: Apache-2.0

//! Run configuration: a JSON document, optionally overridden by flags.

use std::f64::consts::PI;
use std::path::PathBuf;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use openwg::fd_oracle::{GridSpec, PlateModel};
use openwg::propagator::Method;
use openwg::slab_modes::count_modes;
use openwg::Geometry;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
#[value(rename_all = "kebab-case")]
pub enum Experiment {
    Modes,
    Hamiltonian,
    Evolve,
    Kernel,
    DecaySweep,
    RevivalSweep,
    DdScan,
    WgmScan,
    Oracle,
    Fig1b,
    Fig2,
    Fig3,
    Fig4,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Modes => "modes",
            Experiment::Hamiltonian => "hamiltonian",
            Experiment::Evolve => "evolve",
            Experiment::Kernel => "kernel",
            Experiment::DecaySweep => "decay-sweep",
            Experiment::RevivalSweep => "revival-sweep",
            Experiment::DdScan => "dd-scan",
            Experiment::WgmScan => "wgm-scan",
            Experiment::Oracle => "oracle",
            Experiment::Fig1b => "fig1b",
            Experiment::Fig2 => "fig2",
            Experiment::Fig3 => "fig3",
            Experiment::Fig4 => "fig4",
        }
    }

    fn uses_kicks(self) -> bool {
        matches!(
            self,
            Experiment::DdScan | Experiment::WgmScan | Experiment::Fig3 | Experiment::Fig4
        )
    }

    fn uses_oracle(self) -> bool {
        matches!(
            self,
            Experiment::Oracle | Experiment::Fig1b | Experiment::Fig4
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Fig2Part {
    A,
    B,
    C,
    D,
}

/// Phase grid: an explicit list or an `"a:b:n"` inclusive linspace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PhiSpec {
    List(Vec<f64>),
    Range(String),
}

impl PhiSpec {
    pub fn values(&self) -> Result<Vec<f64>, CliError> {
        match self {
            PhiSpec::List(v) => Ok(v.clone()),
            PhiSpec::Range(s) => parse_phi(s),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeltaGrid {
    /// Detuning in units of `kappa_e`.
    pub min: f64,
    pub max: f64,
    pub count: usize,
}

impl DeltaGrid {
    pub fn values(&self) -> Vec<f64> {
        linspace(self.min, self.max, self.count)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub method: Method,
    pub rtol: f64,
    pub atol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let p = openwg::propagator::Propagator::default();
        Self {
            method: p.method,
            rtol: p.tolerance.rtol,
            atol: p.tolerance.atol,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    pub dx: f64,
    pub dz: f64,
    pub sample_dz: f64,
    pub plate_model: PlateModel,
    /// Column and row strides of the intensity CSV.
    pub csv_x_stride: usize,
    pub csv_z_stride: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            dx: openwg::fd_oracle::DEFAULT_DX,
            dz: openwg::fd_oracle::DEFAULT_DZ,
            sample_dz: 0.1,
            plate_model: PlateModel::CoreSamples,
            csv_x_stride: 5,
            csv_z_stride: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub out: PathBuf,
    pub geometry: Geometry,
    /// Propagation length and DD probe position (um).
    pub z_max: f64,
    pub dz_out: f64,
    pub n_kicks: Vec<usize>,
    pub phi: PhiSpec,
    /// Intrinsic loss in units of `kappa_e`.
    pub kappa_i: f64,
    pub delta: DeltaGrid,
    pub env_widths: Vec<f64>,
    pub gaps: Vec<f64>,
    /// Environment width standing in for a semi-infinite one in decay sweeps.
    pub decay_env_width: f64,
    pub kernel_tau_max: f64,
    pub kernel_dtau: f64,
    pub part: Option<Fig2Part>,
    pub solver: SolverConfig,
    pub oracle: OracleConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            experiment: Experiment::Evolve,
            out: PathBuf::from("out"),
            geometry: Geometry::default(),
            z_max: 50.0,
            dz_out: 0.05,
            n_kicks: vec![1, 5, 10],
            phi: PhiSpec::Range("0:2pi:64".into()),
            kappa_i: 0.0,
            delta: DeltaGrid {
                min: -5.0,
                max: 5.0,
                count: 101,
            },
            env_widths: vec![6.0, 8.0, 10.0, 12.0, 14.0],
            gaps: vec![0.10, 0.15, 0.20, 0.25],
            decay_env_width: 100.0,
            kernel_tau_max: 60.0,
            kernel_dtau: 0.01,
            part: None,
            solver: SolverConfig::default(),
            oracle: OracleConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))
    }

    pub fn propagator(&self) -> openwg::propagator::Propagator {
        openwg::propagator::Propagator {
            method: self.solver.method,
            ..Default::default()
        }
        .with_tolerance(self.solver.rtol, self.solver.atol)
    }

    pub fn oracle_grid(&self, geometry: &Geometry, z_max: f64) -> GridSpec {
        GridSpec::for_geometry(geometry, z_max).with_spacing(self.oracle.dx, self.oracle.dz)
    }

    /// A single `(N, φ)` pair turns on kicks for `evolve` and `oracle`.
    pub fn single_kick(&self) -> Option<(usize, f64)> {
        let phi = self.phi.values().ok()?;
        match (self.n_kicks.as_slice(), phi.as_slice()) {
            ([n], [p]) if *n > 0 => Some((*n, *p)),
            _ => None,
        }
    }

    /// Every problem that would stop the run, without running it.
    pub fn validate(&self) -> Vec<String> {
        let mut out = Vec::new();
        let g = &self.geometry;
        let mut check = |ok: bool, msg: String| {
            if !ok {
                out.push(msg);
            }
        };
        check(
            g.system_width > 0.0 && g.system_width.is_finite(),
            format!("system width must be > 0, got {}", g.system_width),
        );
        check(
            g.env_width > 0.0 && g.env_width.is_finite(),
            format!("environment width must be > 0, got {}", g.env_width),
        );
        check(
            g.gap > 0.0 && g.gap.is_finite(),
            format!("gap must be > 0, got {}", g.gap),
        );
        check(
            g.wavelength > 0.0 && g.wavelength.is_finite(),
            format!("wavelength must be > 0, got {}", g.wavelength),
        );
        check(
            g.core_index > 1.0 && g.core_index.is_finite(),
            format!("core index must be > 1, got {}", g.core_index),
        );
        if g.validate().is_ok() {
            let n = count_modes(&g.system_slab());
            check(
                n == 1,
                format!(
                    "system waveguide not single-mode ({n} guided modes at w_s = {} um)",
                    g.system_width
                ),
            );
        }
        check(
            self.z_max > 0.0 && self.z_max.is_finite(),
            format!("z_max must be > 0, got {}", self.z_max),
        );
        check(
            self.dz_out > 0.0 && self.dz_out <= self.z_max,
            format!("dz_out must lie in (0, z_max], got {}", self.dz_out),
        );
        check(
            self.solver.rtol > 0.0 && self.solver.atol > 0.0,
            "solver tolerances must be > 0".into(),
        );
        let exp = self.experiment;
        match self.phi.values() {
            Ok(v) => check(
                !v.is_empty() && v.iter().all(|p| p.is_finite()),
                "phi grid must be non-empty and finite".into(),
            ),
            Err(e) => check(false, e.to_string()),
        }
        if exp.uses_kicks() {
            check(!self.n_kicks.is_empty(), "N list must be non-empty".into());
        }
        check(
            self.kappa_i >= 0.0 && self.kappa_i < 1.0,
            format!(
                "kappa_i must satisfy 0 <= kappa_i < kappa_e (overcoupled), got {} kappa_e",
                self.kappa_i
            ),
        );
        check(
            self.delta.count >= 1 && self.delta.min <= self.delta.max,
            "delta grid needs count >= 1 and min <= max".into(),
        );
        if matches!(exp, Experiment::RevivalSweep | Experiment::Fig2) {
            check(
                self.env_widths.len() >= 2 && self.env_widths.iter().all(|w| *w > 0.0),
                "env_widths needs two or more positive widths".into(),
            );
        }
        if matches!(exp, Experiment::DecaySweep | Experiment::Fig2) {
            check(
                self.gaps.len() >= 2 && self.gaps.iter().all(|d| *d > 0.0),
                "gaps needs two or more positive gaps".into(),
            );
            check(
                self.decay_env_width > 0.0,
                "decay_env_width must be > 0".into(),
            );
        }
        if matches!(exp, Experiment::Kernel | Experiment::Fig2) {
            check(
                self.kernel_dtau > 0.0 && self.kernel_tau_max > self.kernel_dtau,
                "kernel grid needs 0 < kernel_dtau < kernel_tau_max".into(),
            );
        }
        if exp.uses_oracle() {
            let o = &self.oracle;
            let bound = GridSpec::resolution_bound(g.wavelength, g.core_index);
            check(
                o.dx > 0.0 && o.dx <= bound,
                format!("oracle dx = {} must lie in (0, {bound}]", o.dx),
            );
            let stride = (o.sample_dz / o.dz).round();
            check(
                o.dz > 0.0
                    && stride >= 1.0
                    && (stride * o.dz - o.sample_dz).abs() <= 1e-9 * o.sample_dz,
                format!(
                    "oracle sample_dz = {} must be a positive multiple of dz = {}",
                    o.sample_dz, o.dz
                ),
            );
        }
        if self.part.is_some() && exp != Experiment::Fig2 {
            out.push("part applies to fig2 only".into());
        }
        out
    }
}

/// Inclusive linspace; a single point returns `[a]`.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n)
            .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// Parses `1.5`, `pi`, `π`, `2pi`, `-pi/2`, `3*pi/4`.
pub fn parse_angle(s: &str) -> Result<f64, CliError> {
    let bad = || CliError::Config(format!("cannot parse angle '{s}'"));
    let t = s.trim().to_lowercase().replace('π', "pi");
    let Some(at) = t.find("pi") else {
        return t.parse::<f64>().map_err(|_| bad());
    };
    let coef = t[..at].trim_end_matches('*').trim();
    let coef = match coef {
        "" | "+" => 1.0,
        "-" => -1.0,
        c => c.parse::<f64>().map_err(|_| bad())?,
    };
    let rest = t[at + 2..].trim();
    let den = match rest.strip_prefix('/') {
        Some(d) => d.trim().parse::<f64>().map_err(|_| bad())?,
        None if rest.is_empty() => 1.0,
        None => return Err(bad()),
    };
    Ok(coef * PI / den)
}

/// `a:b:n` (inclusive, `n` points) or a comma-separated list of angles.
pub fn parse_phi(s: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [a, b, n] => {
            let n: usize = n
                .trim()
                .parse()
                .map_err(|_| CliError::Config(format!("bad point count in phi grid '{s}'")))?;
            Ok(linspace(parse_angle(a)?, parse_angle(b)?, n))
        }
        [_] => s.split(',').map(parse_angle).collect(),
        _ => Err(CliError::Config(format!(
            "phi grid '{s}' must be 'a:b:n' or a comma-separated list"
        ))),
    }
}

pub fn parse_kicks(s: &str) -> Result<Vec<usize>, CliError> {
    s.split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| CliError::Config(format!("bad kick count '{t}' in '{s}'")))
        })
        .collect()
}
