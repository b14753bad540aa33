// Copyright 2026 OpenWG Contributors
// SPDX-License-Identifier: Apache-2.0

//! One function per experiment. Each writes CSV tables into the output
//! directory and returns a JSON summary for the run metadata.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde_json::{json, Value};

use openwg::dd_control::{
    dd_scan_with, make_schedule, wgm_scan_with, wgm_transmission, ModulationSchedule, WgmModulator,
};
use openwg::fd_oracle::{
    leakage_angle, project_energy, propagate_field_with, FieldMap, OracleOptions,
};
use openwg::io::{csv_table, write_atomic};
use openwg::kernel_analysis::{
    decay_length_analytic, field_spectrum, fit_decay, kernel_width, linear_fit, memory_kernel,
    prominent_maxima, prominent_minima, ray_angle, revival_peak, spectral_density, AnalysisConfig,
    KERNEL_WIDTH_WINDOW,
};
use openwg::propagator::{energy_trace, Propagator, StateTrace, StateVector};
use openwg::slab_modes::{solve_modes, Parity};
use openwg::{build_hamiltonian, Geometry, StarHamiltonian};

use crate::config::{linspace, Experiment, Fig2Part, RunConfig};
use crate::error::{CliError, Context};

const FIG1B_WIDTHS: [f64; 3] = [0.23, 5.0, 10.0];
const FIG2A_WIDTHS: [f64; 4] = [5.0, 10.0, 20.0, 40.0];
const FIG2B_WIDTHS: [f64; 2] = [5.0, 10.0];
const FIG2B_GAPS: [f64; 2] = [0.15, 0.20];
const FIG2D_INSET_WIDTHS: [f64; 5] = [5.0, 10.0, 20.0, 40.0, 100.0];
const FIG3_WIDTHS: [f64; 2] = [5.0, 10.0];
const FIG3_PHASES: [f64; 3] = [0.0, 0.5 * PI, PI];
const SPECTRUM_PAD: usize = 4;

/// Files written so far plus the summary object.
pub struct Report {
    pub files: Vec<String>,
    pub summary: serde_json::Map<String, Value>,
}

struct Sink<'a> {
    dir: &'a Path,
    name: &'static str,
    report: Report,
}

impl<'a> Sink<'a> {
    fn path(&mut self, file: &str) -> PathBuf {
        self.report.files.push(file.to_string());
        self.dir.join(file)
    }

    fn csv(&mut self, file: &str, header: &[&str], rows: Vec<Vec<f64>>) -> Result<(), CliError> {
        let path = self.path(file);
        write_atomic(&path, csv_table(header, rows).as_bytes()).during(self.name)
    }

    fn raw(&mut self, file: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.path(file);
        write_atomic(&path, bytes).during(self.name)
    }

    fn note(&mut self, key: &str, value: Value) {
        self.report.summary.insert(key.to_string(), value);
    }
}

pub fn run(cfg: &RunConfig) -> Result<Report, CliError> {
    let mut sink = Sink {
        dir: &cfg.out,
        name: cfg.experiment.name(),
        report: Report {
            files: Vec::new(),
            summary: serde_json::Map::new(),
        },
    };
    match cfg.experiment {
        Experiment::Modes => modes(cfg, &mut sink)?,
        Experiment::Hamiltonian => hamiltonian(cfg, &mut sink)?,
        Experiment::Evolve => evolve(cfg, &mut sink)?,
        Experiment::Kernel => kernel(cfg, &mut sink)?,
        Experiment::DecaySweep => {
            let rows = decay_sweep(cfg, &cfg.gaps, cfg.decay_env_width)?;
            sink.note("env_width_um", json!(cfg.decay_env_width));
            sink.csv(
                "decay_sweep.csv",
                &["d (um)", "L_fit (um)", "L_analytic (um)", "r_squared"],
                rows,
            )?;
        }
        Experiment::RevivalSweep => {
            let rows = revival_sweep(cfg, &mut sink)?;
            sink.csv(
                "revival_sweep.csv",
                &[
                    "w_e (um)",
                    "R (um)",
                    "R_onset (um)",
                    "two_we_tan_chi (um)",
                    "R_analytic (um)",
                ],
                rows,
            )?;
        }
        Experiment::DdScan => {
            let h = hamiltonian_for(cfg, &cfg.geometry)?;
            let rows = dd_rows(cfg, &h)?;
            sink.note("z_probe_um", json!(cfg.z_max));
            sink.note(
                "schedule",
                json!("equal intervals, kicks at interval midpoints"),
            );
            sink.csv("dd_scan.csv", &["N", "phi (rad)", "energy"], rows)?;
        }
        Experiment::WgmScan => {
            let h = hamiltonian_for(cfg, &cfg.geometry)?;
            let rows = wgm_rows(cfg, &h, &cfg.n_kicks)?;
            sink.note("z_probe_um", json!(cfg.z_max));
            sink.csv(
                "wgm_scan.csv",
                &["N", "delta (kappa_e)", "phi (rad)", "abs_T", "energy"],
                rows,
            )?;
        }
        Experiment::Oracle => {
            let kick = cfg.single_kick();
            oracle(cfg, &cfg.geometry, kick, "oracle", &mut sink)?;
        }
        Experiment::Fig1b => fig1b(cfg, &mut sink)?,
        Experiment::Fig2 => fig2(cfg, &mut sink)?,
        Experiment::Fig3 => fig3(cfg, &mut sink)?,
        Experiment::Fig4 => fig4(cfg, &mut sink)?,
    }
    Ok(sink.report)
}

fn hamiltonian_for(cfg: &RunConfig, g: &Geometry) -> Result<StarHamiltonian, CliError> {
    build_hamiltonian(g).during(cfg.experiment.name())
}

fn trace(
    cfg: &RunConfig,
    h: &StarHamiltonian,
    propagator: &Propagator,
    z_max: f64,
    dz_out: f64,
    schedule: Option<&ModulationSchedule>,
) -> Result<StateTrace, CliError> {
    let init = StateVector::system_excited(h.env_mode_count());
    propagator
        .evolve(h, &init, z_max, dz_out, schedule)
        .during(cfg.experiment.name())
}

fn modes(cfg: &RunConfig, sink: &mut Sink) -> Result<(), CliError> {
    let g = &cfg.geometry;
    let mut rows = Vec::new();
    for (guide, spec) in [(0.0, g.system_slab()), (1.0, g.env_slab())] {
        for m in solve_modes(&spec).during(sink.name)? {
            let parity = if m.parity == Parity::Odd { 1.0 } else { 0.0 };
            rows.push(vec![
                guide,
                m.order as f64,
                parity,
                m.n_eff,
                m.n_eff * g.k(),
                m.kappa,
                m.gamma,
            ]);
        }
    }
    sink.note("v_number_system", json!(g.system_slab().v_number()));
    sink.note("v_number_environment", json!(g.env_slab().v_number()));
    sink.csv(
        "modes.csv",
        &[
            "guide (0 system / 1 environment)",
            "order",
            "parity (0 even / 1 odd)",
            "n_eff",
            "beta (1/um)",
            "kappa (1/um)",
            "gamma (1/um)",
        ],
        rows,
    )
}

fn hamiltonian(cfg: &RunConfig, sink: &mut Sink) -> Result<(), CliError> {
    let h = hamiltonian_for(cfg, &cfg.geometry)?;
    sink.raw("hamiltonian.json", h.to_json().as_bytes())?;
    let rows = (0..h.env_mode_count())
        .map(|j| {
            vec![
                j as f64,
                h.env_mode_indices[j],
                h.betas[j],
                h.betas[j] / h.k,
                h.couplings[j],
            ]
        })
        .collect();
    sink.note("beta0_per_um", json!(h.beta0));
    sink.note("n0", json!(h.system_index()));
    sink.note("total_coupling_sq", json!(h.total_coupling_sq()));
    sink.note("env_modes", json!(h.env_mode_count()));
    sink.csv(
        "couplings.csv",
        &["j", "n_bare", "beta_j (1/um)", "n_dressed", "g_j (1/um)"],
        rows,
    )
}

fn evolve(cfg: &RunConfig, sink: &mut Sink) -> Result<(), CliError> {
    let h = hamiltonian_for(cfg, &cfg.geometry)?;
    let schedule = cfg
        .single_kick()
        .map(|(n, phi)| make_schedule(n, phi, cfg.z_max));
    let tr = trace(
        cfg,
        &h,
        &cfg.propagator(),
        cfg.z_max,
        cfg.dz_out,
        schedule.as_ref(),
    )?;
    let mut bytes = Vec::new();
    tr.write_csv(&mut bytes)
        .map_err(|e| openwg::Error::from(e))
        .during(sink.name)?;
    sink.raw("trace.csv", &bytes)?;
    if let Some(s) = &schedule {
        let rows = s.positions.iter().map(|&z| vec![z, s.phi]).collect();
        sink.csv("kicks.csv", &["z (um)", "phi (rad)"], rows)?;
    }
    sink.note("n0", json!(h.system_index()));
    sink.note("final_energy", json!(tr.final_state().a.norm_sqr()));
    sink.note("kicks", json!(schedule));
    Ok(())
}

fn kernel(cfg: &RunConfig, sink: &mut Sink) -> Result<(), CliError> {
    let g = &cfg.geometry;
    let h = hamiltonian_for(cfg, g)?;
    let n = (cfg.kernel_tau_max / cfg.kernel_dtau).round() as usize + 1;
    let tau: Vec<f64> = (0..n).map(|i| i as f64 * cfg.kernel_dtau).collect();
    let k = memory_kernel(&h, &tau);
    let rows = tau
        .iter()
        .zip(&k.values)
        .map(|(t, v)| vec![*t, v.re, v.im, v.norm()])
        .collect();
    sink.csv(
        "kernel.csv",
        &[
            "tau (um)",
            "re_K (1/um^2)",
            "im_K (1/um^2)",
            "abs_K (1/um^2)",
        ],
        rows,
    )?;
    let n_grid = linspace(1.0, g.core_index, 202);
    let mut rows = Vec::new();
    for &n in &n_grid[1..n_grid.len() - 1] {
        rows.push(vec![n, spectral_density(g, n).during(sink.name)?]);
    }
    sink.csv("spectral_density.csv", &["n", "J (1/um)"], rows)?;
    sink.note("n0", json!(h.system_index()));
    sink.note(
        "kernel_width_um",
        json!(kernel_width(&h, KERNEL_WIDTH_WINDOW, 0.002)),
    );
    sink.note("kernel_width_window_um", json!(KERNEL_WIDTH_WINDOW));
    sink.note("first_zero_crossing_um", json!(k.first_zero_crossing()));
    Ok(())
}

/// Rows `(d, L_fit, L_analytic, r²)`. The spectral propagator is exact
/// between samples, which keeps wide environments cheap.
fn decay_sweep(cfg: &RunConfig, gaps: &[f64], env_width: f64) -> Result<Vec<Vec<f64>>, CliError> {
    let name = cfg.experiment.name();
    gaps.par_iter()
        .map(|&d| {
            let g = cfg.geometry.with_env_width(env_width).with_gap(d);
            let h = build_hamiltonian(&g).during(name)?;
            let l_an = decay_length_analytic(&g).during(name)?;
            let tr = trace(
                cfg,
                &h,
                &Propagator::spectral(),
                (4.0 * l_an).max(cfg.z_max),
                cfg.dz_out,
                None,
            )?;
            let fit = fit_decay(&energy_trace(&tr), &AnalysisConfig::default()).during(name)?;
            Ok(vec![d, fit.l_fit, l_an, fit.r_squared])
        })
        .collect()
}

fn revival_sweep(cfg: &RunConfig, sink: &mut Sink) -> Result<Vec<Vec<f64>>, CliError> {
    let name = sink.name;
    let acfg = AnalysisConfig::default();
    let mut rows: Vec<Vec<f64>> = cfg
        .env_widths
        .par_iter()
        .map(|&w| {
            let g = cfg.geometry.with_env_width(w);
            let h = build_hamiltonian(&g).during(name)?;
            let tr = trace(
                cfg,
                &h,
                &cfg.propagator(),
                (6.0 * w + 20.0).max(cfg.z_max),
                cfg.dz_out,
                None,
            )?;
            let e = energy_trace(&tr);
            let peak = revival_peak(&e, &acfg).during(name)?;
            let values: Vec<f64> = e.iter().map(|p| p.1).collect();
            let onset = prominent_minima(&values, acfg.prominence_fraction * values[0])
                .first()
                .map_or(f64::NAN, |m| e[m.0].0);
            let ray = 2.0 * w * ray_angle(&g, h.beta0).during(name)?.tan();
            Ok(vec![w, peak.z, onset, ray])
        })
        .collect::<Result<_, CliError>>()?;
    let r0 = rows.iter().map(|r| r[1] - r[3]).sum::<f64>() / rows.len() as f64;
    for r in &mut rows {
        let analytic = r[3] + r0;
        r.push(analytic);
    }
    let w: Vec<f64> = rows.iter().map(|r| r[0]).collect();
    let peaks: Vec<f64> = rows.iter().map(|r| r[1]).collect();
    let fit = linear_fit(&w, &peaks).during(name)?;
    let h = hamiltonian_for(cfg, &cfg.geometry)?;
    let slope_analytic = 2.0 * ray_angle(&cfg.geometry, h.beta0).during(name)?.tan();
    sink.note("r0_um", json!(r0));
    sink.note(
        "fit",
        json!({"slope": fit.slope, "intercept_um": fit.intercept, "r_squared": fit.r_squared}),
    );
    sink.note("slope_analytic", json!(slope_analytic));
    Ok(rows)
}

fn dd_rows(cfg: &RunConfig, h: &StarHamiltonian) -> Result<Vec<Vec<f64>>, CliError> {
    let phi = cfg.phi.values()?;
    let rows = dd_scan_with(h, &cfg.propagator(), &cfg.n_kicks, &phi, cfg.z_max)
        .during(cfg.experiment.name())?;
    Ok(rows
        .into_iter()
        .map(|r| vec![r.n_kicks as f64, r.phi, r.energy])
        .collect())
}

fn wgm_rows(
    cfg: &RunConfig,
    h: &StarHamiltonian,
    kicks: &[usize],
) -> Result<Vec<Vec<f64>>, CliError> {
    let name = cfg.experiment.name();
    let m = WgmModulator::normalized(cfg.kappa_i).during(name)?;
    let deltas = cfg.delta.values();
    let mut out = Vec::new();
    for &n in kicks {
        for r in wgm_scan_with(h, &cfg.propagator(), &m, n, &deltas, cfg.z_max).during(name)? {
            let t = wgm_transmission(r.delta * m.kappa_e, &m).norm();
            out.push(vec![n as f64, r.delta, r.phi, t, r.energy]);
        }
    }
    Ok(out)
}

struct OracleRun {
    map: FieldMap,
    /// `(z, E_oracle, E_model)` on the oracle sampling grid.
    rows: Vec<Vec<f64>>,
}

fn oracle_run(
    cfg: &RunConfig,
    g: &Geometry,
    kick: Option<(usize, f64)>,
) -> Result<OracleRun, CliError> {
    let name = cfg.experiment.name();
    let h = build_hamiltonian(g).during(name)?;
    let schedule = kick.map(|(n, phi)| make_schedule(n, phi, cfg.z_max));
    let opts = OracleOptions {
        sample_dz: cfg.oracle.sample_dz,
        plates: schedule.clone(),
        plate_model: cfg.oracle.plate_model,
        ..OracleOptions::default()
    };
    let source = solve_modes(&g.system_slab()).during(name)?[0];
    let map =
        propagate_field_with(g, &cfg.oracle_grid(g, cfg.z_max), &source, &opts).during(name)?;
    let oracle = project_energy(&map, g).during(name)?;
    let model = energy_trace(&trace(
        cfg,
        &h,
        &cfg.propagator(),
        cfg.z_max,
        cfg.oracle.sample_dz,
        schedule.as_ref(),
    )?);
    let rows = oracle
        .iter()
        .zip(&model)
        .map(|(a, b)| vec![a.0, a.1, b.1])
        .collect();
    Ok(OracleRun { map, rows })
}

fn oracle(
    cfg: &RunConfig,
    g: &Geometry,
    kick: Option<(usize, f64)>,
    stem: &str,
    sink: &mut Sink,
) -> Result<(), CliError> {
    let run = oracle_run(cfg, g, kick)?;
    run.map
        .write_binary(sink.dir, &format!("{stem}_field"))
        .during(sink.name)?;
    sink.report.files.push(format!("{stem}_field.bin"));
    sink.report.files.push(format!("{stem}_field.json"));
    let csv = sink.path(&format!("{stem}_intensity.csv"));
    run.map
        .write_intensity_csv(&csv, cfg.oracle.csv_x_stride, cfg.oracle.csv_z_stride)
        .during(sink.name)?;

    let model: Vec<f64> = run.rows.iter().map(|r| r[2]).collect();
    let acfg = AnalysisConfig::default();
    let onset = prominent_minima(&model, acfg.prominence_fraction * model[0])
        .first()
        .map(|m| m.0);
    let rms = |end: usize| {
        let s: f64 = run.rows[..=end].iter().map(|r| (r[1] - r[2]).powi(2)).sum();
        (s / (end + 1) as f64).sqrt()
    };
    let peak = prominent_maxima(&model, acfg.prominence_fraction * model[0])
        .first()
        .map(|m| m.0);
    sink.note("rms_to_revival_onset", json!(onset.map(rms)));
    sink.note("revival_onset_um", json!(onset.map(|i| run.rows[i][0])));
    sink.note("rms_to_revival_peak", json!(peak.map(rms)));
    sink.note("revival_peak_um", json!(peak.map(|i| run.rows[i][0])));
    sink.note("rms_full", json!(rms(run.rows.len() - 1)));
    if kick.is_none() {
        let h = hamiltonian_for(cfg, g)?;
        let angle = leakage_angle(&run.map, 0.5).ok();
        sink.note(
            "leakage_angle",
            json!({
                "sin_chi_measured": angle.map(|a| a.sin_chi),
                "sin_chi_expected": h.beta0 / (g.core_index * h.k),
                "front_r_squared": angle.map(|a| a.r_squared),
            }),
        );
    }
    sink.note(
        "method",
        json!("paraxial Crank-Nicolson propagation substituted for finite elements"),
    );
    sink.csv(
        &format!("{stem}_energy.csv"),
        &["z (um)", "E_oracle", "E_model"],
        run.rows,
    )
}

fn fig1b(cfg: &RunConfig, sink: &mut Sink) -> Result<(), CliError> {
    let runs: Vec<OracleRun> = FIG1B_WIDTHS
        .par_iter()
        .map(|&w| oracle_run(cfg, &cfg.geometry.with_env_width(w), None))
        .collect::<Result<_, CliError>>()?;
    let mut rows = Vec::new();
    for (w, run) in FIG1B_WIDTHS.iter().zip(runs) {
        rows.extend(run.rows.into_iter().map(|r| vec![*w, r[0], r[2], r[1]]));
    }
    sink.csv(
        "fig1b.csv",
        &["w_e (um)", "z (um)", "E_model", "E_oracle"],
        rows,
    )
}

fn fig2(cfg: &RunConfig, sink: &mut Sink) -> Result<(), CliError> {
    let parts = match cfg.part {
        Some(p) => vec![p],
        None => vec![Fig2Part::A, Fig2Part::B, Fig2Part::C, Fig2Part::D],
    };
    for part in parts {
        match part {
            Fig2Part::A => {
                let n = (cfg.kernel_tau_max / cfg.kernel_dtau).round() as usize + 1;
                let tau: Vec<f64> = (0..n).map(|i| i as f64 * cfg.kernel_dtau).collect();
                let mut rows = Vec::new();
                for w in FIG2A_WIDTHS {
                    let h = hamiltonian_for(cfg, &cfg.geometry.with_env_width(w))?;
                    let k = memory_kernel(&h, &tau);
                    rows.extend(
                        tau.iter()
                            .zip(&k.values)
                            .map(|(t, v)| vec![w, *t, v.re, v.im]),
                    );
                }
                sink.csv(
                    "fig2a.csv",
                    &["w_e (um)", "tau (um)", "re_K (1/um^2)", "im_K (1/um^2)"],
                    rows,
                )?;
            }
            Fig2Part::B => {
                let combos: Vec<(f64, f64)> = FIG2B_WIDTHS
                    .iter()
                    .flat_map(|&w| FIG2B_GAPS.iter().map(move |&d| (w, d)))
                    .collect();
                let traces: Vec<Vec<Vec<f64>>> = combos
                    .par_iter()
                    .map(|&(w, d)| {
                        let h = hamiltonian_for(cfg, &cfg.geometry.with_env_width(w).with_gap(d))?;
                        let tr = trace(cfg, &h, &cfg.propagator(), cfg.z_max, cfg.dz_out, None)?;
                        Ok(energy_trace(&tr)
                            .into_iter()
                            .map(|(z, e)| vec![w, d, z, e])
                            .collect())
                    })
                    .collect::<Result<_, CliError>>()?;
                sink.csv(
                    "fig2b.csv",
                    &["w_e (um)", "d (um)", "z (um)", "energy"],
                    traces.concat(),
                )?;
            }
            Fig2Part::C => {
                let rows = revival_sweep(cfg, sink)?
                    .into_iter()
                    .map(|r| vec![r[0], r[1], r[4]])
                    .collect();
                sink.csv(
                    "fig2c.csv",
                    &["w_e (um)", "R (um)", "R_analytic (um)"],
                    rows,
                )?;
            }
            Fig2Part::D => {
                let rows = decay_sweep(cfg, &cfg.gaps, cfg.decay_env_width)?
                    .into_iter()
                    .map(|r| vec![r[0], r[1], r[2]])
                    .collect();
                sink.note("fig2d_env_width_um", json!(cfg.decay_env_width));
                sink.csv(
                    "fig2d.csv",
                    &["d (um)", "L_fit (um)", "L_analytic (um)"],
                    rows,
                )?;
                let inset: Vec<Vec<f64>> = FIG2D_INSET_WIDTHS
                    .par_iter()
                    .map(|&w| decay_sweep(cfg, &[cfg.geometry.gap], w).map(|r| vec![w, r[0][1]]))
                    .collect::<Result<_, CliError>>()?;
                sink.csv("fig2d_inset.csv", &["w_e (um)", "L_fit (um)"], inset)?;
            }
        }
    }
    Ok(())
}

fn largest_kick_count(cfg: &RunConfig) -> usize {
    cfg.n_kicks.iter().copied().max().unwrap_or(0)
}

fn fig3(cfg: &RunConfig, sink: &mut Sink) -> Result<(), CliError> {
    let h = hamiltonian_for(cfg, &cfg.geometry)?;
    let n = largest_kick_count(cfg);
    let mut traces = Vec::new();
    let mut spectra = Vec::new();
    for phi in FIG3_PHASES {
        let s = make_schedule(n, phi, cfg.z_max);
        let tr = trace(cfg, &h, &cfg.propagator(), cfg.z_max, cfg.dz_out, Some(&s))?;
        traces.extend(energy_trace(&tr).into_iter().map(|(z, e)| vec![phi, z, e]));
        let sp = field_spectrum(&tr, h.k, SPECTRUM_PAD).during(sink.name)?;
        spectra.extend(sp.into_iter().map(|(ne, p)| vec![phi, ne, p]));
    }
    sink.note("fig3ab_kicks", json!(n));
    sink.csv("fig3a.csv", &["phi (rad)", "z (um)", "energy"], traces)?;
    sink.csv("fig3b.csv", &["phi (rad)", "n_eff", "power"], spectra)?;
    let mut rows = Vec::new();
    for w in FIG3_WIDTHS {
        let h = hamiltonian_for(cfg, &cfg.geometry.with_env_width(w))?;
        rows.extend(dd_rows(cfg, &h)?.into_iter().map(|mut r| {
            r.insert(0, w);
            r
        }));
    }
    sink.csv("fig3c.csv", &["w_e (um)", "N", "phi (rad)", "energy"], rows)
}

fn fig4(cfg: &RunConfig, sink: &mut Sink) -> Result<(), CliError> {
    let n = largest_kick_count(cfg);
    sink.note("kicks", json!(n));
    oracle(cfg, &cfg.geometry, Some((n, PI)), "fig4a", sink)?;
    let h = hamiltonian_for(cfg, &cfg.geometry)?;
    let rows = wgm_rows(cfg, &h, &[n])?
        .into_iter()
        .map(|r| vec![r[1], r[2], r[3], r[4]])
        .collect();
    sink.csv(
        "fig4b.csv",
        &["delta (kappa_e)", "phi (rad)", "abs_T", "energy"],
        rows,
    )
}
