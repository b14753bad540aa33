// Copyright 2026 OpenWG Contributors
// SPDX-License-Identifier: Apache-2.0

use std::f64::consts::PI;

use openwg::dd_control::make_schedule;
use openwg::fd_oracle::*;
use openwg::kernel_analysis::prominent_minima;
use openwg::propagator::{energy_trace, evolve, StateVector};
use openwg::slab_modes::solve_modes;
use openwg::star_model::Waveguide;
use openwg::{build_hamiltonian, Geometry};

/// Minima positions refined by a parabola through the three nearest samples.
fn refined_minima(trace: &[(f64, f64)]) -> Vec<f64> {
    let v: Vec<f64> = trace.iter().map(|p| p.1).collect();
    prominent_minima(&v, 0.2)
        .into_iter()
        .filter(|&(i, _)| i > 0 && i + 1 < v.len())
        .map(|(i, _)| {
            let (a, b, c) = (v[i - 1], v[i], v[i + 1]);
            let h = trace[i].0 - trace[i - 1].0;
            trace[i].0 + 0.5 * h * (a - c) / (a - 2.0 * b + c)
        })
        .collect()
}

fn beat_period(launch: Waveguide) -> (f64, f64) {
    let g = Geometry::new(0.23, 0.23, 0.15);
    let grid = GridSpec::for_geometry(&g, 40.0);
    let spec = match launch {
        Waveguide::System => g.system_slab(),
        Waveguide::Environment => g.env_slab(),
    };
    let source = solve_modes(&spec).unwrap()[0];
    let opts = OracleOptions {
        launch,
        ..OracleOptions::default()
    };
    let map = propagate_field_with(&g, &grid, &source, &opts).unwrap();
    let own = sampled_fundamental(&g, &grid, launch).unwrap();
    let trace = project_onto(&map, &own);
    let min_energy = trace.iter().map(|p| p.1).fold(1.0, f64::min);
    let m = refined_minima(&trace);
    assert!(m.len() >= 2, "{m:?}");
    ((m[m.len() - 1] - m[0]) / (m.len() - 1) as f64, min_energy)
}

#[test]
fn identical_guides_beat_at_coupled_mode_rate() {
    let g = Geometry::new(0.23, 0.23, 0.15);
    let h = build_hamiltonian(&g).unwrap();
    assert_eq!(h.env_mode_count(), 1);
    let expected = PI / h.couplings[0].abs();
    let (from_sys, floor_sys) = beat_period(Waveguide::System);
    let (from_env, floor_env) = beat_period(Waveguide::Environment);
    assert!(
        (from_sys / expected - 1.0).abs() < 0.05,
        "{from_sys} vs {expected}"
    );
    assert!(
        (from_sys / from_env - 1.0).abs() < 0.01,
        "{from_sys} vs {from_env}"
    );
    // Power leaves the launch core almost completely.
    assert!(
        floor_sys < 0.02 && floor_env < 0.02,
        "{floor_sys} {floor_env}"
    );
}

#[test]
fn isolated_guide_holds_power_over_fifty_um() {
    let g = Geometry::default();
    let grid = GridSpec::for_geometry(&g, 50.0);
    let source = solve_modes(&g.system_slab()).unwrap()[0];
    let opts = OracleOptions {
        profile: IndexProfile::SystemOnly,
        ..OracleOptions::default()
    };
    let e = project_energy(
        &propagate_field_with(&g, &grid, &source, &opts).unwrap(),
        &g,
    )
    .unwrap();
    assert!((e[0].1 - 1.0).abs() < 1e-4);
    let (lo, hi) = e
        .iter()
        .fold((f64::MAX, f64::MIN), |(a, b), p| (a.min(p.1), b.max(p.1)));
    assert!(hi - lo < 0.01, "{lo} .. {hi}");
}

#[test]
fn coupled_energy_within_bounds_and_converged() {
    let g = Geometry::default();
    let source = solve_modes(&g.system_slab()).unwrap()[0];
    let coarse = propagate_field(&g, &GridSpec::for_geometry(&g, 50.0), &source).unwrap();
    assert!(coarse
        .values
        .iter()
        .all(|c| c.re.is_finite() && c.im.is_finite()));
    let e = project_energy(&coarse, &g).unwrap();
    assert!(e.iter().all(|p| p.1 >= 0.0 && p.1 < 1.02));
    let power: Vec<f64> = (0..coarse.z.len()).map(|i| coarse.total_power(i)).collect();
    assert!(power.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));

    let fine_grid =
        GridSpec::for_geometry(&g, 50.0).with_spacing(0.5 * DEFAULT_DX, 0.5 * DEFAULT_DZ);
    let fine = propagate_field(&g, &fine_grid, &source).unwrap();
    let (a, b) = (
        e.last().unwrap(),
        project_energy(&fine, &g)
            .unwrap()
            .last()
            .unwrap()
            .to_owned(),
    );
    assert_eq!(a.0, b.0);
    assert!(((a.1 - b.1) / b.1).abs() < 0.01, "{} vs {}", a.1, b.1);
}

#[test]
fn plate_kicks_order_like_the_propagator() {
    let g = Geometry::default();
    let h = build_hamiltonian(&g).unwrap();
    let init = StateVector::system_excited(h.env_mode_count());
    let source = solve_modes(&g.system_slab()).unwrap()[0];
    let grid = GridSpec::for_geometry(&g, 50.0);
    let oracle_at = |phi: f64| {
        let opts = OracleOptions {
            plates: Some(make_schedule(10, phi, 50.0)),
            ..OracleOptions::default()
        };
        let map = propagate_field_with(&g, &grid, &source, &opts).unwrap();
        project_energy(&map, &g).unwrap().last().unwrap().1
    };
    let model_at = |phi: f64| {
        let tr = evolve(&h, &init, 50.0, 0.05, Some(&make_schedule(10, phi, 50.0))).unwrap();
        energy_trace(&tr).last().unwrap().1
    };
    for phi in [PI / 2.0, PI] {
        let oracle = oracle_at(phi) - oracle_at(0.0);
        let model = model_at(phi) - model_at(0.0);
        assert!(
            oracle * model > 0.0,
            "phi {phi}: oracle {oracle}, propagator {model}"
        );
    }
}
