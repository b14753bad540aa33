// Copyright 2026 OpenWG Contributors
// SPDX-License-Identifier: Apache-2.0

//! `openwg` command-line runner.
//!
//! Settings come from built-in defaults, then `--config`, then flags.
//! Failures print one JSON line to stderr and exit nonzero
//! (2 for configuration errors, 1 for computation errors).

mod config;
mod error;
mod experiments;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use serde_json::json;

use config::{parse_kicks, Experiment, Fig2Part, PhiSpec, RunConfig};
use error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "openwg",
    version,
    about = "Coupled-waveguide open-system experiments"
)]
struct Cli {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    experiment: Option<Experiment>,
    /// Environment width (um).
    #[arg(long, allow_negative_numbers = true)]
    we: Option<f64>,
    /// System width (um).
    #[arg(long, allow_negative_numbers = true)]
    ws: Option<f64>,
    /// Gap between the cores (um).
    #[arg(long, allow_negative_numbers = true)]
    gap: Option<f64>,
    /// Vacuum wavelength (um).
    #[arg(long, allow_negative_numbers = true)]
    lambda: Option<f64>,
    /// Propagation length and DD probe position (um).
    #[arg(long, allow_negative_numbers = true)]
    zmax: Option<f64>,
    /// Kick counts, comma-separated. A single count with a single phase
    /// also adds kicks to `evolve` and `oracle`.
    #[arg(long = "N")]
    n_kicks: Option<String>,
    /// Phases: `a:b:n` inclusive grid or a comma list; accepts `pi`/`π`.
    #[arg(long, allow_hyphen_values = true)]
    phi: Option<String>,
    /// Intrinsic WGM loss in units of kappa_e.
    #[arg(long = "kappa-i", allow_negative_numbers = true)]
    kappa_i: Option<f64>,
    /// Restrict fig2 to one panel.
    #[arg(long, value_enum)]
    part: Option<Fig2Part>,
    /// Print diagnostics and exit without running.
    #[arg(long)]
    check: bool,
}

fn build_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            RunConfig::from_json(&text)?
        }
        None => RunConfig::default(),
    };
    if let Some(v) = &cli.out {
        cfg.out = v.clone();
    }
    if let Some(v) = cli.experiment {
        cfg.experiment = v;
    }
    if let Some(v) = cli.we {
        cfg.geometry.env_width = v;
    }
    if let Some(v) = cli.ws {
        cfg.geometry.system_width = v;
    }
    if let Some(v) = cli.gap {
        cfg.geometry.gap = v;
    }
    if let Some(v) = cli.lambda {
        cfg.geometry.wavelength = v;
    }
    if let Some(v) = cli.zmax {
        cfg.z_max = v;
    }
    if let Some(v) = &cli.n_kicks {
        cfg.n_kicks = parse_kicks(v)?;
    }
    if let Some(v) = &cli.phi {
        cfg.phi = PhiSpec::Range(v.clone());
    }
    if let Some(v) = cli.kappa_i {
        cfg.kappa_i = v;
    }
    if let Some(v) = cli.part {
        cfg.part = Some(v);
    }
    Ok(cfg)
}

fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("OPENWG_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().ok().filter(|n| *n > 0).ok_or_else(|| {
        CliError::Config(format!(
            "OPENWG_THREADS must be a positive integer, got '{v}'"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))
}

fn execute(cli: &Cli) -> Result<(), CliError> {
    init_threads()?;
    let cfg = build_config(cli)?;
    let diagnostics = cfg.validate();
    if cli.check {
        println!(
            "{}",
            json!({ "experiment": cfg.experiment.name(), "diagnostics": diagnostics })
        );
        return if diagnostics.is_empty() {
            Ok(())
        } else {
            Err(CliError::Config(diagnostics.join("; ")))
        };
    }
    if !diagnostics.is_empty() {
        return Err(CliError::Config(diagnostics.join("; ")));
    }
    log::info!(
        "running {} into {}",
        cfg.experiment.name(),
        cfg.out.display()
    );
    let start = Instant::now();
    let report = experiments::run(&cfg)?;
    let metadata = json!({
        "tool": "openwg",
        "version": openwg::VERSION,
        "experiment": cfg.experiment.name(),
        "config": cfg,
        "outputs": report.files,
        "summary": report.summary,
        "timing": { "wall_seconds": start.elapsed().as_secs_f64() },
    });
    openwg::io::write_json(&cfg.out.join("metadata.json"), &metadata).map_err(|source| {
        CliError::Module {
            experiment: cfg.experiment.name(),
            source,
        }
    })?;
    log::info!("done in {:.2} s", start.elapsed().as_secs_f64());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let experiment = cli.experiment.map(|e| e.name().to_string()).or_else(|| {
                build_config(&cli)
                    .ok()
                    .map(|c| c.experiment.name().to_string())
            });
            eprintln!("{}", e.to_line(experiment.as_deref()));
            ExitCode::from(e.exit_code())
        }
    }
}
