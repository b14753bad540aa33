// Copyright 2026 OpenWG Contributors
// SPDX-License-Identifier: Apache-2.0

//! Photonic simulation of an open quantum system: a single-mode "system"
//! slab waveguide leaking into a wide "environment" slab.
//!
//! Pipeline: [`slab_modes`] solves the isolated guides, [`star_model`]
//! assembles the star Hamiltonian from mode overlaps, [`propagator`]
//! evolves the single-excitation amplitudes along z, [`kernel_analysis`]
//! extracts memory kernels, decay lengths and revival periods,
//! [`dd_control`] drives phase-kick (dynamical decoupling) scans, and
//! [`fd_oracle`] is an independent full-field beam-propagation check.

pub mod dd_control;
pub mod error;
pub mod fd_oracle;
pub mod interp;
pub mod io;
pub mod kernel_analysis;
pub mod propagator;
pub mod quadrature;
pub mod rk;
pub mod slab_modes;
pub mod star_model;

pub use error::{Error, Result};
pub use star_model::{build_hamiltonian, Geometry, StarHamiltonian};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
