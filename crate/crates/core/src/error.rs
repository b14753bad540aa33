// Copyright 2026 OpenWG Contributors
// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("root bracket [{lo}, {hi}] failed to converge")]
    RootBracketFailure { lo: f64, hi: f64 },

    #[error("adaptive quadrature did not converge on [{a}, {b}] (error estimate {estimate:e})")]
    QuadratureFailure { a: f64, b: f64, estimate: f64 },

    #[error("system waveguide supports {0} modes, expected exactly 1")]
    SystemNotSingleMode(usize),

    #[error("coupling product g_s*g_e = {product:e} is negative for environment mode {mode}")]
    NegativeCouplingProduct { mode: usize, product: f64 },

    #[error("step size underflow at z = {z} (h = {h:e})")]
    StepSizeUnderflow { z: f64, h: f64 },

    #[error("value {value} outside the open interval ({lo}, {hi})")]
    DomainError { value: f64, lo: f64, hi: f64 },

    #[error("trace shows no decaying window")]
    NonDecayingTrace,

    #[error("no revival peak found")]
    NoRevivalFound,

    #[error("grid spacing dx = {dx} exceeds the resolution bound {bound}")]
    GridTooCoarse { dx: f64, bound: f64 },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
