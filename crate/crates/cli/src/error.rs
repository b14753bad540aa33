// Copyright 2026 OpenWG Contributors
// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),

    #[error("{experiment}: {source}")]
    Module {
        experiment: &'static str,
        #[source]
        source: openwg::Error,
    },
}

impl CliError {
    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Module { .. } => "module",
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Module { .. } => 1,
        }
    }

    /// One JSON object on one line.
    pub fn to_line(&self, experiment: Option<&str>) -> String {
        serde_json::json!({
            "error": self.kind(),
            "experiment": experiment,
            "message": self.to_string(),
        })
        .to_string()
    }
}

/// Attaches the experiment name to core errors.
pub trait Context<T> {
    fn during(self, experiment: &'static str) -> Result<T, CliError>;
}

impl<T> Context<T> for openwg::Result<T> {
    fn during(self, experiment: &'static str) -> Result<T, CliError> {
        self.map_err(|source| CliError::Module { experiment, source })
    }
}
