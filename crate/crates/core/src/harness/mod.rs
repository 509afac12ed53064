//! Closed-loop experiments: design bundles, scenario runs, metrics and reports.

mod design;
mod scenario;
mod sim;

pub use design::*;
pub use scenario::*;
pub use sim::*;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::PerformanceWeights;
use crate::fdi::FdiSettings;
use crate::gimc::GimcSettings;
use crate::plant::PlantParams;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("synthesis failed: {0}")]
    Synthesis(String),
    #[error("simulation failed at t = {t} s: {message}")]
    Simulation { t: f64, message: String },
    #[error("i/o error: {0}")]
    Io(String),
}

impl HarnessError {
    /// Process exit code for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Config(_) | HarnessError::Io(_) => 2,
            HarnessError::Synthesis(_) => 3,
            HarnessError::Simulation { .. } => 4,
        }
    }
}

/// Complete experiment configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub plant: PlantParams,
    pub weights: PerformanceWeights,
    pub fdi: FdiSettings,
    pub gimc: GimcSettings,
    pub scenario: Scenario,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let cfg: Config = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        self.plant.validate().map_err(HarnessError::Config)?;
        self.weights.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        self.fdi.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        self.gimc.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        self.scenario.validate()
    }
}
