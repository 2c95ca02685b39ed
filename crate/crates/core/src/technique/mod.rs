//! Locomotion techniques sharing one frame-in, pose-out interface.

mod gip;
mod locomotion;
mod wip;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::signal::ChainError;

pub use gip::{gip_update, GipState};
pub use locomotion::{Locomotion, LocomotionError, Tick};
pub use wip::{wip_apply, wip_detect, Foot, TechniqueEvent, WipConfig, WipState};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TechniqueError {
    #[error("technique is not calibrated")]
    NotCalibrated,
    #[error(transparent)]
    Chain(ChainError),
}

impl From<ChainError> for TechniqueError {
    fn from(e: ChainError) -> Self {
        match e {
            ChainError::NotCalibrated => TechniqueError::NotCalibrated,
            other => TechniqueError::Chain(other),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TechniqueKind {
    Gip,
    Wip,
}

impl TechniqueKind {
    pub fn name(&self) -> &'static str {
        match self {
            TechniqueKind::Gip => "gip",
            TechniqueKind::Wip => "wip",
        }
    }
}

impl fmt::Display for TechniqueKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TechniqueKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "gip" => Ok(TechniqueKind::Gip),
            "wip" => Ok(TechniqueKind::Wip),
            other => Err(format!("unknown technique {other:?} (expected gip or wip)")),
        }
    }
}
