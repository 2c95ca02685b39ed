//! Seated foot-pressure locomotion: sensor framing, the filter chain,
//! differential-drive kinematics, the snap-step baseline technique and a
//! deterministic trial harness.

pub mod config;
pub mod drive;
pub mod pressure;
pub mod scenario;
pub mod signal;
pub mod technique;

pub use config::{ConfigError, Settings};
