//! Calibration and filtering: raw pressure frames to normalized wheel commands.
//!
//! Per foot the chain is `fore_aft -> dead-zone -> smoother -> debounce`,
//! with a neutral watchdog that re-estimates the baseline after a sustained
//! still interval.

mod calibration;
mod chain;
mod filters;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use calibration::{estimate_baseline, fore_aft, frames_span_us, Baseline};
pub use chain::{chain_step, neutral_watchdog, ChainState};
pub use filters::{debounce_step, deadzone_step, smooth_step, FootState};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChainError {
    #[error("calibration window too short: {span_s:.3} s of {required_s:.3} s")]
    WindowTooShort { span_s: f64, required_s: f64 },
    #[error("user not still: channel {channel} variance {variance:.1} exceeds {limit:.1}")]
    UserNotStill { channel: usize, variance: f64, limit: f64 },
    #[error("chain is not calibrated")]
    NotCalibrated,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid chain config: {0}")]
pub struct ConfigError(pub String);

/// Tunables for the calibration and filter chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ChainConfig {
    /// Raw-unit fore-aft difference that maps to full scale.
    pub p_span: f64,
    /// Dead-zone entry threshold (normalized).
    pub t_enter: f64,
    /// Dead-zone exit threshold (normalized).
    pub t_exit: f64,
    /// Smoothing time constant, seconds.
    pub tau_s: f64,
    /// Minimum-hold debounce, seconds.
    pub t_hold_s: f64,
    /// Both feet below this are considered neutral by the watchdog.
    pub eps_neutral: f64,
    /// Sustained neutral interval before re-baselining, seconds.
    pub t_neutral_s: f64,
    pub calib_window_s: f64,
    /// Maximum per-channel variance (raw units²) accepted during calibration.
    pub calib_var_max: f64,
}

impl Default for ChainConfig {
    fn default() -> Self {
        Self {
            p_span: 600.0,
            t_enter: 0.12,
            t_exit: 0.06,
            tau_s: 0.08,
            t_hold_s: 0.05,
            eps_neutral: 0.05,
            t_neutral_s: 3.0,
            calib_window_s: 1.0,
            calib_var_max: 400.0,
        }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = [
            ("p_span", self.p_span),
            ("tau_s", self.tau_s),
            ("t_neutral_s", self.t_neutral_s),
            ("calib_window_s", self.calib_window_s),
            ("calib_var_max", self.calib_var_max),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(ConfigError(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.t_hold_s.is_finite() && self.t_hold_s >= 0.0) {
            return Err(ConfigError(format!("t_hold_s must be non-negative, got {}", self.t_hold_s)));
        }
        if !(0.0 <= self.t_exit && self.t_exit < self.t_enter && self.t_enter < 1.0) {
            return Err(ConfigError(format!(
                "need 0 <= t_exit < t_enter < 1, got t_exit={} t_enter={}",
                self.t_exit, self.t_enter
            )));
        }
        if !(self.eps_neutral.is_finite() && self.eps_neutral < self.t_enter) {
            return Err(ConfigError(format!(
                "eps_neutral ({}) must be below t_enter ({})",
                self.eps_neutral, self.t_enter
            )));
        }
        Ok(())
    }

    pub(crate) fn hold_us(&self) -> u64 {
        (self.t_hold_s * 1e6).round() as u64
    }

    pub(crate) fn neutral_us(&self) -> u64 {
        (self.t_neutral_s * 1e6).round() as u64
    }
}

/// Calibrated fore-aft differential per foot, `+` meaning forefoot pressure.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ForeAftSample {
    left: f64,
    right: f64,
}

impl ForeAftSample {
    /// Values are clamped into `[-1, 1]`; NaN maps to 0.
    pub fn new(left: f64, right: f64) -> Self {
        Self { left: unit_clamp(left), right: unit_clamp(right) }
    }

    pub fn left(&self) -> f64 {
        self.left
    }

    pub fn right(&self) -> f64 {
        self.right
    }
}

/// Normalized wheel inputs `(u_L, u_R)`, each in `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WheelCommand {
    left: f64,
    right: f64,
}

impl WheelCommand {
    pub const ZERO: WheelCommand = WheelCommand { left: 0.0, right: 0.0 };

    /// Values are clamped into `[-1, 1]`; NaN maps to 0.
    pub fn new(left: f64, right: f64) -> Self {
        Self { left: unit_clamp(left), right: unit_clamp(right) }
    }

    pub fn left(&self) -> f64 {
        self.left
    }

    pub fn right(&self) -> f64 {
        self.right
    }

    pub fn swapped(&self) -> Self {
        Self { left: self.right, right: self.left }
    }
}

pub(crate) fn unit_clamp(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(-1.0, 1.0)
    }
}
