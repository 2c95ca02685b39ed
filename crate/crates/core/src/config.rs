//! Flat key-value configuration covering chain, drive, WIP and pilot settings.
//!
//! ```text
//! # comment
//! tau_s = 0.12           # chain keys may be bare or prefixed with `chain.`
//! drive.v_max = 2.5      # drive keys may be bare or prefixed with `drive.`
//! wip.snap_turn_deg = 45
//! pilot.lookahead_m = 2.0
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::drive::DriveParams;
use crate::scenario::PilotConfig;
use crate::signal::ChainConfig;
use crate::technique::WipConfig;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("unknown key {0:?}")]
    UnknownKey(String),
    #[error("bad value for {key}: {value:?}")]
    BadValue { key: String, value: String },
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: {error}")]
    AtLine { line: usize, error: Box<ConfigError> },
    #[error("invalid settings: {0}")]
    Invalid(String),
    #[error("reading config: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Settings {
    pub chain: ChainConfig,
    pub drive: DriveParams,
    pub wip: WipConfig,
    pub pilot: PilotConfig,
}

impl Settings {
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.chain.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.drive.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.wip.validate().map_err(ConfigError::Invalid)?;
        self.pilot.validate().map_err(ConfigError::Invalid)?;
        Ok(())
    }

    /// Sets one key. The update is only committed if the resulting settings
    /// still validate.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let mut next = *self;
        let slot = next.slot(key).ok_or_else(|| ConfigError::UnknownKey(key.to_string()))?;
        let bad = || ConfigError::BadValue { key: key.to_string(), value: value.to_string() };
        match slot {
            Slot::Real(r) => *r = value.trim().parse().map_err(|_| bad())?,
            Slot::OptReal(r) => {
                *r = match value.trim() {
                    "auto" | "none" => None,
                    v => Some(v.parse().map_err(|_| bad())?),
                }
            }
        }
        next.validate().map_err(|_| bad())?;
        *self = next;
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<String> {
        let mut copy = *self;
        copy.slot(key).map(|s| match s {
            Slot::Real(r) => r.to_string(),
            Slot::OptReal(r) => r.map_or("auto".into(), |v| v.to_string()),
        })
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut settings = Settings::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = match line.split_once('=') {
                Some((k, v)) => (k.trim(), v.trim()),
                None => line.split_once(char::is_whitespace).ok_or(ConfigError::Syntax { line: idx + 1 })?,
            };
            settings
                .set(key, value.trim())
                .map_err(|e| ConfigError::AtLine { line: idx + 1, error: Box::new(e) })?;
        }
        Ok(settings)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path.as_ref()).map_err(|e| ConfigError::Io(e.to_string()))?;
        Self::parse(&text)
    }

    fn slot(&mut self, key: &str) -> Option<Slot<'_>> {
        let (section, name) = key.split_once('.').unwrap_or(("", key));
        let c = &mut self.chain;
        let d = &mut self.drive;
        let w = &mut self.wip;
        let p = &mut self.pilot;
        let real = |r| Some(Slot::Real(r));
        match (section, name) {
            ("" | "chain", "p_span") => real(&mut c.p_span),
            ("" | "chain", "t_enter") => real(&mut c.t_enter),
            ("" | "chain", "t_exit") => real(&mut c.t_exit),
            ("" | "chain", "tau_s") => real(&mut c.tau_s),
            ("" | "chain", "t_hold_s") => real(&mut c.t_hold_s),
            ("" | "chain", "eps_neutral") => real(&mut c.eps_neutral),
            ("" | "chain", "t_neutral_s") => real(&mut c.t_neutral_s),
            ("" | "chain", "calib_window_s") => real(&mut c.calib_window_s),
            ("" | "chain", "calib_var_max") => real(&mut c.calib_var_max),
            ("" | "drive", "v_max") => real(&mut d.v_max),
            ("" | "drive", "track_w") => real(&mut d.track_w),
            ("" | "drive", "backward_scale") => real(&mut d.backward_scale),
            ("" | "drive", "omega_eps") => real(&mut d.omega_eps),
            ("wip", "snap_distance") => real(&mut w.snap_distance),
            ("wip", "snap_turn_deg") => real(&mut w.snap_turn_deg),
            ("wip", "theta_step") => real(&mut w.theta_step),
            ("wip", "t_refract_s") => real(&mut w.t_refract_s),
            ("pilot", "lookahead_m") => real(&mut p.lookahead_m),
            ("pilot", "cruise_frac") => real(&mut p.cruise_frac),
            ("pilot", "heading_tol_deg") => Some(Slot::OptReal(&mut p.heading_tol_deg)),
            ("pilot", "timeout_s") => real(&mut p.timeout_s),
            ("pilot", "press_s") => real(&mut p.press_s),
            ("pilot", "release_s") => real(&mut p.release_s),
            ("pilot", "press_level") => real(&mut p.press_level),
            ("pilot", "neutral_raw") => real(&mut p.neutral_raw),
            ("pilot", "neutral_jitter") => real(&mut p.neutral_jitter),
            ("pilot", "noise_counts") => real(&mut p.noise_counts),
            _ => None,
        }
    }
}

enum Slot<'a> {
    Real(&'a mut f64),
    OptReal(&'a mut Option<f64>),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_mixed_file() {
        let text = "# tuning\ntau_s = 0.12\nchain.t_enter=0.2\ndrive.v_max 2.5\nwip.snap_turn_deg = 45 # coarse\n\npilot.heading_tol_deg = auto\n";
        let s = Settings::parse(text).unwrap();
        assert_eq!(s.chain.tau_s, 0.12);
        assert_eq!(s.chain.t_enter, 0.2);
        assert_eq!(s.drive.v_max, 2.5);
        assert_eq!(s.wip.snap_turn_deg, 45.0);
        assert_eq!(s.pilot.heading_tol_deg, None);
    }

    #[test]
    fn unknown_key_reports_line() {
        let err = Settings::parse("tau_s = 0.1\nbogus = 1\n").unwrap_err();
        assert!(matches!(err, ConfigError::AtLine { line: 2, .. }));
    }

    #[test]
    fn invalid_value_is_not_committed() {
        let mut s = Settings::default();
        assert!(s.set("t_exit", "0.5").is_err());
        assert_eq!(s.chain.t_exit, 0.06);
        assert!(s.set("chain.tau_s", "abc").is_err());
        s.set("chain.tau_s", "0.12").unwrap();
        assert_eq!(s.get("tau_s").as_deref(), Some("0.12"));
    }
}
