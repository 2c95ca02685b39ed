use serde::{Deserialize, Serialize};

use super::ChainConfig;

/// Filter state for one foot.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FootState {
    pub active: bool,
    /// Smoother output, always in `[-1, 1]`.
    pub y: f64,
    pub onset_us: Option<u64>,
    pub last_sign: i8,
}

/// Hysteretic dead-zone with rescale of the active region onto `(0, 1]`.
pub fn deadzone_step(foot: &mut FootState, s: f64, cfg: &ChainConfig) -> f64 {
    let mag = s.abs();
    if foot.active {
        if mag <= cfg.t_exit {
            foot.active = false;
        }
    } else if mag >= cfg.t_enter {
        foot.active = true;
    }
    if foot.active {
        s.signum() * (mag - cfg.t_exit) / (1.0 - cfg.t_exit)
    } else {
        0.0
    }
}

/// First-order exponential smoother; `alpha = 1 - exp(-dt / tau)`.
pub fn smooth_step(foot: &mut FootState, x: f64, dt_s: f64, cfg: &ChainConfig) -> f64 {
    let alpha = -(-dt_s.max(0.0) / cfg.tau_s).exp_m1();
    foot.y += alpha * (x - foot.y);
    foot.y
}

/// Minimum-hold gate. `intent` is the dead-zone output and drives the hold
/// timer: it must stay nonzero with one sign for `t_hold_s` before `value`
/// (the smoothed command) passes, and only while `value` agrees in sign.
/// Zero or a sign change in `intent` restarts the hold, so the smoother's
/// decaying tail after a release never leaks through.
pub fn debounce_step(foot: &mut FootState, intent: f64, value: f64, t_us: u64, cfg: &ChainConfig) -> f64 {
    let sign = sign_of(intent);
    if sign == 0 {
        foot.onset_us = None;
        foot.last_sign = 0;
        return 0.0;
    }
    let onset = match foot.onset_us {
        Some(t) if sign == foot.last_sign => t,
        _ => {
            foot.onset_us = Some(t_us);
            foot.last_sign = sign;
            t_us
        }
    };
    if t_us.saturating_sub(onset) >= cfg.hold_us() && sign_of(value) == sign {
        value
    } else {
        0.0
    }
}

fn sign_of(x: f64) -> i8 {
    if x > 0.0 {
        1
    } else if x < 0.0 {
        -1
    } else {
        0
    }
}
