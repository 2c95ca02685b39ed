//! Differential-drive mapping from wheel commands to body twist, turning
//! radius and integrated avatar pose.
//!
//! The two feet act as the two wheels of a differential-drive vehicle with
//! virtual track width `track_w`:
//!
//! ```text
//! v_i = v_max * u_i
//! v   = (v_R + v_L) / 2
//! ω   = (v_R - v_L) / track_w
//! R   = v / ω = (track_w / 2) (v_R + v_L) / (v_R - v_L)
//! ```
//!
//! Reverse travel is slowed by `backward_scale`: when the mean wheel speed is
//! negative both wheels are shifted by `(backward_scale - 1) * v`. The shift
//! is common-mode, so `ω` is untouched and opposed feet still turn in place.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::signal::WheelCommand;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DriveError {
    #[error("invalid drive params: {0}")]
    InvalidParams(String),
    #[error("wheel speeds are not both positive with a common sum")]
    InvalidRegime,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DriveParams {
    /// Full-scale forward wheel speed, m/s.
    pub v_max: f64,
    /// Virtual track width, m.
    pub track_w: f64,
    /// Reverse speed as a fraction of forward speed.
    pub backward_scale: f64,
    /// Yaw-rate magnitude treated as zero, rad/s.
    pub omega_eps: f64,
}

impl Default for DriveParams {
    fn default() -> Self {
        Self { v_max: 2.0, track_w: 0.5, backward_scale: 0.6, omega_eps: 1e-9 }
    }
}

impl DriveParams {
    pub fn validate(&self) -> Result<(), DriveError> {
        let bad = |m: String| Err(DriveError::InvalidParams(m));
        if !(self.v_max.is_finite() && self.v_max > 0.0) {
            return bad(format!("v_max must be positive, got {}", self.v_max));
        }
        if !(self.track_w.is_finite() && self.track_w > 0.0) {
            return bad(format!("track_w must be positive, got {}", self.track_w));
        }
        if !(self.backward_scale > 0.0 && self.backward_scale <= 1.0) {
            return bad(format!("backward_scale must be in (0, 1], got {}", self.backward_scale));
        }
        if !(self.omega_eps.is_finite() && self.omega_eps > 0.0) {
            return bad(format!("omega_eps must be positive, got {}", self.omega_eps));
        }
        Ok(())
    }

    /// Largest yaw rate the params allow: both wheels at full scale, opposed.
    pub fn max_omega(&self) -> f64 {
        2.0 * self.v_max / self.track_w
    }
}

/// Virtual wheel speeds in m/s.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WheelSpeeds {
    pub left: f64,
    pub right: f64,
}

/// Body-frame velocity.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Twist {
    /// Forward speed, m/s.
    pub v: f64,
    /// Yaw rate, rad/s, counter-clockwise positive.
    pub omega: f64,
}

/// World-frame avatar state. `theta` lives in `(-π, π]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self { x, y, theta: normalize_angle(theta) }
    }

    pub fn distance_to(&self, x: f64, y: f64) -> f64 {
        (self.x - x).hypot(self.y - y)
    }
}

/// Instantaneous turning radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Radius {
    Straight,
    InPlace,
    /// Signed radius, positive for a left (counter-clockwise) turn.
    Arc(f64),
}

impl Radius {
    /// `|R|`: infinite when straight, zero in place.
    pub fn magnitude(&self) -> f64 {
        match self {
            Radius::Straight => f64::INFINITY,
            Radius::InPlace => 0.0,
            Radius::Arc(r) => r.abs(),
        }
    }
}

/// Wraps an angle into `(-π, π]`.
pub fn normalize_angle(a: f64) -> f64 {
    if a > -PI && a <= PI {
        return a;
    }
    let wrapped = a.rem_euclid(2.0 * PI);
    if wrapped > PI {
        wrapped - 2.0 * PI
    } else {
        wrapped
    }
}

pub fn wheel_speeds(cmd: WheelCommand, p: &DriveParams) -> WheelSpeeds {
    let left = p.v_max * cmd.left();
    let right = p.v_max * cmd.right();
    let mean = (left + right) / 2.0;
    if mean < 0.0 {
        let shift = (p.backward_scale - 1.0) * mean;
        WheelSpeeds { left: left + shift, right: right + shift }
    } else {
        WheelSpeeds { left, right }
    }
}

pub fn twist(speeds: WheelSpeeds, p: &DriveParams) -> Twist {
    Twist {
        v: (speeds.right + speeds.left) / 2.0,
        omega: (speeds.right - speeds.left) / p.track_w,
    }
}

pub fn turning_radius(t: &Twist, p: &DriveParams) -> Radius {
    if t.omega.abs() <= p.omega_eps {
        Radius::Straight
    } else if t.v.abs() <= p.omega_eps * p.track_w {
        Radius::InPlace
    } else {
        Radius::Arc(t.v / t.omega)
    }
}

/// Exact-arc unicycle update over `dt_s` at constant twist.
pub fn integrate(pose: &Pose, t: &Twist, dt_s: f64, p: &DriveParams) -> Pose {
    let (x, y, th) = (pose.x, pose.y, pose.theta);
    if t.omega.abs() <= p.omega_eps {
        return Pose {
            x: x + t.v * th.cos() * dt_s,
            y: y + t.v * th.sin() * dt_s,
            theta: normalize_angle(th + t.omega * dt_s),
        };
    }
    let r = t.v / t.omega;
    let th_end = th + t.omega * dt_s;
    Pose {
        x: x + r * (th_end.sin() - th.sin()),
        y: y + r * (th.cos() - th_end.cos()),
        theta: normalize_angle(th_end),
    }
}

/// Whether `tighter` (more left-right imbalance) turns on a smaller arc than
/// `looser` at the same command sum.
///
/// Both commands must drive both wheels forward and share `u_L + u_R`.
pub fn arc_tightens(looser: WheelCommand, tighter: WheelCommand, p: &DriveParams) -> Result<bool, DriveError> {
    let sum = |c: &WheelCommand| c.left() + c.right();
    let forward = |c: &WheelCommand| c.left() > 0.0 && c.right() > 0.0;
    if !forward(&looser) || !forward(&tighter) || (sum(&looser) - sum(&tighter)).abs() > 1e-12 {
        return Err(DriveError::InvalidRegime);
    }
    let radius = |c: WheelCommand| turning_radius(&twist(wheel_speeds(c, p), p), p).magnitude();
    Ok(radius(tighter) < radius(looser))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p() -> DriveParams {
        DriveParams::default()
    }

    #[test]
    fn wheel_speed_examples() {
        assert_eq!(wheel_speeds(WheelCommand::new(1.0, 1.0), &p()), WheelSpeeds { left: 2.0, right: 2.0 });
        assert_eq!(wheel_speeds(WheelCommand::ZERO, &p()), WheelSpeeds::default());
        let back = wheel_speeds(WheelCommand::new(-1.0, -1.0), &p());
        assert!((back.left + 1.2).abs() < 1e-15 && (back.right + 1.2).abs() < 1e-15);
        // opposed feet keep zero mean speed, so no reverse scaling applies
        let spin = wheel_speeds(WheelCommand::new(1.0, -1.0), &p());
        assert_eq!(spin, WheelSpeeds { left: 2.0, right: -2.0 });
        // mixed reverse: common-mode shift leaves the difference intact
        let mixed = wheel_speeds(WheelCommand::new(-0.8, 0.2), &p());
        assert!((mixed.right - mixed.left - 2.0).abs() < 1e-12);
        assert!(((mixed.left + mixed.right) / 2.0 + 0.36).abs() < 1e-12);
    }

    #[test]
    fn twist_examples() {
        let t = |l, r| twist(WheelSpeeds { left: l, right: r }, &p());
        assert_eq!(t(2.0, 2.0), Twist { v: 2.0, omega: 0.0 });
        assert_eq!(t(-2.0, 2.0), Twist { v: 0.0, omega: 8.0 });
        assert_eq!(t(1.0, 2.0), Twist { v: 1.5, omega: 2.0 });
    }

    #[test]
    fn radius_examples() {
        assert_eq!(turning_radius(&Twist { v: 1.5, omega: 2.0 }, &p()), Radius::Arc(0.75));
        assert_eq!(turning_radius(&Twist { v: 2.0, omega: 0.0 }, &p()), Radius::Straight);
        assert_eq!(turning_radius(&Twist { v: 0.0, omega: 8.0 }, &p()), Radius::InPlace);
        assert_eq!(turning_radius(&Twist { v: -1.0, omega: 2.0 }, &p()), Radius::Arc(-0.5));
    }

    #[test]
    fn integrate_straight_and_in_place() {
        let o = Pose::default();
        assert_eq!(integrate(&o, &Twist { v: 1.0, omega: 0.0 }, 1.0, &p()), Pose::new(1.0, 0.0, 0.0));
        let spun = integrate(&o, &Twist { v: 0.0, omega: PI / 2.0 }, 1.0, &p());
        assert_eq!((spun.x, spun.y), (0.0, 0.0));
        assert!((spun.theta - PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn integrate_quarter_circle_against_euler() {
        let o = Pose::default();
        let t = Twist { v: 1.0, omega: 1.0 };
        let exact = integrate(&o, &t, PI / 2.0, &p());
        assert!((exact.x - 1.0).abs() < 1e-12 && (exact.y - 1.0).abs() < 1e-12);
        assert!((exact.theta - PI / 2.0).abs() < 1e-12);

        // forward Euler at 10 µs
        let dt = 1e-5;
        let n = (PI / 2.0 / dt).round() as usize;
        let (mut x, mut y, mut th) = (0.0f64, 0.0f64, 0.0f64);
        for _ in 0..n {
            x += th.cos() * dt;
            y += th.sin() * dt;
            th += dt;
        }
        assert!((x - exact.x).hypot(y - exact.y) < 1e-4);
    }

    #[test]
    fn normalize_range() {
        assert_eq!(normalize_angle(PI), PI);
        assert!((normalize_angle(-PI) - PI).abs() < 1e-15);
        assert!((normalize_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((normalize_angle(7.0) - (7.0 - 2.0 * PI)).abs() < 1e-12);
    }

    #[test]
    fn tightening_examples() {
        // radius by hand: R = 0.25 * (vR + vL) / (vR - vL)
        //   (0.6, 0.4): vL=1.2 vR=0.8 -> |R| = 0.25 * 2.0 / 0.4 = 1.25
        //   (0.7, 0.3): vL=1.4 vR=0.6 -> |R| = 0.25 * 2.0 / 0.8 = 0.625
        //   (0.8, 0.2): |R| = 0.25 * 2.0 / 1.2 = 0.41667
        //   (0.9, 0.1): |R| = 0.25 * 2.0 / 1.6 = 0.3125
        let r = |l, rr| turning_radius(&twist(wheel_speeds(WheelCommand::new(l, rr), &p()), &p()), &p()).magnitude();
        assert!((r(0.6, 0.4) - 1.25).abs() < 1e-12);
        assert!((r(0.7, 0.3) - 0.625).abs() < 1e-12);
        assert!((r(0.8, 0.2) - 0.5 / 1.2).abs() < 1e-12);
        assert!((r(0.9, 0.1) - 0.3125).abs() < 1e-12);

        let c = WheelCommand::new;
        assert_eq!(arc_tightens(c(0.6, 0.4), c(0.7, 0.3), &p()), Ok(true));
        assert_eq!(arc_tightens(c(0.5, 0.5), c(0.6, 0.4), &p()), Ok(true));
        assert_eq!(arc_tightens(c(0.8, 0.2), c(0.9, 0.1), &p()), Ok(true));
        assert_eq!(arc_tightens(c(0.9, 0.1), c(0.8, 0.2), &p()), Ok(false));
        assert_eq!(arc_tightens(c(1.0, -0.1), c(0.9, 0.0), &p()), Err(DriveError::InvalidRegime));
        assert_eq!(arc_tightens(c(0.6, 0.4), c(0.6, 0.3), &p()), Err(DriveError::InvalidRegime));
    }
}
