//! Scripted pilots standing in for human participants, plus the pressure
//! synthesis that turns their intent into raw sensor frames.

use std::f64::consts::FRAC_PI_2;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Point, Scenario};
use crate::drive::{normalize_angle, DriveParams, Pose};
use crate::pressure::PressureFrame;
use crate::signal::{ChainConfig, WheelCommand};
use crate::technique::{Foot, TechniqueEvent, WipConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PilotConfig {
    pub lookahead_m: f64,
    /// Target speed as a fraction of `v_max`.
    pub cruise_frac: f64,
    /// WIP heading tolerance; `None` uses half the snap turn.
    pub heading_tol_deg: Option<f64>,
    pub timeout_s: f64,
    /// WIP gesture press and release durations, s.
    pub press_s: f64,
    pub release_s: f64,
    /// WIP press height as a fraction of `p_span`.
    pub press_level: f64,
    /// Nominal neutral channel reading and the per-trial spread around it.
    pub neutral_raw: f64,
    pub neutral_jitter: f64,
    /// Uniform per-frame sensor noise amplitude, counts.
    pub noise_counts: f64,
}

impl Default for PilotConfig {
    fn default() -> Self {
        Self {
            lookahead_m: 1.5,
            cruise_frac: 0.8,
            heading_tol_deg: None,
            timeout_s: 600.0,
            press_s: 0.35,
            release_s: 0.35,
            press_level: 0.5,
            neutral_raw: 500.0,
            neutral_jitter: 40.0,
            noise_counts: 2.0,
        }
    }
}

impl PilotConfig {
    pub fn validate(&self) -> Result<(), String> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(format!("{name} must be positive, got {v}"))
            }
        };
        positive("lookahead_m", self.lookahead_m)?;
        positive("timeout_s", self.timeout_s)?;
        positive("press_s", self.press_s)?;
        positive("release_s", self.release_s)?;
        if !(self.cruise_frac > 0.0 && self.cruise_frac <= 1.0) {
            return Err(format!("cruise_frac must be in (0, 1], got {}", self.cruise_frac));
        }
        if let Some(tol) = self.heading_tol_deg {
            if !(tol > 0.0 && tol < 180.0) {
                return Err(format!("heading_tol_deg must be in (0, 180), got {tol}"));
            }
        }
        if !(self.press_level > 0.0 && self.press_level <= 1.0) {
            return Err(format!("press_level must be in (0, 1], got {}", self.press_level));
        }
        for (name, v) in [
            ("neutral_raw", self.neutral_raw),
            ("neutral_jitter", self.neutral_jitter),
            ("noise_counts", self.noise_counts),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(format!("{name} must be non-negative, got {v}"));
            }
        }
        Ok(())
    }

    pub fn heading_tol_rad(&self, wip: &WipConfig) -> f64 {
        self.heading_tol_deg.unwrap_or(wip.snap_turn_deg / 2.0).to_radians()
    }
}

/// Point `lookahead_m` further along the current leg than the closest
/// point, clamped to the leg's end so waypoints are approached directly.
/// Free-route scenarios aim straight at the next waypoint.
pub fn lookahead_point(pose: &Pose, sc: &Scenario, next_wp: usize, lookahead_m: f64) -> Option<Point> {
    let leg = sc.segments.get(next_wp.checked_sub(1)?)?;
    if sc.free_route {
        return sc.waypoints.get(next_wp).copied();
    }
    let (along, _) = leg.project(&Point::new(pose.x, pose.y));
    Some(leg.point_at(along + lookahead_m))
}

/// Bearing of `target` relative to the current heading, in `(-pi, pi]`.
fn bearing_error(pose: &Pose, target: &Point) -> f64 {
    normalize_angle((target.y - pose.y).atan2(target.x - pose.x) - pose.theta)
}

/// Pure-pursuit steering expressed as a wheel command.
///
/// Curvature is `2 sin(err) / lookahead`; past 90 degrees it saturates at
/// the tightest pursuit arc. If a wheel would exceed full scale both
/// components shrink together, which slows down but keeps the curvature.
pub fn gip_pilot(pose: &Pose, sc: &Scenario, next_wp: usize, pc: &PilotConfig, drive: &DriveParams) -> WheelCommand {
    let Some(target) = lookahead_point(pose, sc, next_wp, pc.lookahead_m) else {
        return WheelCommand::ZERO;
    };
    let err = bearing_error(pose, &target);
    let kappa = if err.abs() > FRAC_PI_2 {
        err.signum() * 2.0 / pc.lookahead_m
    } else {
        2.0 * err.sin() / pc.lookahead_m
    };
    let u_sum = 2.0 * pc.cruise_frac;
    let u_diff = kappa * drive.track_w * pc.cruise_frac;
    let mut left = (u_sum - u_diff) / 2.0;
    let mut right = (u_sum + u_diff) / 2.0;
    let peak = left.abs().max(right.abs());
    if peak > 1.0 {
        left /= peak;
        right /= peak;
    }
    WheelCommand::new(left, right)
}

/// Greedy snap pilot: turn toward the lookahead point while the heading
/// error exceeds the tolerance, otherwise step.
///
/// Undoing the previous turn needs an extra half snap of error. Without
/// that margin a target sitting near the tolerance edge makes the pilot
/// flip back and forth between two lattice headings.
pub fn wip_pilot(
    pose: &Pose,
    sc: &Scenario,
    next_wp: usize,
    last_turn: Option<TechniqueEvent>,
    pc: &PilotConfig,
    wip: &WipConfig,
) -> Option<TechniqueEvent> {
    let target = lookahead_point(pose, sc, next_wp, pc.lookahead_m)?;
    let err = bearing_error(pose, &target);
    let tol = pc.heading_tol_rad(wip);
    let reverse_tol = tol + wip.snap_turn_deg.to_radians() / 2.0;
    let limit = |turn| if last_turn.is_some_and(|t| t != turn) { reverse_tol } else { tol };
    Some(if err > limit(TechniqueEvent::TurnLeft) {
        TechniqueEvent::TurnLeft
    } else if err < -limit(TechniqueEvent::TurnRight) {
        TechniqueEvent::TurnRight
    } else {
        TechniqueEvent::StepForward
    })
}

/// Raw frame generator with a fixed per-trial neutral posture and uniform
/// sensor noise.
#[derive(Debug, Clone)]
pub struct PressureSynth {
    neutral: [f64; 4],
    noise: f64,
    rng: ChaCha8Rng,
}

impl PressureSynth {
    pub fn new(pc: &PilotConfig, mut rng: ChaCha8Rng) -> Self {
        let j = pc.neutral_jitter;
        let neutral = std::array::from_fn(|_| pc.neutral_raw + if j > 0.0 { rng.gen_range(-j..=j) } else { 0.0 });
        Self { neutral, noise: pc.noise_counts, rng }
    }

    pub fn neutral(&self) -> [f64; 4] {
        self.neutral
    }

    /// Frame at `neutral + offsets` plus noise.
    pub fn frame(&mut self, t_us: u64, offsets: [f64; 4]) -> PressureFrame {
        let levels = std::array::from_fn(|i| {
            let n = if self.noise > 0.0 { self.rng.gen_range(-self.noise..=self.noise) } else { 0.0 };
            self.neutral[i] + offsets[i] + n
        });
        PressureFrame::from_levels(t_us, levels)
    }

    /// Frame whose fore-aft differential realizes `cmd` after the dead-zone.
    pub fn command_frame(&mut self, t_us: u64, cmd: WheelCommand, chain: &ChainConfig) -> PressureFrame {
        let half = |u: f64| {
            if u == 0.0 {
                0.0
            } else {
                u.signum() * (chain.t_exit + u.abs() * (1.0 - chain.t_exit)) * chain.p_span / 2.0
            }
        };
        let (l, r) = (half(cmd.left()), half(cmd.right()));
        self.frame(t_us, [l, -l, r, -r])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Phase {
    Idle,
    Pressing { channel: usize, until_us: u64 },
    Releasing { until_us: u64 },
}

/// Turns pilot events into press-and-release gestures on one channel at a time.
#[derive(Debug, Clone)]
pub struct GestureScheduler {
    phase: Phase,
    next_foot: Foot,
    last_turn: Option<TechniqueEvent>,
    press_us: u64,
    cycle_us: u64,
    level: f64,
}

impl GestureScheduler {
    pub fn new(pc: &PilotConfig, wip: &WipConfig, chain: &ChainConfig) -> Self {
        let press_us = (pc.press_s * 1e6).round() as u64;
        let release_us = (pc.release_s * 1e6).round() as u64;
        Self {
            phase: Phase::Idle,
            next_foot: Foot::Left,
            last_turn: None,
            press_us,
            // a new press never starts inside the refractory window
            cycle_us: (press_us + release_us).max(wip.refract_us()),
            level: pc.press_level * chain.p_span,
        }
    }

    pub fn is_idle(&self) -> bool {
        self.phase == Phase::Idle
    }

    /// Most recent turn the detector confirmed.
    pub fn last_turn(&self) -> Option<TechniqueEvent> {
        self.last_turn
    }

    /// Channel offsets for the frame at `t_us`. `intent` is consulted only
    /// when a new gesture may start.
    pub fn offsets(&mut self, t_us: u64, intent: impl FnOnce() -> Option<TechniqueEvent>) -> [f64; 4] {
        loop {
            match self.phase {
                Phase::Pressing { channel, until_us } if t_us < until_us => {
                    let mut o = [0.0; 4];
                    o[channel] = self.level;
                    return o;
                }
                Phase::Pressing { until_us, .. } => {
                    self.phase = Phase::Releasing { until_us: until_us - self.press_us + self.cycle_us };
                }
                Phase::Releasing { until_us } if t_us < until_us => return [0.0; 4],
                Phase::Releasing { .. } => self.phase = Phase::Idle,
                Phase::Idle => {
                    let channel = match intent() {
                        None => return [0.0; 4],
                        Some(TechniqueEvent::StepForward) => match self.next_foot {
                            Foot::Left => 0,
                            Foot::Right => 2,
                        },
                        Some(TechniqueEvent::TurnLeft) => 1,
                        Some(TechniqueEvent::TurnRight) => 3,
                    };
                    self.phase = Phase::Pressing { channel, until_us: t_us + self.press_us };
                    let mut o = [0.0; 4];
                    o[channel] = self.level;
                    return o;
                }
            }
        }
    }

    /// Feedback from the detector so the step foot stays in sync.
    pub fn observe(&mut self, event: Option<TechniqueEvent>) {
        match event {
            Some(TechniqueEvent::StepForward) => self.next_foot = self.next_foot.other(),
            Some(turn) => self.last_turn = Some(turn),
            None => {}
        }
    }
}
