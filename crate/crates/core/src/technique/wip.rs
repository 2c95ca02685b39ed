//! Seated walking-in-place baseline: discrete snap steps and snap turns
//! fired by rising pressure edges.

use serde::{Deserialize, Serialize};

use crate::drive::{normalize_angle, Pose};
use crate::pressure::PressureFrame;
use crate::signal::{Baseline, ChainConfig};

use super::TechniqueError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TechniqueEvent {
    StepForward,
    TurnLeft,
    TurnRight,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Foot {
    Left,
    Right,
}

impl Foot {
    pub fn other(self) -> Foot {
        match self {
            Foot::Left => Foot::Right,
            Foot::Right => Foot::Left,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WipConfig {
    /// Translation per step, m.
    pub snap_distance: f64,
    /// Rotation per turn, degrees.
    pub snap_turn_deg: f64,
    /// Normalized single-channel level that triggers an event on a rising edge.
    pub theta_step: f64,
    /// Minimum spacing between events, s.
    pub t_refract_s: f64,
}

impl Default for WipConfig {
    fn default() -> Self {
        Self { snap_distance: 1.0, snap_turn_deg: 30.0, theta_step: 0.25, t_refract_s: 0.30 }
    }
}

impl WipConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.snap_distance.is_finite() && self.snap_distance > 0.0) {
            return Err(format!("snap_distance must be positive, got {}", self.snap_distance));
        }
        if !(self.snap_turn_deg > 0.0 && self.snap_turn_deg <= 180.0) {
            return Err(format!("snap_turn_deg must be in (0, 180], got {}", self.snap_turn_deg));
        }
        if !self.theta_step.is_finite() {
            return Err("theta_step must be finite".into());
        }
        if !(self.t_refract_s.is_finite() && self.t_refract_s > 0.0) {
            return Err(format!("t_refract_s must be positive, got {}", self.t_refract_s));
        }
        Ok(())
    }

    pub fn refract_us(&self) -> u64 {
        (self.t_refract_s * 1e6).round() as u64
    }
}

#[derive(Debug, Clone, Default)]
pub struct WipState {
    pub pose: Pose,
    /// Previous normalized `[lf, lr, rf, rr]`.
    prev: Option<[f64; 4]>,
    last_event_us: Option<u64>,
    /// Foot expected to step next; `None` accepts either.
    expect: Option<Foot>,
}

impl WipState {
    pub fn new(pose: Pose) -> Self {
        Self { pose, ..Default::default() }
    }

    /// Forgets edge history, e.g. after a new baseline.
    pub fn reset_edges(&mut self) {
        self.prev = None;
    }

    pub fn last_event_us(&self) -> Option<u64> {
        self.last_event_us
    }

    pub fn expected_foot(&self) -> Option<Foot> {
        self.expect
    }
}

/// Detects one snap event in `frame`.
///
/// A forefoot channel rising through `theta_step` is a step (feet must
/// alternate); a rearfoot channel rising through it turns toward that foot's
/// side. Nothing fires within `t_refract_s` of the previous event.
pub fn wip_detect(
    state: &mut WipState,
    frame: &PressureFrame,
    base: Option<&Baseline>,
    cfg: &WipConfig,
    chain: &ChainConfig,
) -> Result<Option<TechniqueEvent>, TechniqueError> {
    let base = base.ok_or(TechniqueError::NotCalibrated)?;
    let offsets = base.offsets();
    let raw = frame.channels();
    let cur: [f64; 4] = std::array::from_fn(|i| (f64::from(raw[i]) - offsets[i]) / chain.p_span);
    let Some(prev) = state.prev.replace(cur) else {
        return Ok(None);
    };

    let t = frame.timestamp_us();
    if let Some(last) = state.last_event_us {
        if t.saturating_sub(last) < cfg.refract_us() {
            return Ok(None);
        }
    }
    let rising = |i: usize| prev[i] < cfg.theta_step && cfg.theta_step <= cur[i];

    let mut event = None;
    for (idx, foot) in [(0, Foot::Left), (2, Foot::Right)] {
        if rising(idx) && state.expect.is_none_or(|f| f == foot) {
            state.expect = Some(foot.other());
            event = Some(TechniqueEvent::StepForward);
            break;
        }
    }
    if event.is_none() {
        if rising(1) {
            event = Some(TechniqueEvent::TurnLeft);
        } else if rising(3) {
            event = Some(TechniqueEvent::TurnRight);
        }
    }
    if event.is_some() {
        state.last_event_us = Some(t);
    }
    Ok(event)
}

/// Applies a snap event: steps translate along the heading, turns rotate in place.
pub fn wip_apply(pose: &Pose, ev: TechniqueEvent, cfg: &WipConfig) -> Pose {
    let turn = cfg.snap_turn_deg.to_radians();
    match ev {
        TechniqueEvent::StepForward => Pose {
            x: pose.x + cfg.snap_distance * pose.theta.cos(),
            y: pose.y + cfg.snap_distance * pose.theta.sin(),
            theta: pose.theta,
        },
        TechniqueEvent::TurnLeft => Pose { theta: normalize_angle(pose.theta + turn), ..*pose },
        TechniqueEvent::TurnRight => Pose { theta: normalize_angle(pose.theta - turn), ..*pose },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    const NEUTRAL: [u16; 4] = [500; 4];

    fn pulse_stream(pulses: &[(f64, usize)], total_s: f64) -> Vec<PressureFrame> {
        // each pulse raises one channel by 300 counts (0.5 normalized) for 0.2 s
        let n = (total_s * 100.0) as u64;
        (0..n)
            .map(|k| {
                let t = k as f64 / 100.0;
                let mut c = NEUTRAL;
                for &(start, ch) in pulses {
                    if t >= start - 1e-9 && t < start + 0.2 - 1e-9 {
                        c[ch] = 800;
                    }
                }
                PressureFrame::new(k * 10_000, c[0], c[1], c[2], c[3]).unwrap()
            })
            .collect()
    }

    fn detect_all(frames: &[PressureFrame]) -> Vec<(u64, TechniqueEvent)> {
        let mut st = WipState::default();
        let base = Baseline::uniform(500.0, 0);
        frames
            .iter()
            .filter_map(|f| {
                wip_detect(&mut st, f, Some(&base), &WipConfig::default(), &ChainConfig::default())
                    .unwrap()
                    .map(|e| (f.timestamp_us(), e))
            })
            .collect()
    }

    #[test]
    fn alternating_steps() {
        let ev = detect_all(&pulse_stream(&[(0.1, 0), (0.6, 2)], 1.5));
        assert_eq!(ev.iter().map(|e| e.1).collect::<Vec<_>>(), vec![TechniqueEvent::StepForward; 2]);
    }

    #[test]
    fn same_foot_twice_steps_once() {
        let ev = detect_all(&pulse_stream(&[(0.1, 0), (0.6, 0)], 1.5));
        assert_eq!(ev.len(), 1);
    }

    #[test]
    fn rear_pulses_turn() {
        let ev = detect_all(&pulse_stream(&[(0.1, 3)], 1.0));
        assert_eq!(ev, vec![(100_000, TechniqueEvent::TurnRight)]);
        let ev = detect_all(&pulse_stream(&[(0.1, 1)], 1.0));
        assert_eq!(ev, vec![(100_000, TechniqueEvent::TurnLeft)]);
    }

    #[test]
    fn refractory_window_drops_events() {
        // right step 0.1 s after the left step: inside the 0.3 s window
        let ev = detect_all(&pulse_stream(&[(0.1, 0), (0.2, 2)], 1.0));
        assert_eq!(ev.len(), 1);
    }

    #[test]
    fn needs_baseline() {
        let mut st = WipState::default();
        let f = PressureFrame::new(0, 500, 500, 500, 500).unwrap();
        let r = wip_detect(&mut st, &f, None, &WipConfig::default(), &ChainConfig::default());
        assert!(matches!(r, Err(TechniqueError::NotCalibrated)));
    }

    #[test]
    fn apply_examples() {
        let cfg = WipConfig::default();
        let o = Pose::default();
        assert_eq!(wip_apply(&o, TechniqueEvent::StepForward, &cfg), Pose::new(1.0, 0.0, 0.0));
        let l = wip_apply(&o, TechniqueEvent::TurnLeft, &cfg);
        assert!((l.theta - PI / 6.0).abs() < 1e-15 && l.x == 0.0 && l.y == 0.0);

        let mut p = o;
        for _ in 0..12 {
            p = wip_apply(&p, TechniqueEvent::TurnRight, &cfg);
        }
        assert!(normalize_angle(p.theta).abs() < 1e-12);
    }
}
