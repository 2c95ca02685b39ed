use thiserror::Error;

use super::{gip_update, wip_apply, wip_detect, GipState, TechniqueError, TechniqueEvent, TechniqueKind, WipState};
use crate::config::{ConfigError, Settings};
use crate::drive::{Pose, Twist};
use crate::pressure::PressureFrame;
use crate::signal::{estimate_baseline, frames_span_us, Baseline, ChainConfig, ChainError, WheelCommand};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LocomotionError {
    #[error("timestamp {got} does not follow {prev}")]
    NonMonotonic { prev: u64, got: u64 },
    #[error(transparent)]
    Technique(#[from] TechniqueError),
}

/// Result of feeding one frame.
#[derive(Debug, Clone, PartialEq)]
pub struct Tick {
    pub t_us: u64,
    pub pose: Pose,
    pub twist: Twist,
    pub command: WheelCommand,
    pub calibrated: bool,
    pub event: Option<TechniqueEvent>,
    /// Set on the frame that closes a requested calibration window.
    pub calibration: Option<Result<Baseline, ChainError>>,
}

#[derive(Debug, Clone)]
enum State {
    Gip(GipState),
    Wip { state: WipState, baseline: Option<Baseline> },
}

#[derive(Debug, Clone)]
struct PendingCalibration {
    window_s: f64,
    frames: Vec<PressureFrame>,
}

/// One technique instance plus the bookkeeping around it: frame ordering,
/// calibration windows and live settings.
///
/// This is the single processing path shared by the offline harness and the
/// live service; both feed frames through [`Locomotion::push`].
#[derive(Debug, Clone)]
pub struct Locomotion {
    kind: TechniqueKind,
    settings: Settings,
    state: State,
    pending: Option<PendingCalibration>,
    last_t_us: Option<u64>,
}

impl Locomotion {
    pub fn new(kind: TechniqueKind, settings: Settings, start: Pose) -> Self {
        let state = match kind {
            TechniqueKind::Gip => State::Gip(GipState::new(start)),
            TechniqueKind::Wip => State::Wip { state: WipState::new(start), baseline: None },
        };
        Self { kind, settings, state, pending: None, last_t_us: None }
    }

    pub fn kind(&self) -> TechniqueKind {
        self.kind
    }

    pub fn settings(&self) -> &Settings {
        &self.settings
    }

    /// Live parameter update; takes effect from the next frame.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        self.settings.set(key, value)
    }

    pub fn pose(&self) -> Pose {
        match &self.state {
            State::Gip(g) => g.pose,
            State::Wip { state, .. } => state.pose,
        }
    }

    pub fn baseline(&self) -> Option<&Baseline> {
        match &self.state {
            State::Gip(g) => g.chain.baseline(),
            State::Wip { baseline, .. } => baseline.as_ref(),
        }
    }

    pub fn is_calibrated(&self) -> bool {
        self.baseline().is_some()
    }

    pub fn calibration_pending(&self) -> bool {
        self.pending.is_some()
    }

    /// Estimates a new baseline from the frames that arrive next, once they
    /// span `window_s`. Replaces any calibration already pending.
    pub fn request_calibration(&mut self, window_s: f64) {
        self.pending = Some(PendingCalibration { window_s, frames: Vec::new() });
    }

    /// Installs a baseline directly.
    pub fn calibrate(&mut self, baseline: Baseline, history: &[PressureFrame]) {
        let chain = self.settings.chain;
        match &mut self.state {
            State::Gip(g) => {
                g.chain.set_baseline(baseline);
                g.chain.seed_history(history, &chain);
            }
            State::Wip { state, baseline: b } => {
                *b = Some(baseline);
                state.reset_edges();
            }
        }
    }

    pub fn push(&mut self, frame: &PressureFrame) -> Result<Tick, LocomotionError> {
        let t = frame.timestamp_us();
        let prev = self.last_t_us;
        if let Some(prev) = prev {
            if t <= prev {
                return Err(LocomotionError::NonMonotonic { prev, got: t });
            }
        }
        self.last_t_us = Some(t);

        if let Some(pending) = &mut self.pending {
            pending.frames.push(*frame);
            let outcome = if frames_span_us(&pending.frames) >= pending.window_s * 1e6 - 1e-6 {
                let cfg = ChainConfig { calib_window_s: pending.window_s, ..self.settings.chain };
                let result = estimate_baseline(&pending.frames, &cfg);
                let frames = self.pending.take().expect("pending").frames;
                if let Ok(b) = &result {
                    self.calibrate(*b, &frames);
                }
                Some(result)
            } else {
                None
            };
            return Ok(self.idle_tick(t, outcome));
        }

        if !self.is_calibrated() {
            return Ok(self.idle_tick(t, None));
        }

        let dt_s = prev.map_or(0.0, |p| (t - p) as f64 / 1e6);
        let settings = self.settings;
        match &mut self.state {
            State::Gip(g) => {
                let pose = gip_update(g, frame, dt_s, &settings.chain, &settings.drive)?;
                Ok(Tick {
                    t_us: t,
                    pose,
                    twist: g.twist,
                    command: g.command,
                    calibrated: true,
                    event: None,
                    calibration: None,
                })
            }
            State::Wip { state, baseline } => {
                let event = wip_detect(state, frame, baseline.as_ref(), &settings.wip, &settings.chain)?;
                if let Some(ev) = event {
                    state.pose = wip_apply(&state.pose, ev, &settings.wip);
                }
                Ok(Tick {
                    t_us: t,
                    pose: state.pose,
                    twist: Twist::default(),
                    command: WheelCommand::ZERO,
                    calibrated: true,
                    event,
                    calibration: None,
                })
            }
        }
    }

    fn idle_tick(&mut self, t_us: u64, calibration: Option<Result<Baseline, ChainError>>) -> Tick {
        if let State::Gip(g) = &mut self.state {
            g.twist = Twist::default();
            g.command = WheelCommand::ZERO;
        }
        Tick {
            t_us,
            pose: self.pose(),
            twist: Twist::default(),
            command: WheelCommand::ZERO,
            calibrated: self.is_calibrated(),
            event: None,
            calibration,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pressure::{synth_stream, PressureScript, ScriptSegment};

    fn neutral_then(target: [u16; 4], seconds: f64) -> Vec<PressureFrame> {
        let script = PressureScript::new(vec![
            ScriptSegment::hold(1.0, [500; 4]),
            ScriptSegment::hold(seconds, target),
        ]);
        synth_stream(&script, 100.0).unwrap()
    }

    #[test]
    fn calibrates_on_next_window_then_moves() {
        let mut loco = Locomotion::new(TechniqueKind::Gip, Settings::default(), Pose::default());
        loco.request_calibration(1.0);
        let frames = neutral_then([800, 200, 800, 200], 2.0);
        let ticks: Vec<Tick> = frames.iter().map(|f| loco.push(f).unwrap()).collect();
        assert!(!ticks[98].calibrated);
        assert!(matches!(ticks[99].calibration, Some(Ok(_))));
        assert!(ticks[99].calibrated);
        assert!(ticks.last().unwrap().pose.x > 1.0);
    }

    #[test]
    fn calibration_rejects_motion() {
        let mut loco = Locomotion::new(TechniqueKind::Gip, Settings::default(), Pose::default());
        loco.request_calibration(1.0);
        let script = PressureScript::new(vec![ScriptSegment::ramp(1.0, [1000, 0, 1000, 0])]);
        let ticks: Vec<Tick> = synth_stream(&script, 100.0)
            .unwrap()
            .iter()
            .map(|f| loco.push(f).unwrap())
            .collect();
        assert!(matches!(
            ticks.last().unwrap().calibration,
            Some(Err(ChainError::UserNotStill { .. }))
        ));
        assert!(!loco.is_calibrated());
        assert!(!loco.calibration_pending());
    }

    #[test]
    fn rejects_out_of_order_frames() {
        let mut loco = Locomotion::new(TechniqueKind::Wip, Settings::default(), Pose::default());
        let f = |t| PressureFrame::new(t, 500, 500, 500, 500).unwrap();
        loco.push(&f(10)).unwrap();
        assert_eq!(loco.push(&f(5)), Err(LocomotionError::NonMonotonic { prev: 10, got: 5 }));
        assert_eq!(loco.push(&f(10)), Err(LocomotionError::NonMonotonic { prev: 10, got: 10 }));
    }

    #[test]
    fn uncalibrated_frames_hold_pose() {
        let mut loco = Locomotion::new(TechniqueKind::Gip, Settings::default(), Pose::new(1.0, 2.0, 0.5));
        let tick = loco.push(&PressureFrame::new(0, 900, 100, 900, 100).unwrap()).unwrap();
        assert_eq!(tick.pose, Pose::new(1.0, 2.0, 0.5));
        assert!(!tick.calibrated);
    }
}
