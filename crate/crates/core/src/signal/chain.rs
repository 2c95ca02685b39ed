use std::collections::VecDeque;

use super::calibration::{estimate_baseline, fore_aft, frames_span_us, Baseline};
use super::filters::{debounce_step, deadzone_step, smooth_step, FootState};
use super::{unit_clamp, ChainConfig, ChainError, ForeAftSample, WheelCommand};
use crate::pressure::PressureFrame;

/// Mutable state of the chain for one session.
#[derive(Debug, Clone, Default)]
pub struct ChainState {
    pub left: FootState,
    pub right: FootState,
    neutral_since: Option<u64>,
    history: VecDeque<PressureFrame>,
    baseline: Option<Baseline>,
    last_t_us: Option<u64>,
    rebaselines: u64,
}

impl ChainState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_baseline(baseline: Baseline) -> Self {
        let mut state = Self::default();
        state.set_baseline(baseline);
        state
    }

    pub fn baseline(&self) -> Option<&Baseline> {
        self.baseline.as_ref()
    }

    /// Installs a baseline and restarts the neutral timer. Filter state is kept.
    pub fn set_baseline(&mut self, baseline: Baseline) {
        if self.last_t_us.is_none_or(|t| t < baseline.captured_at) {
            self.last_t_us = Some(baseline.captured_at);
        }
        self.baseline = Some(baseline);
        self.neutral_since = None;
    }

    /// Seeds the rolling raw history used for re-baselining, typically with
    /// the calibration window.
    pub fn seed_history(&mut self, frames: &[PressureFrame], cfg: &ChainConfig) {
        for f in frames {
            self.push_history(*f, cfg);
        }
    }

    /// Number of automatic re-baselines so far.
    pub fn rebaselines(&self) -> u64 {
        self.rebaselines
    }

    fn push_history(&mut self, frame: PressureFrame, cfg: &ChainConfig) {
        self.history.push_back(frame);
        let required = cfg.calib_window_s * 1e6;
        while self.history.len() > 2 {
            let (a, b) = self.history.as_slices();
            // span without the oldest frame
            let tail_span = if a.len() > 1 {
                span_of_parts(&a[1..], b)
            } else {
                frames_span_us(b)
            };
            if tail_span >= required - 1e-6 {
                self.history.pop_front();
            } else {
                break;
            }
        }
    }
}

fn span_of_parts(a: &[PressureFrame], b: &[PressureFrame]) -> f64 {
    let n = a.len() + b.len();
    let first = a.first().or(b.first());
    let last = b.last().or(a.last());
    match (first, last) {
        (Some(f), Some(l)) if n > 1 => {
            (l.timestamp_us() - f.timestamp_us()) as f64 * n as f64 / (n as f64 - 1.0)
        }
        _ => 0.0,
    }
}

/// Runs one frame through both feet' filter chains.
///
/// The smoother's `dt` comes from consecutive timestamps. The frame is also
/// fed to the neutral watchdog; a re-estimated baseline applies from the
/// next frame on.
pub fn chain_step(state: &mut ChainState, frame: &PressureFrame, cfg: &ChainConfig) -> Result<WheelCommand, ChainError> {
    let base = *state.baseline.as_ref().ok_or(ChainError::NotCalibrated)?;
    let t = frame.timestamp_us();
    let dt_s = state.last_t_us.map_or(0.0, |prev| t.saturating_sub(prev) as f64 / 1e6);
    state.last_t_us = Some(t);

    let sample = fore_aft(frame, &base, cfg);
    let run = |foot: &mut FootState, s: f64| {
        let x = deadzone_step(foot, s, cfg);
        let y = smooth_step(foot, x, dt_s, cfg);
        unit_clamp(debounce_step(foot, x, y, t, cfg))
    };
    let left = run(&mut state.left, sample.left());
    let right = run(&mut state.right, sample.right());

    state.push_history(*frame, cfg);
    if let Some(rebased) = neutral_watchdog(state, &sample, t, cfg) {
        state.baseline = Some(rebased);
        state.rebaselines += 1;
    }
    Ok(WheelCommand::new(left, right))
}

/// Emits a fresh baseline once both feet have stayed within `eps_neutral`
/// for `t_neutral_s`, estimated from the trailing calibration window of raw
/// frames. Any excursion restarts the timer, as does a firing.
pub fn neutral_watchdog(state: &mut ChainState, sample: &ForeAftSample, t_us: u64, cfg: &ChainConfig) -> Option<Baseline> {
    let neutral = sample.left().abs() < cfg.eps_neutral && sample.right().abs() < cfg.eps_neutral;
    if !neutral {
        state.neutral_since = None;
        return None;
    }
    let since = *state.neutral_since.get_or_insert(t_us);
    if t_us.saturating_sub(since) < cfg.neutral_us() {
        return None;
    }
    state.neutral_since = None;
    let window: Vec<PressureFrame> = state.history.iter().copied().collect();
    estimate_baseline(&window, cfg).ok()
}
