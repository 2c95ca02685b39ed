//! Scripted synthetic pressure streams for tests and pilots.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::frame::{PressureFrame, CHANNEL_MAX};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScriptSegment {
    pub duration_s: f64,
    /// Target raw levels `[lf, lr, rf, rr]`.
    pub target: [u16; 4],
    /// Interpolate from the previous segment's target instead of holding.
    pub ramp: bool,
}

impl ScriptSegment {
    pub fn hold(duration_s: f64, target: [u16; 4]) -> Self {
        Self { duration_s, target, ramp: false }
    }

    pub fn ramp(duration_s: f64, target: [u16; 4]) -> Self {
        Self { duration_s, target, ramp: true }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PressureScript {
    pub segments: Vec<ScriptSegment>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SynthError {
    #[error("script has no segments")]
    EmptyScript,
    #[error("segment {index}: duration must be positive and finite")]
    BadDuration { index: usize },
    #[error("segment {index}: target exceeds {CHANNEL_MAX}")]
    BadTarget { index: usize },
    #[error("rate {0} Hz is outside [1, 1e6]")]
    BadRate(f64),
}

impl PressureScript {
    pub fn new(segments: Vec<ScriptSegment>) -> Self {
        Self { segments }
    }

    pub fn then(mut self, segment: ScriptSegment) -> Self {
        self.segments.push(segment);
        self
    }

    pub fn total_duration_s(&self) -> f64 {
        self.segments.iter().map(|s| s.duration_s).sum()
    }

    fn validate(&self) -> Result<(), SynthError> {
        if self.segments.is_empty() {
            return Err(SynthError::EmptyScript);
        }
        for (index, s) in self.segments.iter().enumerate() {
            if !(s.duration_s.is_finite() && s.duration_s > 0.0) {
                return Err(SynthError::BadDuration { index });
            }
            if s.target.iter().any(|&v| v > CHANNEL_MAX) {
                return Err(SynthError::BadTarget { index });
            }
        }
        Ok(())
    }
}

/// Samples `script` uniformly at `rate_hz`, starting at t = 0.
///
/// Produces exactly `floor(total_duration * rate_hz)` frames. A ramp segment
/// interpolates linearly from the previous segment's target (zero for the
/// first segment) and reaches its own target at the segment end.
pub fn synth_stream(script: &PressureScript, rate_hz: f64) -> Result<Vec<PressureFrame>, SynthError> {
    if !(1.0..=1e6).contains(&rate_hz) {
        return Err(SynthError::BadRate(rate_hz));
    }
    script.validate()?;

    // (start, end, segment, previous target)
    let mut spans = Vec::with_capacity(script.segments.len());
    let mut start = 0.0;
    let mut prev = [0u16; 4];
    for seg in &script.segments {
        let end = start + seg.duration_s;
        spans.push((start, end, seg, prev));
        prev = seg.target;
        start = end;
    }

    let count = (script.total_duration_s() * rate_hz + 1e-9).floor() as u64;
    let mut frames = Vec::with_capacity(count as usize);
    let mut idx = 0;
    for k in 0..count {
        let t = k as f64 / rate_hz;
        while idx + 1 < spans.len() && t >= spans[idx].1 - 1e-9 {
            idx += 1;
        }
        let (seg_start, _, seg, from) = spans[idx];
        let levels: [f64; 4] = std::array::from_fn(|c| {
            let to = f64::from(seg.target[c]);
            if seg.ramp {
                let frac = ((t - seg_start) / seg.duration_s).clamp(0.0, 1.0);
                let from = f64::from(from[c]);
                from + (to - from) * frac
            } else {
                to
            }
        });
        let ts = (k as f64 * 1e6 / rate_hz).round() as u64;
        frames.push(PressureFrame::from_levels(ts, levels));
    }
    Ok(frames)
}
