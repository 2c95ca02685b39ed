use serde::{Deserialize, Serialize};

use super::{ChainConfig, ChainError, ForeAftSample};
use crate::pressure::PressureFrame;

/// Per-channel neutral offsets in raw units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    pub lf: f64,
    pub lr: f64,
    pub rf: f64,
    pub rr: f64,
    pub captured_at: u64,
}

impl Baseline {
    pub fn uniform(level: f64, captured_at: u64) -> Self {
        Self { lf: level, lr: level, rf: level, rr: level, captured_at }
    }

    pub fn offsets(&self) -> [f64; 4] {
        [self.lf, self.lr, self.rf, self.rr]
    }
}

/// Time covered by a uniformly sampled run of frames, counting one sample
/// period per frame: `(last - first) * n / (n - 1)`.
pub fn frames_span_us(frames: &[PressureFrame]) -> f64 {
    match frames {
        [] | [_] => 0.0,
        [first, .., last] => {
            let n = frames.len() as f64;
            (last.timestamp_us() - first.timestamp_us()) as f64 * n / (n - 1.0)
        }
    }
}

/// Mean per-channel level over the trailing `calib_window_s` of `frames`.
///
/// Rejects the window if any channel's population variance exceeds
/// `calib_var_max`.
pub fn estimate_baseline(frames: &[PressureFrame], cfg: &ChainConfig) -> Result<Baseline, ChainError> {
    let required_us = cfg.calib_window_s * 1e6;
    // smallest suffix that covers the window
    let window = (2..=frames.len())
        .map(|k| &frames[frames.len() - k..])
        .find(|w| frames_span_us(w) >= required_us - 1e-6)
        .ok_or_else(|| ChainError::WindowTooShort {
            span_s: frames_span_us(frames) / 1e6,
            required_s: cfg.calib_window_s,
        })?;

    let n = window.len() as f64;
    let mut mean = [0.0f64; 4];
    for f in window {
        for (m, c) in mean.iter_mut().zip(f.channels()) {
            *m += f64::from(c);
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);

    for (channel, &m) in mean.iter().enumerate() {
        let variance = window
            .iter()
            .map(|f| (f64::from(f.channels()[channel]) - m).powi(2))
            .sum::<f64>()
            / n;
        if variance > cfg.calib_var_max {
            return Err(ChainError::UserNotStill { channel, variance, limit: cfg.calib_var_max });
        }
    }

    Ok(Baseline {
        lf: mean[0],
        lr: mean[1],
        rf: mean[2],
        rr: mean[3],
        captured_at: window.last().expect("window has >= 2 frames").timestamp_us(),
    })
}

/// Baseline-subtracted `(fore - rear) / p_span` per foot, clamped to `[-1, 1]`.
pub fn fore_aft(frame: &PressureFrame, base: &Baseline, cfg: &ChainConfig) -> ForeAftSample {
    let side = |fore: u16, b_fore: f64, rear: u16, b_rear: f64| {
        ((f64::from(fore) - b_fore) - (f64::from(rear) - b_rear)) / cfg.p_span
    };
    ForeAftSample::new(
        side(frame.lf(), base.lf, frame.lr(), base.lr),
        side(frame.rf(), base.rf, frame.rr(), base.rr),
    )
}
