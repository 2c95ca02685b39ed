use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest raw value a pressure channel may carry (12-bit ADC).
pub const CHANNEL_MAX: u16 = 4095;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("channel value {value} exceeds {CHANNEL_MAX}")]
pub struct ChannelOutOfRange {
    pub value: u32,
}

/// One timestamped sample of the four aggregated plantar-pressure channels.
///
/// Channels are left-fore, left-rear, right-fore, right-rear. Construction
/// goes through [`PressureFrame::new`], so every value of this type holds
/// channels in `[0, CHANNEL_MAX]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawFrame", into = "RawFrame")]
pub struct PressureFrame {
    timestamp_us: u64,
    lf: u16,
    lr: u16,
    rf: u16,
    rr: u16,
}

#[derive(Serialize, Deserialize)]
struct RawFrame {
    timestamp_us: u64,
    lf: u32,
    lr: u32,
    rf: u32,
    rr: u32,
}

impl TryFrom<RawFrame> for PressureFrame {
    type Error = ChannelOutOfRange;

    fn try_from(raw: RawFrame) -> Result<Self, Self::Error> {
        Self::from_wide(raw.timestamp_us, [raw.lf, raw.lr, raw.rf, raw.rr])
    }
}

impl From<PressureFrame> for RawFrame {
    fn from(f: PressureFrame) -> Self {
        RawFrame {
            timestamp_us: f.timestamp_us,
            lf: f.lf.into(),
            lr: f.lr.into(),
            rf: f.rf.into(),
            rr: f.rr.into(),
        }
    }
}

impl PressureFrame {
    pub fn new(timestamp_us: u64, lf: u16, lr: u16, rf: u16, rr: u16) -> Result<Self, ChannelOutOfRange> {
        Self::from_wide(timestamp_us, [lf.into(), lr.into(), rf.into(), rr.into()])
    }

    /// Builds a frame from wider integers, rejecting anything above [`CHANNEL_MAX`].
    pub fn from_wide(timestamp_us: u64, channels: [u32; 4]) -> Result<Self, ChannelOutOfRange> {
        if let Some(&value) = channels.iter().find(|&&v| v > u32::from(CHANNEL_MAX)) {
            return Err(ChannelOutOfRange { value });
        }
        Ok(Self {
            timestamp_us,
            lf: channels[0] as u16,
            lr: channels[1] as u16,
            rf: channels[2] as u16,
            rr: channels[3] as u16,
        })
    }

    /// Rounds and clamps real-valued channel levels into a valid frame.
    pub fn from_levels(timestamp_us: u64, levels: [f64; 4]) -> Self {
        let q = |v: f64| v.round().clamp(0.0, f64::from(CHANNEL_MAX)) as u16;
        Self {
            timestamp_us,
            lf: q(levels[0]),
            lr: q(levels[1]),
            rf: q(levels[2]),
            rr: q(levels[3]),
        }
    }

    pub fn timestamp_us(&self) -> u64 {
        self.timestamp_us
    }

    pub fn lf(&self) -> u16 {
        self.lf
    }

    pub fn lr(&self) -> u16 {
        self.lr
    }

    pub fn rf(&self) -> u16 {
        self.rf
    }

    pub fn rr(&self) -> u16 {
        self.rr
    }

    /// Channels in wire order: `[lf, lr, rf, rr]`.
    pub fn channels(&self) -> [u16; 4] {
        [self.lf, self.lr, self.rf, self.rr]
    }

    /// Same frame with the left and right feet exchanged.
    pub fn mirrored(&self) -> Self {
        Self {
            timestamp_us: self.timestamp_us,
            lf: self.rf,
            lr: self.rr,
            rf: self.lf,
            rr: self.lr,
        }
    }

    pub fn with_timestamp(mut self, timestamp_us: u64) -> Self {
        self.timestamp_us = timestamp_us;
        self
    }
}
