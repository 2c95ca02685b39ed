//! Wire-level pieces of the service: the inbound byte-stream parser, control
//! commands and the telemetry record.

use std::fmt;

use glide_core::drive::{Pose, Twist};
use glide_core::pressure::{decode_frame, DecodeError, PressureFrame, FRAME_LEN};
use glide_core::technique::LocomotionError;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Control lines on the ingest stream start with this byte.
pub const CONTROL_PREFIX: u8 = b'!';
pub const MAX_LINE: usize = 512;

/// One published sample of a session's state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelemetryRecord {
    pub t_us: u64,
    pub pose: Pose,
    pub twist: Twist,
    #[serde(rename = "u_L")]
    pub u_left: f64,
    #[serde(rename = "u_R")]
    pub u_right: f64,
    pub calibrated: bool,
    /// Time from receipt of the frame's bytes to building this record.
    pub latency_us: u64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProtocolError {
    #[error("bad frame: {0}")]
    Frame(#[from] DecodeError),
    #[error("out of order: {0}")]
    Order(#[from] LocomotionError),
    #[error("unexpected byte {0:#04x}")]
    UnexpectedByte(u8),
    #[error("control line longer than {MAX_LINE} bytes")]
    LineTooLong,
    #[error("control line is not UTF-8")]
    NotUtf8,
    #[error("bad base64 payload")]
    Base64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Inbound {
    Frame(PressureFrame),
    /// Control line with the prefix and line ending removed.
    Line(String),
}

/// Splits an ingest byte stream into frames and `!`-prefixed control lines.
#[derive(Debug, Default)]
pub struct StreamParser {
    buf: Vec<u8>,
}

impl StreamParser {
    pub fn push(&mut self, bytes: &[u8]) {
        self.buf.extend_from_slice(bytes);
    }

    /// Next complete item, or `None` when more bytes are needed.
    pub fn next_item(&mut self) -> Result<Option<Inbound>, ProtocolError> {
        let Some(&first) = self.buf.first() else {
            return Ok(None);
        };
        if first == CONTROL_PREFIX {
            let Some(end) = self.buf.iter().position(|&b| b == b'\n') else {
                if self.buf.len() > MAX_LINE {
                    return Err(ProtocolError::LineTooLong);
                }
                return Ok(None);
            };
            if end > MAX_LINE {
                return Err(ProtocolError::LineTooLong);
            }
            let line: Vec<u8> = self.buf.drain(..=end).collect();
            let text = std::str::from_utf8(&line[1..]).map_err(|_| ProtocolError::NotUtf8)?;
            return Ok(Some(Inbound::Line(text.trim_end_matches(['\r', '\n']).to_string())));
        }
        if first != glide_core::pressure::wire::MAGIC[0] {
            return Err(ProtocolError::UnexpectedByte(first));
        }
        if self.buf.len() < FRAME_LEN {
            return Ok(None);
        }
        let frame = decode_frame(&self.buf[..FRAME_LEN])?;
        self.buf.drain(..FRAME_LEN);
        Ok(Some(Inbound::Frame(frame)))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Command {
    Ping,
    Calibrate(f64),
    Set { key: String, value: String },
    Scenario { name: String, seed: u64 },
    Xte,
    Latency(usize),
    Stats,
}

/// Control failures, rendered as `err <code> [detail]`.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ControlError {
    #[error("unknown-command")]
    UnknownCommand,
    #[error("bad-value {0}")]
    BadValue(String),
    #[error("not-enough-data")]
    NotEnoughData,
    #[error("user-not-still")]
    UserNotStill,
    #[error("window-too-short")]
    WindowTooShort,
    #[error("calibration-superseded")]
    Superseded,
    #[error("no-scenario")]
    NoScenario,
}

impl ControlError {
    pub fn reply(&self) -> String {
        format!("err {self}")
    }
}

impl std::str::FromStr for Command {
    type Err = ControlError;

    fn from_str(line: &str) -> Result<Self, Self::Err> {
        let mut parts = line.split_whitespace();
        let name = parts.next().ok_or(ControlError::UnknownCommand)?;
        let args: Vec<&str> = parts.collect();
        let bad = |what: &str| ControlError::BadValue(what.to_string());
        let cmd = match (name, args.as_slice()) {
            ("ping", []) => Command::Ping,
            ("calibrate", [w]) => {
                let w: f64 = w.parse().map_err(|_| bad("window"))?;
                if !(w.is_finite() && w > 0.0) {
                    return Err(bad("window"));
                }
                Command::Calibrate(w)
            }
            ("set", [k, v]) => Command::Set { key: k.to_string(), value: v.to_string() },
            ("scenario", [n]) => Command::Scenario { name: n.to_string(), seed: 0 },
            ("scenario", [n, s]) => Command::Scenario { name: n.to_string(), seed: s.parse().map_err(|_| bad("seed"))? },
            ("xte", []) => Command::Xte,
            ("latency", [n]) => Command::Latency(n.parse().map_err(|_| bad("count"))?),
            ("stats", []) => Command::Stats,
            ("ping" | "calibrate" | "set" | "scenario" | "xte" | "latency" | "stats", _) => return Err(bad("arguments")),
            _ => return Err(ControlError::UnknownCommand),
        };
        Ok(cmd)
    }
}

/// p50/p95/max over a latency window, nearest-rank percentiles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LatencySummary {
    pub n: usize,
    pub p50_us: u64,
    pub p95_us: u64,
    pub max_us: u64,
}

impl LatencySummary {
    pub fn of(samples: &[u64]) -> Option<Self> {
        if samples.is_empty() {
            return None;
        }
        let mut sorted = samples.to_vec();
        sorted.sort_unstable();
        let rank = |p: f64| sorted[((p * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1];
        Some(Self { n: sorted.len(), p50_us: rank(0.50), p95_us: rank(0.95), max_us: *sorted.last().unwrap() })
    }
}

impl fmt::Display for LatencySummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n={} p50={} p95={} max={}", self.n, self.p50_us, self.p95_us, self.max_us)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use glide_core::pressure::encode_frame;

    fn frame(t: u64) -> PressureFrame {
        PressureFrame::new(t, 1, 2, 3, 4).unwrap()
    }

    #[test]
    fn parser_splits_frames_and_lines_across_chunks() {
        let mut bytes = encode_frame(&frame(1)).to_vec();
        bytes.extend_from_slice(b"!ping\r\n");
        bytes.extend_from_slice(&encode_frame(&frame(2)));
        let mut p = StreamParser::default();
        let mut items = Vec::new();
        for chunk in bytes.chunks(5) {
            p.push(chunk);
            while let Some(item) = p.next_item().unwrap() {
                items.push(item);
            }
        }
        assert_eq!(items, vec![Inbound::Frame(frame(1)), Inbound::Line("ping".into()), Inbound::Frame(frame(2))]);
    }

    #[test]
    fn parser_rejects_garbage_and_corruption() {
        let mut p = StreamParser::default();
        p.push(b"hello");
        assert_eq!(p.next_item(), Err(ProtocolError::UnexpectedByte(b'h')));

        let mut bad = encode_frame(&frame(1));
        bad[9] ^= 0x10;
        let mut p = StreamParser::default();
        p.push(&bad);
        assert!(matches!(p.next_item(), Err(ProtocolError::Frame(DecodeError::BadCrc { .. }))));

        let mut p = StreamParser::default();
        p.push(&[b'!'; MAX_LINE + 2]);
        assert_eq!(p.next_item(), Err(ProtocolError::LineTooLong));
    }

    #[test]
    fn command_parsing() {
        assert_eq!("ping".parse(), Ok(Command::Ping));
        assert_eq!("calibrate 1.0".parse(), Ok(Command::Calibrate(1.0)));
        assert_eq!(
            "set chain.tau_s 0.12".parse(),
            Ok(Command::Set { key: "chain.tau_s".into(), value: "0.12".into() })
        );
        assert_eq!("scenario arc".parse(), Ok(Command::Scenario { name: "arc".into(), seed: 0 }));
        assert_eq!("jump".parse::<Command>(), Err(ControlError::UnknownCommand));
        assert!(matches!("calibrate -1".parse::<Command>(), Err(ControlError::BadValue(_))));
        assert!(matches!("ping extra".parse::<Command>(), Err(ControlError::BadValue(_))));
        assert_eq!(ControlError::UserNotStill.reply(), "err user-not-still");
    }

    #[test]
    fn nearest_rank_percentiles() {
        let xs: Vec<u64> = (1..=100).collect();
        let s = LatencySummary::of(&xs).unwrap();
        assert_eq!((s.p50_us, s.p95_us, s.max_us), (50, 95, 100));
        let flat = LatencySummary::of(&[7; 10]).unwrap();
        assert_eq!(flat.p50_us, flat.p95_us);
        assert_eq!(LatencySummary::of(&[]), None);
    }

    #[test]
    fn record_field_names() {
        let rec = TelemetryRecord {
            t_us: 5,
            pose: Pose::new(1.0, 2.0, 0.5),
            twist: Twist { v: 1.5, omega: -0.25 },
            u_left: 0.1,
            u_right: 0.2,
            calibrated: true,
            latency_us: 12,
        };
        let v: serde_json::Value = serde_json::to_value(&rec).unwrap();
        let mut keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
        keys.sort_unstable();
        assert_eq!(keys, ["calibrated", "latency_us", "pose", "t_us", "twist", "u_L", "u_R"]);
        assert_eq!(v["pose"]["theta"], 0.5);
        assert_eq!(v["twist"]["omega"], -0.25);
    }
}
