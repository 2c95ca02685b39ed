//! Plain CSV replay files: `timestamp_us,lf,lr,rf,rr`, `#` comments.

use std::io::{self, BufRead, Write};

use thiserror::Error;

use super::frame::PressureFrame;

#[derive(Debug, Error)]
pub enum ReplayError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("line {line}: timestamp does not increase")]
    NonMonotonicTimestamp { line: usize },
    #[error("line {line}: channel value out of range")]
    ChannelOutOfRange { line: usize },
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl ReplayError {
    /// 1-based line number the error refers to, if any.
    pub fn line(&self) -> Option<usize> {
        match self {
            Self::Parse { line, .. } | Self::NonMonotonicTimestamp { line } | Self::ChannelOutOfRange { line } => {
                Some(*line)
            }
            Self::Io(_) => None,
        }
    }
}

pub fn read_replay<R: BufRead>(input: R) -> Result<Vec<PressureFrame>, ReplayError> {
    let mut frames: Vec<PressureFrame> = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let text = line.trim();
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = text.split(',').map(str::trim).collect();
        if fields.len() != 5 {
            return Err(ReplayError::Parse {
                line: line_no,
                reason: format!("expected 5 fields, found {}", fields.len()),
            });
        }
        let parse_err = |what: &str, raw: &str| ReplayError::Parse {
            line: line_no,
            reason: format!("invalid {what} {raw:?}"),
        };
        let ts: u64 = fields[0].parse().map_err(|_| parse_err("timestamp", fields[0]))?;
        let mut channels = [0u32; 4];
        for (slot, raw) in channels.iter_mut().zip(&fields[1..]) {
            *slot = raw.parse().map_err(|_| parse_err("channel", raw))?;
        }
        let frame = PressureFrame::from_wide(ts, channels)
            .map_err(|_| ReplayError::ChannelOutOfRange { line: line_no })?;
        if let Some(prev) = frames.last() {
            if frame.timestamp_us() <= prev.timestamp_us() {
                return Err(ReplayError::NonMonotonicTimestamp { line: line_no });
            }
        }
        frames.push(frame);
    }
    Ok(frames)
}

pub fn write_replay<W: Write>(mut out: W, frames: &[PressureFrame]) -> io::Result<()> {
    writeln!(out, "# timestamp_us,lf,lr,rf,rr")?;
    for f in frames {
        writeln!(out, "{},{},{},{},{}", f.timestamp_us(), f.lf(), f.lr(), f.rf(), f.rr())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(text: &str) -> Result<Vec<PressureFrame>, ReplayError> {
        read_replay(text.as_bytes())
    }

    #[test]
    fn single_line() {
        let frames = read("0,500,500,500,500\n").unwrap();
        assert_eq!(frames, vec![PressureFrame::new(0, 500, 500, 500, 500).unwrap()]);
    }

    #[test]
    fn comments_and_blank_lines_are_skipped() {
        let frames = read("# header\n\n0,1,2,3,4\n# mid\n10,1,2,3,4\n").unwrap();
        assert_eq!(frames.len(), 2);
    }

    #[test]
    fn repeated_timestamp() {
        let err = read("10,0,0,0,0\n10,0,0,0,0\n").unwrap_err();
        assert!(matches!(err, ReplayError::NonMonotonicTimestamp { line: 2 }));
    }

    #[test]
    fn channel_out_of_range() {
        let err = read("0,5000,0,0,0\n").unwrap_err();
        assert!(matches!(err, ReplayError::ChannelOutOfRange { line: 1 }));
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        assert_eq!(read("# c\n0,1,2,3\n").unwrap_err().line(), Some(2));
        assert_eq!(read("0,1,2,3,x\n").unwrap_err().line(), Some(1));
        assert_eq!(read("-1,1,2,3,4\n").unwrap_err().line(), Some(1));
    }

    #[test]
    fn write_then_read() {
        let frames: Vec<_> = (0..50u64)
            .map(|k| PressureFrame::new(k * 10_000, k as u16, 4095, 0, 7).unwrap())
            .collect();
        let mut buf = Vec::new();
        write_replay(&mut buf, &frames).unwrap();
        assert_eq!(read_replay(buf.as_slice()).unwrap(), frames);
    }
}
