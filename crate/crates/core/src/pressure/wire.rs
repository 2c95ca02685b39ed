//! Fixed 22-byte binary framing for pressure frames.
//!
//! ```text
//! offset  size  field
//!      0     2  magic 0x47 0x50 ("GP")
//!      2     1  version (0x01)
//!      3     1  flags (0x00)
//!      4     8  timestamp_us, little-endian
//!     12     8  lf, lr, rf, rr as u16 little-endian
//!     20     2  CRC-16/CCITT-FALSE over bytes 0..20, big-endian
//! ```

use thiserror::Error;

use super::frame::{PressureFrame, CHANNEL_MAX};

pub const FRAME_LEN: usize = 22;
pub const MAGIC: [u8; 2] = [0x47, 0x50];
pub const VERSION: u8 = 0x01;

const CRC_OFFSET: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("truncated frame: {len} of {FRAME_LEN} bytes")]
    Truncated { len: usize },
    #[error("bad magic {0:02x?}")]
    BadMagic([u8; 2]),
    #[error("unsupported version {0:#04x}")]
    BadVersion(u8),
    #[error("crc mismatch: computed {computed:#06x}, received {received:#06x}")]
    BadCrc { computed: u16, received: u16 },
    #[error("channel value {0} out of range")]
    ChannelOutOfRange(u16),
}

const CRC_TABLE: [u16; 256] = build_crc_table();

const fn build_crc_table() -> [u16; 256] {
    let mut table = [0u16; 256];
    let mut i = 0;
    while i < 256 {
        let mut crc = (i as u16) << 8;
        let mut bit = 0;
        while bit < 8 {
            crc = if crc & 0x8000 != 0 { (crc << 1) ^ 0x1021 } else { crc << 1 };
            bit += 1;
        }
        table[i] = crc;
        i += 1;
    }
    table
}

/// CRC-16/CCITT-FALSE: poly 0x1021, init 0xFFFF, no reflection, no xor-out.
pub fn crc16_ccitt_false(data: &[u8]) -> u16 {
    data.iter().fold(0xFFFF, |crc: u16, &b| {
        (crc << 8) ^ CRC_TABLE[usize::from((crc >> 8) as u8 ^ b)]
    })
}

pub fn encode_frame(frame: &PressureFrame) -> [u8; FRAME_LEN] {
    let mut out = [0u8; FRAME_LEN];
    out[0..2].copy_from_slice(&MAGIC);
    out[2] = VERSION;
    out[3] = 0x00;
    out[4..12].copy_from_slice(&frame.timestamp_us().to_le_bytes());
    for (i, ch) in frame.channels().iter().enumerate() {
        let at = 12 + 2 * i;
        out[at..at + 2].copy_from_slice(&ch.to_le_bytes());
    }
    let crc = crc16_ccitt_false(&out[..CRC_OFFSET]);
    out[CRC_OFFSET..].copy_from_slice(&crc.to_be_bytes());
    out
}

/// Decodes the first [`FRAME_LEN`] bytes of `bytes`.
pub fn decode_frame(bytes: &[u8]) -> Result<PressureFrame, DecodeError> {
    if bytes.len() < FRAME_LEN {
        return Err(DecodeError::Truncated { len: bytes.len() });
    }
    let b = &bytes[..FRAME_LEN];
    if b[0..2] != MAGIC {
        return Err(DecodeError::BadMagic([b[0], b[1]]));
    }
    if b[2] != VERSION {
        return Err(DecodeError::BadVersion(b[2]));
    }
    let computed = crc16_ccitt_false(&b[..CRC_OFFSET]);
    let received = u16::from_be_bytes([b[20], b[21]]);
    if computed != received {
        return Err(DecodeError::BadCrc { computed, received });
    }
    let ts = u64::from_le_bytes(b[4..12].try_into().expect("8-byte slice"));
    let ch = |i: usize| u16::from_le_bytes([b[12 + 2 * i], b[13 + 2 * i]]);
    let channels = [ch(0), ch(1), ch(2), ch(3)];
    if let Some(&v) = channels.iter().find(|&&v| v > CHANNEL_MAX) {
        return Err(DecodeError::ChannelOutOfRange(v));
    }
    Ok(PressureFrame::new(ts, channels[0], channels[1], channels[2], channels[3])
        .expect("channels checked above"))
}
