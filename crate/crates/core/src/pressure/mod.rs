//! Pressure-frame data model, wire codec, replay files and synthetic streams.

mod frame;
mod replay;
mod synth;
pub mod wire;

pub use frame::{ChannelOutOfRange, PressureFrame, CHANNEL_MAX};
pub use replay::{read_replay, write_replay, ReplayError};
pub use synth::{synth_stream, PressureScript, ScriptSegment, SynthError};
pub use wire::{decode_frame, encode_frame, DecodeError, FRAME_LEN};
