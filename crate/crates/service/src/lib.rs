//! Live session service for the seated-foot locomotion stack.
//!
//! Frames arrive on a TCP byte stream (or the `/ingest-b64` WebSocket bridge),
//! each connection owns one session, and telemetry goes out as JSON lines on
//! the telemetry port and the `/telemetry` WebSocket endpoint.

pub mod protocol;
mod server;
mod session;

pub use protocol::{Command, ControlError, Inbound, LatencySummary, ProtocolError, StreamParser, TelemetryRecord};
pub use server::{ServeError, Server, ServiceConfig};
pub use session::{ControlOutcome, FrameOutcome, Session, DEFAULT_TELEMETRY_RATE_HZ};
