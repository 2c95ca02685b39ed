use std::collections::VecDeque;
use std::time::Instant;

use glide_core::drive::Pose;
use glide_core::pressure::PressureFrame;
use glide_core::scenario::{Point, Scenario, TaskKind};
use glide_core::signal::ChainError;
use glide_core::technique::{Locomotion, LocomotionError, TechniqueKind};
use glide_core::Settings;

use crate::protocol::{Command, ControlError, LatencySummary, TelemetryRecord};

/// Latency samples kept for `latency <n>` queries.
const LATENCY_HISTORY: usize = 1 << 16;

pub const DEFAULT_TELEMETRY_RATE_HZ: f64 = 60.0;

#[derive(Debug, Clone, PartialEq)]
pub enum ControlOutcome {
    Reply(String),
    /// The answer arrives with the frame that closes the calibration window.
    Deferred,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrameOutcome {
    pub telemetry: Option<TelemetryRecord>,
    /// Reply to a deferred `calibrate`.
    pub calibration: Option<String>,
}

#[derive(Debug, Clone, Copy, Default)]
struct XteStats {
    sum: f64,
    max: f64,
    n: u64,
}

/// One live session: a technique driver fed strictly in arrival order, plus
/// telemetry pacing and the bookkeeping behind control queries.
#[derive(Debug)]
pub struct Session {
    id: u64,
    loco: Locomotion,
    period_us: u64,
    next_due: Option<u64>,
    latencies: VecDeque<u64>,
    frames: u64,
    published: u64,
    overlay: Option<Scenario>,
    xte: XteStats,
}

impl Session {
    pub fn new(id: u64, technique: TechniqueKind, settings: Settings, telemetry_rate_hz: f64) -> Self {
        Self {
            id,
            loco: Locomotion::new(technique, settings, Pose::default()),
            period_us: period_us(telemetry_rate_hz),
            next_due: None,
            latencies: VecDeque::new(),
            frames: 0,
            published: 0,
            overlay: None,
            xte: XteStats::default(),
        }
    }

    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn locomotion(&self) -> &Locomotion {
        &self.loco
    }

    pub fn frames(&self) -> u64 {
        self.frames
    }

    pub fn published(&self) -> u64 {
        self.published
    }

    /// Runs one frame. Telemetry is due on the first frame and then whenever
    /// frame time reaches the next publish slot.
    pub fn ingest(&mut self, frame: &PressureFrame, received: Instant) -> Result<FrameOutcome, LocomotionError> {
        let tick = self.loco.push(frame)?;
        self.frames += 1;

        if let (Some(sc), true) = (&self.overlay, tick.calibrated) {
            let e = sc.cross_track_error(&Point::new(tick.pose.x, tick.pose.y));
            self.xte.sum += e;
            self.xte.max = self.xte.max.max(e);
            self.xte.n += 1;
        }

        let calibration = tick.calibration.map(|r| match r {
            Ok(_) => "ok calibrate".to_string(),
            Err(ChainError::UserNotStill { .. }) => ControlError::UserNotStill.reply(),
            Err(ChainError::WindowTooShort { .. }) => ControlError::WindowTooShort.reply(),
            Err(e) => ControlError::BadValue(e.to_string()).reply(),
        });

        let t = tick.t_us;
        let due = self.next_due.is_none_or(|d| t >= d);
        let telemetry = due.then(|| {
            let mut next = self.next_due.unwrap_or(t);
            while next <= t {
                next += self.period_us;
            }
            self.next_due = Some(next);
            let latency_us = received.elapsed().as_micros() as u64;
            if self.latencies.len() == LATENCY_HISTORY {
                self.latencies.pop_front();
            }
            self.latencies.push_back(latency_us);
            self.published += 1;
            TelemetryRecord {
                t_us: t,
                pose: tick.pose,
                twist: tick.twist,
                u_left: tick.command.left(),
                u_right: tick.command.right(),
                calibrated: tick.calibrated,
                latency_us,
            }
        });
        Ok(FrameOutcome { telemetry, calibration })
    }

    pub fn control(&mut self, line: &str) -> ControlOutcome {
        match line.parse::<Command>().and_then(|cmd| self.apply(cmd)) {
            Ok(outcome) => outcome,
            Err(e) => ControlOutcome::Reply(e.reply()),
        }
    }

    fn apply(&mut self, cmd: Command) -> Result<ControlOutcome, ControlError> {
        let reply = match cmd {
            Command::Ping => "ok ping".to_string(),
            Command::Calibrate(window_s) => {
                self.loco.request_calibration(window_s);
                return Ok(ControlOutcome::Deferred);
            }
            Command::Set { key, value } if key == "telemetry_rate_hz" => {
                let rate: f64 = value.parse().map_err(|_| ControlError::BadValue(key.clone()))?;
                if !(rate.is_finite() && rate > 0.0) {
                    return Err(ControlError::BadValue(key));
                }
                self.period_us = period_us(rate);
                self.next_due = None;
                format!("ok set {key} {value}")
            }
            Command::Set { key, value } => {
                self.loco.set(&key, &value).map_err(|_| ControlError::BadValue(key.clone()))?;
                format!("ok set {key} {value}")
            }
            Command::Scenario { name, seed } => {
                let task: TaskKind = name.parse().map_err(|_| ControlError::BadValue(name.clone()))?;
                let settings = *self.loco.settings();
                let sc = task
                    .build(seed, settings.drive.track_w)
                    .map_err(|e| ControlError::BadValue(e.to_string()))?;
                // restart at the course start; a held baseline carries over
                let baseline = self.loco.baseline().copied();
                self.loco = Locomotion::new(self.loco.kind(), settings, sc.start);
                if let Some(b) = baseline {
                    self.loco.calibrate(b, &[]);
                }
                self.next_due = None;
                self.xte = XteStats::default();
                let reply = format!("ok scenario {name} {:.3}", sc.path_length());
                self.overlay = Some(sc);
                reply
            }
            Command::Xte => {
                if self.overlay.is_none() {
                    return Err(ControlError::NoScenario);
                }
                if self.xte.n == 0 {
                    return Err(ControlError::NotEnoughData);
                }
                format!("ok xte mean={:.4} max={:.4} n={}", self.xte.sum / self.xte.n as f64, self.xte.max, self.xte.n)
            }
            Command::Latency(n) => format!("ok latency {}", self.latency_summary(n)?),
            Command::Stats => format!("ok stats frames={} published={}", self.frames, self.published),
        };
        Ok(ControlOutcome::Reply(reply))
    }

    /// Summary over the last `n` published records.
    pub fn latency_summary(&self, n: usize) -> Result<LatencySummary, ControlError> {
        if n == 0 || n > self.latencies.len() {
            return Err(ControlError::NotEnoughData);
        }
        let recent: Vec<u64> = self.latencies.iter().skip(self.latencies.len() - n).copied().collect();
        LatencySummary::of(&recent).ok_or(ControlError::NotEnoughData)
    }
}

fn period_us(rate_hz: f64) -> u64 {
    ((1e6 / rate_hz).round() as u64).max(1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use glide_core::pressure::{synth_stream, PressureScript, ScriptSegment};

    fn session() -> Session {
        Session::new(1, TechniqueKind::Gip, Settings::default(), 60.0)
    }

    fn run(s: &mut Session, frames: &[PressureFrame]) -> Vec<FrameOutcome> {
        frames.iter().map(|f| s.ingest(f, Instant::now()).unwrap()).collect()
    }

    fn neutral(seconds: f64, offset_us: u64) -> Vec<PressureFrame> {
        let script = PressureScript::new(vec![ScriptSegment::hold(seconds, [500; 4])]);
        synth_stream(&script, 100.0)
            .unwrap()
            .into_iter()
            .map(|f| f.with_timestamp(f.timestamp_us() + offset_us))
            .collect()
    }

    #[test]
    fn calibrate_flips_flag_and_replies_once() {
        let mut s = session();
        assert_eq!(s.control("calibrate 1.0"), ControlOutcome::Deferred);
        let out = run(&mut s, &neutral(1.5, 0));
        let replies: Vec<&String> = out.iter().filter_map(|o| o.calibration.as_ref()).collect();
        assert_eq!(replies, ["ok calibrate"]);
        let last = out.iter().rev().find_map(|o| o.telemetry.as_ref()).unwrap();
        assert!(last.calibrated);
    }

    #[test]
    fn calibrate_while_moving_is_refused() {
        let mut s = session();
        s.control("calibrate 1.0");
        let script = PressureScript::new(vec![ScriptSegment::ramp(1.0, [1200, 0, 1200, 0])]);
        let out = run(&mut s, &synth_stream(&script, 100.0).unwrap());
        assert_eq!(out.last().unwrap().calibration.as_deref(), Some("err user-not-still"));
        assert!(!s.locomotion().is_calibrated());
    }

    #[test]
    fn telemetry_follows_frame_clock() {
        let mut s = session();
        let out = run(&mut s, &neutral(1.0, 0));
        let ticks: Vec<u64> = out.iter().filter_map(|o| o.telemetry.as_ref().map(|r| r.t_us)).collect();
        // 60 Hz over 100 Hz frames: the first frame at or after each 16 667 us slot,
        // so the 50 000 frame misses the 50 001 slot
        assert_eq!(&ticks[..4], &[0, 20_000, 40_000, 60_000]);
        assert_eq!(ticks.len(), 60);
        assert_eq!(s.published(), 60);
    }

    #[test]
    fn control_replies() {
        let mut s = session();
        assert_eq!(s.control("ping"), ControlOutcome::Reply("ok ping".into()));
        assert_eq!(s.control("fly away"), ControlOutcome::Reply("err unknown-command".into()));
        assert_eq!(s.control("set chain.tau_s 0.12"), ControlOutcome::Reply("ok set chain.tau_s 0.12".into()));
        assert_eq!(s.locomotion().settings().chain.tau_s, 0.12);
        assert!(matches!(s.control("set chain.tau_s -1"), ControlOutcome::Reply(r) if r.starts_with("err bad-value")));
        assert_eq!(s.control("latency 5"), ControlOutcome::Reply("err not-enough-data".into()));
        assert_eq!(s.control("xte"), ControlOutcome::Reply("err no-scenario".into()));
        assert_eq!(s.control("stats"), ControlOutcome::Reply("ok stats frames=0 published=0".into()));
    }

    #[test]
    fn scenario_places_avatar_at_start() {
        let mut s = session();
        let ControlOutcome::Reply(r) = s.control("scenario zigzag") else { panic!() };
        assert!(r.starts_with("ok scenario zigzag 120.000"), "{r}");
        assert!((s.locomotion().pose().theta - 30f64.to_radians()).abs() < 1e-12);
    }

    #[test]
    fn latency_window_and_slower_smoothing() {
        let mut s = session();
        s.control("calibrate 1.0");
        run(&mut s, &neutral(1.0, 0));
        let press: Vec<PressureFrame> = (1..=30u64)
            .map(|k| PressureFrame::new(990_000 + k * 10_000, 800, 200, 800, 200).unwrap())
            .collect();
        let mut fast = Session::new(2, TechniqueKind::Gip, Settings::default(), 100.0);
        let mut slow = Session::new(3, TechniqueKind::Gip, Settings::default(), 100.0);
        for sess in [&mut fast, &mut slow] {
            sess.control("calibrate 1.0");
            run(sess, &neutral(1.0, 0));
        }
        slow.control("set chain.tau_s 0.2");
        let a = run(&mut fast, &press);
        let b = run(&mut slow, &press);
        let u = |o: &FrameOutcome| o.telemetry.as_ref().unwrap().u_left;
        assert!(u(&a[10]) > u(&b[10]) && u(&b[10]) > 0.0);
        assert!(matches!(fast.control("latency 10"), ControlOutcome::Reply(r) if r.starts_with("ok latency n=10 p50=")));
    }
}
