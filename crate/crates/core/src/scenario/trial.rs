use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::pilot::{gip_pilot, wip_pilot, GestureScheduler, PressureSynth};
use super::{InvalidGeometry, Point, Scenario};
use crate::config::{ConfigError, Settings};
use crate::drive::Pose;
use crate::pressure::PressureFrame;
use crate::signal::ChainError;
use crate::technique::{Locomotion, LocomotionError, TechniqueKind};

pub const MIN_RATE_HZ: f64 = 50.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrialError {
    #[error("rate {0} Hz is below the {MIN_RATE_HZ} Hz minimum")]
    BadRate(f64),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("calibration failed: {0}")]
    Calibration(ChainError),
    #[error(transparent)]
    Locomotion(#[from] LocomotionError),
    #[error(transparent)]
    Geometry(#[from] InvalidGeometry),
}

/// Metrics for one closed-loop trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    /// Time from the end of calibration to the last waypoint, or to the timeout.
    pub completion_s: f64,
    pub path_len_m: f64,
    pub mean_xte_m: f64,
    pub max_xte_m: f64,
    /// Every frame fed to the technique, calibration included.
    pub frames_processed: u64,
    pub completed: bool,
}

/// The raw frames a trial generated and the pose after each of them.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub frames: Vec<PressureFrame>,
    pub poses: Vec<Pose>,
}

pub fn run_trial(
    sc: &Scenario,
    technique: TechniqueKind,
    settings: &Settings,
    rate_hz: f64,
    seed: u64,
) -> Result<TrialResult, TrialError> {
    run(sc, technique, settings, rate_hz, seed, None)
}

pub fn run_trial_traced(
    sc: &Scenario,
    technique: TechniqueKind,
    settings: &Settings,
    rate_hz: f64,
    seed: u64,
) -> Result<(TrialResult, Trace), TrialError> {
    let mut trace = Trace::default();
    let result = run(sc, technique, settings, rate_hz, seed, Some(&mut trace))?;
    Ok((result, trace))
}

fn run(
    sc: &Scenario,
    technique: TechniqueKind,
    settings: &Settings,
    rate_hz: f64,
    seed: u64,
    mut trace: Option<&mut Trace>,
) -> Result<TrialResult, TrialError> {
    if !(rate_hz.is_finite() && rate_hz >= MIN_RATE_HZ) {
        return Err(TrialError::BadRate(rate_hz));
    }
    settings.validate()?;
    let pc = settings.pilot;
    let mut synth = PressureSynth::new(&pc, ChaCha8Rng::seed_from_u64(seed));
    let mut gestures = GestureScheduler::new(&pc, &settings.wip, &settings.chain);
    let mut loco = Locomotion::new(technique, *settings, sc.start);
    let time_of = |k: u64| (k as f64 * 1e6 / rate_hz).round() as u64;

    let mut frames_processed = 0u64;
    let feed = |loco: &mut Locomotion, frame: PressureFrame, trace: &mut Option<&mut Trace>| {
        let tick = loco.push(&frame);
        if let (Ok(tick), Some(tr)) = (&tick, trace.as_deref_mut()) {
            tr.frames.push(frame);
            tr.poses.push(tick.pose);
        }
        tick
    };

    // still posture until the calibration window closes
    loco.request_calibration(settings.chain.calib_window_s);
    let mut k = 0u64;
    let t_start = loop {
        let t = time_of(k);
        let frame = synth.frame(t, [0.0; 4]);
        let tick = feed(&mut loco, frame, &mut trace)?;
        frames_processed += 1;
        k += 1;
        if let Some(outcome) = tick.calibration {
            outcome.map_err(TrialError::Calibration)?;
            break t;
        }
    };

    let timeout_us = (pc.timeout_s * 1e6).round() as u64;
    let mut next_wp = 1;
    let mut pose = loco.pose();
    let mut path_len = 0.0;
    let (mut xte_sum, mut xte_max, mut xte_n) = (0.0, 0.0f64, 0u64);
    let mut elapsed_us;
    loop {
        let t = time_of(k);
        k += 1;
        elapsed_us = t - t_start;
        let frame = match technique {
            TechniqueKind::Gip => {
                let cmd = gip_pilot(&pose, sc, next_wp, &pc, &settings.drive);
                synth.command_frame(t, cmd, &settings.chain)
            }
            TechniqueKind::Wip => {
                let last_turn = gestures.last_turn();
                let offsets = gestures.offsets(t, || wip_pilot(&pose, sc, next_wp, last_turn, &pc, &settings.wip));
                synth.frame(t, offsets)
            }
        };
        let tick = feed(&mut loco, frame, &mut trace)?;
        frames_processed += 1;
        gestures.observe(tick.event);

        path_len += pose.distance_to(tick.pose.x, tick.pose.y);
        pose = tick.pose;
        let here = Point::new(pose.x, pose.y);
        let xte = sc.cross_track_error(&here);
        xte_sum += xte;
        xte_max = xte_max.max(xte);
        xte_n += 1;

        while next_wp < sc.waypoints.len() && here.distance(&sc.waypoints[next_wp]) <= sc.arrival_radius {
            next_wp += 1;
        }
        let done = next_wp >= sc.waypoints.len();
        if done || elapsed_us >= timeout_us {
            return Ok(TrialResult {
                completion_s: elapsed_us as f64 / 1e6,
                path_len_m: path_len,
                mean_xte_m: xte_sum / xte_n as f64,
                max_xte_m: xte_max,
                frames_processed,
                completed: done,
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{make_line, make_zigzag};

    #[test]
    fn straight_line_gip_completes_near_kinematic_minimum() {
        let s = Settings::default();
        let r = run_trial(&make_line(10.0).unwrap(), TechniqueKind::Gip, &s, 100.0, 0).unwrap();
        let ideal = 10.0 / (s.drive.v_max * s.pilot.cruise_frac);
        assert!(r.completed);
        assert!(r.completion_s >= ideal - 1.0 && r.completion_s <= ideal + 3.0, "{r:?}");
        assert!(r.mean_xte_m <= r.max_xte_m);
    }

    #[test]
    fn same_seed_same_result() {
        let sc = make_zigzag(3, 6.0, 60.0).unwrap();
        let s = Settings::default();
        for tech in [TechniqueKind::Gip, TechniqueKind::Wip] {
            let a = run_trial(&sc, tech, &s, 100.0, 9).unwrap();
            let b = run_trial(&sc, tech, &s, 100.0, 9).unwrap();
            assert_eq!(a, b);
            assert!(a.completed, "{tech}: {a:?}");
        }
    }

    #[test]
    fn huge_arrival_radius_finishes_immediately() {
        let sc = make_line(10.0).unwrap().with_arrival_radius(50.0);
        let r = run_trial(&sc, TechniqueKind::Gip, &Settings::default(), 100.0, 0).unwrap();
        assert!(r.completed);
        assert!(r.completion_s > 0.0 && r.completion_s <= 0.011);
    }

    #[test]
    fn timeout_reports_incomplete() {
        let mut s = Settings::default();
        s.pilot.timeout_s = 1.0;
        let r = run_trial(&make_line(30.0).unwrap(), TechniqueKind::Wip, &s, 100.0, 0).unwrap();
        assert!(!r.completed);
        assert!((r.completion_s - 1.0).abs() < 1e-9);
    }

    #[test]
    fn low_rate_rejected() {
        let r = run_trial(&make_line(10.0).unwrap(), TechniqueKind::Gip, &Settings::default(), 40.0, 0);
        assert_eq!(r, Err(TrialError::BadRate(40.0)));
    }

    #[test]
    fn trace_covers_every_frame() {
        let (r, tr) = run_trial_traced(&make_line(5.0).unwrap(), TechniqueKind::Gip, &Settings::default(), 100.0, 3).unwrap();
        assert_eq!(tr.frames.len() as u64, r.frames_processed);
        assert_eq!(tr.poses.len(), tr.frames.len());
    }
}
