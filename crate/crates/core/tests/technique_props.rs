use std::collections::HashSet;

use glide_core::drive::{normalize_angle, DriveParams, Pose};
use glide_core::pressure::PressureFrame;
use glide_core::signal::{Baseline, ChainConfig};
use glide_core::technique::{
    gip_update, wip_apply, wip_detect, GipState, Locomotion, TechniqueEvent, TechniqueKind, WipConfig, WipState,
};
use glide_core::Settings;
use proptest::prelude::*;

const EVENTS: [TechniqueEvent; 3] = [TechniqueEvent::StepForward, TechniqueEvent::TurnLeft, TechniqueEvent::TurnRight];

fn frame(t: u64, c: [u16; 4]) -> PressureFrame {
    PressureFrame::new(t, c[0], c[1], c[2], c[3]).unwrap()
}

/// Every point reachable with at most `max_steps` unit steps along the
/// 12 lattice headings, keyed on rounded coordinates.
fn lattice_points(max_steps: usize, step: f64, headings: usize) -> HashSet<(i64, i64)> {
    let key = |x: f64, y: f64| ((x * 1e6).round() as i64, (y * 1e6).round() as i64);
    let mut frontier = vec![(0.0f64, 0.0f64)];
    let mut seen: HashSet<(i64, i64)> = HashSet::from([key(0.0, 0.0)]);
    for _ in 0..max_steps {
        let mut next = Vec::new();
        for &(x, y) in &frontier {
            for j in 0..headings {
                let a = 2.0 * std::f64::consts::PI * j as f64 / headings as f64;
                let (nx, ny) = (x + step * a.cos(), y + step * a.sin());
                if seen.insert(key(nx, ny)) {
                    next.push((nx, ny));
                }
            }
        }
        frontier = next;
    }
    seen
}

#[test]
fn wip_poses_stay_on_the_lattice() {
    let cfg = WipConfig::default();
    let turn = cfg.snap_turn_deg.to_radians();
    let lattice = lattice_points(6, cfg.snap_distance, 12);
    let mut checked = 0;
    for len in 0..=6u32 {
        for code in 0..3usize.pow(len) {
            let mut pose = Pose::default();
            let mut c = code;
            for _ in 0..len {
                pose = wip_apply(&pose, EVENTS[c % 3], &cfg);
                c /= 3;
            }
            let k = (pose.theta / turn).round();
            assert!(normalize_angle(k * turn - pose.theta).abs() < 1e-9, "theta {}", pose.theta);
            let key = ((pose.x * 1e6).round() as i64, (pose.y * 1e6).round() as i64);
            assert!(lattice.contains(&key), "off-lattice pose {pose:?}");
            checked += 1;
        }
    }
    assert_eq!(checked, (0..=6).map(|n| 3usize.pow(n)).sum::<usize>());
}

#[test]
fn twelve_right_turns_return_to_start() {
    let cfg = WipConfig::default();
    let mut pose = Pose::default();
    for _ in 0..12 {
        pose = wip_apply(&pose, TechniqueEvent::TurnRight, &cfg);
    }
    assert!(normalize_angle(pose.theta).abs() < 1e-9);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn wip_events_respect_refractory_period(
        pulses in prop::collection::vec((0usize..4, 1u64..30, 1u64..30, 150u16..600), 1..30),
    ) {
        let wip = WipConfig::default();
        let chain = ChainConfig::default();
        let base = Baseline::uniform(500.0, 0);
        let mut st = WipState::default();
        let mut t = 0;
        let mut times = Vec::new();
        for (ch, on, off, height) in pulses {
            for k in 0..on + off {
                t += 10_000;
                let mut c = [500u16; 4];
                if k < on {
                    c[ch] += height;
                }
                if wip_detect(&mut st, &frame(t, c), Some(&base), &wip, &chain).unwrap().is_some() {
                    times.push(t);
                }
            }
        }
        for w in times.windows(2) {
            prop_assert!(w[1] - w[0] >= wip.refract_us());
        }
    }

    #[test]
    fn gip_never_teleports(
        frames in prop::collection::vec([0u16..=4095, 0u16..=4095, 0u16..=4095, 0u16..=4095], 1..200),
    ) {
        let chain = ChainConfig::default();
        let drive = DriveParams::default();
        let mut st = GipState::default();
        st.chain.set_baseline(Baseline::uniform(500.0, 0));
        let dt = 0.01;
        let mut prev = st.pose;
        for (k, c) in frames.iter().enumerate() {
            let pose = gip_update(&mut st, &frame((k as u64 + 1) * 10_000, *c), dt, &chain, &drive).unwrap();
            prop_assert!(prev.distance_to(pose.x, pose.y) <= drive.v_max * dt + 1e-12);
            prev = pose;
        }
    }

    #[test]
    fn both_techniques_consume_the_same_stream(
        frames in prop::collection::vec([0u16..=4095, 0u16..=4095, 0u16..=4095, 0u16..=4095], 1..150),
    ) {
        let stream: Vec<PressureFrame> = frames.iter().enumerate().map(|(k, c)| frame(k as u64 * 10_000, *c)).collect();
        let trace = |kind| {
            let mut loco = Locomotion::new(kind, Settings::default(), Pose::default());
            loco.calibrate(Baseline::uniform(500.0, 0), &[]);
            stream.iter().map(|f| loco.push(f).unwrap().t_us).collect::<Vec<_>>()
        };
        let gip = trace(TechniqueKind::Gip);
        prop_assert_eq!(&gip, &trace(TechniqueKind::Wip));
        prop_assert_eq!(gip.len(), stream.len());
    }
}
