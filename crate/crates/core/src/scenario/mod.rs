//! Task geometries, scripted pilots and the closed-loop trial harness.

mod compare;
mod geometry;
mod pilot;
mod trial;

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::drive::Pose;

pub use compare::{compare, Comparison, ComparisonRow, Stat, TrialRecord};
pub use geometry::{Point, Segment};
pub use pilot::{gip_pilot, lookahead_point, wip_pilot, GestureScheduler, PilotConfig, PressureSynth};
pub use trial::{run_trial, run_trial_traced, Trace, TrialError, TrialResult};

pub const DEFAULT_ARRIVAL_RADIUS: f64 = 0.75;
/// Half side length of the square open-space world, m.
pub const OPEN_SPACE_HALF_EXTENT: f64 = 80.0;

#[derive(Debug, Clone, PartialEq, Error)]
#[error("invalid geometry: {0}")]
pub struct InvalidGeometry(pub String);

/// A reference path from `start` through `waypoints`.
///
/// `waypoints[0]` is the start position and `segments[i]` joins
/// `waypoints[i]` to `waypoints[i + 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub start: Pose,
    pub waypoints: Vec<Point>,
    pub segments: Vec<Segment>,
    pub arrival_radius: f64,
    /// Half-extent of the world, m.
    pub bounds: f64,
    /// No prescribed route: pilots head for the next waypoint directly and
    /// the path only serves cross-track reporting.
    #[serde(default)]
    pub free_route: bool,
}

impl Scenario {
    fn from_segments(name: &str, start: Pose, segments: Vec<Segment>, bounds: f64) -> Self {
        let mut waypoints = vec![Point::new(start.x, start.y)];
        waypoints.extend(segments.iter().map(Segment::end));
        Self {
            name: name.to_string(),
            start,
            waypoints,
            segments,
            arrival_radius: DEFAULT_ARRIVAL_RADIUS,
            bounds,
            free_route: false,
        }
    }

    pub fn with_arrival_radius(mut self, r: f64) -> Self {
        self.arrival_radius = r;
        self
    }

    pub fn path_length(&self) -> f64 {
        self.segments.iter().map(Segment::length).sum()
    }

    pub fn goal(&self) -> Point {
        *self.waypoints.last().expect("scenario has a start waypoint")
    }

    /// Perpendicular distance to the closest point of the reference path.
    pub fn cross_track_error(&self, p: &Point) -> f64 {
        self.segments
            .iter()
            .map(|s| s.project(p).1)
            .fold(f64::INFINITY, f64::min)
    }

    /// Smallest radius on the path, if it has arcs.
    pub fn min_arc_radius(&self) -> Option<f64> {
        self.segments
            .iter()
            .filter_map(|s| match s {
                Segment::Arc { radius, .. } => Some(radius.abs()),
                Segment::Line { .. } => None,
            })
            .reduce(f64::min)
    }
}

/// Straight course of `length_m` along +x.
pub fn make_line(length_m: f64) -> Result<Scenario, InvalidGeometry> {
    if !(length_m.is_finite() && length_m > 0.0) {
        return Err(InvalidGeometry(format!("length must be positive, got {length_m}")));
    }
    let seg = Segment::Line { from: Point::default(), to: Point::new(length_m, 0.0) };
    Ok(Scenario::from_segments("line", Pose::default(), vec![seg], length_m))
}

/// Open-space arrival: start and goal drawn inside the square world with a
/// straight-line separation in `[100, 140]` m, random initial heading.
pub fn make_open_space(seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = OPEN_SPACE_HALF_EXTENT;
    loop {
        let start = Point::new(rng.gen_range(-h..=h), rng.gen_range(-h..=h));
        let goal = Point::new(rng.gen_range(-h..=h), rng.gen_range(-h..=h));
        let d = start.distance(&goal);
        if (100.0..=140.0).contains(&d) {
            let heading = rng.gen_range(-PI..PI);
            let pose = Pose::new(start.x, start.y, heading);
            let seg = Segment::Line { from: start, to: goal };
            let mut sc = Scenario::from_segments("open", pose, vec![seg], h);
            sc.free_route = true;
            return sc;
        }
    }
}

/// Zig-zag polyline: `n_segments` legs of `seg_len_m`, heading alternating
/// between `+turn/2` and `-turn/2` so each corner turns by `turn_deg` with
/// alternating sign.
pub fn make_zigzag(n_segments: usize, seg_len_m: f64, turn_deg: f64) -> Result<Scenario, InvalidGeometry> {
    if n_segments < 2 {
        return Err(InvalidGeometry(format!("need at least 2 segments, got {n_segments}")));
    }
    if !(seg_len_m.is_finite() && seg_len_m > 0.0) {
        return Err(InvalidGeometry(format!("segment length must be positive, got {seg_len_m}")));
    }
    if !(turn_deg > 0.0 && turn_deg < 180.0) {
        return Err(InvalidGeometry(format!("turn must be in (0, 180) degrees, got {turn_deg}")));
    }
    let half = turn_deg.to_radians() / 2.0;
    let mut at = Point::default();
    let mut segments = Vec::with_capacity(n_segments);
    for i in 0..n_segments {
        let h = if i % 2 == 0 { half } else { -half };
        let to = Point::new(at.x + seg_len_m * h.cos(), at.y + seg_len_m * h.sin());
        segments.push(Segment::Line { from: at, to });
        at = to;
    }
    let bounds = seg_len_m * n_segments as f64;
    Ok(Scenario::from_segments("zigzag", Pose::new(0.0, 0.0, half), segments, bounds))
}

pub fn default_zigzag() -> Scenario {
    make_zigzag(8, 15.0, 60.0).expect("default zigzag is valid")
}

pub const DEFAULT_ARC_RADII: [f64; 4] = [6.0, 4.0, 8.0, 5.0];
pub const DEFAULT_ARC_SWEEP_DEG: f64 = 120.0;

/// Tangent-continuous chain of arcs, turning left first and alternating.
pub fn make_arc_course(radii_m: &[f64], sweep_deg: f64, track_w: f64) -> Result<Scenario, InvalidGeometry> {
    if radii_m.is_empty() {
        return Err(InvalidGeometry("no radii given".into()));
    }
    if let Some(r) = radii_m.iter().find(|r| !(r.is_finite() && **r > 0.5 * track_w)) {
        return Err(InvalidGeometry(format!("radius {r} must exceed half the track width ({})", 0.5 * track_w)));
    }
    if !(sweep_deg > 0.0 && sweep_deg < 360.0) {
        return Err(InvalidGeometry(format!("sweep must be in (0, 360) degrees, got {sweep_deg}")));
    }
    let sweep = sweep_deg.to_radians();
    let mut at = Point::default();
    let mut heading = 0.0;
    let mut segments = Vec::with_capacity(radii_m.len());
    for (i, r) in radii_m.iter().enumerate() {
        let signed = if i % 2 == 0 { *r } else { -*r };
        let seg = Segment::arc_from(at, heading, signed, sweep);
        at = seg.end();
        heading = seg.heading_at(seg.length());
        segments.push(seg);
    }
    let bounds = radii_m.iter().map(|r| 2.0 * r).sum();
    Ok(Scenario::from_segments("arc", Pose::default(), segments, bounds))
}

pub fn default_arc_course(track_w: f64) -> Result<Scenario, InvalidGeometry> {
    make_arc_course(&DEFAULT_ARC_RADII, DEFAULT_ARC_SWEEP_DEG, track_w)
}

/// The three task blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    Open,
    Zigzag,
    Arc,
}

impl TaskKind {
    pub fn name(&self) -> &'static str {
        match self {
            TaskKind::Open => "open",
            TaskKind::Zigzag => "zigzag",
            TaskKind::Arc => "arc",
        }
    }

    /// Default geometry for this task; only the open-space layout depends on `seed`.
    pub fn build(&self, seed: u64, track_w: f64) -> Result<Scenario, InvalidGeometry> {
        match self {
            TaskKind::Open => Ok(make_open_space(seed)),
            TaskKind::Zigzag => Ok(default_zigzag()),
            TaskKind::Arc => default_arc_course(track_w),
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TaskKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "open" => Ok(TaskKind::Open),
            "zigzag" => Ok(TaskKind::Zigzag),
            "arc" => Ok(TaskKind::Arc),
            other => Err(format!("unknown task {other:?} (expected open, zigzag or arc)")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn open_space_is_deterministic_and_bounded() {
        assert_eq!(make_open_space(0), make_open_space(0));
        for seed in 0..200 {
            let sc = make_open_space(seed);
            let d = sc.waypoints[0].distance(&sc.goal());
            assert!((100.0..=140.0).contains(&d), "seed {seed}: {d}");
            for p in &sc.waypoints {
                assert!(p.x.abs() <= 80.0 && p.y.abs() <= 80.0);
            }
        }
    }

    #[test]
    fn open_space_seeds_differ() {
        let goals: Vec<Point> = (0..100).map(|s| make_open_space(s).goal()).collect();
        for i in 0..goals.len() {
            for j in i + 1..goals.len() {
                assert_ne!(goals[i], goals[j]);
            }
        }
    }

    #[test]
    fn zigzag_l_shape() {
        let sc = make_zigzag(2, 10.0, 90.0).unwrap();
        assert_eq!(sc.waypoints.len(), 3);
        assert!((sc.path_length() - 20.0).abs() < 1e-12);
        let (a, b, c) = (sc.waypoints[0], sc.waypoints[1], sc.waypoints[2]);
        let dot = (b.x - a.x) * (c.x - b.x) + (b.y - a.y) * (c.y - b.y);
        assert!(dot.abs() < 1e-9);
    }

    #[test]
    fn zigzag_default_alternates() {
        let sc = default_zigzag();
        assert!((sc.path_length() - 120.0).abs() < 1e-9);
        let turns: Vec<f64> = sc
            .segments
            .windows(2)
            .map(|w| crate::drive::normalize_angle(w[1].heading_at(0.0) - w[0].heading_at(0.0)))
            .collect();
        for pair in turns.windows(2) {
            assert!(pair[0] * pair[1] < 0.0);
        }
        for t in turns {
            assert!((t.abs() - 60f64.to_radians()).abs() < 1e-12);
        }
    }

    #[test]
    fn zigzag_rejects_bad_input() {
        assert!(make_zigzag(1, 10.0, 60.0).is_err());
        assert!(make_zigzag(3, 0.0, 60.0).is_err());
        assert!(make_zigzag(3, 10.0, 180.0).is_err());
    }

    #[test]
    fn semicircle_length() {
        let sc = make_arc_course(&[6.0], 180.0, 0.5).unwrap();
        assert!((sc.path_length() - PI * 6.0).abs() < 1e-12);
        let g = sc.goal();
        assert!(g.x.abs() < 1e-12 && (g.y - 12.0).abs() < 1e-12);
    }

    #[test]
    fn arc_course_is_tangent_continuous() {
        let sc = default_arc_course(0.5).unwrap();
        for w in sc.segments.windows(2) {
            let out = w[0].heading_at(w[0].length());
            let inn = w[1].heading_at(0.0);
            assert!(crate::drive::normalize_angle(out - inn).abs() < 1e-9);
            assert!(w[0].end().distance(&w[1].start()) < 1e-9);
        }
        let expected: f64 = DEFAULT_ARC_RADII.iter().map(|r| r * 2.0 * PI / 3.0).sum();
        assert!((sc.path_length() - expected).abs() < 1e-9);
    }

    #[test]
    fn arc_course_rejects_tight_radius() {
        assert!(make_arc_course(&[0.2], 90.0, 0.5).is_err());
        assert!(make_arc_course(&[], 90.0, 0.5).is_err());
        assert!(make_arc_course(&[5.0], 360.0, 0.5).is_err());
    }

    #[test]
    fn task_names_round_trip() {
        for t in [TaskKind::Open, TaskKind::Zigzag, TaskKind::Arc] {
            assert_eq!(t.name().parse::<TaskKind>().unwrap(), t);
        }
    }
}
