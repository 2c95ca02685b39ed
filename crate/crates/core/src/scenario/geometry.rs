use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::drive::normalize_angle;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// One piece of a reference path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Segment {
    Line {
        from: Point,
        to: Point,
    },
    /// Circular arc. `radius` is signed: positive turns left (counter-clockwise).
    Arc {
        center: Point,
        radius: f64,
        /// Polar angle of the start point about `center`.
        start_angle: f64,
        /// Unsigned swept angle, rad.
        sweep: f64,
    },
}

impl Segment {
    /// Arc leaving `from` with heading `heading`.
    pub fn arc_from(from: Point, heading: f64, radius: f64, sweep: f64) -> Self {
        let center = Point::new(from.x - radius * heading.sin(), from.y + radius * heading.cos());
        let start_angle = (from.y - center.y).atan2(from.x - center.x);
        Segment::Arc { center, radius, start_angle, sweep }
    }

    pub fn length(&self) -> f64 {
        match self {
            Segment::Line { from, to } => from.distance(to),
            Segment::Arc { radius, sweep, .. } => radius.abs() * sweep,
        }
    }

    pub fn start(&self) -> Point {
        self.point_at(0.0)
    }

    pub fn end(&self) -> Point {
        self.point_at(self.length())
    }

    /// Point at arc length `along` from the start, clamped to the segment.
    pub fn point_at(&self, along: f64) -> Point {
        let along = along.clamp(0.0, self.length());
        match *self {
            Segment::Line { from, to } => {
                let len = from.distance(&to);
                if len == 0.0 {
                    return from;
                }
                let f = along / len;
                Point::new(from.x + (to.x - from.x) * f, from.y + (to.y - from.y) * f)
            }
            Segment::Arc { center, radius, start_angle, .. } => {
                let phi = start_angle + along / radius;
                let r = radius.abs();
                Point::new(center.x + r * phi.cos(), center.y + r * phi.sin())
            }
        }
    }

    /// Travel direction at arc length `along`.
    pub fn heading_at(&self, along: f64) -> f64 {
        match *self {
            Segment::Line { from, to } => (to.y - from.y).atan2(to.x - from.x),
            Segment::Arc { radius, start_angle, .. } => {
                let along = along.clamp(0.0, self.length());
                let phi = start_angle + along / radius;
                normalize_angle(phi + radius.signum() * PI / 2.0)
            }
        }
    }

    /// Closest point on the segment to `p`: `(arc length along, distance)`.
    pub fn project(&self, p: &Point) -> (f64, f64) {
        match *self {
            Segment::Line { from, to } => {
                let (dx, dy) = (to.x - from.x, to.y - from.y);
                let len2 = dx * dx + dy * dy;
                if len2 == 0.0 {
                    return (0.0, p.distance(&from));
                }
                let f = (((p.x - from.x) * dx + (p.y - from.y) * dy) / len2).clamp(0.0, 1.0);
                let q = Point::new(from.x + dx * f, from.y + dy * f);
                (f * len2.sqrt(), p.distance(&q))
            }
            Segment::Arc { center, radius, start_angle, sweep } => {
                let psi = (p.y - center.y).atan2(p.x - center.x);
                let progress = (radius.signum() * (psi - start_angle)).rem_euclid(TAU);
                if progress <= sweep {
                    let r = radius.abs();
                    (progress * r, (p.distance(&center) - r).abs())
                } else {
                    let (ds, de) = (p.distance(&self.start()), p.distance(&self.end()));
                    if ds <= de {
                        (0.0, ds)
                    } else {
                        (self.length(), de)
                    }
                }
            }
        }
    }
}
